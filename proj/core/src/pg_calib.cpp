#include "endonoise/pg_calib.hpp"

#include "endonoise/error.hpp"
#include "endonoise/frame_io.hpp"
#include "endonoise/noise_synth.hpp"
#include "endonoise/pbn.hpp"
#include "endonoise/random.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

namespace endonoise {

namespace fs = std::filesystem;

void PgParams::set(double analog_gain, PgEntry entry)
{
    if (!(analog_gain >= 1.0))
        fail(ErrorKind::Argument, "analog gain must be >= 1");
    if (!(entry.a >= 0.0) || !(entry.b >= 0.0))
        fail(ErrorKind::Argument, "Poisson-Gaussian parameters must be >= 0");
    entries_[analog_gain] = entry;
}

PgEntry PgParams::lookup(double analog_gain, bool interpolate) const
{
    for (const auto& [g, e] : entries_)
        if (std::abs(g - analog_gain) <= 1e-9 * std::max(1.0, g))
            return e;
    if (!interpolate)
        fail(ErrorKind::Argument, "no Poisson-Gaussian entry for gain " + std::to_string(analog_gain));
    if (entries_.size() < 2)
        fail(ErrorKind::Argument, "cannot interpolate gain " + std::to_string(analog_gain) +
                                      " from fewer than two entries");

    auto hi = entries_.lower_bound(analog_gain);
    if (hi == entries_.begin() || hi == entries_.end())
        fail(ErrorKind::Argument, "gain " + std::to_string(analog_gain) + " lies outside the calibrated range");
    auto lo = std::prev(hi);
    const double t = (analog_gain - lo->first) / (hi->first - lo->first);
    PgEntry out;
    out.a = std::max(0.0, lo->second.a + t * (hi->second.a - lo->second.a));
    out.b = std::max(0.0, lo->second.b + t * (hi->second.b - lo->second.b));
    return out;
}

nlohmann::json to_json(const PgParams& params)
{
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& [g, e] : params.entries())
        entries.push_back({{"analog_gain", g}, {"a", e.a}, {"b", e.b}});
    return {{"source", params.source}, {"entries", entries}};
}

PgParams pg_params_from_json(const nlohmann::json& doc)
{
    PgParams params;
    try {
        params.source = doc.value("source", std::string{});
        for (const auto& e : doc.at("entries"))
            params.set(e.at("analog_gain").get<double>(), {e.at("a").get<double>(), e.at("b").get<double>()});
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Format, std::string("malformed Poisson-Gaussian parameters: ") + e.what());
    }
    return params;
}

VarianceLineFit fit_variance_line(std::span<const double> means, std::span<const double> variances)
{
    const LineFit line = fit_line(means, variances);
    VarianceLineFit out{line.slope, line.intercept, 0.0};
    if (means.size() > 2) {
        double mean_x = 0.0;
        for (double m : means)
            mean_x += m;
        mean_x /= static_cast<double>(means.size());
        double sxx = 0.0;
        double ssr = 0.0;
        for (std::size_t i = 0; i < means.size(); ++i) {
            sxx += (means[i] - mean_x) * (means[i] - mean_x);
            const double r = variances[i] - (line.slope * means[i] + line.intercept);
            ssr += r * r;
        }
        out.slope_stderr = std::sqrt(ssr / static_cast<double>(means.size() - 2) / sxx);
    }
    return out;
}

PgCalibration calibrate_pg(std::span<const FrameStack> flat_sets, const FpnMap& fpn, double pbn_theta,
                           int pbn_period)
{
    if (flat_sets.size() < 2)
        fail(ErrorKind::RankDeficient, "Poisson-Gaussian calibration needs >= 2 illumination levels");
    const CaptureMeta& ref = flat_sets.front().meta();
    for (std::size_t s = 0; s < flat_sets.size(); ++s) {
        const FrameStack& set = flat_sets[s];
        if (set.size() < 16)
            fail(ErrorKind::Argument, "flat set " + std::to_string(s) + " has fewer than 16 frames");
        if (set.meta().analog_gain != ref.analog_gain)
            fail(ErrorKind::Argument, "flat sets must share one analog gain");
        if (set.width() != fpn.width() || set.height() != fpn.height())
            fail(ErrorKind::Argument, "flat set " + std::to_string(s) + " does not match the FPN map shape");
    }

    PgCalibration out;
    out.analog_gain = ref.analog_gain;
    std::vector<double> pooled_mean;
    std::vector<double> pooled_var;

    for (const FrameStack& set : flat_sets) {
        const std::size_t n = static_cast<std::size_t>(set.width()) * set.height();
        const double saturation = 0.98 * (static_cast<double>(set.front().full_scale()) - set.meta().black_level);

        std::vector<double> mean(n, 0.0);
        std::vector<double> m2(n, 0.0);
        double count = 0.0;
        for (const RawFrame& raw : set) {
            const FloatFrame frame = FloatFrame::from_raw(raw, true);
            const FloatFrame debanded =
                remove_pbn(frame, refine_pbn_amplitude(frame, estimate_pbn(frame, pbn_theta, pbn_period)));
            const FloatFrame corrected =
                remove_fpn(debanded, fpn, raw.meta().analog_gain, raw.meta().exposure_time_ms);
            count += 1.0;
            auto v = corrected.samples();
            for (std::size_t i = 0; i < n; ++i) {
                const double delta = v[i] - mean[i];
                mean[i] += delta / count;
                m2[i] += delta * (v[i] - mean[i]);
            }
        }
        double level = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            level += mean[i];
            if (mean[i] >= saturation) {
                ++out.discarded;
                continue;
            }
            pooled_mean.push_back(mean[i]);
            pooled_var.push_back(m2[i] / (count - 1.0));
        }
        out.level_means.push_back(level / static_cast<double>(n));
    }

    std::vector<double> levels;
    for (double m : out.level_means) {
        const bool seen = std::any_of(levels.begin(), levels.end(), [&](double l) {
            return std::abs(l - m) <= std::max(1.0, 0.01 * std::max(std::abs(l), std::abs(m)));
        });
        if (!seen)
            levels.push_back(m);
    }
    if (levels.size() < 2)
        fail(ErrorKind::RankDeficient, "Poisson-Gaussian calibration needs >= 2 distinct illumination levels");
    if (pooled_mean.size() < 3)
        fail(ErrorKind::RankDeficient, "too few unsaturated samples for the variance fit");

    const VarianceLineFit fit = fit_variance_line(pooled_mean, pooled_var);
    out.samples = pooled_mean.size();
    out.slope_stderr = fit.slope_stderr;
    double a = fit.a;
    double b = fit.b;
    if (a < 0.0) {
        if (a < -(3.0 * fit.slope_stderr + 1e-9))
            fail(ErrorKind::CalibrationQuality,
                 "fitted shot-noise slope is negative (" + std::to_string(a) + ")");
        out.note += "a clamped from " + std::to_string(a) + " to 0; ";
        a = 0.0;
    }
    if (b < 0.0) {
        out.note += "b clamped from " + std::to_string(b) + " to 0; ";
        b = 0.0;
    }
    out.entry = {a, b};
    return out;
}

namespace {

template <class T>
struct Grid {
    int width = 0;
    int height = 0;
    std::vector<T> data;

    T& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
    const T& at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
};

template <class T>
Grid<T> flip_horizontal(const Grid<T>& in)
{
    Grid<T> out{in.width, in.height, std::vector<T>(in.data.size())};
    for (int y = 0; y < in.height; ++y)
        for (int x = 0; x < in.width; ++x)
            out.at(x, y) = in.at(in.width - 1 - x, y);
    return out;
}

// Clockwise quarter turn: the bottom-left source pixel lands top-left.
template <class T>
Grid<T> rotate_clockwise(const Grid<T>& in)
{
    Grid<T> out{in.height, in.width, std::vector<T>(in.data.size())};
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x)
            out.at(x, y) = in.at(y, in.height - 1 - x);
    return out;
}

template <class T>
Grid<T> augment(Grid<T> grid, const Augmentation& aug)
{
    if (aug.flip_horizontal)
        grid = flip_horizontal(grid);
    for (int k = 0; k < aug.rotate_quarter_turns; ++k)
        grid = rotate_clockwise(grid);
    return grid;
}

} // namespace

BayerPattern transform_pattern(BayerPattern pattern, const Augmentation& aug)
{
    Grid<CfaColor> tile{2, 2, std::vector<CfaColor>(4)};
    for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 2; ++x)
            tile.at(x, y) = cfa_color(pattern, x, y);
    const Grid<CfaColor> moved = augment(tile, aug);
    for (auto p : {BayerPattern::RGGB, BayerPattern::BGGR, BayerPattern::GRBG, BayerPattern::GBRG}) {
        bool match = true;
        for (int y = 0; y < 2; ++y)
            for (int x = 0; x < 2; ++x)
                match = match && cfa_color(p, x, y) == moved.at(x, y);
        if (match)
            return p;
    }
    return pattern;
}

TrainingPair make_training_pair(std::span<const FloatFrame> clean_frames, PgEntry entry, double analog_gain,
                                std::size_t index, std::uint64_t seed, const TrainingPairOptions& options)
{
    if (clean_frames.empty())
        fail(ErrorKind::Argument, "training-pair generation needs at least one clean frame");
    if (options.crop_width <= 0 || options.crop_height <= 0 || options.crop_width % 2 || options.crop_height % 2)
        fail(ErrorKind::Argument, "crop size must be positive and even");

    CounterRng rng(mix64(seed ^ 0x61756731ull), 0, index);
    CropRect crop;
    crop.source = static_cast<std::size_t>(rng() % clean_frames.size());
    const FloatFrame& src = clean_frames[crop.source];
    for (double v : src.samples())
        if (v < 0.0)
            fail(ErrorKind::Argument, "clean frames must be non-negative");
    crop.width = std::min(options.crop_width, src.width());
    crop.height = std::min(options.crop_height, src.height());
    const int slots_x = (src.width() - crop.width) / 2 + 1;
    const int slots_y = (src.height() - crop.height) / 2 + 1;
    crop.x = 2 * static_cast<int>(rng() % static_cast<std::uint64_t>(slots_x));
    crop.y = 2 * static_cast<int>(rng() % static_cast<std::uint64_t>(slots_y));

    Augmentation aug;
    aug.flip_horizontal = (rng() & 1u) != 0;
    aug.rotate_quarter_turns = static_cast<int>(rng() % 4);
    aug.contrast = 0.6 + 0.8 * rng.uniform();

    Grid<double> cropped{crop.width, crop.height, std::vector<double>(static_cast<std::size_t>(crop.width) * crop.height)};
    for (int y = 0; y < crop.height; ++y)
        for (int x = 0; x < crop.width; ++x)
            cropped.at(x, y) = src.at(crop.x + x, crop.y + y);

    Grid<double> moved = augment(std::move(cropped), aug);
    const int w = moved.width;
    const int h = moved.height;
    std::vector<double> pixels = std::move(moved.data);
    const double full_scale = static_cast<double>((1u << options.bit_depth) - 1u);
    std::vector<std::uint16_t> clean_codes(pixels.size());
    for (std::size_t i = 0; i < pixels.size(); ++i) {
        pixels[i] = std::clamp(std::round(pixels[i] * aug.contrast), 0.0, full_scale);
        clean_codes[i] = static_cast<std::uint16_t>(pixels[i]);
    }

    CaptureMeta meta;
    meta.bit_depth = options.bit_depth;
    meta.bayer_pattern = transform_pattern(options.source_pattern, aug);
    meta.analog_gain = analog_gain;
    meta.exposure_time_ms = options.exposure_time_ms;
    meta.sensor_id = options.sensor_id;
    meta.frame_index = index;

    NoiseModelParams noise;
    noise.shot_gain_a = entry.a;
    noise.read_sigma = std::sqrt(entry.b);
    noise.quant_step = 0.0;
    noise.seed = seed;

    RawFrame clean(w, h, std::move(clean_codes), meta);
    RawFrame noisy = synthesize_noise(FloatFrame(w, h, std::move(pixels), "training_clean"), noise, meta);
    return {std::move(clean), std::move(noisy), crop, aug};
}

nlohmann::json make_training_pairs(std::span<const FloatFrame> clean_frames, const PgParams& params,
                                   double analog_gain, std::size_t count, std::uint64_t seed,
                                   const fs::path& out_dir, const TrainingPairOptions& options)
{
    const PgEntry entry = params.lookup(analog_gain, options.interpolate);
    fs::create_directories(out_dir);
    nlohmann::json pairs = nlohmann::json::array();
    for (std::size_t k = 0; k < count; ++k) {
        const TrainingPair pair = make_training_pair(clean_frames, entry, analog_gain, k, seed, options);
        char stem[32];
        std::snprintf(stem, sizeof stem, "%06zu", k);
        const std::string clean_name = std::string(stem) + "_clean.pgm";
        const std::string noisy_name = std::string(stem) + "_noisy.pgm";
        save_frame(pair.clean, out_dir / clean_name);
        save_frame(pair.noisy, out_dir / noisy_name);
        pairs.push_back({
            {"clean_path", clean_name},
            {"noisy_path", noisy_name},
            {"crop", {{"source", pair.crop.source}, {"x", pair.crop.x}, {"y", pair.crop.y},
                      {"width", pair.crop.width}, {"height", pair.crop.height}}},
            {"augmentation", {{"flip_horizontal", pair.augmentation.flip_horizontal},
                              {"rotate_quarter_turns", pair.augmentation.rotate_quarter_turns},
                              {"contrast", pair.augmentation.contrast}}},
        });
    }
    nlohmann::json manifest = {
        {"seed", seed},
        {"rng", std::string(kRngAlgorithm)},
        {"analog_gain", analog_gain},
        {"a", entry.a},
        {"b", entry.b},
        {"pairs", pairs},
    };
    io::write_json(out_dir / "manifest.json", manifest);
    return manifest;
}

} // namespace endonoise
