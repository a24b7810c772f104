#include "endonoise/synthetic_suite.hpp"

#include "endonoise/error.hpp"
#include "endonoise/pbn.hpp"
#include "endonoise/random.hpp"
#include "parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace endonoise {

namespace {

// Stream tags keep the different draws of the suite independent.
constexpr std::uint64_t kSceneTag = 0x7363656e65ULL;
constexpr std::uint64_t kFpnTag = 0x66706e6d6170ULL;
constexpr std::uint64_t kDarkTag = 0x6461726bULL;
constexpr std::uint64_t kFlatTag = 0x666c6174ULL;
constexpr std::uint64_t kPairTag = 0x70616972ULL;
constexpr std::uint64_t kBandTag = 0x62616e64ULL;

double uniform_in(CounterRng& rng, double lo, double hi)
{
    return lo + (hi - lo) * rng.uniform();
}

// Per-frame banding amplitude and phase.
PbnParams draw_banding(const SuiteConfig& config, const GainClassSpec& spec, std::uint64_t key, std::uint64_t index)
{
    CounterRng rng(mix64(config.seed ^ kBandTag) ^ key, 0, index);
    PbnParams pbn;
    pbn.period = config.pbn_period;
    pbn.kappa = uniform_in(rng, spec.kappa_min, spec.kappa_max);
    pbn.phase = static_cast<int>(rng() % static_cast<std::uint64_t>(config.pbn_period));
    return pbn;
}

GainClassSpec parse_class(const nlohmann::json& j, GainClassSpec spec)
{
    spec.analog_gain = j.value("analog_gain", spec.analog_gain);
    spec.exposure_time_ms = j.value("exposure_time_ms", spec.exposure_time_ms);
    spec.shot_gain_a = j.value("shot_gain_a", spec.shot_gain_a);
    spec.read_sigma = j.value("read_sigma", spec.read_sigma);
    spec.kappa_min = j.value("kappa_min", spec.kappa_min);
    spec.kappa_max = j.value("kappa_max", spec.kappa_max);
    return spec;
}

} // namespace

void SuiteConfig::validate() const
{
    if (width <= 0 || height <= 0 || width % 2 || height % 2)
        fail(ErrorKind::Argument, "suite frames need positive even dimensions");
    if (!is_supported_bit_depth(bit_depth))
        fail(ErrorKind::Argument, "unsupported suite bit depth");
    if (black_level < 0 || black_level >= (1 << bit_depth))
        fail(ErrorKind::Argument, "black level outside the code range");
    if (pbn_period < 2 || pbn_period % 2)
        fail(ErrorKind::Argument, "banding period must be even and >= 2");
    if (dark_frames == 0 || flat_frames < 16 || flat_levels.size() < 2)
        fail(ErrorKind::Argument, "suite needs dark frames, >= 16 flat frames and >= 2 flat levels");
    if (!(fpn_slope_max >= 0.0) || !(fpn_offset_max >= 0.0))
        fail(ErrorKind::Argument, "FPN ranges must be >= 0");
    for (const GainClassSpec& c : classes)
        if (!(c.analog_gain >= 1.0) || !(c.exposure_time_ms > 0.0) || !(c.shot_gain_a > 0.0) ||
            !(c.read_sigma >= 0.0) || !(c.kappa_min >= 0.0) || !(c.kappa_max >= c.kappa_min))
            fail(ErrorKind::Argument, "invalid gain class '" + std::string(to_string(c.gain_class)) + "'");
}

nlohmann::json to_json(const SuiteConfig& c)
{
    nlohmann::json classes = nlohmann::json::object();
    for (const GainClassSpec& s : c.classes)
        classes[std::string(to_string(s.gain_class))] = {
            {"analog_gain", s.analog_gain}, {"exposure_time_ms", s.exposure_time_ms},
            {"shot_gain_a", s.shot_gain_a}, {"read_sigma", s.read_sigma},
            {"kappa_min", s.kappa_min},     {"kappa_max", s.kappa_max},
        };
    return {
        {"seed", c.seed},
        {"rng", std::string(kRngAlgorithm)},
        {"width", c.width},
        {"height", c.height},
        {"bit_depth", c.bit_depth},
        {"black_level", c.black_level},
        {"bayer_pattern", std::string(to_string(c.pattern))},
        {"sensor_id", c.sensor_id},
        {"pbn_period", c.pbn_period},
        {"pairs_per_class", c.pairs_per_class},
        {"dark_frames", c.dark_frames},
        {"flat_frames", c.flat_frames},
        {"flat_levels", c.flat_levels},
        {"fpn_slope_max", c.fpn_slope_max},
        {"fpn_offset_max", c.fpn_offset_max},
        {"gain_thresholds", {{"low_max", c.thresholds.low_max}, {"medium_max", c.thresholds.medium_max}}},
        {"classes", classes},
    };
}

SuiteConfig suite_config_from_json(const nlohmann::json& doc)
{
    if (!doc.is_object())
        fail(ErrorKind::Format, "suite config must be a JSON object");
    SuiteConfig c;
    try {
        c.seed = doc.value("seed", c.seed);
        c.width = doc.value("width", c.width);
        c.height = doc.value("height", c.height);
        c.bit_depth = doc.value("bit_depth", c.bit_depth);
        c.black_level = doc.value("black_level", c.black_level);
        if (doc.contains("bayer_pattern"))
            c.pattern = parse_bayer_pattern(doc["bayer_pattern"].get<std::string>());
        c.sensor_id = doc.value("sensor_id", c.sensor_id);
        c.pbn_period = doc.value("pbn_period", c.pbn_period);
        c.pairs_per_class = doc.value("pairs_per_class", c.pairs_per_class);
        c.dark_frames = doc.value("dark_frames", c.dark_frames);
        c.flat_frames = doc.value("flat_frames", c.flat_frames);
        c.flat_levels = doc.value("flat_levels", c.flat_levels);
        c.fpn_slope_max = doc.value("fpn_slope_max", c.fpn_slope_max);
        c.fpn_offset_max = doc.value("fpn_offset_max", c.fpn_offset_max);
        if (doc.contains("gain_thresholds")) {
            c.thresholds.low_max = doc["gain_thresholds"].value("low_max", c.thresholds.low_max);
            c.thresholds.medium_max = doc["gain_thresholds"].value("medium_max", c.thresholds.medium_max);
        }
        if (doc.contains("classes"))
            for (GainClassSpec& s : c.classes) {
                const std::string name(to_string(s.gain_class));
                if (doc["classes"].contains(name))
                    s = parse_class(doc["classes"][name], s);
            }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Format, std::string("malformed suite config: ") + e.what());
    }
    c.validate();
    return c;
}

double suite_dark_theta(const SuiteConfig& config)
{
    double worst = 0.0;
    for (const GainClassSpec& c : config.classes) {
        const double u = 2.0 * c.analog_gain * c.exposure_time_ms;
        // Read noise plus the spread of K*u + B across pixels.
        const double var = c.read_sigma * c.read_sigma +
                           (config.fpn_slope_max * u) * (config.fpn_slope_max * u) / 12.0 +
                           config.fpn_offset_max * config.fpn_offset_max / 12.0;
        worst = std::max(worst, std::sqrt(var));
    }
    return default_pbn_theta(worst);
}

double suite_flat_theta(const SuiteConfig& config, const GainClassSpec& spec)
{
    const double top = *std::max_element(config.flat_levels.begin(), config.flat_levels.end());
    return default_pbn_theta(std::sqrt(spec.shot_gain_a * top + spec.read_sigma * spec.read_sigma));
}

CaptureMeta suite_meta(const SuiteConfig& config, const GainClassSpec& spec, std::uint64_t frame_index)
{
    CaptureMeta meta;
    meta.bit_depth = config.bit_depth;
    meta.bayer_pattern = config.pattern;
    meta.black_level = config.black_level;
    meta.analog_gain = spec.analog_gain;
    meta.exposure_time_ms = spec.exposure_time_ms;
    meta.sensor_id = config.sensor_id;
    meta.frame_index = frame_index;
    return meta;
}

FloatFrame synthetic_scene(int width, int height, BayerPattern pattern, std::uint64_t seed, std::uint64_t index)
{
    CounterRng rng(mix64(seed ^ kSceneTag), index, 0);
    const double base = uniform_in(rng, 150.0, 300.0);
    const double gx = uniform_in(rng, -120.0, 120.0);
    const double gy = uniform_in(rng, -120.0, 120.0);

    struct Disc {
        double cx, cy, r, amp;
    };
    struct Rect {
        double x0, y0, x1, y1, amp;
    };
    std::vector<Disc> discs(3);
    for (Disc& d : discs)
        d = {uniform_in(rng, 0, width), uniform_in(rng, 0, height), uniform_in(rng, 0.06, 0.25) * width,
             uniform_in(rng, -120.0, 200.0)};
    std::vector<Rect> rects(2);
    for (Rect& r : rects) {
        const double x0 = uniform_in(rng, 0, 0.7 * width);
        const double y0 = uniform_in(rng, 0, 0.7 * height);
        r = {x0, y0, x0 + uniform_in(rng, 0.1, 0.3) * width, y0 + uniform_in(rng, 0.1, 0.3) * height,
             uniform_in(rng, -100.0, 150.0)};
    }
    const double red = uniform_in(rng, 1.0, 1.3);
    const double blue = uniform_in(rng, 0.6, 0.9);

    std::vector<double> out(static_cast<std::size_t>(width) * height);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const double u = (x + 0.5) / width - 0.5;
            const double v = (y + 0.5) / height - 0.5;
            double value = base + gx * u + gy * v;
            for (const Disc& d : discs)
                if ((x - d.cx) * (x - d.cx) + (y - d.cy) * (y - d.cy) < d.r * d.r)
                    value += d.amp;
            for (const Rect& r : rects)
                if (x >= r.x0 && x < r.x1 && y >= r.y0 && y < r.y1)
                    value += r.amp;
            // Endoscope light falls off towards the corners.
            value *= 1.0 - 0.6 * (u * u + v * v);
            switch (cfa_color(pattern, x, y)) {
            case CfaColor::Red: value *= red; break;
            case CfaColor::Blue: value *= blue; break;
            case CfaColor::Green: break;
            }
            out[static_cast<std::size_t>(y) * width + x] = std::clamp(value, 40.0, 700.0);
        }
    return FloatFrame(width, height, std::move(out), "synthetic_scene");
}

FpnMap random_fpn(int width, int height, double slope_max, double offset_max, std::uint64_t seed,
                  const std::string& sensor_id)
{
    const std::size_t n = static_cast<std::size_t>(width) * height;
    std::vector<float> slope(n);
    std::vector<float> offset(n);
    for (std::size_t i = 0; i < n; ++i) {
        CounterRng rng(mix64(seed ^ kFpnTag), 0, i);
        slope[i] = static_cast<float>(slope_max * rng.uniform());
        offset[i] = static_cast<float>(offset_max * rng.uniform());
    }
    return FpnMap(width, height, std::move(slope), std::move(offset), 0.0, {{1.0, 1.0}, {1.0, 2.0}}, sensor_id);
}

NoiseModelParams class_noise(const SuiteConfig& config, const GainClassSpec& spec,
                             std::shared_ptr<const FpnMap> fpn, double kappa, int phase, std::uint64_t seed)
{
    NoiseModelParams p;
    p.shot_gain_a = spec.shot_gain_a;
    p.read_sigma = spec.read_sigma;
    p.quant_step = 1.0;
    p.fpn = std::move(fpn);
    p.pbn = PbnParams{kappa, config.pbn_period, phase};
    p.seed = seed;
    return p;
}

std::vector<DarkSet> synthetic_dark_sets(const SuiteConfig& config, std::shared_ptr<const FpnMap> fpn)
{
    config.validate();
    std::vector<DarkSet> sets;
    const FloatFrame black = FloatFrame::constant(config.width, config.height, 0.0);
    for (std::size_t c = 0; c < config.classes.size(); ++c) {
        for (int mult = 1; mult <= 2; ++mult) {
            GainClassSpec spec = config.classes[c];
            spec.exposure_time_ms *= mult;
            const std::uint64_t key = (c << 8) | static_cast<std::uint64_t>(mult);
            const std::uint64_t seed = mix64(config.seed ^ kDarkTag ^ (key << 32));
            std::vector<RawFrame> frames(config.dark_frames, RawFrame(2, 2, {0, 0, 0, 0}, CaptureMeta{}));
            detail::parallel_for(frames.size(), [&](std::size_t i) {
                const PbnParams pbn = draw_banding(config, spec, kDarkTag ^ key, i);
                frames[i] = synthesize_noise(black, class_noise(config, spec, fpn, pbn.kappa, pbn.phase, seed),
                                             suite_meta(config, spec, i));
            });
            sets.push_back(DarkSet{FrameStack(std::move(frames)), spec.analog_gain, spec.exposure_time_ms});
        }
    }
    return sets;
}

std::vector<FrameStack> synthetic_flat_sets(const SuiteConfig& config, const GainClassSpec& spec,
                                            std::shared_ptr<const FpnMap> fpn)
{
    config.validate();
    std::vector<FrameStack> sets;
    const auto class_key = static_cast<std::uint64_t>(spec.gain_class);
    for (std::size_t l = 0; l < config.flat_levels.size(); ++l) {
        const FloatFrame flat = FloatFrame::constant(config.width, config.height, config.flat_levels[l]);
        const std::uint64_t key = (class_key << 8) | l;
        const std::uint64_t seed = mix64(config.seed ^ kFlatTag ^ (key << 32));
        std::vector<RawFrame> frames(config.flat_frames, RawFrame(2, 2, {0, 0, 0, 0}, CaptureMeta{}));
        detail::parallel_for(frames.size(), [&](std::size_t i) {
            const PbnParams pbn = draw_banding(config, spec, kFlatTag ^ key, i);
            frames[i] = synthesize_noise(flat, class_noise(config, spec, fpn, pbn.kappa, pbn.phase, seed),
                                         suite_meta(config, spec, i));
        });
        sets.emplace_back(std::move(frames));
    }
    return sets;
}

std::vector<TestPair> synthetic_pairs(const SuiteConfig& config, std::shared_ptr<const FpnMap> fpn)
{
    config.validate();
    const std::size_t per_class = config.pairs_per_class;
    std::vector<TestPair> pairs(config.classes.size() * per_class,
                                TestPair{{}, RawFrame(2, 2, {0, 0, 0, 0}, CaptureMeta{}),
                                         FloatFrame::constant(2, 2, 0.0), GainClass::Low, 0, 0});
    detail::parallel_for(pairs.size(), [&](std::size_t k) {
        const std::size_t c = k / per_class;
        const std::size_t i = k % per_class;
        const GainClassSpec& spec = config.classes[c];
        const std::uint64_t seed = mix64(config.seed ^ kPairTag ^ (static_cast<std::uint64_t>(c) << 40));
        const FloatFrame scene = synthetic_scene(config.width, config.height, config.pattern, config.seed, k);
        const PbnParams pbn = draw_banding(config, spec, kPairTag ^ c, i);
        char id[32];
        std::snprintf(id, sizeof id, "%s_%04zu", std::string(to_string(spec.gain_class)).c_str(), i);
        RawFrame noisy = synthesize_noise(scene, class_noise(config, spec, fpn, pbn.kappa, pbn.phase, seed),
                                          suite_meta(config, spec, i));
        pairs[k] = TestPair{id, std::move(noisy), scene.with_samples({scene.samples().begin(), scene.samples().end()},
                                                                     "synthetic_truth"),
                            config.thresholds.classify(spec.analog_gain), 0, 0};
    });
    return pairs;
}

} // namespace endonoise
