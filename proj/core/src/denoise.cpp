#include "endonoise/denoise.hpp"

#include "endonoise/error.hpp"
#include "endonoise/frame_io.hpp"
#include "parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <thread>

namespace endonoise {

namespace fs = std::filesystem;

namespace {

// NLM filtering parameter h relative to the noise sigma, for 3x3-class patches.
constexpr double kNlmFilterFactor = 0.5;

// Half-sample symmetric reflection into [0, n).
int reflect(int i, int n) noexcept
{
    if (n == 1)
        return 0;
    const int period = 2 * n;
    i %= period;
    if (i < 0)
        i += period;
    return i < n ? i : period - 1 - i;
}

FloatFrame through(const ValueHook& hook, std::string_view stage, FloatFrame frame, std::string provenance)
{
    if (!hook)
        return frame;
    std::vector<double> values(frame.samples().begin(), frame.samples().end());
    hook(stage, values);
    return frame.with_samples(std::move(values), std::move(provenance));
}

void through_scalar(const ValueHook& hook, std::string_view stage, double& value)
{
    if (hook)
        hook(stage, std::span<double>(&value, 1));
}

constexpr double kIdentitySigma = 1e-6;

std::vector<double> smooth_plane(std::vector<double> plane, int width, int height, const DenoiseConfig& config,
                                 const ValueHook& hook)
{
    // A zero-width Gaussian is the identity; skipping the transform keeps it exact.
    if (config.smoother == SmootherKind::Gaussian && config.gaussian_sigma * config.strength < kIdentitySigma)
        return plane;
    const double a = config.pg.a;
    const double b = config.pg.b;
    for (double& v : plane)
        v = vst_forward(v, a, b);
    if (hook)
        hook("vst", plane);

    std::vector<double> smoothed;
    if (config.smoother == SmootherKind::Gaussian)
        smoothed = gaussian_smooth(plane, width, height, config.gaussian_sigma * config.strength);
    else
        smoothed = nlm_smooth(plane, width, height, config.strength, config.nlm_patch_radius,
                              config.nlm_search_radius);
    if (hook)
        hook("smoothed", smoothed);

    for (double& v : smoothed)
        v = vst_inverse(v, a, b);
    return smoothed;
}

} // namespace

std::string_view to_string(SmootherKind kind) noexcept
{
    return kind == SmootherKind::Gaussian ? "gaussian" : "nlm";
}

SmootherKind parse_smoother(std::string_view name)
{
    if (name == "gaussian")
        return SmootherKind::Gaussian;
    if (name == "nlm")
        return SmootherKind::Nlm;
    fail(ErrorKind::Argument, "unknown smoother '" + std::string(name) + "' (expected gaussian or nlm)");
}

void DenoiseConfig::validate() const
{
    if (!(pg.a > 0.0))
        fail(ErrorKind::Argument, "variance stabilization needs a > 0");
    if (!(pg.b >= 0.0))
        fail(ErrorKind::Argument, "variance stabilization needs b >= 0");
    if (!(strength > 0.0) || !std::isfinite(strength))
        fail(ErrorKind::Argument, "denoise strength must be > 0");
    if (nlm_patch_radius <= 0 || nlm_search_radius <= 0)
        fail(ErrorKind::Argument, "NLM radii must be positive");
    if (!(gaussian_sigma >= 0.0))
        fail(ErrorKind::Argument, "Gaussian sigma must be >= 0");
    if (!(headroom >= 0.0))
        fail(ErrorKind::Argument, "headroom must be >= 0");
}

nlohmann::json to_json(const DenoiseConfig& config)
{
    return {
        {"pg", {{"a", config.pg.a}, {"b", config.pg.b}}},
        {"smoother", std::string(to_string(config.smoother))},
        {"strength", config.strength},
        {"nlm", {{"patch_radius", config.nlm_patch_radius}, {"search_radius", config.nlm_search_radius}}},
        {"gaussian", {{"sigma", config.gaussian_sigma}}},
        {"process_per_bayer_phase", config.process_per_bayer_phase},
        {"headroom", config.headroom},
    };
}

DenoiseConfig denoise_config_from_json(const nlohmann::json& doc)
{
    DenoiseConfig c;
    try {
        if (doc.contains("pg")) {
            c.pg.a = doc["pg"].value("a", c.pg.a);
            c.pg.b = doc["pg"].value("b", c.pg.b);
        }
        if (doc.contains("smoother"))
            c.smoother = parse_smoother(doc["smoother"].get<std::string>());
        c.strength = doc.value("strength", c.strength);
        if (doc.contains("nlm")) {
            c.nlm_patch_radius = doc["nlm"].value("patch_radius", c.nlm_patch_radius);
            c.nlm_search_radius = doc["nlm"].value("search_radius", c.nlm_search_radius);
        }
        if (doc.contains("gaussian"))
            c.gaussian_sigma = doc["gaussian"].value("sigma", c.gaussian_sigma);
        c.process_per_bayer_phase = doc.value("process_per_bayer_phase", c.process_per_bayer_phase);
        c.headroom = doc.value("headroom", c.headroom);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Format, std::string("malformed denoise config: ") + e.what());
    }
    c.validate();
    return c;
}

double vst_forward(double x, double a, double b)
{
    if (!(a > 0.0))
        fail(ErrorKind::Argument, "variance stabilization needs a > 0");
    return (2.0 / a) * std::sqrt(std::max(a * x + 0.375 * a * a + b, 0.0));
}

double vst_inverse(double z, double a, double b)
{
    if (!(a > 0.0))
        fail(ErrorKind::Argument, "variance stabilization needs a > 0");
    return 0.25 * a * z * z - 0.375 * a - b / a;
}

FloatFrame vst_forward(const FloatFrame& frame, double a, double b)
{
    std::vector<double> out(frame.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = vst_forward(frame.samples()[i], a, b);
    return frame.with_samples(std::move(out), "vst");
}

FloatFrame vst_inverse(const FloatFrame& frame, double a, double b)
{
    std::vector<double> out(frame.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = vst_inverse(frame.samples()[i], a, b);
    return frame.with_samples(std::move(out), "vst_inverse");
}

std::vector<double> gaussian_smooth(std::span<const double> plane, int width, int height, double sigma)
{
    std::vector<double> out(plane.begin(), plane.end());
    if (sigma < kIdentitySigma)
        return out;
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> kernel(2 * radius + 1);
    double total = 0.0;
    for (int k = -radius; k <= radius; ++k) {
        kernel[k + radius] = std::exp(-0.5 * k * k / (sigma * sigma));
        total += kernel[k + radius];
    }
    for (double& k : kernel)
        k /= total;

    std::vector<double> tmp(out.size());
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k)
                acc += kernel[k + radius] * plane[static_cast<std::size_t>(y) * width + reflect(x + k, width)];
            tmp[static_cast<std::size_t>(y) * width + x] = acc;
        }
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k)
                acc += kernel[k + radius] * tmp[static_cast<std::size_t>(reflect(y + k, height)) * width + x];
            out[static_cast<std::size_t>(y) * width + x] = acc;
        }
    return out;
}

std::vector<double> nlm_smooth(std::span<const double> plane, int width, int height, double noise_sigma,
                               int patch_radius, int search_radius)
{
    if (width <= 0 || height <= 0 || plane.size() != static_cast<std::size_t>(width) * height)
        fail(ErrorKind::Argument, "NLM plane shape mismatch");
    const int pad = patch_radius + search_radius;
    const int pw = width + 2 * pad;
    const int ph = height + 2 * pad;
    std::vector<double> padded(static_cast<std::size_t>(pw) * ph);
    for (int y = 0; y < ph; ++y)
        for (int x = 0; x < pw; ++x)
            padded[static_cast<std::size_t>(y) * pw + x] =
                plane[static_cast<std::size_t>(reflect(y - pad, height)) * width + reflect(x - pad, width)];
    auto P = [&](int x, int y) { return padded[static_cast<std::size_t>(y) * pw + x]; };

    const std::size_t n = plane.size();
    const double sigma2 = noise_sigma * noise_sigma;
    const double h2 = kNlmFilterFactor * kNlmFilterFactor * sigma2;
    const double patch_area = static_cast<double>((2 * patch_radius + 1) * (2 * patch_radius + 1));
    std::vector<double> acc(n, 0.0);
    std::vector<double> wsum(n, 0.0);

    // Region of patch pixels around every output pixel, in padded coordinates.
    const int rw = width + 2 * patch_radius;
    const int rh = height + 2 * patch_radius;
    const int r0 = pad - patch_radius;
    std::vector<double> diff(static_cast<std::size_t>(rw) * rh);
    std::vector<double> hsum(static_cast<std::size_t>(width) * rh);

    for (int dy = -search_radius; dy <= search_radius; ++dy) {
        for (int dx = -search_radius; dx <= search_radius; ++dx) {
            if (dx == 0 && dy == 0)
                continue;
            for (int y = 0; y < rh; ++y)
                for (int x = 0; x < rw; ++x) {
                    const double d = P(r0 + x, r0 + y) - P(r0 + x + dx, r0 + y + dy);
                    diff[static_cast<std::size_t>(y) * rw + x] = d * d;
                }
            for (int y = 0; y < rh; ++y)
                for (int x = 0; x < width; ++x) {
                    double s = 0.0;
                    for (int k = 0; k <= 2 * patch_radius; ++k)
                        s += diff[static_cast<std::size_t>(y) * rw + x + k];
                    hsum[static_cast<std::size_t>(y) * width + x] = s;
                }
            for (int y = 0; y < height; ++y)
                for (int x = 0; x < width; ++x) {
                    double s = 0.0;
                    for (int k = 0; k <= 2 * patch_radius; ++k)
                        s += hsum[static_cast<std::size_t>(y + k) * width + x];
                    const double d2 = s / patch_area;
                    const double w = std::exp(-std::max(d2 - 2.0 * sigma2, 0.0) / h2);
                    const std::size_t i = static_cast<std::size_t>(y) * width + x;
                    acc[i] += w * P(pad + x + dx, pad + y + dy);
                    wsum[i] += w;
                }
        }
    }

    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        // Zero self-distance gives the centre weight 1, so a pixel with no similar neighbours keeps its value.
        out[i] = (acc[i] + plane[i]) / (wsum[i] + 1.0);
    }
    return out;
}

FloatFrame denoise_residual(const FloatFrame& frame, const DenoiseConfig& config, const ValueHook& hook)
{
    config.validate();
    const int width = frame.width();
    const int height = frame.height();
    std::vector<double> out(frame.size());

    if (config.process_per_bayer_phase) {
        const int pw = width / 2;
        const int ph = height / 2;
        std::vector<std::vector<double>> planes(4);
        detail::parallel_for(4, [&](std::size_t phase) {
            const int ox = static_cast<int>(phase & 1);
            const int oy = static_cast<int>(phase >> 1);
            std::vector<double> plane(static_cast<std::size_t>(pw) * ph);
            for (int y = 0; y < ph; ++y)
                for (int x = 0; x < pw; ++x)
                    plane[static_cast<std::size_t>(y) * pw + x] = frame.at(2 * x + ox, 2 * y + oy);
            planes[phase] = smooth_plane(std::move(plane), pw, ph, config, hook);
        });
        for (int phase = 0; phase < 4; ++phase) {
            const int ox = phase & 1;
            const int oy = phase >> 1;
            for (int y = 0; y < ph; ++y)
                for (int x = 0; x < pw; ++x)
                    out[static_cast<std::size_t>(2 * y + oy) * width + 2 * x + ox] =
                        planes[phase][static_cast<std::size_t>(y) * pw + x];
        }
    } else {
        out = smooth_plane(std::vector<double>(frame.samples().begin(), frame.samples().end()), width, height,
                           config, hook);
    }

    for (double& v : out)
        v = std::max(v, -config.headroom);
    return frame.with_samples(std::move(out), "residual_denoised");
}

PipelineResult denoise_pipeline(const RawFrame& raw, const FpnMap& fpn, const PgParams& pg,
                                const DenoiseConfig& config, const PipelineOptions& options)
{
    if (fpn.width() != raw.width() || fpn.height() != raw.height())
        fail(ErrorKind::Argument, "FPN map shape does not match the frame");
    if (!fpn.sensor_id().empty() && !raw.meta().sensor_id.empty() && fpn.sensor_id() != raw.meta().sensor_id)
        fail(ErrorKind::Argument, "FPN map was calibrated for sensor '" + fpn.sensor_id() + "', frame is from '" +
                                      raw.meta().sensor_id + "'");

    const double gain = raw.meta().analog_gain;
    const double exposure = raw.meta().exposure_time_ms;
    const ValueHook& hook = options.hook;

    DenoiseConfig cfg = config;
    if (!pg.empty())
        cfg.pg = pg.lookup(gain);
    cfg.headroom = std::max(cfg.headroom, static_cast<double>(raw.meta().black_level));

    PipelineResult result{FloatFrame::constant(raw.width(), raw.height(), 0.0), std::nullopt, {}, {}};

    FloatFrame noisy = through(hook, "input", FloatFrame::from_raw(raw, true), "noisy");

    double theta = 0.0;
    if (options.pbn_theta) {
        theta = *options.pbn_theta;
    } else {
        double mean = 0.0;
        for (double v : noisy.samples())
            mean += v;
        mean /= static_cast<double>(noisy.size());
        theta = default_pbn_theta(std::sqrt(std::max(cfg.pg.a * std::max(mean, 0.0) + cfg.pg.b, 0.0)));
    }
    try {
        result.pbn = estimate_pbn(noisy, theta, options.pbn_period);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::EstimationFailed)
            throw;
        result.pbn = PbnEstimate{};
        result.pbn.period = options.pbn_period;
        result.pbn.theta = theta;
        result.warnings.push_back(std::string("banding estimate failed, using kappa = 0: ") + e.what());
    }
    through_scalar(hook, "pbn_kappa", result.pbn.kappa);
    result.pbn.kappa = std::max(result.pbn.kappa, 0.0);

    FloatFrame debanded = through(hook, "pbn_removed", remove_pbn(noisy, result.pbn), "pbn_removed");

    FloatFrame corrected = [&] {
        if (!hook)
            return remove_fpn(debanded, fpn, gain, exposure);
        std::vector<double> slope(fpn.slope().begin(), fpn.slope().end());
        std::vector<double> offset(fpn.offset().begin(), fpn.offset().end());
        hook("fpn_slope", slope);
        hook("fpn_offset", offset);
        const FpnMap quantized(fpn.width(), fpn.height(), std::vector<float>(slope.begin(), slope.end()),
                               std::vector<float>(offset.begin(), offset.end()), fpn.fit_residual_rms(),
                               fpn.calibration_points(), fpn.sensor_id());
        return remove_fpn(debanded, quantized, gain, exposure);
    }();
    corrected = through(hook, "fpn_removed", std::move(corrected), "fpn_removed");

    through_scalar(hook, "pg_a", cfg.pg.a);
    through_scalar(hook, "pg_b", cfg.pg.b);

    FloatFrame denoised = options.residual_override ? options.residual_override(corrected)
                                                    : denoise_residual(corrected, cfg, hook);
    denoised = through(hook, "output", std::move(denoised), "residual_denoised");

    if (options.retain_stages)
        result.stages = PipelineStages{noisy, debanded, corrected, denoised};
    result.output = std::move(denoised);
    return result;
}

ExternalDenoiser::ExternalDenoiser(fs::path dir, std::chrono::milliseconds timeout,
                                   std::chrono::milliseconds poll_interval)
    : dir_(std::move(dir)), timeout_(timeout), poll_(poll_interval)
{
}

fs::path ExternalDenoiser::input_path(const fs::path& dir, std::size_t index)
{
    char name[32];
    std::snprintf(name, sizeof name, "%04zu_input.pgm", index);
    return dir / name;
}

fs::path ExternalDenoiser::output_path(const fs::path& dir, std::size_t index)
{
    char name[32];
    std::snprintf(name, sizeof name, "%04zu_output.pgm", index);
    return dir / name;
}

FloatFrame ExternalDenoiser::operator()(const FloatFrame& input, std::size_t index, const CaptureMeta& meta) const
{
    fs::create_directories(dir_);
    const double full_scale = static_cast<double>((1u << meta.bit_depth) - 1u);
    std::vector<std::uint16_t> codes(input.size());
    for (std::size_t i = 0; i < codes.size(); ++i)
        codes[i] = static_cast<std::uint16_t>(
            std::clamp(std::round(input.samples()[i] + meta.black_level), 0.0, full_scale));
    CaptureMeta m = meta;
    m.frame_index = index;
    const fs::path in = input_path(dir_, index);
    const fs::path out = output_path(dir_, index);
    save_frame(RawFrame(input.width(), input.height(), std::move(codes), m), in);

    const auto deadline = std::chrono::steady_clock::now() + timeout_;
    while (!fs::exists(out)) {
        if (std::chrono::steady_clock::now() >= deadline)
            fail(ErrorKind::Timeout, "external denoiser produced no '" + out.string() + "' in time");
        std::this_thread::sleep_for(poll_);
    }
    // The writer may still be flushing; retry until the raster is complete.
    PgmImage img;
    for (;;) {
        try {
            img = read_pgm(out);
            break;
        } catch (const Error&) {
            if (std::chrono::steady_clock::now() >= deadline)
                throw;
            std::this_thread::sleep_for(poll_);
        }
    }
    if (img.width != input.width() || img.height != input.height())
        fail(ErrorKind::Format, "external denoiser output '" + out.string() + "' has the wrong shape");
    std::vector<double> values(img.samples.size());
    for (std::size_t i = 0; i < values.size(); ++i)
        values[i] = static_cast<double>(img.samples[i]) - meta.black_level;
    return FloatFrame(img.width, img.height, std::move(values), "external_denoised");
}

} // namespace endonoise
