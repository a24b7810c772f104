#include "endonoise/metrics.hpp"

#include "endonoise/error.hpp"
#include "endonoise/frame_io.hpp"
#include "parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace endonoise {

namespace fs = std::filesystem;

namespace {

void require_same_shape(const FloatFrame& a, const FloatFrame& b, const char* what)
{
    if (!a.same_shape(b))
        fail(ErrorKind::Argument, std::string(what) + ": frame shapes differ");
}

std::vector<double> window_weights(const SsimOptions& o)
{
    std::vector<double> w(o.window, 1.0);
    if (o.gaussian) {
        const double c = 0.5 * (o.window - 1);
        for (int k = 0; k < o.window; ++k)
            w[k] = std::exp(-0.5 * (k - c) * (k - c) / (o.gaussian_sigma * o.gaussian_sigma));
    }
    double total = 0.0;
    for (double v : w)
        total += v;
    for (double& v : w)
        v /= total;
    return w;
}

// Weighted local means of `plane` for every valid window position.
std::vector<double> local_mean(const std::vector<double>& plane, int width, int height,
                               const std::vector<double>& w)
{
    const int n = static_cast<int>(w.size());
    const int ow = width - n + 1;
    const int oh = height - n + 1;
    std::vector<double> rows(static_cast<std::size_t>(ow) * height);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int k = 0; k < n; ++k)
                s += w[k] * plane[static_cast<std::size_t>(y) * width + x + k];
            rows[static_cast<std::size_t>(y) * ow + x] = s;
        }
    std::vector<double> out(static_cast<std::size_t>(ow) * oh);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int k = 0; k < n; ++k)
                s += w[k] * rows[static_cast<std::size_t>(y + k) * ow + x];
            out[static_cast<std::size_t>(y) * ow + x] = s;
        }
    return out;
}

nlohmann::json metric_json(double v)
{
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    return v;
}

std::string format_metric(double v, int decimals)
{
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

std::string pair_file(const std::string& id, const char* suffix)
{
    return id + suffix;
}

} // namespace

double psnr(const FloatFrame& reference, const FloatFrame& test, double peak)
{
    require_same_shape(reference, test, "psnr");
    if (!(peak > 0.0))
        fail(ErrorKind::Argument, "psnr peak must be > 0");
    double sq = 0.0;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        const double d = reference.samples()[i] - test.samples()[i];
        sq += d * d;
    }
    if (sq == 0.0)
        return kPsnrInfinite;
    const double mse = sq / static_cast<double>(reference.size());
    return 10.0 * std::log10(peak * peak / mse);
}

double ssim(const FloatFrame& reference, const FloatFrame& test, double peak, const SsimOptions& options)
{
    require_same_shape(reference, test, "ssim");
    if (!(peak > 0.0))
        fail(ErrorKind::Argument, "ssim peak must be > 0");
    if (options.window < 1 || (options.gaussian && !(options.gaussian_sigma > 0.0)))
        fail(ErrorKind::Argument, "invalid SSIM window");
    const int width = reference.width();
    const int height = reference.height();
    if (width < options.window || height < options.window)
        fail(ErrorKind::Argument, "frame is smaller than the SSIM window");

    // Shifting both frames by one constant leaves (co)variances unchanged and
    // keeps E[x^2] - E[x]^2 well conditioned.
    double shift = 0.0;
    for (double v : reference.samples())
        shift += v;
    shift /= static_cast<double>(reference.size());

    const std::size_t n = reference.size();
    std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = reference.samples()[i] - shift;
        y[i] = test.samples()[i] - shift;
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
    }
    const auto w = window_weights(options);
    const auto mx = local_mean(x, width, height, w);
    const auto my = local_mean(y, width, height, w);
    const auto mxx = local_mean(xx, width, height, w);
    const auto myy = local_mean(yy, width, height, w);
    const auto mxy = local_mean(xy, width, height, w);

    const double c1 = (options.k1 * peak) * (options.k1 * peak);
    const double c2 = (options.k2 * peak) * (options.k2 * peak);
    double total = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
        const double ux = mx[i] + shift;
        const double uy = my[i] + shift;
        const double vx = mxx[i] - mx[i] * mx[i];
        const double vy = myy[i] - my[i] * my[i];
        const double cxy = mxy[i] - mx[i] * my[i];
        total += ((2.0 * ux * uy + c1) * (2.0 * cxy + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2));
    }
    return total / static_cast<double>(mx.size());
}

nlohmann::json to_json(const SsimOptions& o)
{
    nlohmann::json j = {{"window", o.window}, {"stride", 1}, {"k1", o.k1}, {"k2", o.k2},
                        {"kind", o.gaussian ? "gaussian" : "uniform"}};
    if (o.gaussian)
        j["gaussian_sigma"] = o.gaussian_sigma;
    return j;
}

std::string_view to_string(GainClass cls) noexcept
{
    switch (cls) {
    case GainClass::Low: return "Low";
    case GainClass::Medium: return "Medium";
    case GainClass::Large: return "Large";
    }
    return "Low";
}

GainClass parse_gain_class(std::string_view name)
{
    if (name == "Low")
        return GainClass::Low;
    if (name == "Medium")
        return GainClass::Medium;
    if (name == "Large")
        return GainClass::Large;
    fail(ErrorKind::Metadata, "unknown gain class '" + std::string(name) + "'");
}

GainClass GainThresholds::classify(double analog_gain) const
{
    if (!(low_max <= medium_max))
        fail(ErrorKind::Argument, "gain thresholds must satisfy low_max <= medium_max");
    if (analog_gain < low_max)
        return GainClass::Low;
    if (analog_gain < medium_max)
        return GainClass::Medium;
    return GainClass::Large;
}

TestPair build_test_pair(const FrameStack& dark, const FrameStack& lit, std::size_t sample_index,
                         const GainThresholds& thresholds, std::string id)
{
    const CaptureMeta& d = dark.meta();
    const CaptureMeta& l = lit.meta();
    if (dark.width() != lit.width() || dark.height() != lit.height())
        fail(ErrorKind::Argument, "dark and lit stacks differ in shape");
    if (d.bit_depth != l.bit_depth || d.bayer_pattern != l.bayer_pattern || d.black_level != l.black_level ||
        d.analog_gain != l.analog_gain || d.exposure_time_ms != l.exposure_time_ms)
        fail(ErrorKind::Argument, "dark and lit stacks were captured with different settings");
    if (sample_index >= lit.size())
        fail(ErrorKind::Argument, "sample index " + std::to_string(sample_index) + " is outside the lit stack");

    const FloatFrame lit_mean = temporal_average(lit);
    const FloatFrame dark_mean = temporal_average(dark);
    std::vector<double> clean(lit_mean.size());
    for (std::size_t i = 0; i < clean.size(); ++i)
        clean[i] = lit_mean.samples()[i] - dark_mean.samples()[i];
    const std::string provenance = "lit_mean[" + std::to_string(lit.size()) + "]-dark_mean[" +
                                   std::to_string(dark.size()) + "]";
    return TestPair{std::move(id),
                    lit[sample_index],
                    FloatFrame(lit.width(), lit.height(), std::move(clean), provenance),
                    thresholds.classify(l.analog_gain),
                    dark.size(),
                    lit.size()};
}

void save_test_pairs(std::span<const TestPair> pairs, const fs::path& dir)
{
    fs::create_directories(dir);
    nlohmann::json list = nlohmann::json::array();
    for (const TestPair& p : pairs) {
        const std::string noisy = pair_file(p.id, "_noisy.pgm");
        const std::string clean = pair_file(p.id, "_clean.flt");
        save_frame(p.noisy, dir / noisy);
        save_float_frame(p.clean, dir / clean);
        list.push_back({{"id", p.id},
                        {"noisy", noisy},
                        {"clean", clean},
                        {"gain_class", std::string(to_string(p.gain_class))},
                        {"dark_frames", p.dark_frames},
                        {"lit_frames", p.lit_frames}});
    }
    io::write_json(dir / "pairs.json", {{"pairs", list}});
}

std::vector<TestPair> load_test_pairs(const fs::path& dir)
{
    const nlohmann::json doc = io::read_json(dir / "pairs.json");
    std::vector<TestPair> pairs;
    try {
        for (const auto& e : doc.at("pairs")) {
            TestPair p{e.at("id").get<std::string>(),
                       load_frame(dir / e.at("noisy").get<std::string>()),
                       load_float_frame(dir / e.at("clean").get<std::string>()),
                       parse_gain_class(e.at("gain_class").get<std::string>()),
                       e.value("dark_frames", std::size_t{0}),
                       e.value("lit_frames", std::size_t{0})};
            if (p.noisy.width() != p.clean.width() || p.noisy.height() != p.clean.height())
                fail(ErrorKind::Metadata, "pair '" + p.id + "' has mismatched noisy/clean shapes");
            pairs.push_back(std::move(p));
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Format, "malformed pairs.json: " + std::string(e.what()));
    }
    return pairs;
}

AblationReport evaluate_suite(std::span<const TestPair> pairs, const FpnMap& fpn, const PgParams& pg,
                              const DenoiseConfig& config, const EvaluateOptions& options)
{
    if (pairs.empty())
        fail(ErrorKind::Argument, "evaluation needs at least one test pair");

    std::vector<PairMetrics> results(pairs.size());
    detail::parallel_for(pairs.size(), [&](std::size_t i) {
        const TestPair& pair = pairs[i];
        if (pair.noisy.width() != pair.clean.width() || pair.noisy.height() != pair.clean.height())
            fail(ErrorKind::Argument, "pair '" + pair.id + "' has mismatched noisy/clean shapes");
        PipelineOptions po;
        po.retain_stages = true;
        po.pbn_period = options.pbn_period;
        po.pbn_theta = options.pbn_theta;
        if (options.residual) {
            const CaptureMeta meta = pair.noisy.meta();
            po.residual_override = [&options, i, meta](const FloatFrame& f) { return options.residual(f, i, meta); };
        }
        const PipelineResult run = denoise_pipeline(pair.noisy, fpn, pg, config, po);
        const double peak = options.peak.value_or(static_cast<double>(pair.noisy.full_scale()));
        const std::array<const FloatFrame*, 4> stages = {&run.stages->noisy, &run.stages->pbn_removed,
                                                         &run.stages->fpn_removed, &run.stages->denoised};
        PairMetrics& m = results[i];
        m.id = pair.id;
        m.gain_class = pair.gain_class;
        m.warnings = run.warnings;
        for (std::size_t s = 0; s < stages.size(); ++s) {
            m.psnr[s] = psnr(pair.clean, *stages[s], peak);
            m.ssim[s] = ssim(pair.clean, *stages[s], peak, options.ssim);
        }
    });

    // Summation order follows the ids, so the totals do not depend on input order.
    std::stable_sort(results.begin(), results.end(),
                     [](const PairMetrics& a, const PairMetrics& b) { return a.id < b.id; });

    AblationReport report;
    report.pairs = results.size();
    report.peak = options.peak;
    report.ssim = options.ssim;
    for (const PairMetrics& m : results) {
        for (ClassSummary* c : {&report.classes[static_cast<int>(m.gain_class)], &report.classes[3]}) {
            ++c->pairs;
            for (std::size_t s = 0; s < 4; ++s) {
                c->stages[s].psnr_mean += m.psnr[s];
                c->stages[s].ssim_mean += m.ssim[s];
            }
        }
    }
    for (ClassSummary& c : report.classes)
        if (c.pairs > 0)
            for (StageMeans& s : c.stages) {
                s.psnr_mean /= static_cast<double>(c.pairs);
                s.ssim_mean /= static_cast<double>(c.pairs);
            }
    report.per_pair = std::move(results);
    return report;
}

nlohmann::json to_json(const AblationReport& report)
{
    static constexpr std::array<const char*, 4> class_names = {"Low", "Medium", "Large", "All"};
    nlohmann::json classes = nlohmann::json::object();
    for (std::size_t c = 0; c < 4; ++c) {
        const ClassSummary& summary = report.classes[c];
        if (summary.pairs == 0 && c != 3)
            continue;
        nlohmann::json entry = {{"pairs", summary.pairs}};
        for (std::size_t s = 0; s < 4; ++s)
            entry[std::string(kStageNames[s])] = {{"psnr_mean", metric_json(summary.stages[s].psnr_mean)},
                                                  {"ssim_mean", metric_json(summary.stages[s].ssim_mean)}};
        classes[class_names[c]] = entry;
    }
    nlohmann::json per_pair = nlohmann::json::array();
    for (const PairMetrics& m : report.per_pair) {
        nlohmann::json e = {{"id", m.id}, {"gain_class", std::string(to_string(m.gain_class))}};
        for (std::size_t s = 0; s < 4; ++s)
            e[std::string(kStageNames[s])] = {{"psnr", metric_json(m.psnr[s])}, {"ssim", metric_json(m.ssim[s])}};
        if (!m.warnings.empty())
            e["warnings"] = m.warnings;
        per_pair.push_back(e);
    }
    return {
        {"pairs", report.pairs},
        {"peak", report.peak ? nlohmann::json(*report.peak) : nlohmann::json("2^bit_depth-1")},
        {"ssim", to_json(report.ssim)},
        {"classes", classes},
        {"per_pair", per_pair},
    };
}

std::string format_report_table(const AblationReport& report)
{
    static constexpr std::array<const char*, 4> row_names = {"Noisy", "PBN removed", "PBN+FPN removed", "Denoised"};
    static constexpr std::array<const char*, 4> class_names = {"Low", "Medium", "Large", "All"};
    std::string out;
    char line[256];
    std::snprintf(line, sizeof line, "%-16s", "Stage");
    out += line;
    for (std::size_t c = 0; c < 4; ++c) {
        if (report.classes[c].pairs == 0 && c != 3)
            continue;
        std::snprintf(line, sizeof line, " | %-6s%7s %6s", class_names[c], "PSNR", "SSIM");
        out += line;
    }
    out += "\n";
    for (std::size_t s = 0; s < 4; ++s) {
        std::snprintf(line, sizeof line, "%-16s", row_names[s]);
        out += line;
        for (std::size_t c = 0; c < 4; ++c) {
            const ClassSummary& summary = report.classes[c];
            if (summary.pairs == 0 && c != 3)
                continue;
            std::snprintf(line, sizeof line, " | %13s %6s", format_metric(summary.stages[s].psnr_mean, 2).c_str(),
                          format_metric(summary.stages[s].ssim_mean, 4).c_str());
            out += line;
        }
        out += "\n";
    }
    std::snprintf(line, sizeof line, "pairs: %zu\n", report.pairs);
    out += line;
    return out;
}

} // namespace endonoise
