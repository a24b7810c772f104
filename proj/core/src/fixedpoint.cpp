#include "endonoise/fixedpoint.hpp"

#include "endonoise/error.hpp"
#include "endonoise/metrics.hpp"

#include <algorithm>
#include <cfenv>
#include <cmath>
#include <mutex>

namespace endonoise {

void QFormat::validate() const
{
    if (total_bits != 12)
        fail(ErrorKind::Argument, "only 12-bit fixed-point formats are modelled");
    if (frac_bits < 0 || frac_bits > total_bits - 1)
        fail(ErrorKind::Argument, "frac_bits must lie in [0, 11]");
}

double QFormat::step() const noexcept
{
    return std::ldexp(1.0, -frac_bits);
}

std::int64_t QFormat::min_code() const noexcept
{
    return is_signed ? -(std::int64_t{1} << (total_bits - 1)) : 0;
}

std::int64_t QFormat::max_code() const noexcept
{
    return (std::int64_t{1} << (total_bits - (is_signed ? 1 : 0))) - 1;
}

Quantized quantize_value(double x, const QFormat& q)
{
    Quantized out;
    if (std::isnan(x))
        return out;
    const double scaled = std::ldexp(x, q.frac_bits);
    const auto lo = static_cast<double>(q.min_code());
    const auto hi = static_cast<double>(q.max_code());
    if (scaled <= lo || scaled >= hi) {
        out.code = scaled <= lo ? q.min_code() : q.max_code();
        out.saturated = scaled < lo - 0.5 || scaled > hi + 0.5;
    } else {
        // nearbyint honours the default round-to-nearest-even mode.
        out.code = static_cast<std::int64_t>(std::nearbyint(scaled));
    }
    out.value = std::ldexp(static_cast<double>(out.code), -q.frac_bits);
    return out;
}

nlohmann::json to_json(const QPlan& plan)
{
    nlohmann::json doc = nlohmann::json::object();
    for (const auto& [stage, q] : plan)
        doc[stage] = {{"frac_bits", q.frac_bits}, {"signed", q.is_signed}};
    return doc;
}

QPlan qplan_from_json(const nlohmann::json& doc)
{
    if (!doc.is_object())
        fail(ErrorKind::Format, "qplan must be a JSON object");
    QPlan plan;
    try {
        for (const auto& [stage, entry] : doc.items()) {
            QFormat q;
            q.frac_bits = entry.at("frac_bits").get<int>();
            q.is_signed = entry.at("signed").get<bool>();
            q.validate();
            plan[stage] = q;
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Format, std::string("malformed qplan: ") + e.what());
    }
    return plan;
}

QPlan profile_qplan(std::span<const RawFrame> frames, const FpnMap& fpn, const PgParams& pg,
                    const DenoiseConfig& config, double headroom, int pbn_period)
{
    if (frames.empty())
        fail(ErrorKind::Argument, "range profiling needs at least one frame");
    if (!(headroom >= 1.0))
        fail(ErrorKind::Argument, "profiling headroom must be >= 1");

    struct Range {
        double lo = 0.0;
        double hi = 0.0;
    };
    std::map<std::string, Range, std::less<>> ranges;
    for (auto stage : kQuantStages)
        ranges[std::string(stage)] = {};
    std::mutex mutex;

    PipelineOptions options;
    options.pbn_period = pbn_period;
    options.hook = [&](std::string_view stage, std::span<double> values) {
        if (values.empty())
            return;
        const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
        std::lock_guard lock(mutex);
        Range& r = ranges.find(stage)->second;
        r.lo = std::min(r.lo, *lo);
        r.hi = std::max(r.hi, *hi);
    };
    for (const RawFrame& raw : frames)
        denoise_pipeline(raw, fpn, pg, config, options);

    QPlan plan;
    for (const auto& [stage, r] : ranges) {
        QFormat q;
        q.is_signed = r.lo < 0.0;
        const double extent = headroom * std::max(std::abs(r.lo), std::abs(r.hi));
        // Smallest integer width whose range covers the extent.
        int int_bits = 0;
        while (int_bits < q.total_bits && std::ldexp(1.0, int_bits) <= extent)
            ++int_bits;
        q.frac_bits = std::clamp(q.total_bits - (q.is_signed ? 1 : 0) - int_bits, 0, q.total_bits - 1);
        plan[stage] = q;
    }
    return plan;
}

FixedRunResult run_pipeline_fixed(const RawFrame& raw, const FpnMap& fpn, const PgParams& pg,
                                  const DenoiseConfig& config, const QPlan& plan, int pbn_period)
{
    for (auto stage : kQuantStages) {
        const auto it = plan.find(stage);
        if (it == plan.end())
            fail(ErrorKind::Argument, "qplan has no format for stage '" + std::string(stage) + "'");
        it->second.validate();
    }
    if (std::fegetround() != FE_TONEAREST)
        fail(ErrorKind::Argument, "fixed-point simulation needs the round-to-nearest FP mode");

    PipelineOptions float_options;
    float_options.pbn_period = pbn_period;
    const PipelineResult reference = denoise_pipeline(raw, fpn, pg, config, float_options);

    FixedRunResult result{reference.output, reference.output, 0.0, {}};
    for (auto stage : kQuantStages)
        result.saturations[std::string(stage)] = 0;
    std::mutex mutex;

    PipelineOptions fixed_options;
    fixed_options.pbn_period = pbn_period;
    fixed_options.hook = [&](std::string_view stage, std::span<double> values) {
        const QFormat& q = plan.find(stage)->second;
        std::size_t saturated = 0;
        for (double& v : values) {
            const Quantized r = quantize_value(v, q);
            v = r.value;
            saturated += r.saturated ? 1 : 0;
        }
        std::lock_guard lock(mutex);
        result.saturations.find(stage)->second += saturated;
    };
    result.fixed_output = denoise_pipeline(raw, fpn, pg, config, fixed_options).output;

    const QFormat& out_q = plan.find("output")->second;
    std::vector<double> rounded(reference.output.samples().begin(), reference.output.samples().end());
    for (double& v : rounded)
        v = quantize_value(v, out_q).value;
    result.float_output = reference.output.with_samples(std::move(rounded), "float_output_quantized");
    result.psnr_vs_float = psnr(result.float_output, result.fixed_output, static_cast<double>(raw.full_scale()));
    return result;
}

} // namespace endonoise
