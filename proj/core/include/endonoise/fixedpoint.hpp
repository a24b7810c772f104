#pragma once

#include "endonoise/denoise.hpp"
#include "endonoise/fpn.hpp"
#include "endonoise/pg_calib.hpp"
#include "endonoise/raw_frame.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>

namespace endonoise {

struct QFormat {
    int total_bits = 12;
    int frac_bits = 0;
    bool is_signed = true;

    void validate() const;
    double step() const noexcept;
    std::int64_t min_code() const noexcept;
    std::int64_t max_code() const noexcept;
    double max_value() const noexcept { return static_cast<double>(max_code()) * step(); }
    double min_value() const noexcept { return static_cast<double>(min_code()) * step(); }

    bool operator==(const QFormat&) const = default;
};

struct Quantized {
    std::int64_t code = 0;
    double value = 0.0;
    bool saturated = false;
};

// Round half to even onto the grid, saturating at the range ends.
Quantized quantize_value(double x, const QFormat& q);

// Stages whose values pass through the quantizer, in pipeline order.
inline constexpr std::array<std::string_view, 11> kQuantStages = {
    "input", "pbn_kappa", "pbn_removed", "fpn_slope", "fpn_offset", "fpn_removed",
    "pg_a",  "pg_b",      "vst",         "smoothed",  "output",
};

using QPlan = std::map<std::string, QFormat, std::less<>>;

// {stage: {"frac_bits": n, "signed": bool}}; total_bits is always 12.
nlohmann::json to_json(const QPlan& plan);
QPlan qplan_from_json(const nlohmann::json& doc);

/// Range-profiling pass: runs the float pipeline on `frames`, records each
/// stage's extreme values and gives every stage as many fractional bits as
/// its range (times `headroom`) allows.
QPlan profile_qplan(std::span<const RawFrame> frames, const FpnMap& fpn, const PgParams& pg,
                    const DenoiseConfig& config, double headroom = 1.25, int pbn_period = 4);

struct FixedRunResult {
    FloatFrame fixed_output;
    FloatFrame float_output;
    double psnr_vs_float = 0.0;
    std::map<std::string, std::size_t, std::less<>> saturations;
};

/// Runs the pipeline twice: once in floating point and once with every
/// stage's values and parameters quantized by `plan`. The float output is
/// rounded to the "output" format before comparison, so the PSNR measures
/// the loss from quantizing the intermediates.
FixedRunResult run_pipeline_fixed(const RawFrame& raw, const FpnMap& fpn, const PgParams& pg,
                                  const DenoiseConfig& config, const QPlan& plan, int pbn_period = 4);

} // namespace endonoise
