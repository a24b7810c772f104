#pragma once

#include "endonoise/fpn.hpp"
#include "endonoise/raw_frame.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace endonoise {

/// Square-wave vertical banding. Column x carries +kappa while
/// ((x - phase) mod period) < period / 2 and -kappa otherwise.
struct PbnParams {
    double kappa = 0.0;
    int period = 4;
    int phase = 0;

    void validate() const;
    bool operator==(const PbnParams&) const = default;
};

std::vector<double> pbn_pattern(int width, const PbnParams& pbn);

// +1 / -1 sign of the banding square wave at column x.
inline int pbn_sign(int x, int period, int phase) noexcept
{
    const int r = ((x - phase) % period + period) % period;
    return r < period / 2 ? 1 : -1;
}

struct NoiseModelParams {
    // Shot noise is a * Poisson(I / a): mean I, variance a * I. a = 0 disables it.
    double shot_gain_a = 1.0;
    double read_sigma = 0.0;
    // Uniform noise on [-step/2, step/2] ahead of ADC rounding; 0 disables it.
    double quant_step = 1.0;
    std::shared_ptr<const FpnMap> fpn;
    std::optional<std::string> fpn_path;
    std::optional<PbnParams> pbn;
    std::uint64_t seed = 0;

    void validate() const;
};

// JSON form: {"shot_gain_a", "read_sigma", "quant_step", "seed",
//             "pbn": {"kappa", "period", "phase"} (optional),
//             "fpn_path": "<file.fpn>" (optional, relative to the document)}
nlohmann::json to_json(const NoiseModelParams& params);
NoiseModelParams noise_params_from_json(const nlohmann::json& doc,
                                        const std::filesystem::path& base_dir = {});

/// Applies the composite sensor model to a clean frame:
///   x = black_level + a*Poisson(I/a) + N(0, sigma^2) + U(-step/2, step/2)
///       + K*gain*t + B + pbn(x)
/// rounded to the nearest integer and clamped to [0, 2^bit_depth - 1].
/// Gain, exposure, bit depth, black level and frame index come from `meta`;
/// per-pixel draws are keyed by (seed, frame_index, pixel index).
RawFrame synthesize_noise(const FloatFrame& clean, const NoiseModelParams& params,
                          const CaptureMeta& meta);

} // namespace endonoise
