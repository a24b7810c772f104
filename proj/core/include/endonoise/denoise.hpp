#pragma once

#include "endonoise/fpn.hpp"
#include "endonoise/pbn.hpp"
#include "endonoise/pg_calib.hpp"
#include "endonoise/raw_frame.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace endonoise {

enum class SmootherKind { Gaussian, Nlm };

std::string_view to_string(SmootherKind kind) noexcept;
SmootherKind parse_smoother(std::string_view name);

struct DenoiseConfig {
    PgEntry pg{1.0, 0.0};
    SmootherKind smoother = SmootherKind::Nlm;
    // Multiplier on the stabilized-domain noise std (NLM) or kernel sigma (Gaussian).
    double strength = 1.0;
    int nlm_patch_radius = 1;
    int nlm_search_radius = 5;
    double gaussian_sigma = 1.0;
    bool process_per_bayer_phase = true;
    // Output is clamped below at -headroom; the pipeline sets it to the black level.
    double headroom = 0.0;

    void validate() const;
};

nlohmann::json to_json(const DenoiseConfig& config);
// Missing keys keep their defaults.
DenoiseConfig denoise_config_from_json(const nlohmann::json& doc);

// Observer for intermediate values, keyed by stage name. It may rewrite the
// values in place (the fixed-point simulation quantizes through it).
using ValueHook = std::function<void(std::string_view stage, std::span<double> values)>;

/// Generalized Anscombe transform: z = (2/a) sqrt(max(a x + 3/8 a^2 + b, 0)).
double vst_forward(double x, double a, double b);
/// Algebraic inverse: x = (a/4) z^2 - 3/8 a - b/a.
double vst_inverse(double z, double a, double b);

FloatFrame vst_forward(const FloatFrame& frame, double a, double b);
FloatFrame vst_inverse(const FloatFrame& frame, double a, double b);

// In-place smoothers on a single plane in the stabilized domain.
std::vector<double> gaussian_smooth(std::span<const double> plane, int width, int height, double sigma);
std::vector<double> nlm_smooth(std::span<const double> plane, int width, int height, double noise_sigma,
                               int patch_radius, int search_radius);

/// Removes residual signal-dependent noise: per Bayer phase (when enabled)
/// stabilize, smooth, invert, re-interleave.
FloatFrame denoise_residual(const FloatFrame& frame, const DenoiseConfig& config,
                            const ValueHook& hook = {});

struct PipelineStages {
    FloatFrame noisy;       // black-level corrected input
    FloatFrame pbn_removed;
    FloatFrame fpn_removed;
    FloatFrame denoised;
};

struct PipelineOptions {
    bool retain_stages = false;
    int pbn_period = 4;
    std::optional<double> pbn_theta; // default: from the expected noise level
    // Replaces the classical residual stage (used by the external-denoiser hook).
    std::function<FloatFrame(const FloatFrame&)> residual_override;
    ValueHook hook;
};

struct PipelineResult {
    FloatFrame output;
    std::optional<PipelineStages> stages;
    PbnEstimate pbn;
    std::vector<std::string> warnings;
};

/// Black-level correction, then banding removal, FPN removal (using the
/// frame's gain/exposure) and residual denoising. A banding estimate that
/// fails degrades to kappa = 0 with a warning.
PipelineResult denoise_pipeline(const RawFrame& raw, const FpnMap& fpn, const PgParams& pg,
                                const DenoiseConfig& config, const PipelineOptions& options = {});

/// File-exchange hook for an externally trained residual denoiser. For frame
/// `index` it writes NNNN_input.pgm (+ sidecar) into `dir`, then waits for
/// NNNN_output.pgm of the same shape. Values travel with the black level
/// added back so the files look like ordinary raw frames.
class ExternalDenoiser {
public:
    ExternalDenoiser(std::filesystem::path dir, std::chrono::milliseconds timeout,
                     std::chrono::milliseconds poll_interval = std::chrono::milliseconds(20));

    FloatFrame operator()(const FloatFrame& input, std::size_t index, const CaptureMeta& meta) const;

    static std::filesystem::path input_path(const std::filesystem::path& dir, std::size_t index);
    static std::filesystem::path output_path(const std::filesystem::path& dir, std::size_t index);

private:
    std::filesystem::path dir_;
    std::chrono::milliseconds timeout_;
    std::chrono::milliseconds poll_;
};

} // namespace endonoise
