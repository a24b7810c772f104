#pragma once

#include "endonoise/denoise.hpp"
#include "endonoise/fpn.hpp"
#include "endonoise/pg_calib.hpp"
#include "endonoise/raw_frame.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace endonoise {

inline constexpr double kPsnrInfinite = std::numeric_limits<double>::infinity();

/// 10 log10(peak^2 / MSE); kPsnrInfinite when the frames are identical.
double psnr(const FloatFrame& reference, const FloatFrame& test, double peak);

struct SsimOptions {
    int window = 8;
    bool gaussian = false;        // uniform window unless set
    double gaussian_sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
};

/// Mean local SSIM over every window position (stride 1, no padding).
double ssim(const FloatFrame& reference, const FloatFrame& test, double peak,
            const SsimOptions& options = {});

nlohmann::json to_json(const SsimOptions& options);

enum class GainClass { Low, Medium, Large };

std::string_view to_string(GainClass cls) noexcept;
GainClass parse_gain_class(std::string_view name);

// gain < low_max -> Low, gain < medium_max -> Medium, otherwise Large.
struct GainThresholds {
    double low_max = 1.5;
    double medium_max = 3.0;

    GainClass classify(double analog_gain) const;
};

struct TestPair {
    std::string id;
    RawFrame noisy;
    FloatFrame clean; // black-level free
    GainClass gain_class = GainClass::Low;
    std::size_t dark_frames = 0;
    std::size_t lit_frames = 0;
};

/// clean = mean(lit) - mean(dark); noisy = lit[sample_index].
TestPair build_test_pair(const FrameStack& dark, const FrameStack& lit, std::size_t sample_index,
                         const GainThresholds& thresholds, std::string id);

void save_test_pairs(std::span<const TestPair> pairs, const std::filesystem::path& dir);
std::vector<TestPair> load_test_pairs(const std::filesystem::path& dir);

inline constexpr std::array<std::string_view, 4> kStageNames = {"noisy", "pbn_removed", "fpn_removed",
                                                                 "denoised"};

struct PairMetrics {
    std::string id;
    GainClass gain_class = GainClass::Low;
    std::array<double, 4> psnr{};
    std::array<double, 4> ssim{};
    std::vector<std::string> warnings;
};

struct StageMeans {
    double psnr_mean = 0.0;
    double ssim_mean = 0.0;
};

struct ClassSummary {
    std::size_t pairs = 0;
    std::array<StageMeans, 4> stages{};
};

struct AblationReport {
    std::size_t pairs = 0;
    std::optional<double> peak; // fixed peak, or per pair 2^bit_depth - 1 when unset
    SsimOptions ssim;
    // Low, Medium, Large, All
    std::array<ClassSummary, 4> classes{};
    std::vector<PairMetrics> per_pair; // sorted by id
};

struct EvaluateOptions {
    std::optional<double> peak;
    SsimOptions ssim;
    int pbn_period = 4;
    std::optional<double> pbn_theta;
    // Optional replacement for the classical residual stage, called with the
    // FPN-corrected frame, the pair index and the pair's capture metadata.
    std::function<FloatFrame(const FloatFrame&, std::size_t, const CaptureMeta&)> residual;
};

AblationReport evaluate_suite(std::span<const TestPair> pairs, const FpnMap& fpn, const PgParams& pg,
                              const DenoiseConfig& config, const EvaluateOptions& options = {});

// Infinite PSNR values are written as the string "inf".
nlohmann::json to_json(const AblationReport& report);
std::string format_report_table(const AblationReport& report);

} // namespace endonoise
