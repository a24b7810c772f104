#pragma once

#include "endonoise/fpn.hpp"
#include "endonoise/raw_frame.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace endonoise {

// Variance line var = a * mean + b for one analog gain.
struct PgEntry {
    double a = 0.0;
    double b = 0.0;

    double variance_at(double mean) const noexcept { return a * mean + b; }
    bool operator==(const PgEntry&) const = default;
};

class PgParams {
public:
    PgParams() = default;

    void set(double analog_gain, PgEntry entry);
    bool empty() const noexcept { return entries_.empty(); }
    const std::map<double, PgEntry>& entries() const noexcept { return entries_; }

    // Exact entry for `analog_gain`, or a linear blend of the two nearest
    // entries when interpolation is allowed.
    PgEntry lookup(double analog_gain, bool interpolate = true) const;

    std::string source;

private:
    std::map<double, PgEntry> entries_;
};

nlohmann::json to_json(const PgParams& params);
PgParams pg_params_from_json(const nlohmann::json& doc);

struct PgCalibration {
    double analog_gain = 1.0;
    PgEntry entry;
    std::size_t samples = 0;         // pooled (mean, variance) pairs used in the fit
    std::size_t discarded = 0;       // pairs dropped near full scale
    std::vector<double> level_means; // global mean of each flat set after correction
    double slope_stderr = 0.0;
    std::string note;                // records clamping of a or b
};

/// Fits var = a * mean + b from flat-field stacks at one analog gain.
/// Every frame is black-level corrected, de-banded and FPN-corrected; per
/// pixel the temporal mean and unbiased temporal variance form one sample.
/// Samples whose mean lies within 2% of full scale are discarded.
PgCalibration calibrate_pg(std::span<const FrameStack> flat_sets, const FpnMap& fpn,
                           double pbn_theta, int pbn_period = 4);

struct VarianceLineFit {
    double a = 0.0;
    double b = 0.0;
    double slope_stderr = 0.0;
};
VarianceLineFit fit_variance_line(std::span<const double> means, std::span<const double> variances);

struct CropRect {
    int x = 0;
    int y = 0;
    int width = 0;
    int height = 0;
    std::size_t source = 0;
};

struct Augmentation {
    bool flip_horizontal = false;
    int rotate_quarter_turns = 0; // clockwise
    double contrast = 1.0;
};

struct TrainingPairOptions {
    int crop_width = 128;
    int crop_height = 128;
    int bit_depth = 16;
    BayerPattern source_pattern = BayerPattern::RGGB;
    double exposure_time_ms = 1.0;
    std::string sensor_id = "synthetic";
    bool interpolate = true;
};

struct TrainingPair {
    RawFrame clean;
    RawFrame noisy;
    CropRect crop;
    Augmentation augmentation;
};

// Bayer layout after flipping and rotating a mosaic whose top-left tile is `pattern`.
BayerPattern transform_pattern(BayerPattern pattern, const Augmentation& aug);

/// Generates pair `index` in memory: random crop (even offsets), optional
/// horizontal flip, clockwise quarter turns and contrast scale in [0.6, 1.4];
/// the clean crop is rounded to the integer grid and the noisy frame adds
/// a*Poisson(I/a) + N(0, b) on top of it.
TrainingPair make_training_pair(std::span<const FloatFrame> clean_frames, PgEntry entry,
                                double analog_gain, std::size_t index, std::uint64_t seed,
                                const TrainingPairOptions& options);

/// Writes `count` pairs plus manifest.json into `out_dir` and returns the manifest.
nlohmann::json make_training_pairs(std::span<const FloatFrame> clean_frames, const PgParams& params,
                                   double analog_gain, std::size_t count, std::uint64_t seed,
                                   const std::filesystem::path& out_dir,
                                   const TrainingPairOptions& options = {});

} // namespace endonoise
