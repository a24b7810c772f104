#pragma once

#include "endonoise/fpn.hpp"
#include "endonoise/metrics.hpp"
#include "endonoise/noise_synth.hpp"
#include "endonoise/pg_calib.hpp"
#include "endonoise/raw_frame.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace endonoise {

// Capture settings and sensor behaviour emulating one gain class.
struct GainClassSpec {
    GainClass gain_class = GainClass::Low;
    double analog_gain = 1.0;
    double exposure_time_ms = 20.0;
    double shot_gain_a = 0.5;
    double read_sigma = 2.0;
    double kappa_min = 18.0;
    double kappa_max = 20.0;
};

struct SuiteConfig {
    std::uint64_t seed = 1;
    int width = 128;
    int height = 128;
    int bit_depth = 10;
    int black_level = 64;
    BayerPattern pattern = BayerPattern::RGGB;
    std::string sensor_id = "synthetic-endoscope";
    int pbn_period = 4;
    std::size_t pairs_per_class = 100;
    std::size_t dark_frames = 128;
    std::size_t flat_frames = 64;
    std::vector<double> flat_levels = {100.0, 300.0, 600.0};
    double fpn_slope_max = 0.2;  // DN per (gain * ms)
    double fpn_offset_max = 16.0; // DN
    GainThresholds thresholds;
    std::array<GainClassSpec, 3> classes = {{
        {GainClass::Low, 1.0, 20.0, 0.5, 2.0, 18.0, 20.0},
        {GainClass::Medium, 2.0, 15.0, 1.0, 4.0, 24.0, 26.0},
        {GainClass::Large, 4.0, 10.0, 2.0, 8.0, 35.0, 37.0},
    }};

    void validate() const;
};

nlohmann::json to_json(const SuiteConfig& config);
// Missing keys keep their defaults.
SuiteConfig suite_config_from_json(const nlohmann::json& doc);

// Flat-pixel thresholds covering the noisiest dark or flat capture of the suite.
double suite_dark_theta(const SuiteConfig& config);
double suite_flat_theta(const SuiteConfig& config, const GainClassSpec& spec);

CaptureMeta suite_meta(const SuiteConfig& config, const GainClassSpec& spec, std::uint64_t frame_index);

/// Piecewise-smooth mosaic scene in DN above black level: a lit gradient with
/// a few discs and rectangles, scaled per colour channel. Values stay in
/// roughly [40, 700].
FloatFrame synthetic_scene(int width, int height, BayerPattern pattern, std::uint64_t seed,
                           std::uint64_t index);

// K uniform in [0, slope_max], B uniform in [0, offset_max], independent per pixel.
FpnMap random_fpn(int width, int height, double slope_max, double offset_max, std::uint64_t seed,
                  const std::string& sensor_id);

NoiseModelParams class_noise(const SuiteConfig& config, const GainClassSpec& spec,
                             std::shared_ptr<const FpnMap> fpn, double kappa, int phase, std::uint64_t seed);

// Two dark stacks per gain class, at t and 2t.
std::vector<DarkSet> synthetic_dark_sets(const SuiteConfig& config, std::shared_ptr<const FpnMap> fpn);

// One flat stack per configured level, at the class's gain and exposure.
std::vector<FrameStack> synthetic_flat_sets(const SuiteConfig& config, const GainClassSpec& spec,
                                            std::shared_ptr<const FpnMap> fpn);

/// pairs_per_class noisy captures per class against their exact clean scene
/// (provenance "synthetic_truth"). Ids are "<class>_<nnnn>".
std::vector<TestPair> synthetic_pairs(const SuiteConfig& config, std::shared_ptr<const FpnMap> fpn);

} // namespace endonoise
