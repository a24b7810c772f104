#pragma once

#include "endonoise/raw_frame.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace endonoise {

struct CalibrationPoint {
    double analog_gain = 1.0;
    double exposure_time_ms = 1.0;

    double exposure_product() const noexcept { return analog_gain * exposure_time_ms; }
    bool operator==(const CalibrationPoint&) const = default;
};

/// Per-pixel fixed-pattern noise model: dark(x, y) = K(x, y) * gain * t + B(x, y).
/// K is in DN per (gain * ms); B in DN above the frame's black level.
class FpnMap {
public:
    FpnMap(int width, int height, std::vector<float> slope, std::vector<float> offset,
           double fit_residual_rms, std::vector<CalibrationPoint> points,
           std::string sensor_id = {});

    // K = 0, B = 0; used where FPN correction should be a no-op.
    static FpnMap zero(int width, int height);
    static FpnMap uniform(int width, int height, float slope, float offset);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::span<const float> slope() const noexcept { return slope_; }
    std::span<const float> offset() const noexcept { return offset_; }
    double fit_residual_rms() const noexcept { return fit_residual_rms_; }
    const std::vector<CalibrationPoint>& calibration_points() const noexcept { return points_; }
    const std::string& sensor_id() const noexcept { return sensor_id_; }

    bool operator==(const FpnMap&) const = default;

private:
    int width_;
    int height_;
    std::vector<float> slope_;
    std::vector<float> offset_;
    double fit_residual_rms_;
    std::vector<CalibrationPoint> points_;
    std::string sensor_id_;
};

FloatFrame predict_fpn(const FpnMap& map, double analog_gain, double exposure_time_ms);

FloatFrame remove_fpn(const FloatFrame& frame, const FpnMap& map, double analog_gain,
                      double exposure_time_ms);

// Uses the frame's own gain/exposure and subtracts its black level first,
// since B is calibrated relative to the black level.
FloatFrame remove_fpn(const RawFrame& frame, const FpnMap& map);

struct DarkSet {
    FrameStack frames;
    double analog_gain;
    double exposure_time_ms;
};

/// Fits K and B per pixel from dark stacks taken at >= 2 distinct gain*t
/// products. Every frame is black-level corrected and has its periodic
/// banding removed before the per-set temporal average.
FpnMap calibrate_fpn(std::span<const DarkSet> sets, double pbn_theta, int pbn_period = 4);

// Least-squares line through (u_i, y_i); exposed for the property tests.
struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
};
LineFit fit_line(std::span<const double> u, std::span<const double> y);

// `.fpn` container: "FPNMAP01", u32 LE header length, JSON header, K plane,
// B plane (row-major float32 LE).
std::vector<char> encode_fpn(const FpnMap& map);
FpnMap decode_fpn(std::span<const char> bytes);
void save_fpn(const FpnMap& map, const std::filesystem::path& path);
FpnMap load_fpn(const std::filesystem::path& path);

} // namespace endonoise
