#pragma once

#include "endonoise/raw_frame.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <vector>

namespace endonoise {

struct PbnEstimate {
    double kappa = 0.0;
    int phase = 0;
    int period = 4;
    double theta = 0.0;
    std::vector<std::optional<double>> per_row_kappa; // empty where a row had too few flat pixels
    int rows_used = 0;
    double flat_fraction = 0.0;
};

// Flat-region threshold: four times the expected noise sigma, never below 8 DN.
double default_pbn_theta(double expected_sigma) noexcept;

// A row contributes to kappa only with at least this many flat pixels.
int min_flat_pixels(int width) noexcept;

/// Estimates the amplitude and phase of vertical square-wave banding.
///
/// With d = period / 2 (the same-colour neighbour two columns away for the
/// usual 4-pixel period), pixel i of row y is flat when
/// |I(i+d) - I(i-d)| < theta. On flat pixels the second difference
/// |I(i-d) + I(i+d) - 2 I(i)| equals 4 kappa, so each row yields
///   kappa_y = sum(|second difference| * w) / (4 * sum(w))
/// and kappa is the mean over rows with enough flat pixels. The phase is the
/// square wave that best agrees with the signs of I(i+d) - I(i) over all flat
/// pixels; ties resolve to the lowest phase.
///
/// Throws ErrorKind::EstimationFailed when no row has enough flat pixels.
PbnEstimate estimate_pbn(const FloatFrame& frame, double theta, int period = 4);
PbnEstimate estimate_pbn(const RawFrame& frame, double theta, int period = 4);

/// Re-estimates kappa for the phase already in `estimate` as the signed mean
/// of -sign(i) * (I(i-d) + I(i+d) - 2 I(i)) / 4 over the same flat pixels.
/// Unlike the absolute value above, this is unbiased under zero-mean noise, so
/// calibration uses it where per-frame noise dominates the banding. A negative
/// result flips the phase by half a period.
PbnEstimate refine_pbn_amplitude(const FloatFrame& frame, PbnEstimate estimate);

// output(x, y) = input(x, y) - kappa * sign(x)
FloatFrame remove_pbn(const FloatFrame& frame, const PbnEstimate& estimate);
FloatFrame remove_pbn(const RawFrame& frame, const PbnEstimate& estimate);

nlohmann::json to_json(const PbnEstimate& estimate);

} // namespace endonoise
