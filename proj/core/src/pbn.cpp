#include "endonoise/pbn.hpp"

#include "endonoise/error.hpp"
#include "endonoise/noise_synth.hpp"
#include "parallel.hpp"

#include <algorithm>
#include <cmath>

namespace endonoise {

namespace {

struct RowStats {
    double abs_second_diff = 0.0;
    long long flat = 0;
    long long candidates = 0;
    std::vector<long long> votes; // per column residue, + means the positive half-wave
};

RowStats scan_row(const double* row, int width, int d, int period, double theta)
{
    RowStats s;
    s.votes.assign(static_cast<std::size_t>(period), 0);
    for (int i = d; i + d < width; ++i) {
        ++s.candidates;
        const double left = row[i - d];
        const double right = row[i + d];
        if (!(std::abs(right - left) < theta))
            continue;
        ++s.flat;
        s.abs_second_diff += std::abs(left + right - 2.0 * row[i]);
        // I(i+d) - I(i) = -2 kappa s(i) on flat ground.
        const double step = right - row[i];
        if (step < 0.0)
            ++s.votes[i % period];
        else if (step > 0.0)
            --s.votes[i % period];
    }
    return s;
}

} // namespace

double default_pbn_theta(double expected_sigma) noexcept
{
    return std::max(8.0, 4.0 * expected_sigma);
}

int min_flat_pixels(int width) noexcept
{
    return std::max(16, width / 16);
}

PbnEstimate estimate_pbn(const FloatFrame& frame, double theta, int period)
{
    if (!(theta > 0.0))
        fail(ErrorKind::Argument, "PBN threshold theta must be > 0");
    if (period < 2 || period % 2 != 0)
        fail(ErrorKind::Argument, "PBN period must be even and >= 2");
    if (frame.width() < 2 * period)
        fail(ErrorKind::Argument, "frame too narrow for PBN estimation");

    const int width = frame.width();
    const int height = frame.height();
    const int d = period / 2;
    const int needed = min_flat_pixels(width);

    std::vector<RowStats> rows(static_cast<std::size_t>(height));
    detail::parallel_for(rows.size(), [&](std::size_t y) {
        rows[y] = scan_row(frame.samples().data() + y * width, width, d, period, theta);
    }, 16);

    PbnEstimate est;
    est.period = period;
    est.theta = theta;
    est.per_row_kappa.resize(rows.size());
    std::vector<long long> votes(static_cast<std::size_t>(period), 0);
    long long flat = 0;
    long long candidates = 0;
    double kappa_sum = 0.0;
    for (std::size_t y = 0; y < rows.size(); ++y) {
        const RowStats& r = rows[y];
        flat += r.flat;
        candidates += r.candidates;
        for (int k = 0; k < period; ++k)
            votes[k] += r.votes[k];
        if (r.flat >= needed) {
            const double ky = r.abs_second_diff / (4.0 * static_cast<double>(r.flat));
            est.per_row_kappa[y] = ky;
            kappa_sum += ky;
            ++est.rows_used;
        }
    }
    est.flat_fraction = candidates > 0 ? static_cast<double>(flat) / static_cast<double>(candidates) : 0.0;
    if (est.rows_used == 0)
        fail(ErrorKind::EstimationFailed,
             "no row has the " + std::to_string(needed) + " flat pixels needed to estimate banding");
    est.kappa = kappa_sum / est.rows_used;

    long long best_score = 0;
    for (int p = 0; p < period; ++p) {
        long long score = 0;
        for (int r = 0; r < period; ++r)
            score += votes[r] * pbn_sign(r, period, p);
        if (p == 0 || score > best_score) {
            best_score = score;
            est.phase = p;
        }
    }
    return est;
}

PbnEstimate refine_pbn_amplitude(const FloatFrame& frame, PbnEstimate estimate)
{
    const int period = estimate.period;
    const int d = period / 2;
    const int width = frame.width();
    double sum = 0.0;
    long long flat = 0;
    for (int y = 0; y < frame.height(); ++y) {
        const double* row = frame.samples().data() + static_cast<std::size_t>(y) * width;
        for (int i = d; i + d < width; ++i) {
            if (!(std::abs(row[i + d] - row[i - d]) < estimate.theta))
                continue;
            sum -= pbn_sign(i, period, estimate.phase) * (row[i - d] + row[i + d] - 2.0 * row[i]);
            ++flat;
        }
    }
    if (flat == 0)
        fail(ErrorKind::EstimationFailed, "no flat pixels to refine the banding amplitude");
    const double kappa = sum / (4.0 * static_cast<double>(flat));
    estimate.kappa = std::abs(kappa);
    if (kappa < 0.0)
        estimate.phase = (estimate.phase + d) % period;
    return estimate;
}

PbnEstimate estimate_pbn(const RawFrame& frame, double theta, int period)
{
    return estimate_pbn(FloatFrame::from_raw(frame), theta, period);
}

FloatFrame remove_pbn(const FloatFrame& frame, const PbnEstimate& estimate)
{
    PbnParams pbn{estimate.kappa, estimate.period, estimate.phase};
    const std::vector<double> pattern = pbn_pattern(frame.width(), pbn);
    std::vector<double> out(frame.samples().begin(), frame.samples().end());
    const int width = frame.width();
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] -= pattern[i % width];
    return frame.with_samples(std::move(out), "pbn_removed");
}

FloatFrame remove_pbn(const RawFrame& frame, const PbnEstimate& estimate)
{
    return remove_pbn(FloatFrame::from_raw(frame), estimate);
}

nlohmann::json to_json(const PbnEstimate& estimate)
{
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& k : estimate.per_row_kappa)
        rows.push_back(k ? nlohmann::json(*k) : nlohmann::json(nullptr));
    return {
        {"kappa", estimate.kappa},
        {"phase", estimate.phase},
        {"period", estimate.period},
        {"theta", estimate.theta},
        {"rows_used", estimate.rows_used},
        {"flat_fraction", estimate.flat_fraction},
        {"per_row_kappa", rows},
    };
}

} // namespace endonoise
