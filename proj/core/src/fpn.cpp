#include "endonoise/fpn.hpp"

#include "endonoise/error.hpp"
#include "endonoise/frame_io.hpp"
#include "endonoise/pbn.hpp"

#include <bit>
#include <cmath>
#include <cstring>

namespace endonoise {

namespace {

constexpr char kFpnMagic[8] = {'F', 'P', 'N', 'M', 'A', 'P', '0', '1'};

std::size_t distinct_count(std::span<const double> values)
{
    std::vector<double> seen;
    for (double v : values) {
        bool found = false;
        for (double s : seen)
            if (std::abs(s - v) <= 1e-12 * std::max(std::abs(s), std::abs(v)))
                found = true;
        if (!found)
            seen.push_back(v);
    }
    return seen.size();
}

void append_plane(std::vector<char>& out, std::span<const float> plane)
{
    for (float v : plane) {
        const auto bits = std::bit_cast<std::uint32_t>(v);
        for (int b = 0; b < 4; ++b)
            out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFFu));
    }
}

std::vector<float> read_plane(std::span<const char> bytes, std::size_t offset, std::size_t count)
{
    std::vector<float> plane(count);
    for (std::size_t i = 0; i < count; ++i)
        plane[i] = std::bit_cast<float>(io::read_u32_le(bytes, offset + 4 * i));
    return plane;
}

} // namespace

FpnMap::FpnMap(int width, int height, std::vector<float> slope, std::vector<float> offset,
               double fit_residual_rms, std::vector<CalibrationPoint> points, std::string sensor_id)
    : width_(width), height_(height), slope_(std::move(slope)), offset_(std::move(offset)),
      fit_residual_rms_(fit_residual_rms), points_(std::move(points)), sensor_id_(std::move(sensor_id))
{
    if (width_ <= 0 || height_ <= 0)
        fail(ErrorKind::Argument, "FPN map dimensions must be positive");
    const auto n = static_cast<std::size_t>(width_) * height_;
    if (slope_.size() != n || offset_.size() != n)
        fail(ErrorKind::Argument, "FPN map planes do not match the declared shape");
    if (!(fit_residual_rms_ >= 0.0))
        fail(ErrorKind::Argument, "FPN fit residual must be >= 0");
    std::vector<double> u;
    for (const auto& p : points_)
        u.push_back(p.exposure_product());
    if (distinct_count(u) < 2)
        fail(ErrorKind::Argument, "FPN map needs >= 2 distinct gain*exposure calibration points");
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(slope_[i]) || !std::isfinite(offset_[i]))
            fail(ErrorKind::Argument, "FPN map contains a non-finite value");
}

FpnMap FpnMap::zero(int width, int height)
{
    return uniform(width, height, 0.0f, 0.0f);
}

FpnMap FpnMap::uniform(int width, int height, float slope, float offset)
{
    const auto n = static_cast<std::size_t>(std::max(width, 0)) * std::max(height, 0);
    return FpnMap(width, height, std::vector<float>(n, slope), std::vector<float>(n, offset), 0.0,
                  {{1.0, 1.0}, {1.0, 2.0}});
}

FloatFrame predict_fpn(const FpnMap& map, double analog_gain, double exposure_time_ms)
{
    if (!(analog_gain >= 1.0))
        fail(ErrorKind::Argument, "analog gain must be >= 1");
    if (!(exposure_time_ms > 0.0))
        fail(ErrorKind::Argument, "exposure time must be > 0");
    const double u = analog_gain * exposure_time_ms;
    std::vector<double> out(map.slope().size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = static_cast<double>(map.slope()[i]) * u + static_cast<double>(map.offset()[i]);
    return FloatFrame(map.width(), map.height(), std::move(out), "fpn_prediction");
}

FloatFrame remove_fpn(const FloatFrame& frame, const FpnMap& map, double analog_gain, double exposure_time_ms)
{
    if (frame.width() != map.width() || frame.height() != map.height())
        fail(ErrorKind::Argument, "FPN map shape does not match the frame");
    const FloatFrame fpn = predict_fpn(map, analog_gain, exposure_time_ms);
    std::vector<double> out(frame.samples().begin(), frame.samples().end());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] -= fpn.samples()[i];
    return frame.with_samples(std::move(out), "fpn_removed");
}

FloatFrame remove_fpn(const RawFrame& frame, const FpnMap& map)
{
    return remove_fpn(FloatFrame::from_raw(frame, true), map, frame.meta().analog_gain,
                      frame.meta().exposure_time_ms);
}

LineFit fit_line(std::span<const double> u, std::span<const double> y)
{
    if (u.size() != y.size() || u.empty())
        fail(ErrorKind::Argument, "line fit needs matching, non-empty inputs");
    const double n = static_cast<double>(u.size());
    double u_mean = 0.0;
    double y_mean = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        u_mean += u[i];
        y_mean += y[i];
    }
    u_mean /= n;
    y_mean /= n;
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        sxx += (u[i] - u_mean) * (u[i] - u_mean);
        sxy += (u[i] - u_mean) * (y[i] - y_mean);
    }
    if (!(sxx > 0.0))
        fail(ErrorKind::RankDeficient, "line fit needs >= 2 distinct abscissae");
    LineFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = y_mean - fit.slope * u_mean;
    return fit;
}

FpnMap calibrate_fpn(std::span<const DarkSet> sets, double pbn_theta, int pbn_period)
{
    if (sets.empty())
        fail(ErrorKind::RankDeficient, "FPN calibration needs dark sets at >= 2 distinct gain*exposure values");
    const int width = sets.front().frames.width();
    const int height = sets.front().frames.height();
    std::vector<double> u;
    std::vector<CalibrationPoint> points;
    for (std::size_t s = 0; s < sets.size(); ++s) {
        const DarkSet& set = sets[s];
        if (set.frames.width() != width || set.frames.height() != height)
            fail(ErrorKind::Argument, "dark set " + std::to_string(s) + " differs in shape from set 0");
        if (!(set.analog_gain >= 1.0) || !(set.exposure_time_ms > 0.0))
            fail(ErrorKind::Argument, "dark set " + std::to_string(s) + " has invalid gain/exposure");
        u.push_back(set.analog_gain * set.exposure_time_ms);
        points.push_back({set.analog_gain, set.exposure_time_ms});
    }
    if (distinct_count(u) < 2)
        fail(ErrorKind::RankDeficient, "FPN calibration needs dark sets at >= 2 distinct gain*exposure values");

    const std::size_t n = static_cast<std::size_t>(width) * height;
    std::vector<std::vector<double>> means;
    means.reserve(sets.size());
    for (std::size_t s = 0; s < sets.size(); ++s) {
        std::vector<double> acc(n, 0.0);
        for (const RawFrame& raw : sets[s].frames) {
            const FloatFrame frame = FloatFrame::from_raw(raw, true);
            PbnEstimate est;
            try {
                est = refine_pbn_amplitude(frame, estimate_pbn(frame, pbn_theta, pbn_period));
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::EstimationFailed)
                    throw;
                fail(ErrorKind::EstimationFailed, "dark set " + std::to_string(s) + ": " + e.what());
            }
            const FloatFrame clean = remove_pbn(frame, est);
            for (std::size_t i = 0; i < n; ++i)
                acc[i] += clean.samples()[i];
        }
        const double inv = 1.0 / static_cast<double>(sets[s].frames.size());
        for (double& v : acc)
            v *= inv;
        means.push_back(std::move(acc));
    }

    const double count = static_cast<double>(sets.size());
    double u_mean = 0.0;
    for (double v : u)
        u_mean += v;
    u_mean /= count;
    double sxx = 0.0;
    for (double v : u)
        sxx += (v - u_mean) * (v - u_mean);

    std::vector<float> slope(n);
    std::vector<float> offset(n);
    double sq_residual = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double y_mean = 0.0;
        for (std::size_t s = 0; s < sets.size(); ++s)
            y_mean += means[s][i];
        y_mean /= count;
        double sxy = 0.0;
        for (std::size_t s = 0; s < sets.size(); ++s)
            sxy += (u[s] - u_mean) * (means[s][i] - y_mean);
        const double k = sxy / sxx;
        const double b = y_mean - k * u_mean;
        slope[i] = static_cast<float>(k);
        offset[i] = static_cast<float>(b);
        for (std::size_t s = 0; s < sets.size(); ++s) {
            const double r = means[s][i] - (k * u[s] + b);
            sq_residual += r * r;
        }
    }
    const double rms = std::sqrt(sq_residual / (count * static_cast<double>(n)));
    return FpnMap(width, height, std::move(slope), std::move(offset), rms, std::move(points),
                  sets.front().frames.meta().sensor_id);
}

std::vector<char> encode_fpn(const FpnMap& map)
{
    nlohmann::json points = nlohmann::json::array();
    for (const auto& p : map.calibration_points())
        points.push_back({{"analog_gain", p.analog_gain}, {"exposure_time_ms", p.exposure_time_ms}});
    const nlohmann::json header = {
        {"width", map.width()},
        {"height", map.height()},
        {"fit_residual_rms", map.fit_residual_rms()},
        {"calibration_points", points},
        {"sensor_id", map.sensor_id()},
    };
    const std::string text = header.dump();
    std::vector<char> out(kFpnMagic, kFpnMagic + 8);
    io::append_u32_le(out, static_cast<std::uint32_t>(text.size()));
    out.insert(out.end(), text.begin(), text.end());
    out.reserve(out.size() + map.slope().size() * 8);
    append_plane(out, map.slope());
    append_plane(out, map.offset());
    return out;
}

FpnMap decode_fpn(std::span<const char> bytes)
{
    if (bytes.size() < 12 || std::memcmp(bytes.data(), kFpnMagic, 8) != 0)
        fail(ErrorKind::Format, "not an FPN map (bad magic)");
    const std::uint32_t header_len = io::read_u32_le(bytes, 8);
    if (bytes.size() < 12 + static_cast<std::size_t>(header_len))
        fail(ErrorKind::Format, "truncated FPN map header");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.begin() + 12, bytes.begin() + 12 + header_len);
        const int width = header.at("width").get<int>();
        const int height = header.at("height").get<int>();
        if (width <= 0 || height <= 0)
            fail(ErrorKind::Format, "bad FPN map shape");
        std::vector<CalibrationPoint> points;
        for (const auto& p : header.at("calibration_points"))
            points.push_back({p.at("analog_gain").get<double>(), p.at("exposure_time_ms").get<double>()});
        const std::size_t n = static_cast<std::size_t>(width) * height;
        const std::size_t offset = 12 + header_len;
        if (bytes.size() != offset + 8 * n)
            fail(ErrorKind::Format, "FPN map payload size mismatch");
        return FpnMap(width, height, read_plane(bytes, offset, n), read_plane(bytes, offset + 4 * n, n),
                      header.at("fit_residual_rms").get<double>(), std::move(points),
                      header.value("sensor_id", std::string{}));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Format, std::string("malformed FPN map header: ") + e.what());
    }
}

void save_fpn(const FpnMap& map, const std::filesystem::path& path)
{
    io::write_file(path, encode_fpn(map));
}

FpnMap load_fpn(const std::filesystem::path& path)
{
    return decode_fpn(io::read_file(path));
}

} // namespace endonoise
