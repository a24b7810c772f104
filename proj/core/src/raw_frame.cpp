#include "endonoise/raw_frame.hpp"

#include "endonoise/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace endonoise {

namespace {

// Colour of the four tile positions (phase index = (y&1)*2 + (x&1)).
constexpr std::array<CfaColor, 4> tile_colors(BayerPattern pattern) noexcept
{
    using enum CfaColor;
    switch (pattern) {
    case BayerPattern::RGGB: return {Red, Green, Green, Blue};
    case BayerPattern::BGGR: return {Blue, Green, Green, Red};
    case BayerPattern::GRBG: return {Green, Red, Blue, Green};
    case BayerPattern::GBRG: return {Green, Blue, Red, Green};
    }
    return {Red, Green, Green, Blue};
}

void check_shape(int width, int height, std::size_t count)
{
    if (width <= 0 || height <= 0)
        fail(ErrorKind::Argument, "frame dimensions must be positive");
    if (width % 2 != 0 || height % 2 != 0)
        fail(ErrorKind::Argument, "frame dimensions must be even (Bayer mosaic), got " +
                                      std::to_string(width) + "x" + std::to_string(height));
    if (count != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
        fail(ErrorKind::Argument, "sample count does not match width x height");
}

std::uint8_t to_display(double v, double black, double white)
{
    const double span = std::max(white - black, 1e-12);
    const double scaled = std::round((v - black) / span * 255.0);
    return static_cast<std::uint8_t>(std::clamp(scaled, 0.0, 255.0));
}

template <class SampleAt>
RgbImage demosaic_impl(int width, int height, BayerPattern pattern, SampleAt&& sample,
                       double black, double white)
{
    RgbImage out{width, height, std::vector<std::uint8_t>(static_cast<std::size_t>(width) * height * 3)};
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            std::array<double, 3> sum{};
            std::array<int, 3> count{};
            const CfaColor own = cfa_color(pattern, x, y);
            for (int dy = -1; dy <= 1; ++dy) {
                const int yy = y + dy;
                if (yy < 0 || yy >= height)
                    continue;
                for (int dx = -1; dx <= 1; ++dx) {
                    const int xx = x + dx;
                    if (xx < 0 || xx >= width)
                        continue;
                    const auto c = static_cast<int>(cfa_color(pattern, xx, yy));
                    sum[c] += sample(xx, yy);
                    ++count[c];
                }
            }
            const std::size_t base = (static_cast<std::size_t>(y) * width + x) * 3;
            for (int c = 0; c < 3; ++c) {
                double v = 0.0;
                if (c == static_cast<int>(own))
                    v = sample(x, y);
                else if (count[c] > 0)
                    v = sum[c] / count[c];
                out.rgb[base + c] = to_display(v, black, white);
            }
        }
    }
    return out;
}

} // namespace

std::string_view to_string(BayerPattern pattern) noexcept
{
    switch (pattern) {
    case BayerPattern::RGGB: return "RGGB";
    case BayerPattern::BGGR: return "BGGR";
    case BayerPattern::GRBG: return "GRBG";
    case BayerPattern::GBRG: return "GBRG";
    }
    return "RGGB";
}

BayerPattern parse_bayer_pattern(std::string_view name)
{
    for (auto p : {BayerPattern::RGGB, BayerPattern::BGGR, BayerPattern::GRBG, BayerPattern::GBRG})
        if (to_string(p) == name)
            return p;
    fail(ErrorKind::Metadata, "unknown bayer_pattern '" + std::string(name) + "'");
}

CfaColor cfa_color(BayerPattern pattern, int x, int y) noexcept
{
    return tile_colors(pattern)[bayer_phase(x, y)];
}

bool is_supported_bit_depth(int bits) noexcept
{
    return bits == 8 || bits == 10 || bits == 12 || bits == 16;
}

RawFrame::RawFrame(int width, int height, std::vector<std::uint16_t> samples, CaptureMeta meta)
    : width_(width), height_(height), samples_(std::move(samples)), meta_(std::move(meta))
{
    check_shape(width_, height_, samples_.size());
    if (!is_supported_bit_depth(meta_.bit_depth))
        fail(ErrorKind::Argument, "unsupported bit depth " + std::to_string(meta_.bit_depth));
    if (meta_.black_level < 0 || static_cast<std::uint32_t>(meta_.black_level) > full_scale())
        fail(ErrorKind::Argument, "black level outside the sample range");
    if (!(meta_.analog_gain >= 1.0) || !std::isfinite(meta_.analog_gain))
        fail(ErrorKind::Argument, "analog gain must be >= 1");
    if (!(meta_.exposure_time_ms > 0.0) || !std::isfinite(meta_.exposure_time_ms))
        fail(ErrorKind::Argument, "exposure time must be > 0 ms");
    const std::uint32_t limit = full_scale();
    for (std::size_t i = 0; i < samples_.size(); ++i)
        if (samples_[i] > limit)
            fail(ErrorKind::Range, "sample " + std::to_string(samples_[i]) + " at index " +
                                       std::to_string(i) + " exceeds " +
                                       std::to_string(meta_.bit_depth) + "-bit range");
}

RawFrame RawFrame::with_meta(CaptureMeta meta) const
{
    return RawFrame(width_, height_, samples_, std::move(meta));
}

FloatFrame::FloatFrame(int width, int height, std::vector<double> samples, std::string provenance)
    : width_(width), height_(height), samples_(std::move(samples)), provenance_(std::move(provenance))
{
    check_shape(width_, height_, samples_.size());
    for (double v : samples_)
        if (!std::isfinite(v))
            fail(ErrorKind::Argument, "float frame contains a non-finite value");
}

FloatFrame FloatFrame::constant(int width, int height, double value, std::string provenance)
{
    const std::size_t n = width > 0 && height > 0 ? static_cast<std::size_t>(width) * height : 0;
    return FloatFrame(width, height, std::vector<double>(n, value), std::move(provenance));
}

FloatFrame FloatFrame::from_raw(const RawFrame& raw, bool subtract_black_level)
{
    const double offset = subtract_black_level ? raw.meta().black_level : 0.0;
    std::vector<double> out(raw.size());
    auto src = raw.samples();
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = static_cast<double>(src[i]) - offset;
    return FloatFrame(raw.width(), raw.height(), std::move(out), "raw");
}

FloatFrame FloatFrame::with_samples(std::vector<double> samples, std::string provenance) const
{
    return FloatFrame(width_, height_, std::move(samples), std::move(provenance));
}

FrameStack::FrameStack(std::vector<RawFrame> frames) : frames_(std::move(frames))
{
    if (frames_.empty())
        fail(ErrorKind::Argument, "frame stack must not be empty");
    const RawFrame& ref = frames_.front();
    for (std::size_t i = 1; i < frames_.size(); ++i) {
        const RawFrame& f = frames_[i];
        const bool same = f.width() == ref.width() && f.height() == ref.height() &&
                          f.meta().bit_depth == ref.meta().bit_depth &&
                          f.meta().bayer_pattern == ref.meta().bayer_pattern &&
                          f.meta().analog_gain == ref.meta().analog_gain &&
                          f.meta().exposure_time_ms == ref.meta().exposure_time_ms;
        if (!same)
            fail(ErrorKind::Argument, "frame " + std::to_string(i) +
                                          " does not share shape/capture settings with frame 0");
    }
}

FloatFrame temporal_average(const FrameStack& stack)
{
    std::vector<double> acc(stack.front().size(), 0.0);
    for (const RawFrame& f : stack) {
        auto s = f.samples();
        for (std::size_t i = 0; i < acc.size(); ++i)
            acc[i] += s[i];
    }
    const double inv = 1.0 / static_cast<double>(stack.size());
    for (double& v : acc)
        v *= inv;
    return FloatFrame(stack.width(), stack.height(), std::move(acc), "temporal_average");
}

FloatFrame temporal_average(std::span<const FloatFrame> frames)
{
    if (frames.empty())
        fail(ErrorKind::Argument, "cannot average an empty frame list");
    const FloatFrame& ref = frames.front();
    std::vector<double> acc(ref.size(), 0.0);
    for (const FloatFrame& f : frames) {
        if (!f.same_shape(ref))
            fail(ErrorKind::Argument, "frames to average differ in shape");
        auto s = f.samples();
        for (std::size_t i = 0; i < acc.size(); ++i)
            acc[i] += s[i];
    }
    const double inv = 1.0 / static_cast<double>(frames.size());
    for (double& v : acc)
        v *= inv;
    return FloatFrame(ref.width(), ref.height(), std::move(acc), "temporal_average");
}

RgbImage demosaic_preview(const RawFrame& frame)
{
    return demosaic_impl(
        frame.width(), frame.height(), frame.meta().bayer_pattern,
        [&](int x, int y) { return static_cast<double>(frame.at(x, y)); },
        frame.meta().black_level, frame.full_scale());
}

RgbImage demosaic_preview(const FloatFrame& frame, BayerPattern pattern, int bit_depth,
                          double black_level)
{
    if (!is_supported_bit_depth(bit_depth))
        fail(ErrorKind::Argument, "unsupported bit depth " + std::to_string(bit_depth));
    const double white = static_cast<double>((1u << bit_depth) - 1u);
    return demosaic_impl(
        frame.width(), frame.height(), pattern, [&](int x, int y) { return frame.at(x, y); },
        black_level, white);
}

} // namespace endonoise
