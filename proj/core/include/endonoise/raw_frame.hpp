#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace endonoise {

enum class BayerPattern { RGGB, BGGR, GRBG, GBRG };
enum class CfaColor { Red = 0, Green = 1, Blue = 2 };

std::string_view to_string(BayerPattern pattern) noexcept;
BayerPattern parse_bayer_pattern(std::string_view name);

// Color of the filter over pixel (x, y) for a mosaic whose top-left 2x2 tile is `pattern`.
CfaColor cfa_color(BayerPattern pattern, int x, int y) noexcept;

// Index in [0, 4) of the 2x2 tile position of (x, y): (y & 1) * 2 + (x & 1).
inline int bayer_phase(int x, int y) noexcept { return ((y & 1) << 1) | (x & 1); }

struct CaptureMeta {
    int bit_depth = 16;
    BayerPattern bayer_pattern = BayerPattern::RGGB;
    int black_level = 0;
    double analog_gain = 1.0;
    double exposure_time_ms = 1.0;
    std::string sensor_id;
    std::uint64_t frame_index = 0;

    bool operator==(const CaptureMeta&) const = default;
};

bool is_supported_bit_depth(int bits) noexcept;

/// Bayer-mosaiced frame in a 16-bit container. Values are digital numbers (DN).
/// Construction validates every invariant; instances never change afterwards.
class RawFrame {
public:
    RawFrame(int width, int height, std::vector<std::uint16_t> samples, CaptureMeta meta);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return samples_.size(); }
    std::span<const std::uint16_t> samples() const noexcept { return samples_; }
    std::uint16_t at(int x, int y) const noexcept
    {
        return samples_[static_cast<std::size_t>(y) * width_ + x];
    }
    const CaptureMeta& meta() const noexcept { return meta_; }

    // Largest representable code, 2^bit_depth - 1.
    std::uint32_t full_scale() const noexcept { return (1u << meta_.bit_depth) - 1u; }

    RawFrame with_meta(CaptureMeta meta) const;

    bool operator==(const RawFrame&) const = default;

private:
    int width_;
    int height_;
    std::vector<std::uint16_t> samples_;
    CaptureMeta meta_;
};

/// Real-valued frame in DN units, used for averages, calibrated maps and
/// intermediate pipeline stages.
class FloatFrame {
public:
    FloatFrame(int width, int height, std::vector<double> samples, std::string provenance = {});

    static FloatFrame constant(int width, int height, double value, std::string provenance = {});

    // Converts a raw frame sample-by-sample. The black level is only removed on request.
    static FloatFrame from_raw(const RawFrame& raw, bool subtract_black_level = false);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return samples_.size(); }
    std::span<const double> samples() const noexcept { return samples_; }
    double at(int x, int y) const noexcept
    {
        return samples_[static_cast<std::size_t>(y) * width_ + x];
    }
    const std::string& provenance() const noexcept { return provenance_; }

    // Same shape, new contents.
    FloatFrame with_samples(std::vector<double> samples, std::string provenance) const;

    bool same_shape(const FloatFrame& other) const noexcept
    {
        return width_ == other.width_ && height_ == other.height_;
    }

private:
    int width_;
    int height_;
    std::vector<double> samples_;
    std::string provenance_;
};

/// Ordered, non-empty set of raw frames captured under identical settings.
class FrameStack {
public:
    explicit FrameStack(std::vector<RawFrame> frames);

    std::size_t size() const noexcept { return frames_.size(); }
    const RawFrame& operator[](std::size_t i) const noexcept { return frames_[i]; }
    const RawFrame& front() const noexcept { return frames_.front(); }
    std::span<const RawFrame> frames() const noexcept { return frames_; }
    auto begin() const noexcept { return frames_.begin(); }
    auto end() const noexcept { return frames_.end(); }

    int width() const noexcept { return frames_.front().width(); }
    int height() const noexcept { return frames_.front().height(); }
    const CaptureMeta& meta() const noexcept { return frames_.front().meta(); }

private:
    std::vector<RawFrame> frames_;
};

FloatFrame temporal_average(const FrameStack& stack);
FloatFrame temporal_average(std::span<const FloatFrame> frames);

struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb; // interleaved R, G, B

    std::uint8_t at(int x, int y, CfaColor channel) const noexcept
    {
        return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + static_cast<int>(channel)];
    }
};

// Bilinear preview demosaic. Each missing channel is the mean of same-colour
// sites in the 3x3 neighbourhood; values are mapped from
// [black_level, 2^bit_depth - 1] onto [0, 255] with clamping.
RgbImage demosaic_preview(const RawFrame& frame);
RgbImage demosaic_preview(const FloatFrame& frame, BayerPattern pattern, int bit_depth,
                          double black_level = 0.0);

} // namespace endonoise
