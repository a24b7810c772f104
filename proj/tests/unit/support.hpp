#pragma once

#include "endonoise/error.hpp"
#include "endonoise/raw_frame.hpp"

#include <gtest/gtest.h>

#include <unistd.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace endonoise::test {

// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag)
    {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("endonoise_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline CaptureMeta meta_with(int bit_depth = 16, double gain = 1.0, double exposure = 1.0, int black_level = 0)
{
    CaptureMeta m;
    m.bit_depth = bit_depth;
    m.analog_gain = gain;
    m.exposure_time_ms = exposure;
    m.black_level = black_level;
    m.sensor_id = "test-sensor";
    return m;
}

inline RawFrame constant_raw(int w, int h, std::uint16_t value, const CaptureMeta& meta = meta_with())
{
    return RawFrame(w, h, std::vector<std::uint16_t>(static_cast<std::size_t>(w) * h, value), meta);
}

inline FloatFrame make_float(int w, int h, const std::function<double(int, int)>& f)
{
    std::vector<double> v(static_cast<std::size_t>(w) * h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            v[static_cast<std::size_t>(y) * w + x] = f(x, y);
    return FloatFrame(w, h, std::move(v));
}

inline double mean_of(std::span<const double> v)
{
    double s = 0.0;
    for (double x : v)
        s += x;
    return s / static_cast<double>(v.size());
}

inline double std_of(std::span<const double> v)
{
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v)
        s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size()));
}

#define EXPECT_ERROR_KIND(stmt, expected_kind)                                                   \
    do {                                                                                         \
        try {                                                                                    \
            stmt;                                                                                \
            ADD_FAILURE() << "expected " << ::endonoise::to_string(expected_kind) << " error";   \
        } catch (const ::endonoise::Error& e) {                                                  \
            EXPECT_EQ(e.kind(), expected_kind) << e.what();                                      \
        }                                                                                        \
    } while (0)

} // namespace endonoise::test
