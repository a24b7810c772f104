#pragma once

#include "endonoise/raw_frame.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace endonoise {

// Raw frames live on disk as a binary 16-bit PGM (P5, maxval 65535,
// big-endian samples) plus a JSON sidecar with the same stem and a .json
// suffix holding every non-pixel field.

std::filesystem::path sidecar_path(const std::filesystem::path& pgm);

RawFrame load_frame(const std::filesystem::path& pgm);
void save_frame(const RawFrame& frame, const std::filesystem::path& pgm);

nlohmann::json sidecar_json(const RawFrame& frame);

struct PgmImage {
    int width = 0;
    int height = 0;
    std::uint32_t maxval = 0;
    std::vector<std::uint16_t> samples;
};

PgmImage read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, int width, int height,
               std::span<const std::uint16_t> samples);

// Float frames (averages, ground-truth cleans) use a small binary container:
// 8-byte magic "FLTFRM01", u32 LE header length, JSON header
// {"width", "height", "provenance"}, then width*height float64 LE samples.
FloatFrame load_float_frame(const std::filesystem::path& path);
void save_float_frame(const FloatFrame& frame, const std::filesystem::path& path);

// Binary PPM (P6) for preview images.
void write_ppm(const RgbImage& image, const std::filesystem::path& path);

// Lexicographically sorted list of *.pgm files in `dir`.
std::vector<std::filesystem::path> list_frames(const std::filesystem::path& dir);

// Helpers shared by the binary container formats.
namespace io {
std::vector<char> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const char> bytes);
void write_text(const std::filesystem::path& path, const std::string& text);
nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& doc);
void append_u32_le(std::vector<char>& out, std::uint32_t v);
std::uint32_t read_u32_le(std::span<const char> bytes, std::size_t offset);
} // namespace io

} // namespace endonoise
