#include "endonoise/frame_io.hpp"

#include "endonoise/error.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cstring>
#include <fstream>
#include <sstream>

namespace endonoise {

namespace fs = std::filesystem;

namespace io {

std::vector<char> read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail(ErrorKind::Io, "cannot open '" + path.string() + "' for reading");
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return bytes;
}

void write_file(const fs::path& path, std::span<const char> bytes)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        fail(ErrorKind::Io, "cannot open '" + path.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        fail(ErrorKind::Io, "short write to '" + path.string() + "'");
}

void write_text(const fs::path& path, const std::string& text)
{
    write_file(path, std::span<const char>(text.data(), text.size()));
}

nlohmann::json read_json(const fs::path& path)
{
    auto bytes = read_file(path);
    try {
        return nlohmann::json::parse(bytes.begin(), bytes.end());
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Format, "invalid JSON in '" + path.string() + "': " + e.what());
    }
}

void write_json(const fs::path& path, const nlohmann::json& doc)
{
    write_text(path, doc.dump(2) + "\n");
}

void append_u32_le(std::vector<char>& out, std::uint32_t v)
{
    for (int i = 0; i < 4; ++i)
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t read_u32_le(std::span<const char> bytes, std::size_t offset)
{
    if (offset + 4 > bytes.size())
        fail(ErrorKind::Format, "truncated length field");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
        v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + i])) << (8 * i);
    return v;
}

} // namespace io

namespace {

// PGM header tokenizer: whitespace separated, '#' starts a comment to end of line.
class PgmHeaderReader {
public:
    explicit PgmHeaderReader(std::span<const char> bytes) : bytes_(bytes) {}

    std::string token()
    {
        skip_space_and_comments();
        std::string tok;
        while (pos_ < bytes_.size() && !std::isspace(static_cast<unsigned char>(bytes_[pos_])))
            tok.push_back(bytes_[pos_++]);
        if (tok.empty())
            fail(ErrorKind::Format, "truncated PGM header");
        return tok;
    }

    std::uint32_t number()
    {
        const std::string tok = token();
        if (!std::all_of(tok.begin(), tok.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }))
            fail(ErrorKind::Format, "non-numeric PGM header field '" + tok + "'");
        try {
            return static_cast<std::uint32_t>(std::stoul(tok));
        } catch (const std::exception&) {
            fail(ErrorKind::Format, "PGM header field out of range '" + tok + "'");
        }
    }

    // Exactly one whitespace byte separates maxval from the raster.
    std::size_t raster_offset()
    {
        if (pos_ >= bytes_.size() || !std::isspace(static_cast<unsigned char>(bytes_[pos_])))
            fail(ErrorKind::Format, "missing whitespace before PGM raster");
        return pos_ + 1;
    }

private:
    void skip_space_and_comments()
    {
        while (pos_ < bytes_.size()) {
            const char c = bytes_[pos_];
            if (c == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n')
                    ++pos_;
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    std::span<const char> bytes_;
    std::size_t pos_ = 0;
};

template <class T>
T required(const nlohmann::json& doc, const char* key, const fs::path& where)
{
    if (!doc.contains(key))
        fail(ErrorKind::Metadata, "sidecar '" + where.string() + "' is missing required field '" + key + "'");
    try {
        return doc.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        fail(ErrorKind::Metadata, "sidecar '" + where.string() + "' has a malformed '" + key + "' field");
    }
}

constexpr char kFloatMagic[8] = {'F', 'L', 'T', 'F', 'R', 'M', '0', '1'};

} // namespace

fs::path sidecar_path(const fs::path& pgm)
{
    fs::path p = pgm;
    p.replace_extension(".json");
    return p;
}

PgmImage read_pgm(const fs::path& path)
{
    const auto bytes = io::read_file(path);
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5')
        fail(ErrorKind::Format, "'" + path.string() + "' is not a binary PGM (P5)");
    PgmHeaderReader reader(std::span<const char>(bytes).subspan(2));
    PgmImage img;
    const auto w = reader.number();
    const auto h = reader.number();
    img.maxval = reader.number();
    if (w == 0 || h == 0 || w > 1u << 16 || h > 1u << 16)
        fail(ErrorKind::Format, "implausible PGM dimensions in '" + path.string() + "'");
    if (img.maxval == 0 || img.maxval > 65535)
        fail(ErrorKind::Format, "PGM maxval out of range in '" + path.string() + "'");
    img.width = static_cast<int>(w);
    img.height = static_cast<int>(h);
    const std::size_t offset = 2 + reader.raster_offset();
    const std::size_t count = static_cast<std::size_t>(w) * h;
    const std::size_t bps = img.maxval > 255 ? 2 : 1;
    if (bytes.size() < offset + count * bps)
        fail(ErrorKind::Format, "truncated PGM raster in '" + path.string() + "'");
    img.samples.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::uint16_t v;
        if (bps == 2) {
            const auto hi = static_cast<unsigned char>(bytes[offset + 2 * i]);
            const auto lo = static_cast<unsigned char>(bytes[offset + 2 * i + 1]);
            v = static_cast<std::uint16_t>((hi << 8) | lo);
        } else {
            v = static_cast<unsigned char>(bytes[offset + i]);
        }
        if (v > img.maxval)
            fail(ErrorKind::Format, "PGM sample exceeds maxval in '" + path.string() + "'");
        img.samples[i] = v;
    }
    return img;
}

void write_pgm(const fs::path& path, int width, int height, std::span<const std::uint16_t> samples)
{
    if (width <= 0 || height <= 0 || samples.size() != static_cast<std::size_t>(width) * height)
        fail(ErrorKind::Argument, "PGM shape does not match sample count");
    const std::string header = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n65535\n";
    std::vector<char> out(header.begin(), header.end());
    out.reserve(header.size() + samples.size() * 2);
    for (std::uint16_t v : samples) {
        out.push_back(static_cast<char>(v >> 8));
        out.push_back(static_cast<char>(v & 0xFF));
    }
    io::write_file(path, out);
}

nlohmann::json sidecar_json(const RawFrame& frame)
{
    const CaptureMeta& m = frame.meta();
    return {
        {"width", frame.width()},
        {"height", frame.height()},
        {"bit_depth", m.bit_depth},
        {"bayer_pattern", std::string(to_string(m.bayer_pattern))},
        {"black_level", m.black_level},
        {"analog_gain", m.analog_gain},
        {"exposure_time_ms", m.exposure_time_ms},
        {"sensor_id", m.sensor_id},
        {"frame_index", m.frame_index},
    };
}

RawFrame load_frame(const fs::path& pgm)
{
    const PgmImage img = read_pgm(pgm);
    const fs::path side = sidecar_path(pgm);
    if (!fs::exists(side))
        fail(ErrorKind::Metadata, "missing sidecar '" + side.string() + "'");
    nlohmann::json doc;
    try {
        doc = io::read_json(side);
    } catch (const Error& e) {
        fail(ErrorKind::Metadata, e.what());
    }
    if (!doc.is_object())
        fail(ErrorKind::Metadata, "sidecar '" + side.string() + "' is not a JSON object");

    const int width = required<int>(doc, "width", side);
    const int height = required<int>(doc, "height", side);
    CaptureMeta meta;
    meta.bit_depth = required<int>(doc, "bit_depth", side);
    meta.bayer_pattern = parse_bayer_pattern(required<std::string>(doc, "bayer_pattern", side));
    meta.black_level = required<int>(doc, "black_level", side);
    meta.analog_gain = required<double>(doc, "analog_gain", side);
    meta.exposure_time_ms = required<double>(doc, "exposure_time_ms", side);
    meta.sensor_id = required<std::string>(doc, "sensor_id", side);
    meta.frame_index = required<std::uint64_t>(doc, "frame_index", side);

    if (width != img.width || height != img.height)
        fail(ErrorKind::Metadata, "sidecar shape disagrees with PGM header for '" + pgm.string() + "'");
    if (!is_supported_bit_depth(meta.bit_depth))
        fail(ErrorKind::Metadata, "unsupported bit_depth " + std::to_string(meta.bit_depth));
    return RawFrame(img.width, img.height, img.samples, std::move(meta));
}

void save_frame(const RawFrame& frame, const fs::path& pgm)
{
    write_pgm(pgm, frame.width(), frame.height(), frame.samples());
    io::write_json(sidecar_path(pgm), sidecar_json(frame));
}

FloatFrame load_float_frame(const fs::path& path)
{
    const auto bytes = io::read_file(path);
    if (bytes.size() < 12 || std::memcmp(bytes.data(), kFloatMagic, 8) != 0)
        fail(ErrorKind::Format, "'" + path.string() + "' is not a float frame file");
    const std::uint32_t header_len = io::read_u32_le(bytes, 8);
    if (bytes.size() < 12 + static_cast<std::size_t>(header_len))
        fail(ErrorKind::Format, "truncated float frame header in '" + path.string() + "'");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.begin() + 12, bytes.begin() + 12 + header_len);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Format, std::string("bad float frame header: ") + e.what());
    }
    const int width = required<int>(header, "width", path);
    const int height = required<int>(header, "height", path);
    const std::string provenance = header.value("provenance", std::string{});
    if (width <= 0 || height <= 0)
        fail(ErrorKind::Format, "bad float frame shape in '" + path.string() + "'");
    const std::size_t count = static_cast<std::size_t>(width) * height;
    const std::size_t offset = 12 + header_len;
    if (bytes.size() != offset + count * 8)
        fail(ErrorKind::Format, "float frame payload size mismatch in '" + path.string() + "'");
    std::vector<double> samples(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b)
            bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[offset + 8 * i + b])) << (8 * b);
        samples[i] = std::bit_cast<double>(bits);
    }
    return FloatFrame(width, height, std::move(samples), provenance);
}

void save_float_frame(const FloatFrame& frame, const fs::path& path)
{
    const nlohmann::json header = {
        {"width", frame.width()}, {"height", frame.height()}, {"provenance", frame.provenance()}};
    const std::string text = header.dump();
    std::vector<char> out(kFloatMagic, kFloatMagic + 8);
    io::append_u32_le(out, static_cast<std::uint32_t>(text.size()));
    out.insert(out.end(), text.begin(), text.end());
    out.reserve(out.size() + frame.size() * 8);
    for (double v : frame.samples()) {
        const auto bits = std::bit_cast<std::uint64_t>(v);
        for (int b = 0; b < 8; ++b)
            out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFFu));
    }
    io::write_file(path, out);
}

void write_ppm(const RgbImage& image, const fs::path& path)
{
    const std::string header = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
    std::vector<char> out(header.begin(), header.end());
    out.insert(out.end(), image.rgb.begin(), image.rgb.end());
    io::write_file(path, out);
}

std::vector<fs::path> list_frames(const fs::path& dir)
{
    if (!fs::is_directory(dir))
        fail(ErrorKind::Io, "'" + dir.string() + "' is not a directory");
    std::vector<fs::path> out;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".pgm")
            out.push_back(entry.path());
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace endonoise
