#pragma once

#include "endonoise/denoise.hpp"
#include "endonoise/fpn.hpp"
#include "endonoise/pg_calib.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace endonoise::cli {

struct Context {
    std::ostream& out;
    std::ostream& err;
};

class Command {
public:
    virtual ~Command() = default;

    virtual const char* name() const = 0;
    virtual const char* summary() const = 0;
    virtual void add_options(CLI::App& app) = 0;
    // Long names of options that must be set by a flag or the config file.
    virtual std::vector<std::string> required() const { return {}; }
    virtual void execute(Context& ctx) = 0;
};

std::vector<std::unique_ptr<Command>> make_commands();

// Options shared by every command that runs the denoising pipeline.
struct PipelineFlags {
    std::string fpn_path;
    std::string pg_path;
    std::string config_path;
    std::optional<std::string> smoother;
    std::optional<double> strength;
    std::optional<int> patch_radius;
    std::optional<int> search_radius;
    std::optional<double> gaussian_sigma;
    bool whole_frame = false;
    std::optional<double> theta;
    int period = 4;

    void add(CLI::App& app);
    DenoiseConfig denoise_config() const;
    PgParams pg_params() const;
    // The calibrated map, or an all-zero map of the given shape when none was passed.
    FpnMap fpn_map(int width, int height) const;
};

// Frames named by a file or every *.pgm in a directory, sorted.
std::vector<std::filesystem::path> frame_inputs(const std::filesystem::path& path);

// Robust flat-pixel threshold from the frame itself: the noise sigma comes
// from the median absolute difference of same-colour neighbours.
double suggest_pbn_theta(const FloatFrame& frame, int period);

} // namespace endonoise::cli
