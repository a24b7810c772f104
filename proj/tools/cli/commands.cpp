#include "commands.hpp"

#include "endonoise/error.hpp"
#include "endonoise/fixedpoint.hpp"
#include "endonoise/frame_io.hpp"
#include "endonoise/metrics.hpp"
#include "endonoise/noise_synth.hpp"
#include "endonoise/pbn.hpp"
#include "endonoise/random.hpp"
#include "endonoise/synthetic_suite.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <ostream>

namespace endonoise::cli {

namespace fs = std::filesystem;

namespace {

std::string frame_name(const char* prefix, std::size_t index, const char* ext)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s%04zu%s", prefix, index, ext);
    return buf;
}

FrameStack load_stack(const fs::path& dir)
{
    const auto files = list_frames(dir);
    if (files.empty())
        fail(ErrorKind::Argument, "no .pgm frames in '" + dir.string() + "'");
    std::vector<RawFrame> frames;
    frames.reserve(files.size());
    for (const auto& f : files)
        frames.push_back(load_frame(f));
    return FrameStack(std::move(frames));
}

// Clean inputs are float containers (.flt) or raw frames whose value above
// the black level is taken as the clean intensity.
std::vector<fs::path> clean_inputs(const fs::path& dir)
{
    if (!fs::is_directory(dir))
        fail(ErrorKind::Io, "'" + dir.string() + "' is not a directory");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && (e.path().extension() == ".pgm" || e.path().extension() == ".flt"))
            files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty())
        fail(ErrorKind::Argument, "no clean frames (.pgm or .flt) in '" + dir.string() + "'");
    return files;
}

struct CleanInput {
    FloatFrame frame;
    std::optional<CaptureMeta> meta;
    std::size_t clamped = 0;
};

CleanInput load_clean(const fs::path& path)
{
    if (path.extension() == ".flt") {
        const FloatFrame f = load_float_frame(path);
        std::vector<double> v(f.samples().begin(), f.samples().end());
        std::size_t clamped = 0;
        for (double& x : v)
            if (x < 0.0) {
                x = 0.0;
                ++clamped;
            }
        return {f.with_samples(std::move(v), "clean"), std::nullopt, clamped};
    }
    const RawFrame raw = load_frame(path);
    const FloatFrame f = FloatFrame::from_raw(raw, true);
    std::vector<double> v(f.samples().begin(), f.samples().end());
    std::size_t clamped = 0;
    for (double& x : v)
        if (x < 0.0) {
            x = 0.0;
            ++clamped;
        }
    return {f.with_samples(std::move(v), "clean"), raw.meta(), clamped};
}

RawFrame to_raw(const FloatFrame& frame, const CaptureMeta& meta)
{
    const double top = static_cast<double>((1u << meta.bit_depth) - 1u);
    std::vector<std::uint16_t> codes(frame.size());
    for (std::size_t i = 0; i < codes.size(); ++i)
        codes[i] = static_cast<std::uint16_t>(std::clamp(std::round(frame.samples()[i] + meta.black_level), 0.0, top));
    return RawFrame(frame.width(), frame.height(), std::move(codes), meta);
}

void write_json_output(Context& ctx, const std::string& path, const nlohmann::json& doc)
{
    if (path.empty() || path == "-")
        ctx.out << doc.dump(2) << "\n";
    else
        io::write_json(path, doc);
}

// Capture metadata flags shared by the commands that create frames.
struct MetaFlags {
    std::optional<double> gain;
    std::optional<double> exposure;
    std::optional<int> bit_depth;
    std::optional<int> black_level;
    std::optional<std::string> pattern;
    std::optional<std::string> sensor_id;

    void add(CLI::App& app)
    {
        app.add_option("--gain", gain, "Analog gain written to the frame metadata (>= 1)");
        app.add_option("--exposure", exposure, "Exposure time in ms written to the frame metadata");
        app.add_option("--bit-depth", bit_depth, "ADC bit depth of the generated frames");
        app.add_option("--black-level", black_level, "Black level (DN) of the generated frames");
        app.add_option("--pattern", pattern, "Bayer pattern: RGGB, BGGR, GRBG or GBRG");
        app.add_option("--sensor-id", sensor_id, "Sensor identifier written to the metadata");
    }

    CaptureMeta apply(CaptureMeta m) const
    {
        if (gain)
            m.analog_gain = *gain;
        if (exposure)
            m.exposure_time_ms = *exposure;
        if (bit_depth)
            m.bit_depth = *bit_depth;
        if (black_level)
            m.black_level = *black_level;
        if (pattern)
            m.bayer_pattern = parse_bayer_pattern(*pattern);
        if (sensor_id)
            m.sensor_id = *sensor_id;
        if (!is_supported_bit_depth(m.bit_depth))
            fail(ErrorKind::Argument, "unsupported bit depth " + std::to_string(m.bit_depth));
        if (!(m.analog_gain >= 1.0) || !(m.exposure_time_ms > 0.0))
            fail(ErrorKind::Argument, "gain must be >= 1 and exposure > 0");
        return m;
    }
};

// ---------------------------------------------------------------------------

class SimulateCommand final : public Command {
public:
    const char* name() const override { return "simulate"; }
    const char* summary() const override { return "Add modelled sensor noise to clean frames"; }
    std::vector<std::string> required() const override { return {"input", "output", "noise"}; }

    void add_options(CLI::App& app) override
    {
        app.add_option("--input", input_, "Directory of clean frames (.pgm with sidecar, or .flt)");
        app.add_option("--output", output_, "Directory for the noisy frames and manifest.json");
        app.add_option("--noise", noise_, "Noise model parameters (JSON)");
        app.add_option("--seed", seed_, "Overrides the seed in the noise parameters");
        meta_.add(app);
    }

    void execute(Context& ctx) override
    {
        const fs::path noise_file(noise_);
        NoiseModelParams params = noise_params_from_json(io::read_json(noise_file), noise_file.parent_path());
        if (seed_)
            params.seed = *seed_;
        fs::create_directories(output_);

        nlohmann::json frames = nlohmann::json::array();
        const auto inputs = clean_inputs(input_);
        for (std::size_t i = 0; i < inputs.size(); ++i) {
            CleanInput clean = load_clean(inputs[i]);
            if (clean.clamped > 0)
                ctx.err << inputs[i].filename().string() << ": " << clean.clamped
                        << " negative clean values clamped to 0\n";
            CaptureMeta meta = meta_.apply(clean.meta.value_or(CaptureMeta{}));
            meta.frame_index = i;
            const RawFrame noisy = synthesize_noise(clean.frame, params, meta);
            const std::string out_name = inputs[i].stem().string() + ".pgm";
            save_frame(noisy, fs::path(output_) / out_name);
            frames.push_back({{"input", inputs[i].filename().string()},
                              {"output", out_name},
                              {"frame_index", i},
                              {"metadata", sidecar_json(noisy)}});
            ctx.err << "[" << i << "] " << out_name << "\n";
        }
        nlohmann::json noise = to_json(params);
        io::write_json(fs::path(output_) / "manifest.json", {{"command", "simulate"},
                                                             {"seed", params.seed},
                                                             {"rng", std::string(kRngAlgorithm)},
                                                             {"noise", noise},
                                                             {"frames", frames}});
    }

private:
    std::string input_, output_, noise_;
    std::optional<std::uint64_t> seed_;
    MetaFlags meta_;
};

// ---------------------------------------------------------------------------

class CalibrateFpnCommand final : public Command {
public:
    const char* name() const override { return "calibrate-fpn"; }
    const char* summary() const override { return "Fit per-pixel FPN slope and offset from dark-frame sets"; }
    std::vector<std::string> required() const override { return {"dark", "output"}; }

    void add_options(CLI::App& app) override
    {
        app.add_option("--dark", dark_, "Dark-set directory (repeatable); frames in a set share gain and exposure");
        app.add_option("--output", output_, "Output .fpn file");
        app.add_option("--theta", theta_, "Banding flat-pixel threshold in DN (default: estimated from the frames)");
        app.add_option("--period", period_, "Banding period in columns")->capture_default_str();
        app.add_option("--report", report_, "Write the calibration summary here instead of standard output");
    }

    void execute(Context& ctx) override
    {
        std::vector<DarkSet> sets;
        for (const auto& dir : dark_) {
            FrameStack stack = load_stack(dir);
            const double gain = stack.meta().analog_gain;
            const double t = stack.meta().exposure_time_ms;
            ctx.err << dir << ": " << stack.size() << " frames, gain " << gain << ", exposure " << t << " ms\n";
            sets.push_back(DarkSet{std::move(stack), gain, t});
        }
        double theta = 0.0;
        if (theta_) {
            theta = *theta_;
        } else {
            for (const DarkSet& s : sets)
                theta = std::max(theta, suggest_pbn_theta(FloatFrame::from_raw(s.frames.front(), true), period_));
        }
        const FpnMap map = calibrate_fpn(sets, theta, period_);
        save_fpn(map, output_);
        nlohmann::json points = nlohmann::json::array();
        for (const auto& p : map.calibration_points())
            points.push_back({{"analog_gain", p.analog_gain}, {"exposure_time_ms", p.exposure_time_ms}});
        write_json_output(ctx, report_,
                          {{"output", fs::path(output_).filename().string()},
                           {"width", map.width()},
                           {"height", map.height()},
                           {"theta", theta},
                           {"fit_residual_rms", map.fit_residual_rms()},
                           {"calibration_points", points}});
    }

private:
    std::vector<std::string> dark_;
    std::string output_;
    std::string report_;
    std::optional<double> theta_;
    int period_ = 4;
};

// ---------------------------------------------------------------------------

class CalibratePgCommand final : public Command {
public:
    const char* name() const override { return "calibrate-pg"; }
    const char* summary() const override { return "Fit the Poisson-Gaussian variance line per analog gain from flat fields"; }
    std::vector<std::string> required() const override { return {"flat", "output"}; }

    void add_options(CLI::App& app) override
    {
        app.add_option("--flat", flat_, "Flat-field set directory (repeatable, >= 16 frames each)");
        app.add_option("--fpn", fpn_, "FPN map (.fpn); FPN is not removed when omitted");
        app.add_option("--output", output_, "Output parameter file (JSON)");
        app.add_option("--theta", theta_, "Banding flat-pixel threshold in DN (default: estimated from the frames)");
        app.add_option("--period", period_, "Banding period in columns")->capture_default_str();
        app.add_option("--report", report_, "Write per-gain fit details here instead of standard output");
    }

    void execute(Context& ctx) override
    {
        std::map<double, std::vector<FrameStack>> by_gain;
        for (const auto& dir : flat_) {
            FrameStack stack = load_stack(dir);
            ctx.err << dir << ": " << stack.size() << " frames, gain " << stack.meta().analog_gain << "\n";
            by_gain[stack.meta().analog_gain].push_back(std::move(stack));
        }
        PgParams params;
        params.source = "calibrate-pg";
        nlohmann::json report = nlohmann::json::array();
        for (const auto& [gain, stacks] : by_gain) {
            const FrameStack& first = stacks.front();
            const FpnMap fpn = fpn_.empty() ? FpnMap::zero(first.width(), first.height()) : load_fpn(fpn_);
            double theta = 0.0;
            if (theta_) {
                theta = *theta_;
            } else {
                for (const FrameStack& s : stacks)
                    theta = std::max(theta, suggest_pbn_theta(FloatFrame::from_raw(s.front(), true), period_));
            }
            const PgCalibration cal = calibrate_pg(stacks, fpn, theta, period_);
            params.set(gain, cal.entry);
            nlohmann::json entry = {{"analog_gain", gain},       {"a", cal.entry.a},
                                    {"b", cal.entry.b},          {"samples", cal.samples},
                                    {"discarded", cal.discarded}, {"level_means", cal.level_means},
                                    {"slope_stderr", cal.slope_stderr}, {"theta", theta}};
            if (!cal.note.empty()) {
                entry["note"] = cal.note;
                ctx.err << "gain " << gain << ": " << cal.note << "\n";
            }
            report.push_back(entry);
        }
        io::write_json(output_, to_json(params));
        write_json_output(ctx, report_, {{"output", fs::path(output_).filename().string()}, {"gains", report}});
    }

private:
    std::vector<std::string> flat_;
    std::string fpn_, output_, report_;
    std::optional<double> theta_;
    int period_ = 4;
};

// ---------------------------------------------------------------------------

class EstimatePbnCommand final : public Command {
public:
    const char* name() const override { return "estimate-pbn"; }
    const char* summary() const override { return "Estimate banding amplitude and phase of one frame"; }
    std::vector<std::string> required() const override { return {"input"}; }

    void add_options(CLI::App& app) override
    {
        app.add_option("--input", input_, "Raw frame (.pgm with sidecar)");
        app.add_option("--output", output_, "Write the estimate here instead of standard output");
        app.add_option("--theta", theta_, "Flat-pixel threshold in DN (default: estimated from the frame)");
        app.add_option("--period", period_, "Banding period in columns")->capture_default_str();
        app.add_flag("--per-row", per_row_, "Include the per-row amplitudes");
    }

    void execute(Context& ctx) override
    {
        const FloatFrame frame = FloatFrame::from_raw(load_frame(input_), true);
        const double theta = theta_.value_or(suggest_pbn_theta(frame, period_));
        const PbnEstimate est = estimate_pbn(frame, theta, period_);
        nlohmann::json doc = to_json(est);
        if (!per_row_)
            doc.erase("per_row_kappa");
        write_json_output(ctx, output_, doc);
    }

private:
    std::string input_, output_;
    std::optional<double> theta_;
    int period_ = 4;
    bool per_row_ = false;
};

// ---------------------------------------------------------------------------

void add_external_flags(CLI::App& app, std::string& dir, int& timeout_ms)
{
    app.add_option("--external", dir,
                   "Exchange directory for an external residual denoiser (NNNN_input.pgm -> NNNN_output.pgm)");
    app.add_option("--external-timeout-ms", timeout_ms, "How long to wait for each external output")
        ->capture_default_str();
}

class DenoiseCommand final : public Command {
public:
    const char* name() const override { return "denoise"; }
    const char* summary() const override { return "Remove banding, FPN and residual noise from raw frames"; }
    std::vector<std::string> required() const override { return {"input", "output"}; }

    void add_options(CLI::App& app) override
    {
        app.add_option("--input", input_, "Raw frame or directory of frames");
        app.add_option("--output", output_, "Output directory");
        app.add_flag("--stages", stages_, "Also write every pipeline stage as .flt (noisy, pbn_removed, fpn_removed, denoised)");
        flags_.add(app);
        add_external_flags(app, external_, timeout_ms_);
    }

    void execute(Context& ctx) override
    {
        const DenoiseConfig config = flags_.denoise_config();
        const PgParams pg = flags_.pg_params();
        fs::create_directories(output_);
        std::optional<ExternalDenoiser> external;
        if (!external_.empty())
            external.emplace(external_, std::chrono::milliseconds(timeout_ms_));

        nlohmann::json items = nlohmann::json::array();
        const auto inputs = frame_inputs(input_);
        for (std::size_t i = 0; i < inputs.size(); ++i) {
            const RawFrame raw = load_frame(inputs[i]);
            PipelineOptions po;
            po.retain_stages = stages_;
            po.pbn_period = flags_.period;
            po.pbn_theta = flags_.theta;
            if (external)
                po.residual_override = [&, i](const FloatFrame& f) { return (*external)(f, i, raw.meta()); };
            const PipelineResult r =
                denoise_pipeline(raw, flags_.fpn_map(raw.width(), raw.height()), pg, config, po);
            const std::string stem = inputs[i].stem().string();
            save_frame(to_raw(r.output, raw.meta()), fs::path(output_) / (stem + "_denoised.pgm"));
            if (r.stages) {
                save_float_frame(r.stages->noisy, fs::path(output_) / (stem + "_noisy.flt"));
                save_float_frame(r.stages->pbn_removed, fs::path(output_) / (stem + "_pbn_removed.flt"));
                save_float_frame(r.stages->fpn_removed, fs::path(output_) / (stem + "_fpn_removed.flt"));
                save_float_frame(r.stages->denoised, fs::path(output_) / (stem + "_denoised.flt"));
            }
            nlohmann::json pbn = to_json(r.pbn);
            pbn.erase("per_row_kappa");
            items.push_back({{"input", inputs[i].filename().string()},
                             {"output", stem + "_denoised.pgm"},
                             {"pbn", pbn},
                             {"warnings", r.warnings}});
            for (const auto& w : r.warnings)
                ctx.err << "[" << i << "] warning: " << w << "\n";
            ctx.err << "[" << i << "] " << stem << "_denoised.pgm\n";
        }
        io::write_json(fs::path(output_) / "manifest.json",
                       {{"command", "denoise"}, {"config", to_json(config)}, {"frames", items}});
    }

private:
    std::string input_, output_, external_;
    int timeout_ms_ = 60000;
    bool stages_ = false;
    PipelineFlags flags_;
};

// ---------------------------------------------------------------------------

class BuildDatasetCommand final : public Command {
public:
    const char* name() const override { return "build-dataset"; }
    const char* summary() const override { return "Build paired noisy/clean test data from dark and lit stacks"; }
    std::vector<std::string> required() const override { return {"scene", "output"}; }

    void add_options(CLI::App& app) override
    {
        app.add_option("--scene", scenes_, "Scene directory holding dark/ and lit/ stacks (repeatable)");
        app.add_option("--output", output_, "Output directory for pairs.json and pair files");
        app.add_option("--samples", samples_, "Noisy samples taken from each lit stack")->capture_default_str();
        app.add_option("--low-max", thresholds_.low_max, "Gains below this are class Low")->capture_default_str();
        app.add_option("--medium-max", thresholds_.medium_max, "Gains below this (and not Low) are class Medium")
            ->capture_default_str();
    }

    void execute(Context& ctx) override
    {
        if (samples_ == 0)
            fail(ErrorKind::Argument, "--samples must be >= 1");
        std::vector<TestPair> pairs;
        for (const auto& scene : scenes_) {
            const fs::path dir(scene);
            const FrameStack dark = load_stack(dir / "dark");
            const FrameStack lit = load_stack(dir / "lit");
            const std::string base = dir.filename().empty() ? dir.parent_path().filename().string()
                                                            : dir.filename().string();
            for (std::size_t k = 0; k < samples_; ++k)
                pairs.push_back(build_test_pair(dark, lit, k, thresholds_, base + frame_name("_", k, "")));
            ctx.err << base << ": " << samples_ << " pairs (" << dark.size() << " dark, " << lit.size()
                    << " lit frames)\n";
        }
        save_test_pairs(pairs, output_);
    }

private:
    std::vector<std::string> scenes_;
    std::string output_;
    std::size_t samples_ = 1;
    GainThresholds thresholds_;
};

// ---------------------------------------------------------------------------

class TrainingPairsCommand final : public Command {
public:
    const char* name() const override { return "make-training-pairs"; }
    const char* summary() const override { return "Generate augmented clean/noisy training pairs from calibrated noise"; }
    std::vector<std::string> required() const override { return {"clean", "pg", "gain", "count", "seed", "output"}; }

    void add_options(CLI::App& app) override
    {
        app.add_option("--clean", clean_, "Directory of clean frames (.pgm with sidecar, or .flt)");
        app.add_option("--pg", pg_, "Poisson-Gaussian parameters (JSON)");
        app.add_option("--gain", gain_, "Analog gain whose parameters are used");
        app.add_option("--count", count_, "Number of pairs");
        app.add_option("--seed", seed_, "Random seed");
        app.add_option("--output", output_, "Output directory");
        app.add_option("--crop-width", options_.crop_width, "Crop width")->capture_default_str();
        app.add_option("--crop-height", options_.crop_height, "Crop height")->capture_default_str();
        app.add_option("--bit-depth", options_.bit_depth, "Bit depth of the written pairs")->capture_default_str();
        app.add_option("--pattern", pattern_, "Bayer pattern of the clean frames")->capture_default_str();
        app.add_option("--exposure", options_.exposure_time_ms, "Exposure written to the metadata")
            ->capture_default_str();
        app.add_option("--sensor-id", options_.sensor_id, "Sensor identifier")->capture_default_str();
        app.add_flag("--no-interpolate", no_interpolate_, "Require an exact calibrated gain");
    }

    void execute(Context& ctx) override
    {
        std::vector<FloatFrame> frames;
        for (const auto& f : clean_inputs(clean_))
            frames.push_back(load_clean(f).frame);
        options_.source_pattern = parse_bayer_pattern(pattern_);
        options_.interpolate = !no_interpolate_;
        const PgParams params = pg_params_from_json(io::read_json(pg_));
        make_training_pairs(frames, params, gain_, count_, seed_, output_, options_);
        ctx.err << count_ << " pairs written to " << output_ << "\n";
    }

private:
    std::string clean_, pg_, output_, pattern_ = "RGGB";
    double gain_ = 1.0;
    std::size_t count_ = 0;
    std::uint64_t seed_ = 0;
    bool no_interpolate_ = false;
    TrainingPairOptions options_;
};

// ---------------------------------------------------------------------------

class EvaluateCommand final : public Command {
public:
    const char* name() const override { return "evaluate"; }
    const char* summary() const override { return "Per-stage PSNR/SSIM ablation report over test pairs"; }
    std::vector<std::string> required() const override { return {"pairs", "output"}; }

    void add_options(CLI::App& app) override
    {
        app.add_option("--pairs", pairs_, "Directory with pairs.json");
        app.add_option("--output", output_, "Report file (JSON)");
        app.add_option("--table", table_, "Also write the text table to this file");
        app.add_option("--peak", peak_, "PSNR/SSIM peak (default: 2^bit_depth - 1)");
        app.add_flag("--gaussian-ssim", gaussian_ssim_, "Use an 11x11 Gaussian SSIM window (sigma 1.5)");
        flags_.add(app);
        add_external_flags(app, external_, timeout_ms_);
    }

    void execute(Context& ctx) override
    {
        const auto pairs = load_test_pairs(pairs_);
        if (pairs.empty())
            fail(ErrorKind::Argument, "no pairs listed in '" + pairs_ + "'");
        EvaluateOptions options;
        options.peak = peak_;
        options.pbn_period = flags_.period;
        options.pbn_theta = flags_.theta;
        if (gaussian_ssim_) {
            options.ssim.gaussian = true;
            options.ssim.window = 11;
        }
        std::optional<ExternalDenoiser> external;
        if (!external_.empty()) {
            external.emplace(external_, std::chrono::milliseconds(timeout_ms_));
            options.residual = [&](const FloatFrame& f, std::size_t i, const CaptureMeta& m) {
                return (*external)(f, i, m);
            };
        }
        const AblationReport report = evaluate_suite(
            pairs, flags_.fpn_map(pairs.front().noisy.width(), pairs.front().noisy.height()), flags_.pg_params(),
            flags_.denoise_config(), options);
        nlohmann::json doc = to_json(report);
        doc["denoise_config"] = to_json(flags_.denoise_config());
        io::write_json(output_, doc);
        const std::string table = format_report_table(report);
        if (!table_.empty())
            io::write_text(table_, table);
        ctx.out << table;
    }

private:
    std::string pairs_, output_, table_, external_;
    int timeout_ms_ = 60000;
    std::optional<double> peak_;
    bool gaussian_ssim_ = false;
    PipelineFlags flags_;
};

// ---------------------------------------------------------------------------

class QuantizeCheckCommand final : public Command {
public:
    const char* name() const override { return "quantize-check"; }
    const char* summary() const override { return "Compare the 12-bit fixed-point pipeline against floating point"; }
    std::vector<std::string> required() const override { return {"output"}; }

    void add_options(CLI::App& app) override
    {
        app.add_option("--input", input_, "Raw frame or directory of frames");
        app.add_option("--pairs", pairs_, "Use the noisy frames of a pairs directory instead of --input");
        app.add_option("--qplan", qplan_, "Per-stage Q-format plan (JSON); profiled from the inputs when omitted");
        app.add_option("--write-qplan", write_qplan_, "Save the plan that was used");
        app.add_option("--headroom", headroom_, "Range margin used when profiling a plan")->capture_default_str();
        app.add_option("--min-psnr", min_psnr_, "Fixed-vs-float PSNR (dB) the report's pass field requires")
            ->capture_default_str();
        app.add_option("--output", output_, "Report file (JSON)");
        flags_.add(app);
    }

    void execute(Context& ctx) override
    {
        std::vector<RawFrame> frames;
        std::vector<std::string> names;
        if (!pairs_.empty()) {
            for (auto& p : load_test_pairs(pairs_)) {
                names.push_back(p.id);
                frames.push_back(std::move(p.noisy));
            }
        } else if (!input_.empty()) {
            for (const auto& f : frame_inputs(input_)) {
                names.push_back(f.filename().string());
                frames.push_back(load_frame(f));
            }
        } else {
            fail(ErrorKind::Argument, "quantize-check needs --input or --pairs");
        }
        if (frames.empty())
            fail(ErrorKind::Argument, "no frames to check");
        const DenoiseConfig config = flags_.denoise_config();
        const PgParams pg = flags_.pg_params();
        const FpnMap fpn = flags_.fpn_map(frames.front().width(), frames.front().height());
        const QPlan plan = qplan_.empty() ? profile_qplan(frames, fpn, pg, config, headroom_, flags_.period)
                                          : qplan_from_json(io::read_json(qplan_));
        if (!write_qplan_.empty())
            io::write_json(write_qplan_, to_json(plan));

        nlohmann::json per_frame = nlohmann::json::array();
        double worst = std::numeric_limits<double>::infinity();
        double sum = 0.0;
        std::size_t finite = 0;
        for (std::size_t i = 0; i < frames.size(); ++i) {
            const FixedRunResult r = run_pipeline_fixed(frames[i], fpn, pg, config, plan, flags_.period);
            worst = std::min(worst, r.psnr_vs_float);
            if (std::isfinite(r.psnr_vs_float)) {
                sum += r.psnr_vs_float;
                ++finite;
            }
            nlohmann::json sat = nlohmann::json::object();
            for (const auto& [stage, n] : r.saturations)
                if (n > 0)
                    sat[stage] = n;
            per_frame.push_back({{"frame", names[i]},
                                 {"psnr_vs_float", std::isinf(r.psnr_vs_float) ? nlohmann::json("inf")
                                                                               : nlohmann::json(r.psnr_vs_float)},
                                 {"saturations", sat}});
        }
        const auto db = [](double v) { return std::isinf(v) ? nlohmann::json("inf") : nlohmann::json(v); };
        const nlohmann::json doc = {
            {"qplan", to_json(plan)},
            {"frames", per_frame},
            {"min_psnr_vs_float", db(worst)},
            {"mean_psnr_vs_float", finite ? db(sum / static_cast<double>(finite)) : nlohmann::json("inf")},
            {"threshold_db", min_psnr_},
            {"pass", worst >= min_psnr_},
        };
        io::write_json(output_, doc);
        ctx.out << "min fixed-vs-float PSNR: " << (std::isinf(worst) ? std::string("inf") : std::to_string(worst))
                << " dB over " << frames.size() << " frame(s); " << (worst >= min_psnr_ ? "pass" : "FAIL") << "\n";
    }

private:
    std::string input_, pairs_, qplan_, write_qplan_, output_;
    double headroom_ = 1.25;
    double min_psnr_ = 50.0;
    PipelineFlags flags_;
};

// ---------------------------------------------------------------------------

class MakeSuiteCommand final : public Command {
public:
    const char* name() const override { return "make-suite"; }
    const char* summary() const override { return "Write the synthetic calibration and evaluation suite"; }
    std::vector<std::string> required() const override { return {"output"}; }

    void add_options(CLI::App& app) override
    {
        app.add_option("--output", output_, "Suite root directory");
        app.add_option("--suite-config", suite_config_, "Suite parameters (JSON); defaults otherwise");
        app.add_option("--seed", seed_, "Overrides the suite seed");
        app.add_option("--pairs-per-class", pairs_per_class_, "Overrides the number of pairs per gain class");
        app.add_option("--dark-frames", dark_frames_, "Overrides the frames per dark set");
        app.add_option("--flat-frames", flat_frames_, "Overrides the frames per flat set");
    }

    void execute(Context& ctx) override
    {
        SuiteConfig config = suite_config_.empty() ? SuiteConfig{} : suite_config_from_json(io::read_json(suite_config_));
        if (seed_)
            config.seed = *seed_;
        if (pairs_per_class_)
            config.pairs_per_class = *pairs_per_class_;
        if (dark_frames_)
            config.dark_frames = *dark_frames_;
        if (flat_frames_)
            config.flat_frames = *flat_frames_;
        config.validate();

        const fs::path root(output_);
        fs::create_directories(root / "truth");
        auto fpn = std::make_shared<const FpnMap>(random_fpn(config.width, config.height, config.fpn_slope_max,
                                                             config.fpn_offset_max, config.seed, config.sensor_id));
        save_fpn(*fpn, root / "truth" / "fpn.fpn");
        PgParams truth_pg;
        truth_pg.source = "synthetic truth";
        for (const GainClassSpec& spec : config.classes)
            truth_pg.set(spec.analog_gain, {spec.shot_gain_a, spec.read_sigma * spec.read_sigma + 1.0 / 12.0});
        io::write_json(root / "truth" / "pg.json", to_json(truth_pg));

        nlohmann::json dark_dirs = nlohmann::json::array();
        for (const DarkSet& set : synthetic_dark_sets(config, fpn)) {
            char name[64];
            std::snprintf(name, sizeof name, "g%g_t%g", set.analog_gain, set.exposure_time_ms);
            const fs::path dir = root / "dark" / name;
            fs::create_directories(dir);
            for (std::size_t i = 0; i < set.frames.size(); ++i)
                save_frame(set.frames[i], dir / frame_name("frame_", i, ".pgm"));
            dark_dirs.push_back(std::string("dark/") + name);
        }
        ctx.err << "dark sets written\n";

        nlohmann::json flat_dirs = nlohmann::json::object();
        nlohmann::json flat_theta = nlohmann::json::object();
        for (const GainClassSpec& spec : config.classes) {
            const auto sets = synthetic_flat_sets(config, spec, fpn);
            const std::string cls(to_string(spec.gain_class));
            for (std::size_t l = 0; l < sets.size(); ++l) {
                char name[64];
                std::snprintf(name, sizeof name, "%s_level%g", cls.c_str(), config.flat_levels[l]);
                const fs::path dir = root / "flat" / name;
                fs::create_directories(dir);
                for (std::size_t i = 0; i < sets[l].size(); ++i)
                    save_frame(sets[l][i], dir / frame_name("frame_", i, ".pgm"));
                flat_dirs[cls].push_back(std::string("flat/") + name);
            }
            flat_theta[cls] = suite_flat_theta(config, spec);
        }
        ctx.err << "flat sets written\n";

        save_test_pairs(synthetic_pairs(config, fpn), root / "pairs");
        ctx.err << "pairs written\n";

        nlohmann::json doc = to_json(config);
        doc["layout"] = {{"dark", dark_dirs},
                         {"flat", flat_dirs},
                         {"pairs", "pairs"},
                         {"truth_fpn", "truth/fpn.fpn"},
                         {"truth_pg", "truth/pg.json"}};
        doc["dark_theta"] = suite_dark_theta(config);
        doc["flat_theta"] = flat_theta;
        io::write_json(root / "suite.json", doc);
    }

private:
    std::string output_, suite_config_;
    std::optional<std::uint64_t> seed_;
    std::optional<std::size_t> pairs_per_class_, dark_frames_, flat_frames_;
};

} // namespace

void PipelineFlags::add(CLI::App& app)
{
    app.add_option("--fpn", fpn_path, "FPN map (.fpn); a zero map when omitted");
    app.add_option("--pg", pg_path, "Poisson-Gaussian parameters (JSON); a = 1, b = 0 when omitted");
    app.add_option("--denoise-config", config_path, "Residual denoiser settings (JSON); flags below override it");
    app.add_option("--smoother", smoother, "Residual smoother: nlm or gaussian");
    app.add_option("--strength", strength, "Multiplier on the stabilized noise std");
    app.add_option("--patch-radius", patch_radius, "NLM patch radius");
    app.add_option("--search-radius", search_radius, "NLM search radius");
    app.add_option("--gaussian-sigma", gaussian_sigma, "Gaussian kernel sigma (0 = identity)");
    app.add_flag("--whole-frame", whole_frame, "Smooth the mosaic as one plane instead of per Bayer phase");
    app.add_option("--theta", theta, "Banding flat-pixel threshold in DN (default: from the expected noise)");
    app.add_option("--period", period, "Banding period in columns")->capture_default_str();
}

DenoiseConfig PipelineFlags::denoise_config() const
{
    DenoiseConfig c = config_path.empty() ? DenoiseConfig{} : denoise_config_from_json(io::read_json(config_path));
    if (smoother)
        c.smoother = parse_smoother(*smoother);
    if (strength)
        c.strength = *strength;
    if (patch_radius)
        c.nlm_patch_radius = *patch_radius;
    if (search_radius)
        c.nlm_search_radius = *search_radius;
    if (gaussian_sigma)
        c.gaussian_sigma = *gaussian_sigma;
    if (whole_frame)
        c.process_per_bayer_phase = false;
    c.validate();
    return c;
}

PgParams PipelineFlags::pg_params() const
{
    return pg_path.empty() ? PgParams{} : pg_params_from_json(io::read_json(pg_path));
}

FpnMap PipelineFlags::fpn_map(int width, int height) const
{
    return fpn_path.empty() ? FpnMap::zero(width, height) : load_fpn(fpn_path);
}

std::vector<fs::path> frame_inputs(const fs::path& path)
{
    if (fs::is_directory(path)) {
        auto files = list_frames(path);
        if (files.empty())
            fail(ErrorKind::Argument, "no .pgm frames in '" + path.string() + "'");
        return files;
    }
    if (!fs::exists(path))
        fail(ErrorKind::Io, "'" + path.string() + "' does not exist");
    return {path};
}

double suggest_pbn_theta(const FloatFrame& frame, int period)
{
    const int d = std::max(1, period / 2);
    std::vector<double> diffs;
    diffs.reserve(frame.size());
    for (int y = 0; y < frame.height(); ++y)
        for (int x = d; x + d < frame.width(); ++x)
            diffs.push_back(std::abs(frame.at(x + d, y) - frame.at(x - d, y)));
    if (diffs.empty())
        return default_pbn_theta(0.0);
    auto mid = diffs.begin() + static_cast<std::ptrdiff_t>(diffs.size() / 2);
    std::nth_element(diffs.begin(), mid, diffs.end());
    // Median of |N(0, 2 sigma^2)| is 0.6745 * sqrt(2) * sigma.
    const double sigma = *mid / (0.6745 * std::sqrt(2.0));
    return default_pbn_theta(sigma);
}

std::vector<std::unique_ptr<Command>> make_commands()
{
    std::vector<std::unique_ptr<Command>> c;
    c.push_back(std::make_unique<SimulateCommand>());
    c.push_back(std::make_unique<CalibrateFpnCommand>());
    c.push_back(std::make_unique<CalibratePgCommand>());
    c.push_back(std::make_unique<EstimatePbnCommand>());
    c.push_back(std::make_unique<DenoiseCommand>());
    c.push_back(std::make_unique<BuildDatasetCommand>());
    c.push_back(std::make_unique<TrainingPairsCommand>());
    c.push_back(std::make_unique<EvaluateCommand>());
    c.push_back(std::make_unique<QuantizeCheckCommand>());
    c.push_back(std::make_unique<MakeSuiteCommand>());
    return c;
}

} // namespace endonoise::cli
