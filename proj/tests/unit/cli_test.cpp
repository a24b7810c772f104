#include "support.hpp"

#include "cli/cli.hpp"
#include "cli/commands.hpp"

#include "endonoise/frame_io.hpp"
#include "endonoise/noise_synth.hpp"
#include "endonoise/pbn.hpp"

#include <sstream>

using namespace endonoise;
using namespace endonoise::test;

namespace {

struct Outcome {
    int code = 0;
    std::string out;
    std::string err;
};

Outcome run_cli(std::vector<std::string> args)
{
    args.insert(args.begin(), "endonoise");
    std::ostringstream out;
    std::ostringstream err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

// Integer ramp with a 1 DN step per column: its second differences are exactly zero,
// so the banding estimate is exactly zero as well.
RawFrame ramp_frame()
{
    std::vector<std::uint16_t> s(64 * 32);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 64; ++x)
            s[y * 64 + x] = static_cast<std::uint16_t>(164 + x + 2 * y);
    return RawFrame(64, 32, std::move(s), meta_with(10, 1.0, 5.0, 64));
}

} // namespace

TEST(Cli, HelpDocumentsEveryFlag)
{
    for (auto& command : cli::make_commands()) {
        CLI::App app;
        command->add_options(app);
        const Outcome help = run_cli({command->name(), "--help"});
        EXPECT_EQ(help.code, 0) << command->name();
        for (const CLI::Option* opt : app.get_options()) {
            for (const std::string& name : opt->get_lnames())
                EXPECT_NE(help.out.find("--" + name), std::string::npos) << command->name() << " --" << name;
        }
    }
    const Outcome top = run_cli({"--help"});
    for (const std::string& name : cli::subcommand_names())
        EXPECT_NE(top.out.find(name), std::string::npos) << name;
}

TEST(Cli, UsageErrorsGiveOneErrorLine)
{
    const Outcome unknown = run_cli({"denoise", "--bogus"});
    EXPECT_EQ(unknown.code, cli::kExitUsage);
    EXPECT_EQ(unknown.err.rfind("error: argument: ", 0), 0u) << unknown.err;
    EXPECT_EQ(std::count(unknown.err.begin(), unknown.err.end(), '\n'), 1);

    const Outcome missing = run_cli({"denoise"});
    EXPECT_EQ(missing.code, cli::kExitUsage);
    EXPECT_NE(missing.err.find("--input"), std::string::npos);

    EXPECT_EQ(run_cli({}).code, cli::kExitUsage);
}

TEST(Cli, CalibrateFpnWithOneSetIsRankDeficient)
{
    TempDir dir("cli_fpn");
    NoiseModelParams p;
    p.shot_gain_a = 0.0;
    p.read_sigma = 1.0;
    std::filesystem::create_directories(dir / "dark");
    for (int i = 0; i < 4; ++i) {
        CaptureMeta m = meta_with(10, 1.0, 5.0, 64);
        m.frame_index = static_cast<std::uint64_t>(i);
        save_frame(synthesize_noise(FloatFrame::constant(64, 16, 0.0), p, m),
                   dir / "dark" / ("f" + std::to_string(i) + ".pgm"));
    }
    const Outcome r = run_cli({"calibrate-fpn", "--dark", (dir / "dark").string(), "--output",
                               (dir / "map.fpn").string(), "--theta", "8"});
    EXPECT_EQ(r.code, cli::kExitFailure);
    EXPECT_NE(r.err.find("error: rank_deficient: "), std::string::npos) << r.err;
    EXPECT_FALSE(std::filesystem::exists(dir / "map.fpn"));
}

TEST(Cli, DenoiseIdentity)
{
    TempDir dir("cli_identity");
    const RawFrame raw = ramp_frame();
    save_frame(raw, dir / "in.pgm");
    const Outcome r = run_cli({"denoise", "--input", (dir / "in.pgm").string(), "--output",
                               (dir / "out").string(), "--smoother", "gaussian", "--gaussian-sigma", "0"});
    ASSERT_EQ(r.code, 0) << r.err;
    const RawFrame out = load_frame(dir / "out" / "in_denoised.pgm");
    EXPECT_TRUE(std::equal(out.samples().begin(), out.samples().end(), raw.samples().begin()));
}

TEST(Cli, FlagsOverrideConfig)
{
    TempDir dir("cli_config");
    const RawFrame raw = ramp_frame();
    save_frame(raw, dir / "in.pgm");
    io::write_json(dir / "config.json", {{"denoise", {{"smoother", "gaussian"}, {"gaussian-sigma", 3.0}}}});

    const std::string config = (dir / "config.json").string();
    const Outcome from_flag = run_cli({"--config", config, "denoise", "--input", (dir / "in.pgm").string(),
                                       "--output", (dir / "flag").string(), "--gaussian-sigma", "0"});
    ASSERT_EQ(from_flag.code, 0) << from_flag.err;
    const RawFrame same = load_frame(dir / "flag" / "in_denoised.pgm");
    EXPECT_TRUE(std::equal(same.samples().begin(), same.samples().end(), raw.samples().begin()));

    const Outcome from_config = run_cli({"--config", config, "denoise", "--input", (dir / "in.pgm").string(),
                                         "--output", (dir / "cfg").string()});
    ASSERT_EQ(from_config.code, 0) << from_config.err;
    const RawFrame smoothed = load_frame(dir / "cfg" / "in_denoised.pgm");
    EXPECT_FALSE(std::equal(smoothed.samples().begin(), smoothed.samples().end(), raw.samples().begin()));

    io::write_json(dir / "bad.json", {{"denoise", {{"no-such-flag", 1}}}});
    const Outcome bad = run_cli({"--config", (dir / "bad.json").string(), "denoise", "--input",
                                 (dir / "in.pgm").string(), "--output", (dir / "bad").string()});
    EXPECT_EQ(bad.code, cli::kExitUsage);
    EXPECT_NE(bad.err.find("no-such-flag"), std::string::npos);
}

TEST(Cli, SimulateIsReproducible)
{
    TempDir dir("cli_sim");
    std::filesystem::create_directories(dir / "clean");
    save_frame(ramp_frame(), dir / "clean" / "a.pgm");
    NoiseModelParams p;
    p.shot_gain_a = 1.0;
    p.read_sigma = 2.0;
    p.pbn = PbnParams{6.0, 4, 1};
    p.seed = 5;
    io::write_json(dir / "noise.json", to_json(p));
    for (const char* out : {"one", "two"}) {
        const Outcome r = run_cli({"simulate", "--input", (dir / "clean").string(), "--output", (dir / out).string(),
                                   "--noise", (dir / "noise.json").string()});
        ASSERT_EQ(r.code, 0) << r.err;
    }
    EXPECT_EQ(io::read_file(dir / "one" / "a.pgm"), io::read_file(dir / "two" / "a.pgm"));
    EXPECT_EQ(io::read_file(dir / "one" / "manifest.json"), io::read_file(dir / "two" / "manifest.json"));

    const Outcome est = run_cli({"estimate-pbn", "--input", (dir / "one" / "a.pgm").string(), "--theta", "16"});
    ASSERT_EQ(est.code, 0) << est.err;
    const auto doc = nlohmann::json::parse(est.out);
    const PbnEstimate direct = estimate_pbn(load_frame(dir / "one" / "a.pgm"), 16.0);
    EXPECT_EQ(doc.at("kappa").get<double>(), direct.kappa);
    EXPECT_EQ(doc.at("phase").get<int>(), direct.phase);
}
