#include "support.hpp"

#include "endonoise/frame_io.hpp"
#include "endonoise/noise_synth.hpp"
#include "endonoise/pbn.hpp"
#include "endonoise/pg_calib.hpp"

using namespace endonoise;
using namespace endonoise::test;

namespace {

FrameStack flat_stack(double level, double a, double b, int frames, std::uint64_t seed, int w = 64, int h = 64)
{
    NoiseModelParams p;
    p.shot_gain_a = a;
    p.read_sigma = std::sqrt(std::max(b - 1.0 / 12.0, 0.0));
    p.quant_step = 0.0;
    p.seed = seed;
    std::vector<RawFrame> v;
    for (int k = 0; k < frames; ++k) {
        CaptureMeta m = meta_with(12, 2.0, 5.0, 64);
        m.frame_index = static_cast<std::uint64_t>(k);
        v.push_back(synthesize_noise(FloatFrame::constant(w, h, level), p, m));
    }
    return FrameStack(std::move(v));
}

} // namespace

TEST(FitVarianceLine, MatchesClosedForm)
{
    const std::vector<double> m{100, 200, 300, 400};
    const std::vector<double> v{175, 325, 475, 625};
    const VarianceLineFit fit = fit_variance_line(m, v);
    EXPECT_NEAR(fit.a, 1.5, 1e-12);
    EXPECT_NEAR(fit.b, 25.0, 1e-9);
    EXPECT_NEAR(fit.slope_stderr, 0.0, 1e-9);
}

TEST(CalibratePg, RecoversKnownParameters)
{
    const std::vector<FrameStack> sets = {flat_stack(100, 1.5, 25, 64, 1), flat_stack(400, 1.5, 25, 64, 2),
                                          flat_stack(1600, 1.5, 25, 64, 3)};
    const PgCalibration cal = calibrate_pg(sets, FpnMap::zero(64, 64), default_pbn_theta(std::sqrt(1.5 * 1600 + 25)));
    EXPECT_NEAR(cal.entry.a, 1.5, 0.075);
    EXPECT_NEAR(cal.entry.b, 25.0, 5.0);
    EXPECT_EQ(cal.analog_gain, 2.0);
    EXPECT_EQ(cal.level_means.size(), 3u);
    EXPECT_EQ(cal.discarded, 0u);
}

TEST(CalibratePg, NoiselessStacksGiveZero)
{
    std::vector<FrameStack> sets;
    for (std::uint16_t level : {164, 464}) {
        std::vector<RawFrame> frames(16, constant_raw(32, 8, level, meta_with(12, 1.0, 1.0, 64)));
        sets.emplace_back(std::move(frames));
    }
    const PgCalibration cal = calibrate_pg(sets, FpnMap::zero(32, 8), 8.0);
    EXPECT_EQ(cal.entry.a, 0.0);
    EXPECT_EQ(cal.entry.b, 0.0);
}

TEST(CalibratePg, SingleLevelIsRankDeficient)
{
    const std::vector<FrameStack> one = {flat_stack(400, 1.0, 4.0, 16, 7, 32, 8)};
    EXPECT_ERROR_KIND(calibrate_pg(one, FpnMap::zero(32, 8), default_pbn_theta(20.0)), ErrorKind::RankDeficient);
    const std::vector<FrameStack> same = {flat_stack(400, 1.0, 4.0, 16, 7, 32, 8),
                                          flat_stack(400, 1.0, 4.0, 16, 8, 32, 8)};
    EXPECT_ERROR_KIND(calibrate_pg(same, FpnMap::zero(32, 8), default_pbn_theta(20.0)), ErrorKind::RankDeficient);
}

TEST(CalibratePg, RejectsShortStacks)
{
    const std::vector<FrameStack> sets = {flat_stack(100, 1.0, 4.0, 8, 1, 32, 8), flat_stack(400, 1.0, 4.0, 8, 2, 32, 8)};
    EXPECT_ERROR_KIND(calibrate_pg(sets, FpnMap::zero(32, 8), 8.0), ErrorKind::Argument);
}

TEST(PgParams, LookupAndInterpolation)
{
    PgParams p;
    p.set(1.0, {0.5, 4.0});
    p.set(4.0, {2.0, 64.0});
    EXPECT_EQ(p.lookup(1.0), (PgEntry{0.5, 4.0}));
    const PgEntry mid = p.lookup(2.0);
    EXPECT_NEAR(mid.a, 1.0, 1e-12);
    EXPECT_NEAR(mid.b, 24.0, 1e-12);
    EXPECT_ERROR_KIND(p.lookup(2.0, false), ErrorKind::Argument);
    EXPECT_ERROR_KIND(p.lookup(8.0), ErrorKind::Argument);
    EXPECT_ERROR_KIND(p.set(0.5, {1.0, 1.0}), ErrorKind::Argument);
    EXPECT_ERROR_KIND(p.set(2.0, {-1.0, 1.0}), ErrorKind::Argument);

    const PgParams q = pg_params_from_json(to_json(p));
    EXPECT_EQ(q.entries(), p.entries());
}

TEST(TransformPattern, MatchesGeometry)
{
    for (BayerPattern pattern : {BayerPattern::RGGB, BayerPattern::BGGR, BayerPattern::GRBG, BayerPattern::GBRG})
        for (bool flip : {false, true})
            for (int turns = 0; turns < 4; ++turns) {
                // Oracle: move a 4x4 colour map by hand and read back its top-left tile.
                int grid[4][4];
                for (int y = 0; y < 4; ++y)
                    for (int x = 0; x < 4; ++x)
                        grid[y][x] = static_cast<int>(cfa_color(pattern, x, y));
                if (flip)
                    for (int y = 0; y < 4; ++y)
                        std::reverse(grid[y], grid[y] + 4);
                for (int t = 0; t < turns; ++t) {
                    int r[4][4];
                    for (int y = 0; y < 4; ++y)
                        for (int x = 0; x < 4; ++x)
                            r[y][x] = grid[3 - x][y]; // clockwise
                    std::copy(&r[0][0], &r[0][0] + 16, &grid[0][0]);
                }
                const BayerPattern out = transform_pattern(pattern, {flip, turns, 1.0});
                for (int y = 0; y < 4; ++y)
                    for (int x = 0; x < 4; ++x)
                        EXPECT_EQ(static_cast<int>(cfa_color(out, x, y)), grid[y][x]);
            }
}

TEST(TrainingPairs, ZeroCountWritesEmptyManifest)
{
    TempDir dir("pairs0");
    PgParams p;
    p.set(1.0, {1.0, 1.0});
    const std::vector<FloatFrame> clean = {FloatFrame::constant(64, 64, 100.0)};
    const auto manifest = make_training_pairs(clean, p, 1.0, 0, 1, dir.path());
    EXPECT_TRUE(manifest.at("pairs").empty());
    EXPECT_TRUE(list_frames(dir.path()).empty());
    EXPECT_TRUE(std::filesystem::exists(dir / "manifest.json"));
}

TEST(TrainingPairs, NoiselessPairsMatch)
{
    PgParams p;
    p.set(1.0, {0.0, 0.0});
    const std::vector<FloatFrame> clean = {make_float(80, 64, [](int x, int y) { return 10.0 * x + 0.3 * y; })};
    TrainingPairOptions opt;
    opt.crop_width = 32;
    opt.crop_height = 16;
    for (std::size_t i = 0; i < 20; ++i) {
        const TrainingPair pair = make_training_pair(clean, p.lookup(1.0), 1.0, i, 4, opt);
        EXPECT_TRUE(std::equal(pair.clean.samples().begin(), pair.clean.samples().end(),
                               pair.noisy.samples().begin()));
        const bool quarter = pair.augmentation.rotate_quarter_turns % 2 == 1;
        EXPECT_EQ(pair.clean.width(), quarter ? 16 : 32);
        EXPECT_EQ(pair.crop.x % 2, 0);
        EXPECT_EQ(pair.crop.y % 2, 0);
        EXPECT_GE(pair.augmentation.contrast, 0.6);
        EXPECT_LE(pair.augmentation.contrast, 1.4);
    }
}

TEST(TrainingPairs, PooledVarianceFollowsLine)
{
    const PgEntry entry{1.5, 25.0};
    const std::vector<FloatFrame> clean = {FloatFrame::constant(64, 64, 400.0)};
    TrainingPairOptions opt;
    opt.crop_width = 16;
    opt.crop_height = 16;
    opt.bit_depth = 12;
    double sq = 0.0;
    double predicted = 0.0;
    for (std::size_t i = 0; i < 500; ++i) {
        const TrainingPair pair = make_training_pair(clean, entry, 1.0, i, 12, opt);
        for (std::size_t k = 0; k < pair.clean.size(); ++k) {
            const double c = pair.clean.samples()[k];
            const double r = pair.noisy.samples()[k] - c;
            sq += r * r;
            predicted += entry.variance_at(c);
        }
    }
    EXPECT_NEAR(sq / predicted, 1.0, 0.05);
}

TEST(TrainingPairs, ReproducibleOnDisk)
{
    TempDir a("pairs_a");
    TempDir b("pairs_b");
    PgParams p;
    p.set(1.0, {1.0, 4.0});
    p.set(2.0, {2.0, 16.0});
    const std::vector<FloatFrame> clean = {make_float(64, 64, [](int x, int y) { return 50.0 + x + y; }),
                                           FloatFrame::constant(64, 64, 300.0)};
    TrainingPairOptions opt;
    opt.crop_width = 32;
    opt.crop_height = 32;
    const auto ma = make_training_pairs(clean, p, 1.5, 6, 99, a.path(), opt);
    const auto mb = make_training_pairs(clean, p, 1.5, 6, 99, b.path(), opt);
    EXPECT_EQ(ma, mb);
    EXPECT_NEAR(ma.at("a").get<double>(), 1.5, 1e-12);
    for (const auto& f : list_frames(a.path()))
        EXPECT_EQ(io::read_file(f), io::read_file(b.path() / f.filename()));
    EXPECT_EQ(list_frames(a.path()).size(), 12u);
}
