#include "support.hpp"

#include "endonoise/noise_synth.hpp"
#include "endonoise/pbn.hpp"

#include <complex>
#include <numbers>

using namespace endonoise;
using namespace endonoise::test;

namespace {

NoiseModelParams silent()
{
    NoiseModelParams p;
    p.shot_gain_a = 0.0;
    p.read_sigma = 0.0;
    p.quant_step = 0.0;
    return p;
}

} // namespace

TEST(PbnPattern, Examples)
{
    EXPECT_EQ(pbn_pattern(8, {2.0, 4, 0}), (std::vector<double>{2, 2, -2, -2, 2, 2, -2, -2}));
    EXPECT_EQ(pbn_pattern(4, {1.0, 4, 2}), (std::vector<double>{-1, -1, 1, 1}));
    for (double v : pbn_pattern(16, {0.0, 4, 1}))
        EXPECT_EQ(v, 0.0);
}

TEST(PbnPattern, RejectsBadParams)
{
    EXPECT_ERROR_KIND(pbn_pattern(8, {1.0, 3, 0}), ErrorKind::Argument);
    EXPECT_ERROR_KIND(pbn_pattern(8, {-1.0, 4, 0}), ErrorKind::Argument);
    EXPECT_ERROR_KIND(pbn_pattern(8, {1.0, 4, 4}), ErrorKind::Argument);
}

TEST(PbnPattern, ZeroMeanOverEachPeriod)
{
    for (int period : {2, 4, 6, 8})
        for (int phase = 0; phase < period; ++phase) {
            const auto p = pbn_pattern(period * 5, {3.0, period, phase});
            double s = 0.0;
            for (double v : p)
                s += v;
            EXPECT_EQ(s, 0.0);
        }
}

TEST(SynthesizeNoise, AllDisabledIsIdentity)
{
    const RawFrame raw = synthesize_noise(FloatFrame::constant(16, 16, 100.0), silent(), meta_with());
    for (std::uint16_t v : raw.samples())
        EXPECT_EQ(v, 100);
}

TEST(SynthesizeNoise, BlackLevelIsAPedestal)
{
    const RawFrame raw = synthesize_noise(FloatFrame::constant(4, 4, 10.0), silent(), meta_with(10, 1.0, 1.0, 64));
    for (std::uint16_t v : raw.samples())
        EXPECT_EQ(v, 74);
}

TEST(SynthesizeNoise, ShotNoiseHasPoissonMoments)
{
    NoiseModelParams p = silent();
    p.shot_gain_a = 1.0;
    p.seed = 5;
    const RawFrame raw = synthesize_noise(FloatFrame::constant(320, 320, 400.0), p, meta_with());
    std::vector<double> v(raw.samples().begin(), raw.samples().end());
    const double m = mean_of(v);
    const double var = std::pow(std_of(v), 2);
    EXPECT_NEAR(m, 400.0, 4.0);
    EXPECT_NEAR(var, 400.0, 20.0);
}

TEST(SynthesizeNoise, ScaledShotAndReadNoiseVarianceAdds)
{
    NoiseModelParams p;
    p.shot_gain_a = 1.5;
    p.read_sigma = 3.0;
    p.quant_step = 1.0;
    p.seed = 9;
    const RawFrame raw = synthesize_noise(FloatFrame::constant(256, 256, 200.0), p, meta_with());
    std::vector<double> v(raw.samples().begin(), raw.samples().end());
    // Uniform dither plus final rounding contribute 1/12 each.
    const double expected = 1.5 * 200.0 + 9.0 + 2.0 / 12.0;
    EXPECT_NEAR(std::pow(std_of(v), 2), expected, 0.05 * expected);
}

TEST(SynthesizeNoise, FpnOnlyIsExact)
{
    NoiseModelParams p = silent();
    p.fpn = std::make_shared<FpnMap>(FpnMap::uniform(8, 8, 2.0f, 3.0f));
    const RawFrame raw = synthesize_noise(FloatFrame::constant(8, 8, 0.0), p, meta_with(16, 1.5, 4.0));
    for (std::uint16_t v : raw.samples())
        EXPECT_EQ(v, 15);
}

TEST(SynthesizeNoise, FpnShapeMismatchIsRejected)
{
    NoiseModelParams p = silent();
    p.fpn = std::make_shared<FpnMap>(FpnMap::zero(4, 4));
    EXPECT_ERROR_KIND(synthesize_noise(FloatFrame::constant(8, 8, 0.0), p, meta_with()), ErrorKind::Argument);
    EXPECT_ERROR_KIND(synthesize_noise(FloatFrame::constant(2, 2, -1.0), silent(), meta_with()),
                      ErrorKind::Argument);
}

TEST(SynthesizeNoise, ClampsAtFullScale)
{
    const RawFrame raw = synthesize_noise(FloatFrame::constant(4, 4, 5000.0), silent(), meta_with(10));
    for (std::uint16_t v : raw.samples())
        EXPECT_EQ(v, 1023);
}

TEST(SynthesizeNoise, DarkBandingHasPeriodFourAndIsRecovered)
{
    NoiseModelParams p = silent();
    p.read_sigma = 2.0;
    p.pbn = PbnParams{8.0, 4, 1};
    p.seed = 21;
    const int w = 256;
    const int h = 64;
    const RawFrame raw = synthesize_noise(FloatFrame::constant(w, h, 0.0), p, meta_with(10, 1.0, 1.0, 64));

    // Periodogram of every row, summed; the dominant non-DC bin must be w / 4.
    std::vector<double> power(w / 2 + 1, 0.0);
    for (int y = 0; y < h; ++y) {
        double m = 0.0;
        for (int x = 0; x < w; ++x)
            m += raw.at(x, y);
        m /= w;
        for (int k = 1; k <= w / 2; ++k) {
            std::complex<double> acc = 0.0;
            for (int x = 0; x < w; ++x)
                acc += (raw.at(x, y) - m) * std::polar(1.0, -2.0 * std::numbers::pi * k * x / w);
            power[k] += std::norm(acc);
        }
    }
    int best = 1;
    for (int k = 1; k <= w / 2; ++k)
        if (power[k] > power[best])
            best = k;
    EXPECT_EQ(best, w / 4);

    const PbnEstimate est = estimate_pbn(raw, default_pbn_theta(2.0));
    EXPECT_NEAR(est.kappa, 8.0, 0.16);
    EXPECT_EQ(est.phase, 1);
}

TEST(SynthesizeNoise, DeterministicPerSeedAndIndex)
{
    NoiseModelParams p;
    p.read_sigma = 4.0;
    p.pbn = PbnParams{3.0, 4, 2};
    p.seed = 77;
    const FloatFrame clean = make_float(32, 16, [](int x, int y) { return 100.0 + x + 2 * y; });
    CaptureMeta m = meta_with(12);
    const RawFrame a = synthesize_noise(clean, p, m);
    EXPECT_EQ(a, synthesize_noise(clean, p, m));
    auto samples = [](const RawFrame& f) { return std::vector<std::uint16_t>(f.samples().begin(), f.samples().end()); };
    m.frame_index = 1;
    EXPECT_NE(samples(a), samples(synthesize_noise(clean, p, m)));
    p.seed = 78;
    m.frame_index = 0;
    EXPECT_NE(samples(a), samples(synthesize_noise(clean, p, m)));
}

TEST(NoiseParams, JsonRoundTrip)
{
    NoiseModelParams p;
    p.shot_gain_a = 0.75;
    p.read_sigma = 2.5;
    p.quant_step = 0.0;
    p.pbn = PbnParams{4.0, 4, 3};
    p.seed = 123;
    const NoiseModelParams q = noise_params_from_json(to_json(p));
    EXPECT_EQ(q.shot_gain_a, 0.75);
    EXPECT_EQ(q.read_sigma, 2.5);
    EXPECT_EQ(q.quant_step, 0.0);
    EXPECT_EQ(q.seed, 123u);
    ASSERT_TRUE(q.pbn.has_value());
    EXPECT_EQ(*q.pbn, *p.pbn);
    EXPECT_ERROR_KIND(noise_params_from_json(nlohmann::json::array()), ErrorKind::Format);
    EXPECT_ERROR_KIND(noise_params_from_json({{"read_sigma", -1.0}}), ErrorKind::Argument);
}
