#include "support.hpp"

#include "endonoise/synthetic_suite.hpp"

using namespace endonoise;
using namespace endonoise::test;

TEST(SuiteConfig, JsonRoundTrip)
{
    SuiteConfig c;
    c.seed = 77;
    c.width = 64;
    c.pairs_per_class = 3;
    c.flat_levels = {50.0, 500.0};
    c.classes[2].kappa_max = 40.0;
    const SuiteConfig back = suite_config_from_json(to_json(c));
    EXPECT_EQ(to_json(back), to_json(c));
    EXPECT_EQ(suite_config_from_json(nlohmann::json::object()).width, 128);
}

TEST(SuiteConfig, Validation)
{
    SuiteConfig c;
    c.width = 63;
    EXPECT_ERROR_KIND(c.validate(), ErrorKind::Argument);
    c = {};
    c.flat_levels = {100.0};
    EXPECT_ERROR_KIND(c.validate(), ErrorKind::Argument);
    c = {};
    c.pbn_period = 3;
    EXPECT_ERROR_KIND(c.validate(), ErrorKind::Argument);
    c = {};
    c.fpn_offset_max = -1.0;
    EXPECT_ERROR_KIND(c.validate(), ErrorKind::Argument);
    EXPECT_ERROR_KIND(suite_config_from_json(nlohmann::json::array()), ErrorKind::Format);
}

TEST(RandomFpn, RangesAndDeterminism)
{
    const FpnMap a = random_fpn(32, 16, 0.2, 16.0, 4, "s");
    const FpnMap b = random_fpn(32, 16, 0.2, 16.0, 4, "s");
    EXPECT_TRUE(std::equal(a.slope().begin(), a.slope().end(), b.slope().begin()));
    for (float k : a.slope()) {
        EXPECT_GE(k, 0.0f);
        EXPECT_LE(k, 0.2f);
    }
    for (float o : a.offset()) {
        EXPECT_GE(o, 0.0f);
        EXPECT_LE(o, 16.0f);
    }
}

TEST(SyntheticScene, StaysInRange)
{
    const FloatFrame f = synthetic_scene(128, 128, BayerPattern::RGGB, 1, 0);
    const auto [lo, hi] = std::minmax_element(f.samples().begin(), f.samples().end());
    EXPECT_GE(*lo, 0.0);
    EXPECT_LE(*hi, 1023.0 - 64.0);
    EXPECT_GT(std_of(f.samples()), 10.0);
}

TEST(SyntheticPairs, LabelsAndClasses)
{
    SuiteConfig c;
    c.width = 32;
    c.height = 32;
    c.pairs_per_class = 2;
    auto fpn = std::make_shared<const FpnMap>(random_fpn(32, 32, 0.2, 16.0, 1, c.sensor_id));
    const std::vector<TestPair> pairs = synthetic_pairs(c, fpn);
    ASSERT_EQ(pairs.size(), 6u);
    EXPECT_EQ(pairs.front().id, "Low_0000");
    EXPECT_EQ(pairs.back().id, "Large_0001");
    for (const TestPair& p : pairs) {
        EXPECT_EQ(p.gain_class, c.thresholds.classify(p.noisy.meta().analog_gain));
        EXPECT_EQ(p.clean.provenance(), "synthetic_truth");
    }
}
