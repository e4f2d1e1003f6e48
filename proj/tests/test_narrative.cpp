#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "qtrust/narrative.hpp"

using namespace qtrust;
using namespace qtrust::narrative;

namespace {

// Sorted-list oracle: the value at 1-based position max(1, ceil(q * n)).
double sorted_oracle(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const auto n = static_cast<double>(v.size());
  const auto rank = std::max(1.0, std::ceil(q * n));
  return v[static_cast<std::size_t>(rank) - 1];
}

NarrativeCalibration cal(double vee, double dnts) {
  NarrativeCalibration c;
  c.vee_threshold = vee;
  c.dnts_threshold = dnts;
  return c;
}

metrics::EpisodeTrace flat_trace(int n, double q_minus_return) {
  metrics::EpisodeTrace tr;
  tr.gamma = 0.5;
  tr.complete = true;
  for (int t = 0; t < n; ++t) {
    metrics::TraceRecord r;
    r.t = t;
    r.reward = 0.0;
    r.q_value = q_minus_return;
    r.embedding = {1.0, 1.0};
    tr.records.push_back(r);
  }
  return tr;
}

}  // namespace

TEST(Quantile, OneToHundred) {
  std::vector<double> v;
  for (int i = 100; i >= 1; --i) v.push_back(i);
  EXPECT_EQ(nearest_rank_quantile(v, 0.75), 75.0);
  EXPECT_EQ(nearest_rank_quantile(v, 1.0), 100.0);
  EXPECT_EQ(nearest_rank_quantile(v, 0.0), 1.0);
  EXPECT_EQ(nearest_rank_quantile(v, 0.5), 50.0);
  EXPECT_EQ(nearest_rank_quantile(v, 0.501), 51.0);
}

TEST(Quantile, MatchesSortedOracle) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> v(1 + rng() % 60);
    for (double& x : v) x = std::floor(u(rng) * 20.0);
    const double q = (trial % 10 == 0) ? 0.75 : u(rng);
    ASSERT_EQ(nearest_rank_quantile(v, q), sorted_oracle(v, q));
  }
}

TEST(Quantile, Rejections) {
  EXPECT_THROW(nearest_rank_quantile({}, 0.5), std::invalid_argument);
  EXPECT_THROW(nearest_rank_quantile({1.0}, 1.5), std::invalid_argument);
  EXPECT_THROW(nearest_rank_quantile({1.0}, -0.1), std::invalid_argument);
}

TEST(Calibrate, IdenticalValues) {
  metrics::EmbeddingSet set(2, {0.0, 1.0});
  const auto c = calibrate({flat_trace(10, 2.0), flat_trace(5, 2.0)}, set);
  EXPECT_EQ(c.vee_threshold, 2.0);
  EXPECT_EQ(c.dnts_threshold, 1.0);
  EXPECT_EQ(c.trace_count, 2u);
  EXPECT_EQ(c.sample_count, 15u);
  EXPECT_EQ(c.vee_quantile, 0.75);
}

TEST(Calibrate, FullQuantileIsMax) {
  metrics::EmbeddingSet set(2, {1.0, 1.0});
  const auto c = calibrate({flat_trace(4, 1.0), flat_trace(4, 3.0), flat_trace(4, 2.0)}, set, 1.0, 1.0);
  EXPECT_EQ(c.vee_threshold, 3.0);
  EXPECT_EQ(c.dnts_threshold, 0.0);
}

TEST(Calibrate, Rejections) {
  metrics::EmbeddingSet set(2, {1.0, 1.0});
  EXPECT_THROW(calibrate({}, set), std::invalid_argument);
  auto incomplete = flat_trace(3, 1.0);
  incomplete.complete = false;
  EXPECT_THROW(calibrate({incomplete}, set), metrics::IncompleteTrace);
}

TEST(Classify, Examples) {
  const auto c = cal(1.0, 2.0);
  EXPECT_EQ(classify(0.0, 0.0, c), Regime::LowVeeLowDnts);
  EXPECT_EQ(classify(std::nextafter(1.0, 2.0), 0.0, c), Regime::HighVeeLowDnts);
  EXPECT_EQ(classify(1.0, 2.0, c), Regime::LowVeeLowDnts);
  EXPECT_EQ(classify(0.5, 2.5, c), Regime::LowVeeHighDnts);
  EXPECT_EQ(classify(5.0, 5.0, c), Regime::HighVeeHighDnts);
}

TEST(Classify, FlipsExactlyAtThresholds) {
  const auto c = cal(3.0, 7.0);
  for (int i = -200; i <= 200; ++i) {
    const double v = 3.0 + i * 0.015;
    const double d = 7.0 + i * 0.035;
    const auto r = classify(v, 0.0, c);
    EXPECT_EQ(r == Regime::HighVeeLowDnts, v > 3.0) << v;
    const auto s = classify(0.0, d, c);
    EXPECT_EQ(s == Regime::LowVeeHighDnts, d > 7.0) << d;
  }
  EXPECT_EQ(classify(std::nextafter(3.0, 0.0), 0.0, c), Regime::LowVeeLowDnts);
  EXPECT_EQ(classify(0.0, std::nextafter(7.0, 10.0), c), Regime::LowVeeHighDnts);
}

TEST(Narrate, PureAndEchoesInputs) {
  const metrics::TrustPoint p{4, 1.25, 0.5, metrics::VeeMode::Instantaneous};
  const auto c = cal(1.0, 1.0);
  const auto a = narrate(p, c);
  EXPECT_EQ(a, narrate(p, c));
  EXPECT_EQ(a.regime, Regime::HighVeeLowDnts);
  EXPECT_EQ(a.vee, 1.25);
  EXPECT_EQ(a.dnts, 0.5);
  EXPECT_EQ(a.vee_threshold, 1.0);
  EXPECT_NE(a.text.find("1.250"), std::string::npos) << a.text;
  EXPECT_EQ(a.text.find('{'), std::string::npos) << a.text;
}

TEST(Narrate, NeverFailsOnAnyRegime) {
  const auto c = cal(1.0, 1.0);
  for (double v : {0.0, 2.0})
    for (double d : {0.0, 2.0}) {
      const auto s = narrate({0, v, d, metrics::VeeMode::Cumulative}, c);
      EXPECT_FALSE(s.text.empty());
    }
}

TEST(Templates, BuiltinCoversEveryRegime) {
  const auto& t = Templates::builtin();
  EXPECT_GE(t.version(), 1);
  for (auto r : kAllRegimes) EXPECT_FALSE(t.text(r).empty()) << regime_name(r);
}

TEST(Templates, KeywordsMatchInterpretation) {
  const auto& t = Templates::builtin();
  for (auto r : {Regime::LowVeeLowDnts, Regime::LowVeeHighDnts})
    EXPECT_NE(t.text(r).find("understands its environment"), std::string::npos);
  for (auto r : {Regime::LowVeeHighDnts, Regime::HighVeeHighDnts})
    EXPECT_NE(t.text(r).find("not similar to what it has seen in training"), std::string::npos);
  EXPECT_NE(t.text(Regime::HighVeeHighDnts).find("should not be trusted"), std::string::npos);
  EXPECT_NE(t.text(Regime::HighVeeHighDnts).find("misjudging the value"), std::string::npos);
}

TEST(Templates, ParseRejectsBadFiles) {
  std::istringstream missing("version = 1\nlow-vee/low-dnts = a\nlow-vee/high-dnts = b\nhigh-vee/low-dnts = c\n");
  EXPECT_THROW(Templates::parse(missing), std::invalid_argument);
  std::istringstream dup(
      "version = 1\nlow-vee/low-dnts = a\nlow-vee/low-dnts = a\nlow-vee/high-dnts = b\nhigh-vee/low-dnts = c\n"
      "high-vee/high-dnts = d\n");
  EXPECT_THROW(Templates::parse(dup), std::invalid_argument);
  std::istringstream unknown("version = 1\nmedium = x\n");
  EXPECT_THROW(Templates::parse(unknown), std::invalid_argument);
  std::istringstream no_version(
      "low-vee/low-dnts = a\nlow-vee/high-dnts = b\nhigh-vee/low-dnts = c\nhigh-vee/high-dnts = d\n");
  EXPECT_THROW(Templates::parse(no_version), std::invalid_argument);
}

TEST(Templates, CustomFileRenders) {
  std::istringstream in(
      "# comment\nversion = 3\nlow-vee/low-dnts = fine {vee}\nlow-vee/high-dnts = new {dnts}\n"
      "high-vee/low-dnts = off {vee_threshold}\nhigh-vee/high-dnts = lost {dnts_threshold}\n");
  const auto t = Templates::parse(in);
  EXPECT_EQ(t.version(), 3);
  EXPECT_EQ(narrate({0, 0.0, 5.0, metrics::VeeMode::Instantaneous}, cal(1.0, 2.0), t).text, "new 5.000");
  EXPECT_EQ(narrate({0, 3.0, 5.0, metrics::VeeMode::Instantaneous}, cal(1.0, 2.0), t).text, "lost 2.000");
}

TEST(Calibration, JsonRoundTrip) {
  NarrativeCalibration c{1.5, 0.125, 0.75, 0.9, 4, 321};
  EXPECT_EQ(calibration_from_json(to_json(c)), c);
  for (auto r : kAllRegimes) EXPECT_EQ(parse_regime(regime_name(r)), r);
  EXPECT_FALSE(parse_regime("high").has_value());
}
