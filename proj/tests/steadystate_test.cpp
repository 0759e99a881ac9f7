#include "capplan/steadystate.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "capplan/error.hpp"

using namespace capplan;
using namespace capplan::steadystate;

namespace {

LoadProfile synthetic(double m, double s, double n_max, double step, double noise,
                      std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> eps(0.0, noise);
  std::vector<SteadyStatePoint> pts;
  std::int64_t ts = 0;
  for (double n = step; n <= n_max + 1e-9; n += step) {
    const double x = std::min(n, m) / s * (noise > 0 ? 1.0 + eps(gen) : 1.0);
    pts.push_back({n, x, n / x, ts += 300000});
  }
  return make_profile(std::move(pts));
}

}  // namespace

TEST(Profile, SortsByConcurrencyThenTime) {
  ingest::MetricSample a, b, c;
  a.timestamp_ms = 3; a.concurrency = 5; a.throughput = 1; a.response_time = 5;
  b.timestamp_ms = 1; b.concurrency = 2; b.throughput = 1; b.response_time = 2;
  c.timestamp_ms = 2; c.concurrency = 5; c.throughput = 1; c.response_time = 5;
  const auto p = to_steady_state({a, b, c});
  ASSERT_EQ(p.points.size(), 3u);
  EXPECT_EQ(p.points[0].timestamp_ms, 1);
  EXPECT_EQ(p.points[1].timestamp_ms, 2);
  EXPECT_EQ(p.points[2].timestamp_ms, 3);
  EXPECT_THROW(to_steady_state({}), DataError);
}

TEST(Profile, BinsKeepOnlyOccupiedCells) {
  const auto p = make_profile({{1, 10, 0.1, 1}, {3, 30, 0.1, 2}, {4, 50, 0.08, 3}, {25, 100, 0.25, 4}});
  const auto b = bin_profile(p, 5.0);
  ASSERT_EQ(b.bins.size(), 2u);
  EXPECT_EQ(b.bins[0].left_edge, 0.0);
  EXPECT_EQ(b.bins[0].count, 3u);
  EXPECT_DOUBLE_EQ(b.bins[0].mean_throughput, 30.0);
  EXPECT_DOUBLE_EQ(b.bins[0].median_throughput, 30.0);
  EXPECT_EQ(b.bins[1].left_edge, 25.0);
  EXPECT_THROW(bin_profile(p, 0.0), ConfigError);
}

TEST(Knee, NoiselessRecoveryWithinOneStep) {
  for (auto [m, s] : {std::pair{300.0, 0.4444}, std::pair{254.0, 0.2236}, std::pair{30.0, 0.1}}) {
    const double step = m / 25.0;
    const auto k = detect_knee(synthetic(m, s, 2.5 * m, step, 0.0, 1));
    ASSERT_EQ(k.status, KneeStatus::Found);
    EXPECT_NEAR(k.knee, m, step);
    EXPECT_NEAR(k.plateau, m / s, (m / s) * step / m);
    EXPECT_NEAR(k.service_time, s, 1e-6 * s);
  }
}

TEST(Knee, NoisyRecoveryWithinFivePercent) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto k = detect_knee(synthetic(254, 0.2236, 600, 4, 0.01, seed));
    ASSERT_EQ(k.status, KneeStatus::Found);
    EXPECT_NEAR(k.knee, 254, 0.05 * 254) << seed;
    EXPECT_NEAR(k.plateau, 254 / 0.2236, 0.05 * 254 / 0.2236) << seed;
  }
}

TEST(Knee, UnsaturatedProfileIsIndeterminate) {
  const auto k = detect_knee(synthetic(1000, 0.2, 200, 5, 0.0, 1));
  EXPECT_EQ(k.status, KneeStatus::Indeterminate);
  const auto tiny = detect_knee(synthetic(5, 0.2, 3, 1, 0.0, 1));
  EXPECT_EQ(tiny.status, KneeStatus::Indeterminate);
}

TEST(Io, ProfileRoundTripIsExact) {
  const auto p = synthetic(30, 0.1, 60, 0.75, 0.01, 3);
  std::ostringstream out;
  write_profile(out, p);
  std::istringstream in(out.str());
  const auto back = read_profile(in);
  ASSERT_EQ(back.points.size(), p.points.size());
  for (std::size_t i = 0; i < p.points.size(); ++i) {
    EXPECT_EQ(back.points[i].concurrency, p.points[i].concurrency);
    EXPECT_EQ(back.points[i].throughput, p.points[i].throughput);
    EXPECT_EQ(back.points[i].response_time, p.points[i].response_time);
    EXPECT_EQ(back.points[i].timestamp_ms, p.points[i].timestamp_ms);
  }
}

TEST(Io, KneeLinesCarryPrefix) {
  const auto k = detect_knee(synthetic(30, 0.1, 60, 1, 0.0, 1));
  std::ostringstream out;
  write_knee(out, k, "# ");
  EXPECT_EQ(out.str().rfind("# knee.status=found", 0), 0u) << out.str();
}
