#include "capplan/simoracle.hpp"

#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "capplan/error.hpp"
#include "capplan/solver.hpp"

using namespace capplan;
using namespace capplan::simoracle;

TEST(Rng, ReproducibleAndStreamsDiffer) {
  Rng a(42, 0), b(42, 0), c(42, 1);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next();
    EXPECT_EQ(x, b.next());
    differs |= x != c.next();
  }
  EXPECT_TRUE(differs);
}

TEST(Rng, ExponentialMean) {
  Rng r(7, 0);
  double sum = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    ASSERT_GT(u, 0.0);
    ASSERT_LE(u, 1.0);
    sum += r.exponential(2.0);
  }
  EXPECT_NEAR(sum / n, 2.0, 0.02);
}

TEST(Open, MM1AgainstAnalytic) {
  SimConfig c;
  c.arrival_rate = 0.5;
  c.service_time = 1.0;
  c.run_length = 200000;
  const auto r = simulate_open(c);
  EXPECT_NEAR(r.response_time.mean, 2.0, 4 * r.response_time.std_error);
  EXPECT_NEAR(r.utilization, 0.5, 0.01);
  EXPECT_NEAR(r.throughput.mean, 0.5, 0.01);
}

TEST(Open, MMmAgainstErlangC) {
  SimConfig c;
  c.arrival_rate = 1.5;
  c.servers = 2;
  c.service_time = 1.0;
  c.run_length = 200000;
  c.seed = 3;
  const auto r = simulate_open(c);
  EXPECT_NEAR(r.response_time.mean, 16.0 / 7.0, 4 * r.response_time.std_error);
  EXPECT_NEAR(r.queue_length, 1.5 * 16.0 / 7.0, 0.15);
}

TEST(Closed, RepairmanAgainstBirthDeath) {
  SimConfig c;
  c.kind = SystemKind::Closed;
  c.population = 10;
  c.servers = 3;
  c.service_time = 1.0;
  c.think_time = 4.0;
  c.run_length = 200000;
  const auto r = simulate_closed(c);
  const auto net = solver::Network::build({{"s", solver::NodeKind::Queueing, 3, 1.0}},
                                          solver::Workload::closed(10, 4.0));
  const auto exact = solver::solve_closed_birth_death(net);
  EXPECT_NEAR(r.throughput.mean, exact.throughput, 4 * r.throughput.std_error + 1e-3);
  EXPECT_NEAR(r.response_time.mean, exact.response_time, 4 * r.response_time.std_error);
}

TEST(Closed, ZeroThinkKeepsPoolBusy) {
  SimConfig c;
  c.kind = SystemKind::Closed;
  c.population = 8;
  c.servers = 4;
  c.service_time = 0.5;
  c.run_length = 100000;
  const auto r = simulate_closed(c);
  EXPECT_NEAR(r.throughput.mean, 8.0, 0.1);
  EXPECT_DOUBLE_EQ(r.utilization, 1.0);
  EXPECT_NEAR(r.queue_length, 8.0, 1e-9);
}

TEST(Config, Errors) {
  SimConfig c;
  c.arrival_rate = 2.0;
  c.service_time = 1.0;
  EXPECT_THROW(simulate_open(c), SaturationError);
  c.arrival_rate = 0.5;
  c.service_time = 0.0;
  EXPECT_THROW(simulate_open(c), ConfigError);
}

TEST(Determinism, SameSeedSameResult) {
  SimConfig c;
  c.arrival_rate = 0.7;
  c.service_time = 1.0;
  c.run_length = 20000;
  const auto a = simulate(c), b = simulate(c);
  EXPECT_EQ(a.response_time.mean, b.response_time.mean);
  std::ostringstream out;
  write_result(out, c, a);
  EXPECT_NE(out.str().find("R_hat="), std::string::npos);
}
