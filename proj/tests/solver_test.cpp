#include "capplan/solver.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "capplan/error.hpp"

using namespace capplan;
using namespace capplan::solver;

namespace {

// Erlang C by direct summation of the M/M/m state probabilities.
double erlang_c_direct(int m, double a) {
  double term = 1.0, sum = 0.0;
  for (int k = 0; k < m; ++k) {
    sum += term;
    term *= a / (k + 1);
  }
  const double tail = term / (1.0 - a / m);
  return tail / (sum + tail);
}

// Machine-repairman chain solved by normalizing unnormalized probabilities.
struct ClosedRef {
  double x, r;
};

ClosedRef birth_death_reference(int n, int m, double s, double z) {
  std::vector<double> p(n + 1);
  p[0] = 1.0;
  for (int k = 1; k <= n; ++k) {
    const double birth = z > 0 ? (n - k + 1) / z : 0.0;
    const double death = std::min(k, m) / s;
    p[k] = p[k - 1] * birth / death;
  }
  double total = 0.0, busy = 0.0;
  for (int k = 0; k <= n; ++k) total += p[k];
  for (int k = 0; k <= n; ++k) busy += p[k] / total * std::min(k, m);
  const double x = busy / s;
  return {x, n / x - z};
}

// Textbook MVA for single-server queues and an optional think time.
ClosedRef mva_reference(int n, const std::vector<double>& s, double z) {
  std::vector<double> q(s.size(), 0.0);
  double x = 0, r = 0;
  for (int k = 1; k <= n; ++k) {
    r = 0;
    std::vector<double> rk(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) r += rk[i] = s[i] * (1 + q[i]);
    x = k / (r + z);
    for (std::size_t i = 0; i < s.size(); ++i) q[i] = x * rk[i];
  }
  return {x, r};
}

Network single(int n, double z, int m, double s) {
  return Network::build({{"tc", NodeKind::Queueing, m, s}}, Workload::closed(n, z));
}

}  // namespace

TEST(ErlangC, MatchesDirectSum) {
  for (int m = 1; m <= 40; ++m) {
    for (double rho : {0.05, 0.3, 0.7, 0.95, 0.999}) {
      const double a = rho * m;
      EXPECT_NEAR(erlang_c(m, a), erlang_c_direct(m, a), 1e-12) << m << ' ' << rho;
    }
  }
  EXPECT_THROW(erlang_c(2, 2.0), SaturationError);
}

TEST(Open, TwoServerQueueTextbookValues) {
  const auto net = Network::build({{"cpu", NodeKind::Queueing, 2, 1.0}}, Workload::open(1.5));
  const auto sol = solve_open(net);
  EXPECT_NEAR(erlang_c(2, 1.5), 9.0 / 14.0, 1e-12);
  EXPECT_NEAR(sol.nodes[0].waiting_time, 9.0 / 7.0, 1e-12);
  EXPECT_NEAR(sol.response_time, 16.0 / 7.0, 1e-12);
  EXPECT_NEAR(sol.nodes[0].utilization, 0.75, 1e-15);
  EXPECT_NEAR(sol.mean_population, 1.5 * 16.0 / 7.0, 1e-12);
}

TEST(Open, ParallelEqualsSerial) {
  const auto whole = Network::build({{"server", NodeKind::Queueing, 1, 1.0}}, Workload::open(0.5));
  const auto split = solve_open_split(whole, 2);
  std::ifstream in(CAPPLAN_TEST_DATA "/tandem.net");
  const auto tandem = solve(parse_network_config(in));
  EXPECT_NEAR(split.response_time, 4.0 / 3.0, 1e-12);
  EXPECT_NEAR(tandem.response_time, 4.0 / 3.0, 1e-12);
  EXPECT_DOUBLE_EQ(split.throughput, 0.5);
}

TEST(Open, SaturationNamesBottleneck) {
  const auto net = Network::build(
      {{"web", NodeKind::Queueing, 1, 0.1}, {"db", NodeKind::Queueing, 1, 0.5}},
      Workload::open(2.0));
  try {
    solve_open(net);
    FAIL();
  } catch (const SaturationError& e) {
    EXPECT_EQ(e.node(), "db");
  }
}

TEST(Closed, BirthDeathMatchesReference) {
  for (int m = 1; m <= 6; ++m) {
    for (int n = 1; n <= 25; ++n) {
      for (double z : {0.0, 0.5, 3.0}) {
        const auto sol = solve_closed_birth_death(single(n, z, m, 0.7));
        const auto ref = birth_death_reference(n, m, 0.7, z);
        if (z == 0) {
          EXPECT_NEAR(sol.throughput, std::min(n, m) / 0.7, 1e-9);
        } else {
          EXPECT_NEAR(sol.throughput, ref.x, 1e-9 * ref.x);
          EXPECT_NEAR(sol.response_time, ref.r, 1e-9 * ref.r);
        }
      }
    }
  }
}

TEST(Closed, MvaMatchesReferenceOnTandem) {
  const auto net = Network::build({{"a", NodeKind::Queueing, 1, 0.2},
                                   {"b", NodeKind::Queueing, 1, 0.5},
                                   {"think", NodeKind::Delay, 1, 1.0}},
                                  Workload::closed(12, 2.0));
  const auto sol = solve_closed_mva(net);
  // A delay node adds to think time in the reference.
  const auto ref = mva_reference(12, {0.2, 0.5}, 3.0);
  EXPECT_NEAR(sol.throughput, ref.x, 1e-12);
  EXPECT_NEAR(sol.response_time, ref.r + 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(sol.mean_population, 12.0);
}

TEST(Closed, MvaRejectsMultiServerAndDispatchPicksExact) {
  EXPECT_THROW(solve_closed_mva(single(5, 0, 3, 1.0)), UsageError);
  EXPECT_EQ(solve_closed(single(5, 1, 3, 1.0)).method, Method::BirthDeath);
  EXPECT_EQ(solve_closed(single(5, 1, 1, 1.0)).method, Method::Mva);
  const auto two = Network::build(
      {{"pool", NodeKind::Queueing, 4, 1.0}, {"disk", NodeKind::Queueing, 1, 0.1}},
      Workload::closed(10, 1));
  EXPECT_EQ(solve_closed(two).method, Method::SeidmannMva);
}

TEST(Closed, SeidmannExactForSingleServer) {
  const auto net = single(9, 2.0, 1, 0.4);
  EXPECT_NEAR(solve_closed_seidmann(net).throughput, solve_closed_mva(net).throughput, 1e-12);
}

TEST(Closed, LittleLawHoldsEverywhere) {
  std::mt19937_64 gen(5);
  std::uniform_int_distribution<int> nd(1, 60), md(1, 8);
  std::uniform_real_distribution<double> sd(0.05, 3.0), zd(0.0, 5.0);
  for (int i = 0; i < 300; ++i) {
    const int n = nd(gen);
    const double z = zd(gen);
    const auto sol = solve_closed(single(n, z, md(gen), sd(gen)));
    EXPECT_NEAR(sol.throughput * (sol.response_time + z), n, 1e-9 * n);
  }
}

TEST(Bounds, TomcatModels) {
  const auto b18 = system_bounds(single(508, 0, 254, 0.2236));
  EXPECT_NEAR(b18.max_throughput, 1135.96, 0.01);
  EXPECT_DOUBLE_EQ(b18.min_response, 0.2236);
  EXPECT_NEAR(b18.knee, 254, 1e-9);
  const auto b16 = system_bounds(single(600, 0, 300, 0.4444));
  EXPECT_NEAR(b16.max_throughput, 675.07, 0.1);
  EXPECT_NEAR(solve_closed(single(600, 0, 300, 0.4444)).response_time, 0.8888, 1e-12);
}

TEST(ThreadPool, HockeyStick) {
  EXPECT_DOUBLE_EQ(thread_pool_limit(100, 254, 0.2236).response_time, 0.2236);
  EXPECT_NEAR(thread_pool_limit(508, 254, 0.2236).response_time, 0.4472, 1e-15);
  EXPECT_NEAR(thread_pool_limit(100.5, 254, 0.2236).throughput, 100.5 / 0.2236, 1e-9);
}

TEST(Network, ValidationErrors) {
  EXPECT_THROW(Network::build({}, Workload::closed(1, 0)), ConfigError);
  EXPECT_THROW(Network::build({{"a", NodeKind::Queueing, 1, 0.0}}, Workload::closed(1, 0)),
               ConfigError);
  EXPECT_THROW(Network::build({{"a", NodeKind::Queueing, 0, 1.0}}, Workload::closed(1, 0)),
               ConfigError);
  EXPECT_THROW(Network::build({{"a", NodeKind::Queueing, 1, 1.0}, {"a", NodeKind::Delay, 1, 1.0}},
                              Workload::closed(1, 0)),
               ConfigError);
  EXPECT_THROW(solve_open(single(1, 0, 1, 1.0)), UsageError);
}

TEST(Network, BuilderMatchesDirectConstruction) {
  const auto net = NetworkBuilder()
                       .closed_workload("req", 508, 0)
                       .node("tomcat", NodeKind::Queueing, 254)
                       .demand("tomcat", 0.2236)
                       .build();
  EXPECT_EQ(net.nodes().size(), 1u);
  EXPECT_EQ(net.workload().population, 508);
  EXPECT_EQ(net.with_population(10).workload().population, 10);
}

TEST(Config, ParsesAndReports) {
  std::ifstream in(CAPPLAN_TEST_DATA "/tomcat2018.net");
  const auto net = parse_network_config(in);
  const auto sol = solve(net);
  const auto text = report(net, sol);
  EXPECT_NE(text.find("1135.9571"), std::string::npos) << text;
  EXPECT_NE(text.find("Bottleneck"), std::string::npos);
  std::istringstream empty("# nothing\n");
  EXPECT_THROW(parse_network_config(empty), ConfigError);
  std::istringstream bad("closed 5 0\nnode x queue two 1.0\n");
  EXPECT_THROW(parse_network_config(bad), ConfigError);
}

TEST(Config, ReportRejectsUnsolved) {
  EXPECT_THROW(report(single(1, 0, 1, 1.0), Solution{}), UsageError);
}
