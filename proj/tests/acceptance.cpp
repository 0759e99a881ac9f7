// Acceptance checks. One PASS/FAIL line per criterion; exit status is the
// number of failures.
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "capplan/calibrate.hpp"
#include "capplan/ingest.hpp"
#include "capplan/policy.hpp"
#include "capplan/simoracle.hpp"
#include "capplan/solver.hpp"
#include "capplan/steadystate.hpp"

using namespace capplan;

namespace {

int failures = 0;

void verdict(const char* name, bool ok, const std::string& detail) {
  std::printf("%s  %-28s %s\n", ok ? "PASS" : "FAIL", name, detail.c_str());
  if (!ok) ++failures;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

void service_time() {
  const double s = ingest::estimate_service_time(0.465260, 519.748550);
  verdict("service-time", std::abs(s - 0.0008951636) <= 1e-9, fmt("S=%.10f", s));
}

void table_consistency() {
  const std::string rows[] = {
      "1486771200000,502.171674,170.266663,0.000912,0.336740,0.458120",
      "1486771500000,494.403035,175.375000,0.001043,0.355975,0.515420",
      "1486771800000,509.541751,188.866669,0.000885,0.360924,0.450980",
      "1486772100000,507.089094,188.437500,0.000910,0.367479,0.461700",
      "1486772400000,532.803039,191.466660,0.000880,0.362905,0.468860",
      "1486772700000,528.587722,201.187500,0.000914,0.366283,0.483160",
      "1486773000000,533.439054,202.600006,0.000892,0.378207,0.476080",
      "1486773300000,531.708059,208.187500,0.000909,0.392556,0.483160",
      "1486773600000,532.693783,203.266663,0.000894,0.379749,0.476020",
      "1486773900000,519.748550,200.937500,0.000895,0.381078,0.465260"};
  std::string text = "Timestamp,Xdat,Nest,Sest,Rdat,Udat\n";
  for (const auto& r : rows) text += r + "\n";
  std::istringstream in(text);
  const auto parsed = ingest::parse_metric_samples(in);
  int pass = 0;
  double worst = 0;
  for (const auto& s : parsed.records) {
    const auto rep = ingest::consistency_check(s, 0.05);
    pass += rep.macro.status == ingest::CheckStatus::Pass &&
            rep.micro.status == ingest::CheckStatus::Pass;
    worst = std::max({worst, rep.macro.relative_error, rep.micro.relative_error});
  }
  verdict("littles-law-consistency", pass == 10,
          fmt("%.0f/10 rows pass, worst relative error %.4f", pass, worst));
}

void parallel_serial() {
  using namespace solver;
  const auto whole = Network::build({{"server", NodeKind::Queueing, 1, 1.0}}, Workload::open(0.5));
  const auto tandem = Network::build(
      {{"first", NodeKind::Queueing, 1, 0.5}, {"second", NodeKind::Queueing, 1, 0.5}},
      Workload::open(0.5));
  const double rp = solve_open_split(whole, 2).response_time;
  const double rs = solve_open(tandem).response_time;
  const bool ok = std::abs(rp - 4.0 / 3) <= 1e-12 && std::abs(rs - 4.0 / 3) <= 1e-12;
  verdict("parallel-equals-serial", ok, fmt("R_parallel=%.15f R_serial=%.15f", rp, rs));
}

solver::Network pool(int n, int m, double s, double z = 0.0) {
  return solver::Network::build({{"tomcat", solver::NodeKind::Queueing, m, s}},
                                solver::Workload::closed(n, z));
}

void model_2018() {
  const auto b = solver::system_bounds(pool(508, 254, 0.2236));
  const auto sol = solver::solve_closed(pool(508, 254, 0.2236));
  const bool ok = std::abs(b.max_throughput - 1135.96) <= 0.01 &&
                  std::abs(b.min_response - 0.2236) <= 1e-12 &&
                  std::abs(sol.throughput - b.max_throughput) <= 1e-9;
  verdict("model-2018", ok, fmt("Xmax=%.4f Rmin=%.4f X(508)=%.4f", b.max_throughput,
                                b.min_response, sol.throughput));
}

void model_2016() {
  const auto b = solver::system_bounds(pool(600, 300, 0.4444));
  const double r600 = solver::solve_closed(pool(600, 300, 0.4444)).response_time;
  const bool ok = std::abs(b.max_throughput - 675.07) <= 0.1 && std::abs(r600 - 0.8888) <= 1e-12;
  verdict("model-2016", ok, fmt("Xmax=%.4f R(600)=%.6f", b.max_throughput, r600));
}

// Birth-death against MVA (where MVA applies) to 1e-9, and the Seidmann
// approximation against birth-death to 5%, over the same grid.
void cross_validation() {
  double exact_worst = 0, seid_worst = 0;
  double at_n = 0, at_m = 0;
  int cases = 0;
  for (int m = 1; m <= 5; ++m) {
    for (int n = 1; n <= 20; ++n) {
      for (double s : {0.5, 1.0, 2.0}) {
        for (double z : {0.0, 1.0, 5.0}) {
          const auto net = pool(n, m, s, z);
          const auto bd = solver::solve_closed_birth_death(net);
          if (m == 1) {
            const auto mva = solver::solve_closed_mva(net);
            exact_worst = std::max(exact_worst, std::abs(mva.throughput - bd.throughput) / bd.throughput);
            exact_worst = std::max(exact_worst,
                                   std::abs(mva.response_time - bd.response_time) / bd.response_time);
          }
          const auto sd = solver::solve_closed_seidmann(net);
          const double e = std::max(std::abs(sd.throughput - bd.throughput) / bd.throughput,
                                    std::abs(sd.response_time - bd.response_time) / bd.response_time);
          if (e > seid_worst) {
            seid_worst = e;
            at_n = n;
            at_m = m;
          }
          ++cases;
        }
      }
    }
  }
  const bool ok = exact_worst <= 1e-9 && seid_worst <= 0.05;
  verdict("exact-cross-validation", ok,
          fmt("exact worst %.2e; Seidmann worst %.1f%%", exact_worst, 100 * seid_worst) +
              fmt(" at N=%.0f m=%.0f", at_n, at_m) + fmt(" over %.0f cases", cases));
}

void simulation() {
  simoracle::SimConfig closed;
  closed.kind = simoracle::SystemKind::Closed;
  closed.population = 508;
  closed.servers = 254;
  closed.service_time = 0.2236;
  closed.run_length = 1'000'000;
  closed.seed = 2018;
  const auto c = simoracle::simulate_closed(closed);
  const double c_err = std::abs(c.throughput.mean - 1135.96) / 1135.96;

  simoracle::SimConfig open;
  open.arrival_rate = 0.25;
  open.service_time = 1.0;
  open.run_length = 1'000'000;
  open.seed = 2016;
  const auto o = simoracle::simulate_open(open);
  const double o_dev = std::abs(o.response_time.mean - 4.0 / 3.0);
  const bool ok = c_err <= 0.01 && o_dev <= 3 * o.response_time.std_error;
  verdict("simulation-oracle", ok,
          fmt("closed X_hat=%.2f (%.3f%%)", c.throughput.mean, 100 * c_err) +
              fmt("; open R_hat=%.4f +- %.4f", o.response_time.mean, o.response_time.std_error));
}

steadystate::LoadProfile synthetic(double m, double s, double step, double noise,
                                   std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> eps(0.0, noise);
  std::vector<steadystate::SteadyStatePoint> pts;
  std::int64_t ts = 0;
  for (double n = step; n <= 2.5 * m + 1e-9; n += step) {
    const double x = std::min(n, m) / s * (noise > 0 ? 1.0 + eps(gen) : 1.0);
    const double r = (n <= m ? s : n * s / m) * (noise > 0 ? 1.0 + eps(gen) : 1.0);
    pts.push_back({n, x, r, ts += 300000});
  }
  return steadystate::make_profile(std::move(pts));
}

void knee_recovery() {
  bool ok = true;
  double worst_clean = 0, worst_noisy = 0;
  for (auto [m, s] : {std::pair{300.0, 0.4444}, std::pair{254.0, 0.2236}, std::pair{40.0, 0.05}}) {
    const double step = m / 20.0;
    const auto k = steadystate::detect_knee(synthetic(m, s, step, 0.0, 1));
    const double plateau = m / s;
    const bool clean = k.status == steadystate::KneeStatus::Found &&
                       std::abs(k.knee - m) <= step &&
                       std::abs(k.plateau - plateau) <= step / s;
    worst_clean = std::max(worst_clean, std::abs(k.knee - m) / step);
    ok &= clean;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      const auto kn = steadystate::detect_knee(synthetic(m, s, m / 60.0, 0.01, seed));
      const double e = std::max(std::abs(kn.knee - m) / m, std::abs(kn.plateau - plateau) / plateau);
      worst_noisy = std::max(worst_noisy, e);
      ok &= kn.status == steadystate::KneeStatus::Found && e <= 0.05;
    }
  }
  verdict("knee-recovery", ok,
          fmt("noiseless worst %.3f steps; 1%% noise worst %.2f%%", worst_clean, 100 * worst_noisy));
}

void calibration_roundtrip() {
  bool ok = true;
  double worst_s = 0, worst_m = 0;
  for (auto [m, s] : {std::pair{300, 0.4444}, std::pair{254, 0.2236}}) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      const auto model = calibrate::calibrate_model(synthetic(m, s, m / 60.0, 0.01, seed));
      const double es = std::abs(model.service_time - s) / s;
      const double em = model.threads ? std::abs(*model.threads - m) : 1e9;
      worst_s = std::max(worst_s, es);
      worst_m = std::max(worst_m, em);
      ok &= es <= 0.02 && em <= 5;
    }
  }
  verdict("calibration-roundtrip", ok,
          fmt("worst S error %.2f%%, worst m error %.0f threads", 100 * worst_s, worst_m));
}

void policy_arithmetic() {
  using namespace policy;
  const InstanceModel model{calibrate::CalibratedModel::from_parameters(100, 0.5), 0.004, 0.20};
  auto trace_of = [](const std::vector<double>& d) {
    TrafficTrace t;
    for (std::size_t i = 0; i < d.size(); ++i) t.intervals.push_back({std::int64_t(i) * 300000, d[i]});
    return t;
  };
  std::mt19937_64 gen(99);
  std::uniform_real_distribution<double> ud(0.0, 1200.0);
  std::vector<double> demand(3 * 288);
  for (auto& v : demand) v = ud(gen);
  const auto trace = trace_of(demand);

  ScalingPolicy sched;
  sched.name = "scheduled";
  sched.kind = PolicyKind::Scheduled;
  sched.schedule = schedule_from_trace(trace, model);
  const auto od = simulate_policy(trace, sched, model);
  auto spot = sched;
  spot.name = "spot";
  spot.kind = PolicyKind::Spot;
  spot.spot.discount = 0.90;
  const auto sp = simulate_policy(trace, spot, model);
  const bool fee_ok = sp.instance_hours() == od.instance_hours() &&
                      std::abs(sp.fee - 0.10 * od.fee) <= 1e-12 * od.fee;

  ScalingPolicy as;
  as.name = "autoscale";
  as.autoscale.spinup_delay = 600;
  const auto step = simulate_policy(trace_of({50, 50, 50, 50, 300, 300, 300, 300, 300, 300}), as, model);
  std::vector<int> hit;
  for (std::size_t i = 0; i < step.timeline.size(); ++i) {
    if (step.timeline[i].violation) hit.push_back(static_cast<int>(i));
  }
  const bool step_ok = hit == std::vector<int>{4, 5};
  verdict("policy-arithmetic", fee_ok && od.violation_intervals == 0 && step_ok,
          fmt("spot/on-demand fee %.6f; scheduled violations %.0f; step violations %.0f",
              sp.fee / od.fee, od.violation_intervals, static_cast<double>(hit.size())));
}

void closure() {
  std::mt19937_64 gen(20180101);
  std::uniform_int_distribution<int> md(1, 2000);
  std::uniform_real_distribution<double> sd(1e-4, 10.0), frac(0.0, 4.0);
  double worst = 0;
  for (int i = 0; i < 10000; ++i) {
    const int m = md(gen);
    const auto model = calibrate::CalibratedModel::from_parameters(m, sd(gen));
    const double n = frac(gen) * m;
    const double prod = calibrate::predict_throughput(model, n) * calibrate::predict_response(model, n);
    worst = std::max(worst, std::abs(prod - n) / std::max(1.0, n));
  }
  verdict("model-closure", worst <= 1e-12, fmt("worst relative |X*R - N| = %.2e", worst));
}

}  // namespace

int main() {
  service_time();
  table_consistency();
  parallel_serial();
  model_2018();
  model_2016();
  cross_validation();
  simulation();
  knee_recovery();
  calibration_roundtrip();
  policy_arithmetic();
  closure();
  std::printf("%d of 11 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
