#include "capplan/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>

#include "capplan/error.hpp"
#include "capplan/simoracle.hpp"
#include "capplan/textio.hpp"

namespace capplan::policy {

int InstanceModel::threads() const {
  if (!model.threads) throw ConfigError("instance model has no thread cap (unsaturated calibration)");
  return *model.threads;
}

void InstanceModel::validate() const {
  threads();
  if (!(model.service_time > 0.0)) throw ConfigError("instance model needs S_TC > 0");
  if (!(cpu_per_request > 0.0)) throw ConfigError("cpu_per_request must be positive");
  if (!(on_demand_price >= 0.0)) throw ConfigError("on_demand_price must be >= 0");
}

const char* to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::Autoscale: return "autoscale";
    case PolicyKind::Scheduled: return "scheduled";
    case PolicyKind::Spot: return "spot";
  }
  return "unknown";
}

void ScalingPolicy::validate() const {
  const std::string who = "policy '" + name + "': ";
  if (min_instances < 0) throw ConfigError(who + "min_instances must be >= 0");
  const auto& a = autoscale;
  if (!(a.cpu_threshold > 0.0 && a.cpu_threshold < 1.0)) {
    throw ConfigError(who + "cpu_threshold must lie in (0, 1)");
  }
  if (!(a.spinup_delay >= 0.0)) throw ConfigError(who + "spinup_delay must be >= 0");
  if (a.cooldown && !(*a.cooldown >= 0.0)) throw ConfigError(who + "cooldown must be >= 0");
  if (a.initial_instances < 0 || a.max_instances < 1) {
    throw ConfigError(who + "bad instance limits");
  }
  if (kind == PolicyKind::Spot) {
    if (!(spot.discount >= 0.0 && spot.discount < 1.0)) {
      throw ConfigError(who + "discount must lie in [0, 1)");
    }
    if (!(spot.availability >= 0.0 && spot.availability <= 1.0)) {
      throw ConfigError(who + "availability must lie in [0, 1]");
    }
    if (spot.base == PolicyKind::Spot) throw ConfigError(who + "spot base must be a sizing rule");
  }
  const auto sizing = kind == PolicyKind::Spot ? spot.base : kind;
  if (sizing == PolicyKind::Scheduled) {
    if (schedule.empty()) throw ConfigError(who + "schedule is empty");
    for (std::size_t i = 0; i < schedule.size(); ++i) {
      if (schedule[i].instances < 0) throw ConfigError(who + "negative instance count");
      if (schedule[i].second_of_day < 0 || schedule[i].second_of_day >= 86400) {
        throw ConfigError(who + "schedule time outside the day");
      }
      if (i > 0 && schedule[i].second_of_day <= schedule[i - 1].second_of_day) {
        throw ConfigError(who + "schedule times must increase");
      }
    }
  }
}

int required_instances(double demand, const InstanceModel& model, int floor) {
  if (demand < 0.0) throw DataError("demand must be >= 0");
  const double m = model.threads();
  const double needed = std::ceil(demand / m);
  return std::max(floor, static_cast<int>(needed));
}

double rate_to_concurrency(double rate, const InstanceModel& model) {
  if (rate < 0.0) throw DataError("rate must be >= 0");
  if (rate == 0.0) return 0.0;
  const int m = model.threads();
  const double x_max = m / model.model.service_time;
  const double instances = std::floor(rate / x_max) + 1.0;
  const double per_instance = rate / instances;

  auto excess = [&](double n) {
    return n - per_instance * calibrate::predict_response(model.model, n);
  };
  double lo = 0.0, hi = m;  // excess(lo) < 0 < excess(hi) since per_instance < X_max
  while (hi - lo > 1e-9 * std::max(1.0, hi)) {
    const double mid = 0.5 * (lo + hi);
    (excess(mid) < 0.0 ? lo : hi) = mid;
  }
  return instances * 0.5 * (lo + hi);
}

namespace {

int second_of_day(std::int64_t timestamp_ms) {
  const std::int64_t s = timestamp_ms / 1000;
  return static_cast<int>(((s % 86400) + 86400) % 86400);
}

std::string clock_text(int sod) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02d:%02d:%02d", sod / 3600, (sod / 60) % 60, sod % 60);
  return buf;
}

int scheduled_count(const std::vector<ScheduleEntry>& schedule, std::int64_t timestamp_ms) {
  const int sod = second_of_day(timestamp_ms);
  const ScheduleEntry* hit = nullptr;
  for (const auto& e : schedule) {
    if (e.second_of_day <= sod) hit = &e;
  }
  if (!hit) throw ConfigError("schedule does not cover " + clock_text(sod));
  return hit->instances;
}

}  // namespace

std::vector<ScheduleEntry> schedule_from_trace(const TrafficTrace& trace,
                                               const InstanceModel& model, int floor) {
  std::map<int, int> by_time;
  for (const auto& iv : trace.intervals) {
    const double demand = trace.kind == DemandKind::Rate ? rate_to_concurrency(iv.demand, model)
                                                         : iv.demand;
    auto& slot = by_time[second_of_day(iv.timestamp_ms)];
    slot = std::max(slot, required_instances(demand, model, floor));
  }
  std::vector<ScheduleEntry> out;
  for (const auto& [sod, n] : by_time) out.push_back({sod, n});
  return out;
}

double fee_for(double on_demand_hours, double spot_hours, double discount, double price) {
  return on_demand_hours * price + spot_hours * (1.0 - discount) * price;
}

PolicyRun simulate_policy(const TrafficTrace& trace, const ScalingPolicy& policy,
                          const InstanceModel& model) {
  model.validate();
  policy.validate();
  if (trace.intervals.empty()) throw DataError("traffic trace is empty");
  if (!(trace.interval_seconds > 0.0)) throw ConfigError("interval length must be positive");

  const int m = model.threads();
  const double s_tc = model.model.service_time;
  const double x_max = m / s_tc;
  const double dt = trace.interval_seconds;
  const auto& as = policy.autoscale;
  const bool spot = policy.kind == PolicyKind::Spot;
  const PolicyKind sizing = spot ? policy.spot.base : policy.kind;

  // Per-instance concurrency at which CPU utilization reaches the threshold.
  // Beyond m the utilization plateaus, so a threshold above the plateau never fires.
  const double n_trigger = as.cpu_threshold * s_tc / model.cpu_per_request;
  const bool can_trigger = n_trigger <= m;

  auto utilization = [&](double n) {
    const double x = std::min(n, static_cast<double>(m)) / s_tc;
    return std::min(1.0, x * model.cpu_per_request);
  };

  const double cooldown = as.cooldown.value_or(2.0 * dt);
  const int cooldown_intervals = std::max(1, static_cast<int>(std::ceil(cooldown / dt - 1e-9)));

  PolicyRun run;
  run.policy = policy.name;
  run.kind = policy.kind;
  run.interval_seconds = dt;
  run.discount = spot ? policy.spot.discount : 0.0;

  simoracle::Rng rng(policy.spot.seed, 2);
  int live_base = std::max(policy.min_instances, as.initial_instances);
  std::vector<std::int64_t> pending;  // ready times, ms
  double last_scale = -std::numeric_limits<double>::infinity();
  int scale_in_streak = 0;
  double instance_sum = 0.0;

  for (const auto& iv : trace.intervals) {
    const double t = static_cast<double>(iv.timestamp_ms) / 1000.0;
    const double demand = trace.kind == DemandKind::Rate ? rate_to_concurrency(iv.demand, model)
                                                         : iv.demand;
    if (demand < 0.0) throw DataError("negative demand in trace");

    auto activate = [&]() {
      const auto before = pending.size();
      pending.erase(std::remove_if(pending.begin(), pending.end(),
                                   [&](std::int64_t ready) { return ready <= iv.timestamp_ms; }),
                    pending.end());
      live_base += static_cast<int>(before - pending.size());
    };

    if (sizing == PolicyKind::Scheduled) {
      live_base = scheduled_count(policy.schedule, iv.timestamp_ms);
    } else {
      activate();
      int target = policy.min_instances;
      // A threshold that can never be reached lets the fleet drain to its floor.
      if (demand > 0.0 && can_trigger) {
        target = std::max(target, static_cast<int>(std::ceil(demand / n_trigger)));
      }
      target = std::min(target, as.max_instances);
      const int committed = live_base + static_cast<int>(pending.size());
      const double u_now =
          live_base > 0 ? utilization(demand / live_base) : (demand > 0.0 ? 1.0 : 0.0);

      if (u_now >= as.cpu_threshold && target > committed && (can_trigger || live_base == 0)) {
        const auto ready = iv.timestamp_ms + static_cast<std::int64_t>(std::llround(
                                                 as.spinup_delay * 1000.0));
        pending.insert(pending.end(), static_cast<std::size_t>(target - committed), ready);
        last_scale = t;
        scale_in_streak = 0;
        if (as.spinup_delay == 0.0) activate();
      } else if (pending.empty() && target < live_base) {
        ++scale_in_streak;
        if (scale_in_streak >= cooldown_intervals && t - last_scale >= cooldown) {
          live_base = target;
          last_scale = t;
          scale_in_streak = 0;
        }
      } else {
        scale_in_streak = 0;
      }
    }

    IntervalState st;
    st.timestamp_ms = iv.timestamp_ms;
    st.demand = demand;
    st.pending = static_cast<int>(pending.size());

    if (spot) {
      for (int k = 0; k < live_base; ++k) {
        if (rng.uniform() > policy.spot.availability) ++st.unavailable;
      }
      st.spot = live_base - st.unavailable;
      st.backfill = policy.spot.fallback == SpotFallback::Backfill ? st.unavailable : 0;
      st.live = st.spot + st.backfill;
    } else {
      st.live = live_base;
    }

    if (st.live > 0) {
      st.per_instance_concurrency = demand / st.live;
    } else {
      st.per_instance_concurrency =
          demand > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    }
    st.utilization = st.live > 0 ? utilization(st.per_instance_concurrency) : 0.0;
    st.per_instance_throughput =
        st.live > 0 ? std::min(st.per_instance_concurrency, static_cast<double>(m)) / s_tc : 0.0;
    st.per_instance_throughput = std::min(st.per_instance_throughput, x_max);
    st.violation = st.per_instance_concurrency > m;
    st.queued = st.live > 0 ? std::max(0.0, demand - static_cast<double>(st.live) * m) : demand;

    // Launching instances are billed at the fleet's rate.
    const double hours = dt / 3600.0;
    if (spot) {
      run.spot_hours += (st.spot + st.pending) * hours;
      run.on_demand_hours += st.backfill * hours;
    } else {
      run.on_demand_hours += (st.live + st.pending) * hours;
    }
    const int running = st.live + st.pending;
    run.peak_instances = std::max(run.peak_instances, running);
    instance_sum += running;
    if (st.violation) {
      ++run.violation_intervals;
      run.violation_seconds += dt;
    }
    run.timeline.push_back(st);
  }

  run.mean_instances = instance_sum / static_cast<double>(run.timeline.size());
  run.fee = fee_for(run.on_demand_hours, run.spot_hours, run.discount, model.on_demand_price);
  return run;
}

CostReport compare_costs(const std::vector<PolicyRun>& runs, const std::string& baseline) {
  if (runs.empty()) throw ConfigError("no policy runs to compare");
  const auto base = std::find_if(runs.begin(), runs.end(),
                                 [&](const PolicyRun& r) { return r.policy == baseline; });
  if (base == runs.end()) throw ConfigError("baseline policy '" + baseline + "' not found");
  for (const auto& r : runs) {
    if (r.timeline.size() != base->timeline.size()) {
      throw DataError("policy '" + r.policy + "' covers " + std::to_string(r.timeline.size()) +
                      " intervals, baseline covers " + std::to_string(base->timeline.size()));
    }
  }
  CostReport report;
  report.baseline = baseline;
  for (const auto& r : runs) {
    CostLine line;
    line.policy = r.policy;
    line.kind = r.kind;
    line.instance_hours = r.instance_hours();
    line.fee = r.fee;
    line.fee_delta = r.fee - base->fee;
    line.fee_delta_fraction = base->fee > 0.0 ? line.fee_delta / base->fee : 0.0;
    line.violation_intervals = r.violation_intervals;
    line.violation_seconds = r.violation_seconds;
    line.peak_instances = r.peak_instances;
    line.mean_instances = r.mean_instances;
    report.lines.push_back(line);
  }
  return report;
}

void write_timeline(std::ostream& out, const PolicyRun& run) {
  out << "timestamp,demand,live,pending,spot,backfill,unavailable,N_instance,U,X_instance,queued,"
         "violation\n";
  for (const auto& s : run.timeline) {
    out << s.timestamp_ms << ',' << textio::format_double(s.demand) << ',' << s.live << ','
        << s.pending << ',' << s.spot << ',' << s.backfill << ',' << s.unavailable << ','
        << textio::format_double(s.per_instance_concurrency) << ','
        << textio::format_double(s.utilization) << ','
        << textio::format_double(s.per_instance_throughput) << ','
        << textio::format_double(s.queued) << ',' << (s.violation ? 1 : 0) << '\n';
  }
}

void write_cost_report(std::ostream& out, const CostReport& report) {
  out << "Cost comparison (baseline: " << report.baseline << ")\n";
  out << std::left << std::setw(16) << "policy" << std::setw(11) << "kind" << std::right
      << std::setw(12) << "inst-hours" << std::setw(12) << "fee" << std::setw(12) << "delta"
      << std::setw(9) << "delta%" << std::setw(11) << "viol-int" << std::setw(11) << "viol-sec"
      << std::setw(6) << "peak" << std::setw(9) << "mean" << '\n';
  for (const auto& l : report.lines) {
    out << std::left << std::setw(16) << l.policy << std::setw(11) << to_string(l.kind)
        << std::right << std::setw(12) << textio::format_fixed(l.instance_hours, 2)
        << std::setw(12) << textio::format_fixed(l.fee, 2) << std::setw(12)
        << textio::format_fixed(l.fee_delta, 2) << std::setw(9)
        << textio::format_fixed(l.fee_delta_fraction * 100.0, 1) << std::setw(11)
        << l.violation_intervals << std::setw(11) << textio::format_fixed(l.violation_seconds, 0)
        << std::setw(6) << l.peak_instances << std::setw(9)
        << textio::format_fixed(l.mean_instances, 2) << '\n';
  }
}

void write_cost_report_kv(std::ostream& out, const CostReport& report) {
  using textio::write_kv;
  out << textio::kind_tag("costs") << '\n';
  write_kv(out, "baseline", report.baseline);
  for (const auto& l : report.lines) {
    const std::string p = "policy." + l.policy + ".";
    write_kv(out, p + "kind", to_string(l.kind));
    write_kv(out, p + "instance_hours", l.instance_hours);
    write_kv(out, p + "fee", l.fee);
    write_kv(out, p + "fee_delta", l.fee_delta);
    write_kv(out, p + "fee_delta_fraction", l.fee_delta_fraction);
    write_kv(out, p + "violation_intervals", static_cast<double>(l.violation_intervals));
    write_kv(out, p + "violation_seconds", l.violation_seconds);
    write_kv(out, p + "peak_instances", static_cast<double>(l.peak_instances));
    write_kv(out, p + "mean_instances", l.mean_instances);
  }
}

}  // namespace capplan::policy
