#pragma once

// Scaling-policy evaluation over a traffic trace with the calibrated
// per-instance model. The load balancer spreads demand evenly over live
// instances, so one instance's state determines the whole cluster's.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "capplan/calibrate.hpp"

namespace capplan::policy {

struct InstanceModel {
  calibrate::CalibratedModel model;  // must have m set
  double cpu_per_request = 0.0;      // seconds of CPU per request (S_est)
  double on_demand_price = 1.0;      // currency per instance-hour

  int threads() const;
  void validate() const;
};

enum class DemandKind { Concurrency, Rate };

struct TraceInterval {
  std::int64_t timestamp_ms = 0;
  double demand = 0.0;
};

struct TrafficTrace {
  std::vector<TraceInterval> intervals;
  double interval_seconds = 300.0;
  DemandKind kind = DemandKind::Concurrency;
};

enum class PolicyKind { Autoscale, Scheduled, Spot };
enum class SpotFallback { Backfill, Degraded };

const char* to_string(PolicyKind kind);

struct ScheduleEntry {
  int second_of_day = 0;
  int instances = 0;
};

struct AutoscaleParams {
  double cpu_threshold = 0.75;
  double spinup_delay = 600.0;     // seconds
  std::optional<double> cooldown;  // seconds; default two intervals
  int initial_instances = 1;
  int max_instances = 100000;
};

struct SpotParams {
  double discount = 0.90;
  double availability = 1.0;  // per instance, per interval
  SpotFallback fallback = SpotFallback::Backfill;
  PolicyKind base = PolicyKind::Scheduled;  // sizing rule the spot fleet follows
  std::uint64_t seed = 1;
};

struct ScalingPolicy {
  std::string name;
  PolicyKind kind = PolicyKind::Autoscale;
  int min_instances = 1;
  AutoscaleParams autoscale;
  std::vector<ScheduleEntry> schedule;  // sorted by second_of_day
  SpotParams spot;

  void validate() const;
};

/// ceil(N/m), never below `floor` (the scale-to-zero case is floor = 0).
int required_instances(double demand, const InstanceModel& model, int floor = 1);

/// Converts an offered rate to concurrency through the fixed point N = lambda R(N)
/// on enough instances to keep each one below X_max; bisection to 1e-9.
double rate_to_concurrency(double rate, const InstanceModel& model);

/// Per time of day, the largest required_instances seen in the trace.
std::vector<ScheduleEntry> schedule_from_trace(const TrafficTrace& trace,
                                               const InstanceModel& model, int floor = 1);

struct IntervalState {
  std::int64_t timestamp_ms = 0;
  double demand = 0.0;        // offered concurrency
  int live = 0;               // instances serving (after spot losses and backfill)
  int pending = 0;            // launched but not yet live
  int spot = 0;               // live instances billed at the spot rate
  int backfill = 0;           // on-demand stand-ins for unavailable spot instances
  int unavailable = 0;        // spot instances lost this interval
  double per_instance_concurrency = 0.0;
  double utilization = 0.0;
  double per_instance_throughput = 0.0;  // capped at X_max
  double queued = 0.0;        // demand beyond m per instance, cluster-wide
  bool violation = false;     // per-instance N > m
};

struct PolicyRun {
  std::string policy;
  PolicyKind kind = PolicyKind::Autoscale;
  double interval_seconds = 0.0;
  double discount = 0.0;
  std::vector<IntervalState> timeline;
  double on_demand_hours = 0.0;
  double spot_hours = 0.0;
  double fee = 0.0;
  int violation_intervals = 0;
  double violation_seconds = 0.0;
  int peak_instances = 0;
  double mean_instances = 0.0;

  double instance_hours() const { return on_demand_hours + spot_hours; }
};

/// Steps through the trace one interval at a time. Instances are billed
/// from launch, so spinning-up capacity costs money before it serves.
PolicyRun simulate_policy(const TrafficTrace& trace, const ScalingPolicy& policy,
                          const InstanceModel& model);

/// fee = on-demand hours * price + spot hours * (1 - discount) * price.
double fee_for(double on_demand_hours, double spot_hours, double discount, double price);

struct CostLine {
  std::string policy;
  PolicyKind kind = PolicyKind::Autoscale;
  double instance_hours = 0.0;
  double fee = 0.0;
  double fee_delta = 0.0;           // fee - baseline fee
  double fee_delta_fraction = 0.0;  // relative to the baseline fee
  int violation_intervals = 0;
  double violation_seconds = 0.0;
  int peak_instances = 0;
  double mean_instances = 0.0;
};

struct CostReport {
  std::string baseline;
  std::vector<CostLine> lines;
};

/// Throws ConfigError if the baseline is absent and DataError when the runs
/// cover traces of different lengths.
CostReport compare_costs(const std::vector<PolicyRun>& runs, const std::string& baseline);

// ---------------------------------------------------------------------------
// Files

/// Two columns: timestamp (epoch ms), demand. An optional header naming the
/// second column "rate" marks a rate trace. `interval_seconds` overrides the
/// spacing inferred from the first two timestamps.
TrafficTrace read_trace(std::istream& in, std::optional<double> interval_seconds = {});

struct PolicyConfig {
  double cpu_per_request = 0.0;
  double on_demand_price = 1.0;
  std::optional<std::string> baseline;
  std::vector<ScalingPolicy> policies;
  std::vector<bool> auto_schedule;  // per policy: schedule derived from the trace
};

/// INI-style: an [instance] section (cpu_per_request, on_demand_price,
/// baseline) and one section per policy.
PolicyConfig parse_policy_config(std::istream& in);

/// "HH:MM=count, HH:MM=count, ..."
std::vector<ScheduleEntry> parse_schedule(const std::string& text);

void write_timeline(std::ostream& out, const PolicyRun& run);
void write_cost_report(std::ostream& out, const CostReport& report);
void write_cost_report_kv(std::ostream& out, const CostReport& report);

}  // namespace capplan::policy
