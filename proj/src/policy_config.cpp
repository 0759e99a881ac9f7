#include <algorithm>
#include <istream>
#include <sstream>

#include "capplan/error.hpp"
#include "capplan/policy.hpp"
#include "capplan/textio.hpp"

namespace capplan::policy {

TrafficTrace read_trace(std::istream& in, std::optional<double> interval_seconds) {
  TrafficTrace trace;
  std::string line;
  int line_no = 0;
  bool first_row = true;
  textio::Delimiter delim = textio::Delimiter::Comma;
  while (std::getline(in, line)) {
    ++line_no;
    if (textio::is_comment_or_blank(line)) continue;
    if (first_row) delim = textio::detect_delimiter(line);
    const auto f = textio::split_fields(line, delim);
    const std::string where = "trace line " + std::to_string(line_no) + ": ";
    if (f.size() < 2) throw DataError(where + "expected 'timestamp, demand'");
    const auto ts = textio::parse_int(f[0]);
    const auto demand = textio::parse_double(f[1]);
    if (first_row && !ts) {
      // Header row.
      std::string col = f[1];
      std::transform(col.begin(), col.end(), col.begin(), ::tolower);
      if (col == "rate" || col == "lambda") trace.kind = DemandKind::Rate;
      first_row = false;
      continue;
    }
    first_row = false;
    if (!ts || !demand) throw DataError(where + "cannot convert row");
    if (*demand < 0.0) throw DataError(where + "negative demand");
    if (!trace.intervals.empty() && *ts <= trace.intervals.back().timestamp_ms) {
      throw DataError(where + "timestamps must strictly increase");
    }
    trace.intervals.push_back({*ts, *demand});
  }
  if (interval_seconds) {
    trace.interval_seconds = *interval_seconds;
  } else if (trace.intervals.size() >= 2) {
    trace.interval_seconds =
        static_cast<double>(trace.intervals[1].timestamp_ms - trace.intervals[0].timestamp_ms) /
        1000.0;
  }
  if (!(trace.interval_seconds > 0.0)) throw ConfigError("interval length must be positive");
  return trace;
}

std::vector<ScheduleEntry> parse_schedule(const std::string& text) {
  std::vector<ScheduleEntry> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto t = textio::trim(item);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    const auto colon = t.find(':');
    if (eq == std::string_view::npos || colon == std::string_view::npos || colon > eq) {
      throw ConfigError("schedule entry '" + std::string(t) + "': expected HH:MM=count");
    }
    const auto hh = textio::parse_int(t.substr(0, colon));
    const auto mm = textio::parse_int(t.substr(colon + 1, eq - colon - 1));
    const auto n = textio::parse_int(t.substr(eq + 1));
    if (!hh || !mm || !n || *hh < 0 || *hh > 23 || *mm < 0 || *mm > 59 || *n < 0) {
      throw ConfigError("schedule entry '" + std::string(t) + "': expected HH:MM=count");
    }
    out.push_back({static_cast<int>(*hh * 3600 + *mm * 60), static_cast<int>(*n)});
  }
  std::sort(out.begin(), out.end(), [](const ScheduleEntry& a, const ScheduleEntry& b) {
    return a.second_of_day < b.second_of_day;
  });
  return out;
}

namespace {

PolicyKind parse_kind(const std::string& text, const std::string& section) {
  if (text == "autoscale") return PolicyKind::Autoscale;
  if (text == "scheduled") return PolicyKind::Scheduled;
  if (text == "spot") return PolicyKind::Spot;
  throw ConfigError("[" + section + "]: unknown kind '" + text + "'");
}

}  // namespace

PolicyConfig parse_policy_config(std::istream& in) {
  PolicyConfig cfg;
  bool have_instance = false;
  for (const auto& sec : textio::parse_kv(in)) {
    if (sec.name == "instance" || sec.name.empty()) {
      have_instance = have_instance || sec.has("cpu_per_request");
      cfg.cpu_per_request = sec.get_double("cpu_per_request", cfg.cpu_per_request);
      cfg.on_demand_price = sec.get_double("on_demand_price", cfg.on_demand_price);
      if (sec.has("baseline")) cfg.baseline = sec.get_string("baseline");
      continue;
    }
    ScalingPolicy p;
    p.name = sec.name;
    p.kind = parse_kind(sec.get_string("kind"), sec.name);
    p.min_instances = static_cast<int>(sec.get_int("min_instances", p.min_instances));
    auto& a = p.autoscale;
    a.cpu_threshold = sec.get_double("cpu_threshold", a.cpu_threshold);
    a.spinup_delay = sec.get_double("spinup_delay", a.spinup_delay);
    if (sec.has("cooldown")) a.cooldown = sec.get_double("cooldown");
    a.initial_instances = static_cast<int>(sec.get_int("initial_instances", a.initial_instances));
    a.max_instances = static_cast<int>(sec.get_int("max_instances", a.max_instances));
    auto& s = p.spot;
    s.discount = sec.get_double("discount", s.discount);
    s.availability = sec.get_double("availability", s.availability);
    s.seed = static_cast<std::uint64_t>(sec.get_int("seed", static_cast<std::int64_t>(s.seed)));
    if (sec.has("base")) s.base = parse_kind(sec.get_string("base"), sec.name);
    const auto fallback = sec.get_string("fallback", "backfill");
    if (fallback == "backfill") {
      s.fallback = SpotFallback::Backfill;
    } else if (fallback == "degraded") {
      s.fallback = SpotFallback::Degraded;
    } else {
      throw ConfigError("[" + sec.name + "]: fallback must be backfill or degraded");
    }
    const auto schedule = sec.get_string("schedule", "");
    const bool auto_schedule = schedule == "auto";
    if (!schedule.empty() && !auto_schedule) p.schedule = parse_schedule(schedule);
    cfg.policies.push_back(std::move(p));
    cfg.auto_schedule.push_back(auto_schedule);
  }
  if (!have_instance) throw ConfigError("policy config needs [instance] cpu_per_request");
  if (cfg.policies.empty()) throw ConfigError("policy config defines no policies");
  return cfg;
}

}  // namespace capplan::policy
