#include "capplan/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "capplan/calibrate.hpp"
#include "capplan/error.hpp"
#include "capplan/ingest.hpp"
#include "capplan/policy.hpp"
#include "capplan/simoracle.hpp"
#include "capplan/solver.hpp"
#include "capplan/steadystate.hpp"
#include "capplan/textio.hpp"

namespace capplan::cli {

namespace fs = std::filesystem;

namespace {

// An error with the module it came from, for the one-line diagnostic.
struct StageError {
  std::string module;
  std::string message;
};

template <typename Fn>
auto in_module(const char* module, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    throw StageError{module, e.what()};
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StageError{"io", "cannot read '" + path + "'"};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Buffers output so that a failing command never leaves a partial file.
class Sink {
 public:
  Sink(std::string path, bool force, std::ostream& fallback)
      : path_(std::move(path)), fallback_(fallback) {
    if (!path_.empty() && fs::exists(path_) && !force) {
      throw StageError{"io", "refusing to overwrite '" + path_ + "' (use --force)"};
    }
  }

  std::ostream& stream() { return buf_; }

  void commit() {
    if (path_.empty()) {
      fallback_ << buf_.str();
      return;
    }
    std::ofstream out(path_, std::ios::binary | std::ios::trunc);
    if (!out) throw StageError{"io", "cannot write '" + path_ + "'"};
    out << buf_.str();
  }

 private:
  std::string path_;
  std::ostream& fallback_;
  std::ostringstream buf_;
};

void write_file(const std::string& path, bool force, const std::string& content) {
  std::ostringstream unused;
  Sink sink(path, force, unused);
  sink.stream() << content;
  sink.commit();
}

struct Common {
  std::string input;
  std::string output;
  std::string format;
  bool force = false;
};

void add_common(CLI::App* sub, Common& c, const std::string& default_format,
                std::vector<std::string> formats, bool input_required = true) {
  auto* in = sub->add_option("-i,--input", c.input, "Input file");
  if (input_required) in->required();
  sub->add_option("-o,--output", c.output, "Output file (default: stdout)");
  c.format = default_format;
  sub->add_option("--format", c.format, "Output format")
      ->check(CLI::IsMember(std::move(formats)));
  sub->add_flag("--force", c.force, "Overwrite existing output files");
}

// ---------------------------------------------------------------------------

struct DeriveArgs {
  Common common;
  double tolerance = 0.05;
  double interval = ingest::kDefaultSampleInterval;
  bool percent = false;
  std::string report;
  std::string report_format = "json";
  ingest::ColumnMapping columns;
};

void run_derive(const DeriveArgs& a, std::ostream& out, std::ostream& err) {
  const auto text = read_file(a.common.input);
  ingest::ParseOptions opts;
  opts.columns = a.columns;
  opts.sample_interval = a.interval;
  opts.rescale_percent = a.percent;

  std::istringstream header_probe(text);
  std::string header;
  while (std::getline(header_probe, header) && textio::is_comment_or_blank(header)) {
  }

  ingest::ParseResult<ingest::MetricSample> metrics;
  std::vector<ingest::RowIssue> rejected, warnings;
  in_module("ingest", [&] {
    std::istringstream in(text);
    if (ingest::header_is_distilled(header, opts.columns)) {
      metrics = ingest::parse_metric_samples(in, opts);
    } else {
      auto raw = ingest::parse_raw_samples(in, opts);
      metrics = ingest::derive_series(raw.records);
      rejected = raw.rejected;
      warnings = raw.warnings;
    }
    return 0;
  });
  rejected.insert(rejected.end(), metrics.rejected.begin(), metrics.rejected.end());
  warnings.insert(warnings.end(), metrics.warnings.begin(), metrics.warnings.end());
  for (const auto& w : warnings) err << "warning: line " << w.line << ": " << w.message << '\n';
  for (const auto& r : rejected) err << "rejected: line " << r.line << ": " << r.message << '\n';

  std::vector<ingest::ConsistencyReport> checks;
  in_module("ingest", [&] {
    for (const auto& s : metrics.records) checks.push_back(ingest::consistency_check(s, a.tolerance));
    return 0;
  });

  const auto fmt = a.common.format == "kv"     ? ingest::TableFormat::KeyValue
                   : a.common.format == "text" ? ingest::TableFormat::Aligned
                                               : ingest::TableFormat::Csv;
  const auto rfmt =
      a.report_format == "text" ? ingest::ReportFormat::Aligned : ingest::ReportFormat::JsonLines;

  Sink sink(a.common.output, a.common.force, out);
  ingest::write_metric_table(sink.stream(), metrics.records, fmt);
  if (a.report.empty()) {
    ingest::write_consistency(sink.stream(), checks, rfmt, "# ");
  } else {
    std::ostringstream rep;
    ingest::write_consistency(rep, checks, rfmt);
    write_file(a.report, a.common.force, rep.str());
  }
  sink.commit();

  const auto failed = std::count_if(checks.begin(), checks.end(),
                                    [](const auto& c) { return !c.passed(); });
  if (failed > 0) {
    err << "warning: " << failed << " of " << checks.size()
        << " samples fail the Little's-law consistency check\n";
  }
}

// ---------------------------------------------------------------------------

struct SteadyArgs {
  Common common;
  double bin_width = 0.0;
  std::string series;
};

void run_steady(const SteadyArgs& a, std::ostream& out) {
  const auto text = read_file(a.common.input);
  auto profile = in_module("steadystate", [&] {
    std::istringstream in(text);
    const auto metrics = ingest::parse_metric_samples(in);
    if (!metrics.rejected.empty()) {
      throw DataError("line " + std::to_string(metrics.rejected.front().line) + ": " +
                      metrics.rejected.front().message);
    }
    auto p = steadystate::to_steady_state(metrics.records);
    if (a.bin_width > 0.0) p = steadystate::bin_profile(p, a.bin_width);
    return p;
  });
  const auto knee = in_module("steadystate", [&] { return steadystate::detect_knee(profile); });

  Sink sink(a.common.output, a.common.force, out);
  steadystate::write_profile(sink.stream(), profile);
  steadystate::write_knee(sink.stream(), knee, "# ");
  if (!profile.bins.empty()) {
    std::ostringstream bins;
    steadystate::write_bins(bins, profile);
    std::istringstream lines(bins.str());
    std::string line;
    while (std::getline(lines, line)) sink.stream() << "# bin " << line << '\n';
  }

  if (!a.series.empty()) {
    std::vector<std::pair<double, double>> xs, rs;
    for (const auto& p : profile.points) {
      xs.emplace_back(p.concurrency, p.throughput);
      rs.emplace_back(p.concurrency, p.response_time);
    }
    std::ostringstream fx, fr;
    steadystate::write_series(fx, xs);
    steadystate::write_series(fr, rs);
    write_file(a.series + "-X.dat", a.common.force, fx.str());
    write_file(a.series + "-R.dat", a.common.force, fr.str());
    if (!profile.bins.empty()) {
      std::vector<std::pair<double, double>> bx, br;
      for (const auto& b : profile.bins) {
        const double mid = b.left_edge + 0.5 * *profile.bin_width;
        bx.emplace_back(mid, b.median_throughput);
        br.emplace_back(mid, b.median_response);
      }
      std::ostringstream gx, gr;
      steadystate::write_series(gx, bx);
      steadystate::write_series(gr, br);
      write_file(a.series + "-X-median.dat", a.common.force, gx.str());
      write_file(a.series + "-R-median.dat", a.common.force, gr.str());
    }
  }
  sink.commit();
}

// ---------------------------------------------------------------------------

struct CalibrateArgs {
  Common common;
  double quantile = 0.05;
  std::string label = "unlabeled";
  std::string source = "auto";
};

void run_calibrate(const CalibrateArgs& a, std::ostream& out, std::ostream& err) {
  const auto text = read_file(a.common.input);
  const auto model = in_module("calibrate", [&] {
    std::istringstream in(text);
    const auto profile = steadystate::read_profile(in);
    calibrate::CalibrationOptions opts;
    opts.response_quantile = a.quantile;
    opts.label = a.label;
    opts.source = a.source == "quantile" ? calibrate::ServiceTimeSource::Quantile
                  : a.source == "knee"   ? calibrate::ServiceTimeSource::KneeFit
                                         : calibrate::ServiceTimeSource::Auto;
    return calibrate::calibrate_model(profile, opts);
  });
  for (const auto& d : model.diagnostics) err << "note: " << d << '\n';
  Sink sink(a.common.output, a.common.force, out);
  calibrate::write_model(sink.stream(), model);
  sink.commit();
}

// ---------------------------------------------------------------------------

void run_solve(const Common& a, std::ostream& out) {
  const auto text = read_file(a.input);
  const auto network = in_module("solver", [&] {
    std::istringstream in(text);
    return solver::parse_network_config(in);
  });
  const auto solution = in_module("solver", [&] { return solver::solve(network); });
  Sink sink(a.output, a.force, out);
  if (a.format == "kv") {
    sink.stream() << textio::kind_tag("solution") << '\n';
    solver::write_solution_kv(sink.stream(), network, solution);
  } else {
    sink.stream() << solver::report(network, solution);
  }
  sink.commit();
}

// ---------------------------------------------------------------------------

struct PredictArgs {
  Common common;
  std::string model;
  int threads = 0;
  double service_time = 0.0;
  double n_min = 1.0;
  double n_max = 500.0;
  double n_step = 1.0;
};

void run_predict(const PredictArgs& a, std::ostream& out) {
  const auto model = in_module("calibrate", [&] {
    if (!a.model.empty()) {
      std::istringstream in(read_file(a.model));
      return calibrate::read_model(in);
    }
    if (a.threads < 1 || !(a.service_time > 0.0)) {
      throw ConfigError("give --model or both --threads and --service-time");
    }
    return calibrate::CalibratedModel::from_parameters(a.threads, a.service_time);
  });
  if (!(a.n_step > 0.0) || a.n_max < a.n_min || a.n_min < 0.0) {
    throw StageError{"predict", "need 0 <= n-min <= n-max and n-step > 0"};
  }
  Sink sink(a.common.output, a.common.force, out);
  auto& o = sink.stream();
  const bool kv = a.common.format == "kv";
  if (!kv) o << "N,X,R\n";
  const auto count = static_cast<long>(std::floor((a.n_max - a.n_min) / a.n_step + 1e-9)) + 1;
  for (long i = 0; i < count; ++i) {
    const double n = a.n_min + static_cast<double>(i) * a.n_step;
    const double x = calibrate::predict_throughput(model, n);
    const double r = calibrate::predict_response(model, n);
    if (kv) {
      o << "N=" << textio::format_double(n) << " X=" << textio::format_double(x)
        << " R=" << textio::format_double(r) << '\n';
    } else {
      o << textio::format_double(n) << ',' << textio::format_double(x) << ','
        << textio::format_double(r) << '\n';
    }
  }
  sink.commit();
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  Common common;
  std::string kind = "open";
  double lambda = 0.0;
  int population = 0;
  double think = 0.0;
  int servers = 1;
  double service_time = 0.0;
  std::uint64_t completions = 1'000'000;
  std::int64_t warmup = -1;
  std::uint64_t seed = 1;
  int batches = 20;
};

void run_simulate(const SimulateArgs& a, std::ostream& out) {
  simoracle::SimConfig c;
  c.kind = a.kind == "closed" ? simoracle::SystemKind::Closed : simoracle::SystemKind::Open;
  c.arrival_rate = a.lambda;
  c.population = a.population;
  c.think_time = a.think;
  c.servers = a.servers;
  c.service_time = a.service_time;
  c.run_length = a.completions;
  if (a.warmup >= 0) c.warmup = static_cast<std::uint64_t>(a.warmup);
  c.seed = a.seed;
  c.batches = a.batches;
  const auto result = in_module("simoracle", [&] { return simoracle::simulate(c); });
  Sink sink(a.common.output, a.common.force, out);
  simoracle::write_result(sink.stream(), c, result);
  sink.commit();
}

// ---------------------------------------------------------------------------

struct PolicyArgs {
  Common common;
  std::string trace;
  std::string config;
  std::string model;
  std::string baseline;
  std::string timeline_dir;
  double interval = 0.0;
  std::optional<std::uint64_t> seed;
};

void run_policy(const PolicyArgs& a, std::ostream& out) {
  const auto trace_text = read_file(a.trace);
  const auto config_text = read_file(a.config);
  const auto model_text = read_file(a.model);

  auto [report, runs] = in_module("policy", [&] {
    std::istringstream ti(trace_text), ci(config_text), mi(model_text);
    const auto trace = policy::read_trace(
        ti, a.interval > 0.0 ? std::optional<double>(a.interval) : std::nullopt);
    auto cfg = policy::parse_policy_config(ci);
    policy::InstanceModel model{calibrate::read_model(mi), cfg.cpu_per_request,
                                cfg.on_demand_price};
    model.validate();
    std::vector<policy::PolicyRun> results;
    for (std::size_t i = 0; i < cfg.policies.size(); ++i) {
      auto p = cfg.policies[i];
      if (cfg.auto_schedule[i]) p.schedule = policy::schedule_from_trace(trace, model, p.min_instances);
      if (a.seed) p.spot.seed = *a.seed + i;
      results.push_back(policy::simulate_policy(trace, p, model));
    }
    const std::string baseline =
        !a.baseline.empty() ? a.baseline : cfg.baseline.value_or(results.front().policy);
    return std::make_pair(policy::compare_costs(results, baseline), results);
  });

  if (!a.timeline_dir.empty()) {
    fs::create_directories(a.timeline_dir);
    for (const auto& r : runs) {
      std::ostringstream tl;
      policy::write_timeline(tl, r);
      write_file((fs::path(a.timeline_dir) / (r.policy + ".csv")).string(), a.common.force,
                 tl.str());
    }
  }
  Sink sink(a.common.output, a.common.force, out);
  if (a.common.format == "kv") {
    policy::write_cost_report_kv(sink.stream(), report);
  } else {
    policy::write_cost_report(sink.stream(), report);
  }
  sink.commit();
}

// ---------------------------------------------------------------------------

void run_report(const Common& a, std::ostream& out) {
  const auto text = read_file(a.input);
  std::istringstream in(text);
  std::string first;
  while (std::getline(in, first) && textio::trim(first).empty()) {
  }
  Sink sink(a.output, a.force, out);
  auto& o = sink.stream();

  if (const auto kind = textio::parse_kind_tag(first)) {
    std::istringstream body(text);
    const auto kv = textio::parse_kv_flat(body);
    std::size_t width = 0;
    for (const auto& [k, v] : kv.entries) width = std::max(width, k.size());
    o << "capplan " << *kind << '\n' << std::string(8 + kind->size(), '-') << '\n';
    for (const auto& [k, v] : kv.entries) {
      const auto num = textio::parse_double(v);
      const bool integral = num && std::floor(*num) == *num && std::abs(*num) < 1e15;
      o << std::left << std::setw(static_cast<int>(width) + 2) << k
        << (num && !integral ? textio::format_fixed(*num, 4) : v) << '\n';
    }
  } else if (first.find(',') != std::string::npos) {
    // Delimited table: align columns, keep annotations.
    std::istringstream body(text);
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> notes;
    std::string line;
    while (std::getline(body, line)) {
      if (textio::is_comment_or_blank(line)) {
        if (!textio::trim(line).empty()) notes.push_back(line);
        continue;
      }
      auto fields = textio::split_fields(line, textio::Delimiter::Comma);
      if (!rows.empty()) {
        for (auto& f : fields) {
          const auto num = textio::parse_double(f);
          if (num && f.find('.') != std::string::npos) f = textio::format_fixed(*num, 4);
        }
      }
      rows.push_back(std::move(fields));
    }
    std::vector<std::size_t> widths;
    for (const auto& r : rows) {
      if (widths.size() < r.size()) widths.resize(r.size(), 0);
      for (std::size_t i = 0; i < r.size(); ++i) widths[i] = std::max(widths[i], r[i].size());
    }
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < r.size(); ++i) {
        o << std::right << std::setw(static_cast<int>(widths[i]) + 2) << r[i];
      }
      o << '\n';
    }
    for (const auto& n : notes) o << n << '\n';
  } else {
    o << text;
  }
  sink.commit();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Capacity planning from monitoring data with queueing models", "capplan"};
  app.require_subcommand(1, 1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Print progress notes");

  DeriveArgs derive;
  auto* d = app.add_subcommand("derive", "Raw or distilled samples -> metrics + consistency");
  add_common(d, derive.common, "csv", {"csv", "kv", "text"});
  d->add_option("--tolerance", derive.tolerance, "Relative tolerance for Little's-law checks")
      ->check(CLI::PositiveNumber);
  d->add_option("--interval", derive.interval, "Sample interval in seconds")
      ->check(CLI::PositiveNumber);
  d->add_flag("--percent", derive.percent, "Read utilizations in (1, 100] as percentages");
  d->add_option("--report", derive.report, "Write the consistency report to this file");
  d->add_option("--report-format", derive.report_format)->check(CLI::IsMember({"json", "text"}));
  d->add_option("--col-timestamp", derive.columns.timestamp);
  d->add_option("--col-x", derive.columns.throughput);
  d->add_option("--col-n", derive.columns.concurrency);
  d->add_option("--col-s", derive.columns.service_time);
  d->add_option("--col-r", derive.columns.response_time);
  d->add_option("--col-u", derive.columns.utilization);
  d->add_option("--col-count", derive.columns.request_count);
  d->add_option("--col-proc", derive.columns.processing_time);
  d->add_option("--col-threads", derive.columns.thread_count);

  SteadyArgs steady;
  auto* s = app.add_subcommand("steady", "Metrics -> load profile + knee estimate");
  add_common(s, steady.common, "csv", {"csv"});
  s->add_option("--bin-width", steady.bin_width, "Aggregate the profile into bins")
      ->check(CLI::PositiveNumber);
  s->add_option("--series", steady.series, "Write plot series files with this prefix");

  CalibrateArgs cal;
  auto* c = app.add_subcommand("calibrate", "Load profile -> calibrated thread-server model");
  add_common(c, cal.common, "kv", {"kv"});
  c->add_option("--quantile", cal.quantile, "Quantile of R used as R_min (0 = minimum)")
      ->check(CLI::Range(0.0, 1.0));
  c->add_option("--label", cal.label, "Dataset label");
  c->add_option("--s-source", cal.source)->check(CLI::IsMember({"auto", "quantile", "knee"}));

  Common solve;
  auto* sv = app.add_subcommand("solve", "Network config -> solution report");
  add_common(sv, solve, "text", {"text", "kv"});

  PredictArgs pred;
  auto* p = app.add_subcommand("predict", "Model -> X(N), R(N) series");
  add_common(p, pred.common, "csv", {"csv", "kv"}, false);
  p->add_option("-m,--model", pred.model, "Calibrated model file");
  p->add_option("--threads", pred.threads, "Thread cap m (instead of --model)");
  p->add_option("--service-time", pred.service_time, "S_TC in seconds (instead of --model)");
  p->add_option("--n-min", pred.n_min);
  p->add_option("--n-max", pred.n_max);
  p->add_option("--n-step", pred.n_step);

  SimulateArgs sim;
  auto* sm = app.add_subcommand("simulate", "Discrete-event simulation of one station");
  add_common(sm, sim.common, "kv", {"kv"}, false);
  sm->add_option("--kind", sim.kind)->check(CLI::IsMember({"open", "closed"}));
  sm->add_option("--lambda", sim.lambda, "Arrival rate (open)");
  sm->add_option("--population", sim.population, "N (closed)");
  sm->add_option("--think", sim.think, "Think time Z (closed)");
  sm->add_option("--servers", sim.servers, "m");
  sm->add_option("--service-time", sim.service_time, "Mean service time S")->required();
  sm->add_option("--completions", sim.completions, "Measured completions");
  sm->add_option("--warmup", sim.warmup, "Completions discarded first (default 10%)");
  sm->add_option("--seed", sim.seed, "Random seed");
  sm->add_option("--batches", sim.batches, "Batches for standard errors");

  PolicyArgs pol;
  std::uint64_t policy_seed = 0;
  auto* pl = app.add_subcommand("policy", "Trace + policies + model -> cost comparison");
  add_common(pl, pol.common, "text", {"text", "kv"}, false);
  pl->add_option("--trace", pol.trace, "Traffic trace file")->required();
  pl->add_option("--config", pol.config, "Policy config file")->required();
  pl->add_option("-m,--model", pol.model, "Calibrated model file")->required();
  pl->add_option("--baseline", pol.baseline, "Baseline policy name");
  pl->add_option("--timeline-dir", pol.timeline_dir, "Write per-policy timelines here");
  pl->add_option("--interval", pol.interval, "Interval length in seconds");
  auto* seed_opt = pl->add_option("--seed", policy_seed, "Seed for spot availability draws");

  Common rep;
  auto* r = app.add_subcommand("report", "Any result file -> human-readable text");
  add_common(r, rep, "text", {"text"});

  std::vector<const char*> argv{"capplan"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  auto* active = app.get_subcommands().front();
  const std::string name = active->get_name();
  try {
    if (name == "derive") run_derive(derive, out, err);
    if (name == "steady") run_steady(steady, out);
    if (name == "calibrate") run_calibrate(cal, out, err);
    if (name == "solve") run_solve(solve, out);
    if (name == "predict") run_predict(pred, out);
    if (name == "simulate") run_simulate(sim, out);
    if (name == "policy") {
      if (seed_opt->count() > 0) pol.seed = policy_seed;
      run_policy(pol, out);
    }
    if (name == "report") run_report(rep, out);
  } catch (const StageError& e) {
    err << "capplan " << name << ": " << e.module << ": " << e.message << '\n';
    return 1;
  } catch (const Error& e) {
    err << "capplan " << name << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "capplan " << name << ": unexpected error: " << e.what() << '\n';
    return 1;
  }
  if (verbose) err << "capplan " << name << ": done\n";
  return 0;
}

}  // namespace capplan::cli
