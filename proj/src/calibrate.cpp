#include "capplan/calibrate.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>

#include "capplan/error.hpp"
#include "capplan/solver.hpp"
#include "capplan/textio.hpp"

namespace capplan::calibrate {

CalibratedModel CalibratedModel::from_parameters(int threads, double service_time,
                                                 std::string source) {
  if (threads < 1) throw ConfigError("thread cap must be >= 1");
  if (!(service_time > 0.0)) throw ConfigError("service time must be positive");
  CalibratedModel m;
  m.source = std::move(source);
  m.status = ModelStatus::Saturated;
  m.service_time = service_time;
  m.threads = threads;
  m.max_throughput = threads / service_time;
  return m;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw DataError("quantile of an empty sample");
  if (q < 0.0 || q > 1.0) throw ConfigError("quantile must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

double predict_throughput(const CalibratedModel& model, double concurrency) {
  if (concurrency < 0.0) throw ConfigError("concurrency must be >= 0");
  if (!model.threads) return concurrency / model.service_time;
  return solver::thread_pool_limit(concurrency, *model.threads, model.service_time).throughput;
}

double predict_response(const CalibratedModel& model, double concurrency) {
  if (concurrency < 0.0) throw ConfigError("concurrency must be >= 0");
  if (!model.threads) return model.service_time;
  return solver::thread_pool_limit(concurrency, *model.threads, model.service_time)
      .response_time;
}

ResidualReport residual_report(const CalibratedModel& model,
                               const steadystate::LoadProfile& profile) {
  if (profile.points.empty()) throw DataError("empty profile: no residuals to compute");
  ResidualReport r;
  auto summarize = [](const std::vector<double>& errs, double& rms, double& max_abs,
                      double& within) {
    if (errs.empty()) return;
    double ss = 0.0;
    std::size_t ok = 0;
    for (double e : errs) {
      ss += e * e;
      max_abs = std::max(max_abs, std::abs(e));
      if (std::abs(e) <= 0.10) ++ok;
    }
    rms = std::sqrt(ss / static_cast<double>(errs.size()));
    within = static_cast<double>(ok) / static_cast<double>(errs.size());
  };
  for (const auto& p : profile.points) {
    if (p.throughput > 0.0) {
      r.throughput_errors.push_back(
          (predict_throughput(model, p.concurrency) - p.throughput) / p.throughput);
    }
    if (p.response_time > 0.0) {
      r.response_errors.push_back(
          (predict_response(model, p.concurrency) - p.response_time) / p.response_time);
    }
  }
  summarize(r.throughput_errors, r.rms_throughput, r.max_throughput, r.within_10pct_throughput);
  summarize(r.response_errors, r.rms_response, r.max_response, r.within_10pct_response);
  return r;
}

CalibratedModel calibrate_model(const steadystate::LoadProfile& profile,
                                const CalibrationOptions& options) {
  if (profile.points.size() < 4) {
    throw DataError("calibration needs at least 4 profile points, got " +
                    std::to_string(profile.points.size()));
  }
  CalibratedModel model;
  model.source = options.label;

  std::vector<double> responses;
  for (const auto& p : profile.points) responses.push_back(p.response_time);
  const double s_quantile = quantile(responses, options.response_quantile);

  const auto knee = steadystate::detect_knee(profile);
  if (knee.status == steadystate::KneeStatus::Found) {
    model.status = ModelStatus::Saturated;
    model.threads = std::max(1, static_cast<int>(std::lround(knee.knee)));
  } else {
    model.status = ModelStatus::Unsaturated;
    model.diagnostics.push_back("unsaturated data: " + knee.method);
  }

  switch (options.source) {
    case ServiceTimeSource::Quantile:
      model.service_time = s_quantile;
      break;
    case ServiceTimeSource::KneeFit:
      if (!(knee.service_time > 0.0)) throw DataError("knee fit produced no service time");
      model.service_time = knee.service_time;
      break;
    case ServiceTimeSource::Auto:
      model.service_time = s_quantile;
      if (knee.status == steadystate::KneeStatus::Found && knee.service_time > 0.0) {
        const double gap = std::abs(s_quantile - knee.service_time) / knee.service_time;
        if (gap > options.disagreement_limit) {
          model.service_time = knee.service_time;
          model.diagnostics.push_back(
              "R quantile " + textio::format_double(s_quantile) + " s and knee-fit S " +
              textio::format_double(knee.service_time) + " s differ by " +
              textio::format_fixed(gap * 100.0, 1) + "%; using knee-fit S");
        }
      }
      break;
  }
  if (!(model.service_time > 0.0)) throw DataError("calibrated service time is not positive");

  model.max_throughput = model.threads ? *model.threads / model.service_time
                                       : std::numeric_limits<double>::infinity();
  const auto residuals = residual_report(model, profile);
  model.rms_throughput = residuals.rms_throughput;
  model.rms_response = residuals.rms_response;
  return model;
}

void write_model(std::ostream& out, const CalibratedModel& model) {
  using textio::write_kv;
  out << textio::kind_tag("model") << '\n';
  write_kv(out, "source", model.source);
  write_kv(out, "status", model.status == ModelStatus::Saturated ? "saturated" : "unsaturated");
  write_kv(out, "S_TC", model.service_time);
  if (model.threads) write_kv(out, "m", static_cast<double>(*model.threads));
  write_kv(out, "X_max", model.max_throughput);
  write_kv(out, "rms_X", model.rms_throughput);
  write_kv(out, "rms_R", model.rms_response);
  for (const auto& d : model.diagnostics) out << "# " << d << '\n';
}

CalibratedModel read_model(std::istream& in) {
  const auto kv = textio::parse_kv_flat(in);
  CalibratedModel model;
  model.source = kv.get_string("source", "unlabeled");
  model.service_time = kv.get_double("S_TC");
  if (!(model.service_time > 0.0)) throw ConfigError("model S_TC must be positive");
  if (kv.has("m")) {
    const auto m = kv.get_int("m");
    if (m < 1) throw ConfigError("model m must be >= 1");
    model.threads = static_cast<int>(m);
    model.status = ModelStatus::Saturated;
    model.max_throughput = *model.threads / model.service_time;
  } else {
    model.status = ModelStatus::Unsaturated;
    model.max_throughput = std::numeric_limits<double>::infinity();
  }
  model.rms_throughput = kv.get_double("rms_X", 0.0);
  model.rms_response = kv.get_double("rms_R", 0.0);
  return model;
}

}  // namespace capplan::calibrate
