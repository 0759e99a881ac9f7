#pragma once

// Thread-server model calibrated against a steady-state load profile.
//
// The model is a closed station with m threads, service time S_TC and no
// think time. S_TC is read off the observed response-time floor (or taken
// from the knee fit), m from the throughput knee.

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "capplan/steadystate.hpp"

namespace capplan::calibrate {

enum class ServiceTimeSource { Auto, Quantile, KneeFit };

struct CalibrationOptions {
  /// Quantile of observed R used as R_min; 0 picks the true minimum.
  double response_quantile = 0.05;
  ServiceTimeSource source = ServiceTimeSource::Auto;
  /// Auto mode switches to the knee-fit S when the two disagree by more.
  double disagreement_limit = 0.10;
  std::string label = "unlabeled";
};

enum class ModelStatus { Saturated, Unsaturated };

struct CalibratedModel {
  std::string source;  // dataset label
  ModelStatus status = ModelStatus::Unsaturated;
  double service_time = 0.0;    // S_TC, seconds
  std::optional<int> threads;   // m; unset when the data never saturate
  double max_throughput = 0.0;  // m / S_TC, or +inf when m is unset
  double rms_throughput = 0.0;  // relative RMS residuals against the profile
  double rms_response = 0.0;
  std::vector<std::string> diagnostics;

  static CalibratedModel from_parameters(int threads, double service_time,
                                         std::string source = "manual");
};

/// Needs at least four profile points.
CalibratedModel calibrate_model(const steadystate::LoadProfile& profile,
                                const CalibrationOptions& options = {});

/// X(N) = min(N, m)/S_TC; the linear branch only when m is unset.
double predict_throughput(const CalibratedModel& model, double concurrency);

/// R(N) = S_TC up to the knee, N S_TC/m beyond it.
double predict_response(const CalibratedModel& model, double concurrency);

struct ResidualReport {
  std::vector<double> throughput_errors;  // (predicted - observed) / observed
  std::vector<double> response_errors;
  double rms_throughput = 0.0;
  double rms_response = 0.0;
  double max_throughput = 0.0;  // largest |relative error|
  double max_response = 0.0;
  double within_10pct_throughput = 0.0;  // fraction of points
  double within_10pct_response = 0.0;
};

ResidualReport residual_report(const CalibratedModel& model,
                               const steadystate::LoadProfile& profile);

/// Linear-interpolated quantile of a sample, q in [0, 1].
double quantile(std::vector<double> values, double q);

void write_model(std::ostream& out, const CalibratedModel& model);
CalibratedModel read_model(std::istream& in);

}  // namespace capplan::calibrate
