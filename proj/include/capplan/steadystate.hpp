#pragma once

// Load-indexed view of monitoring data: each sample becomes an (N, X, R)
// point and time drops out. The knee detector fits the zero-think-time
// thread-pool shape X(N) = min(N, N_knee) / S to such a profile.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "capplan/ingest.hpp"

namespace capplan::steadystate {

struct SteadyStatePoint {
  double concurrency = 0.0;   // N
  double throughput = 0.0;    // X, requests/s
  double response_time = 0.0; // R, s
  std::int64_t timestamp_ms = 0;
};

struct ProfileBin {
  double left_edge = 0.0;
  std::size_t count = 0;
  double mean_throughput = 0.0;
  double median_throughput = 0.0;
  double mean_response = 0.0;
  double median_response = 0.0;
};

struct LoadProfile {
  std::vector<SteadyStatePoint> points;  // ascending N, ties by timestamp
  std::optional<double> bin_width;
  std::vector<ProfileBin> bins;          // occupied bins only, ascending
};

/// One point per sample, sorted by N. Throws DataError for empty input.
LoadProfile to_steady_state(const std::vector<ingest::MetricSample>& samples);

/// Builds a profile from points in any order (sorted on the way in).
LoadProfile make_profile(std::vector<SteadyStatePoint> points);

/// Groups points into [k*w, (k+1)*w) bins with mean/median X and R.
LoadProfile bin_profile(const LoadProfile& profile, double bin_width);

enum class KneeStatus { Found, Indeterminate };

struct KneeEstimate {
  KneeStatus status = KneeStatus::Indeterminate;
  double knee = 0.0;          // N_knee
  double plateau = 0.0;       // X_plateau = N_knee / S
  double service_time = 0.0;  // S, the inverse slope of the rising segment
  double fit_error = 0.0;     // RMS residual in X
  std::string method;
};

struct KneeOptions {
  double relative_tolerance = 1e-6;
  /// Points needed on each side of the knee before it counts as found.
  std::size_t min_points_per_side = 2;
};

/// Least-squares fit of X = min(N, K)/S: grid over observed N, then
/// golden-section refinement around the best grid cell. S has a closed
/// form for each fixed K.
KneeEstimate detect_knee(const LoadProfile& profile, const KneeOptions& options = {});

/// Writes "N,X,R,Timestamp" rows.
void write_profile(std::ostream& out, const LoadProfile& profile);

/// Reads rows written by write_profile (header required, extra columns ignored).
LoadProfile read_profile(std::istream& in);

void write_bins(std::ostream& out, const LoadProfile& profile);
void write_knee(std::ostream& out, const KneeEstimate& knee, const std::string& line_prefix = "");

/// Plot-ready "x y" pairs.
void write_series(std::ostream& out, const std::vector<std::pair<double, double>>& series);

}  // namespace capplan::steadystate
