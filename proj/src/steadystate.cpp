#include "capplan/steadystate.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <ostream>

#include "capplan/error.hpp"
#include "capplan/textio.hpp"

namespace capplan::steadystate {

namespace {

void sort_points(std::vector<SteadyStatePoint>& points) {
  std::stable_sort(points.begin(), points.end(),
                   [](const SteadyStatePoint& a, const SteadyStatePoint& b) {
                     if (a.concurrency != b.concurrency) return a.concurrency < b.concurrency;
                     return a.timestamp_ms < b.timestamp_ms;
                   });
}

double median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double mean(const std::vector<double>& values) {
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

}  // namespace

LoadProfile to_steady_state(const std::vector<ingest::MetricSample>& samples) {
  if (samples.empty()) throw DataError("empty profile: no samples to transform");
  std::vector<SteadyStatePoint> points;
  points.reserve(samples.size());
  for (const auto& s : samples) {
    points.push_back({s.concurrency, s.throughput, s.response_time, s.timestamp_ms});
  }
  return make_profile(std::move(points));
}

LoadProfile make_profile(std::vector<SteadyStatePoint> points) {
  LoadProfile profile;
  sort_points(points);
  profile.points = std::move(points);
  return profile;
}

LoadProfile bin_profile(const LoadProfile& profile, double bin_width) {
  if (!(bin_width > 0.0)) throw ConfigError("bin width must be positive");
  LoadProfile out;
  out.points = profile.points;
  out.bin_width = bin_width;

  std::map<long long, std::pair<std::vector<double>, std::vector<double>>> groups;
  for (const auto& p : profile.points) {
    const auto key = static_cast<long long>(std::floor(p.concurrency / bin_width));
    groups[key].first.push_back(p.throughput);
    groups[key].second.push_back(p.response_time);
  }
  for (const auto& [key, xr] : groups) {
    ProfileBin bin;
    bin.left_edge = static_cast<double>(key) * bin_width;
    bin.count = xr.first.size();
    bin.mean_throughput = mean(xr.first);
    bin.median_throughput = median(xr.first);
    bin.mean_response = mean(xr.second);
    bin.median_response = median(xr.second);
    out.bins.push_back(bin);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Knee fit

namespace {

struct KneeFit {
  double knee = 0.0;
  double rate = 0.0;  // 1/S
  double sse = std::numeric_limits<double>::infinity();
};

// For a fixed knee K the model is linear in 1/S: X = f(N) * c with
// f(N) = min(N, K), so c = sum(f X) / sum(f^2).
KneeFit fit_at(const std::vector<SteadyStatePoint>& pts, double knee) {
  double fx = 0.0, ff = 0.0;
  for (const auto& p : pts) {
    const double f = std::min(p.concurrency, knee);
    fx += f * p.throughput;
    ff += f * f;
  }
  KneeFit fit;
  fit.knee = knee;
  if (ff <= 0.0) return fit;
  fit.rate = fx / ff;
  double sse = 0.0;
  for (const auto& p : pts) {
    const double r = p.throughput - std::min(p.concurrency, knee) * fit.rate;
    sse += r * r;
  }
  fit.sse = sse;
  return fit;
}

KneeFit golden_section(const std::vector<SteadyStatePoint>& pts, double lo, double hi,
                       double rel_tol) {
  constexpr double kInvPhi = 0.6180339887498949;
  double a = lo, b = hi;
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  KneeFit fc = fit_at(pts, c), fd = fit_at(pts, d);
  for (int iter = 0; iter < 200 && (b - a) > rel_tol * std::max(std::abs(c), 1.0); ++iter) {
    if (fc.sse <= fd.sse) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = fit_at(pts, c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = fit_at(pts, d);
    }
  }
  return fc.sse <= fd.sse ? fc : fd;
}

double rms(double sse, std::size_t n) { return std::sqrt(sse / static_cast<double>(n)); }

}  // namespace

KneeEstimate detect_knee(const LoadProfile& profile, const KneeOptions& options) {
  const auto& pts = profile.points;
  KneeEstimate est;
  est.method = "two-segment least squares";
  if (pts.empty()) throw DataError("empty profile: cannot detect knee");

  const double n_min = pts.front().concurrency;
  const double n_max = pts.back().concurrency;

  // Single-segment fallbacks: a line through the origin, or a flat plateau.
  const KneeFit linear = fit_at(pts, n_max);
  double mean_x = 0.0;
  for (const auto& p : pts) mean_x += p.throughput;
  mean_x /= static_cast<double>(pts.size());
  double plateau_sse = 0.0;
  for (const auto& p : pts) plateau_sse += (p.throughput - mean_x) * (p.throughput - mean_x);

  auto indeterminate = [&]() {
    est.status = KneeStatus::Indeterminate;
    if (linear.sse <= plateau_sse && linear.rate > 0.0) {
      est.method = "indeterminate: linear only";
      est.knee = n_max;
      est.service_time = 1.0 / linear.rate;
      est.plateau = n_max * linear.rate;
      est.fit_error = rms(linear.sse, pts.size());
    } else {
      est.method = "indeterminate: plateau only";
      est.knee = n_min;
      est.plateau = mean_x;
      est.service_time = mean_x > 0.0 ? n_min / mean_x : 0.0;
      est.fit_error = rms(plateau_sse, pts.size());
    }
    return est;
  };

  if (pts.size() < 4 || !(n_max > n_min)) return indeterminate();

  // Grid over the distinct observed N values.
  std::vector<double> grid;
  for (const auto& p : pts) {
    if (grid.empty() || p.concurrency != grid.back()) grid.push_back(p.concurrency);
  }
  std::size_t best = 0;
  KneeFit best_fit;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto fit = fit_at(pts, grid[i]);
    if (fit.sse < best_fit.sse) {
      best_fit = fit;
      best = i;
    }
  }

  const double lo = grid[best == 0 ? 0 : best - 1];
  const double hi = grid[std::min(best + 1, grid.size() - 1)];
  if (hi > lo) {
    const auto refined = golden_section(pts, lo, hi, options.relative_tolerance);
    if (refined.sse < best_fit.sse) best_fit = refined;
  }

  const auto below = static_cast<std::size_t>(
      std::count_if(pts.begin(), pts.end(),
                    [&](const SteadyStatePoint& p) { return p.concurrency <= best_fit.knee; }));
  const auto above = static_cast<std::size_t>(
      std::count_if(pts.begin(), pts.end(),
                    [&](const SteadyStatePoint& p) { return p.concurrency >= best_fit.knee; }));
  if (below < options.min_points_per_side || above < options.min_points_per_side ||
      !(best_fit.rate > 0.0) || best_fit.knee >= n_max) {
    return indeterminate();
  }

  est.status = KneeStatus::Found;
  est.knee = best_fit.knee;
  est.service_time = 1.0 / best_fit.rate;
  est.plateau = best_fit.knee * best_fit.rate;
  est.fit_error = rms(best_fit.sse, pts.size());
  return est;
}

// ---------------------------------------------------------------------------

void write_profile(std::ostream& out, const LoadProfile& profile) {
  out << "N,X,R,Timestamp\n";
  for (const auto& p : profile.points) {
    out << textio::format_double(p.concurrency) << ',' << textio::format_double(p.throughput)
        << ',' << textio::format_double(p.response_time) << ',' << p.timestamp_ms << '\n';
  }
}

LoadProfile read_profile(std::istream& in) {
  std::string line;
  std::vector<std::string> header;
  textio::Delimiter delim = textio::Delimiter::Comma;
  std::vector<SteadyStatePoint> points;
  int line_no = 0;
  int i_n = -1, i_x = -1, i_r = -1, i_t = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (textio::is_comment_or_blank(line)) continue;
    if (header.empty()) {
      delim = textio::detect_delimiter(line);
      header = textio::split_fields(line, delim);
      for (int i = 0; i < static_cast<int>(header.size()); ++i) {
        if (header[i] == "N") i_n = i;
        if (header[i] == "X") i_x = i;
        if (header[i] == "R") i_r = i;
        if (header[i] == "Timestamp") i_t = i;
      }
      if (i_n < 0 || i_x < 0 || i_r < 0) {
        throw ConfigError("profile header must name columns N, X and R");
      }
      continue;
    }
    const auto f = textio::split_fields(line, delim);
    auto get = [&](int idx) {
      const auto v = idx < static_cast<int>(f.size()) ? textio::parse_double(f[idx])
                                                      : std::optional<double>{};
      if (!v) throw DataError("profile line " + std::to_string(line_no) + ": bad number");
      return *v;
    };
    SteadyStatePoint p{get(i_n), get(i_x), get(i_r), 0};
    if (i_t >= 0) {
      const auto ts = i_t < static_cast<int>(f.size()) ? textio::parse_int(f[i_t])
                                                       : std::optional<std::int64_t>{};
      if (!ts) throw DataError("profile line " + std::to_string(line_no) + ": bad timestamp");
      p.timestamp_ms = *ts;
    }
    points.push_back(p);
  }
  if (header.empty()) throw ConfigError("profile has no header row");
  return make_profile(std::move(points));
}

void write_bins(std::ostream& out, const LoadProfile& profile) {
  out << "left,count,mean_X,median_X,mean_R,median_R\n";
  for (const auto& b : profile.bins) {
    out << textio::format_double(b.left_edge) << ',' << b.count << ','
        << textio::format_double(b.mean_throughput) << ','
        << textio::format_double(b.median_throughput) << ','
        << textio::format_double(b.mean_response) << ','
        << textio::format_double(b.median_response) << '\n';
  }
}

void write_knee(std::ostream& out, const KneeEstimate& knee, const std::string& line_prefix) {
  out << line_prefix << "knee.status="
      << (knee.status == KneeStatus::Found ? "found" : "indeterminate") << '\n';
  out << line_prefix << "knee.method=" << knee.method << '\n';
  out << line_prefix << "knee.N=" << textio::format_double(knee.knee) << '\n';
  out << line_prefix << "knee.X_plateau=" << textio::format_double(knee.plateau) << '\n';
  out << line_prefix << "knee.S=" << textio::format_double(knee.service_time) << '\n';
  out << line_prefix << "knee.rms=" << textio::format_double(knee.fit_error) << '\n';
}

void write_series(std::ostream& out, const std::vector<std::pair<double, double>>& series) {
  for (const auto& [x, y] : series) {
    out << textio::format_double(x) << ' ' << textio::format_double(y) << '\n';
  }
}

}  // namespace capplan::steadystate
