#include "capplan/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "capplan/error.hpp"
#include "capplan/textio.hpp"

namespace capplan::ingest {

double derive_response_time(double processing_time, double request_count) {
  if (request_count <= 0.0) {
    throw UndefinedRateError("response time undefined: interval had no completions");
  }
  return processing_time / request_count;
}

double derive_response_time(double processing_time, double request_count,
                            double sample_interval) {
  if (request_count <= 0.0) {
    throw UndefinedRateError("response time undefined: interval had no completions");
  }
  if (sample_interval <= 0.0) throw DataError("sample interval must be positive");
  return (processing_time / sample_interval) * (sample_interval / request_count);
}

double derive_throughput(double request_count, double sample_interval) {
  if (sample_interval <= 0.0) throw DataError("sample interval must be positive");
  return request_count / sample_interval;
}

double estimate_service_time(double utilization, double throughput) {
  if (throughput <= 0.0) {
    throw UndefinedRateError("service time undefined: zero throughput");
  }
  if (utilization < 0.0 || utilization > 1.0) {
    throw DataError("utilization must be a fraction in [0, 1]");
  }
  return utilization / throughput;
}

double estimate_concurrency(double throughput, double response_time) {
  return throughput * response_time;
}

MetricSample derive_metrics(const RawSample& raw) {
  if (raw.request_count < 0.0) throw DataError("request count must be >= 0");
  if (raw.processing_time < 0.0) throw DataError("processing time must be >= 0");
  if (raw.cpu_utilization < 0.0 || raw.cpu_utilization > 1.0) {
    throw DataError("utilization must be a fraction in [0, 1]");
  }
  MetricSample m;
  m.timestamp_ms = raw.timestamp_ms;
  m.throughput = derive_throughput(raw.request_count, raw.sample_interval);
  m.response_time = derive_response_time(raw.processing_time, raw.request_count);
  m.service_time = estimate_service_time(raw.cpu_utilization, m.throughput);
  m.concurrency = estimate_concurrency(m.throughput, m.response_time);
  m.utilization = raw.cpu_utilization;
  m.thread_count = raw.thread_count;
  return m;
}

const char* to_string(CheckStatus status) {
  switch (status) {
    case CheckStatus::Pass: return "pass";
    case CheckStatus::Fail: return "fail";
    case CheckStatus::NotEvaluable: return "not-evaluable";
  }
  return "unknown";
}

bool ConsistencyReport::passed() const {
  if (macro.status == CheckStatus::Fail || micro.status == CheckStatus::Fail) return false;
  return !(threads && threads->status == CheckStatus::Fail);
}

namespace {

CheckResult relative_check(double observed, double predicted, double tolerance) {
  if (!std::isfinite(observed) || !std::isfinite(predicted)) return {};
  const double err = std::abs(observed - predicted) / std::max(observed, kDivisionGuard);
  return {err <= tolerance ? CheckStatus::Pass : CheckStatus::Fail, err};
}

}  // namespace

ConsistencyReport consistency_check(const MetricSample& s, double tolerance) {
  if (!(tolerance > 0.0)) throw ConfigError("tolerance must be positive");
  ConsistencyReport report;
  report.timestamp_ms = s.timestamp_ms;
  if (!(s.throughput > 0.0) || !std::isfinite(s.throughput)) return report;
  report.macro = relative_check(s.concurrency, s.throughput * s.response_time, tolerance);
  report.micro = relative_check(s.utilization, s.throughput * s.service_time, tolerance);
  if (s.thread_count) {
    report.threads = relative_check(*s.thread_count, s.concurrency, tolerance);
  }
  return report;
}

// ---------------------------------------------------------------------------

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

class Header {
 public:
  Header(const std::vector<std::string>& names) {
    for (const auto& n : names) names_.push_back(lower(n));
  }

  std::optional<std::size_t> find(const std::string& name) const {
    if (name.empty()) return std::nullopt;
    const auto key = lower(name);
    for (std::size_t i = 0; i < names_.size(); ++i) {
      if (names_[i] == key) return i;
    }
    return std::nullopt;
  }

  std::size_t require(const std::string& name) const {
    if (auto idx = find(name)) return *idx;
    throw ConfigError("missing required column '" + name + "'");
  }

 private:
  std::vector<std::string> names_;
};

struct RowError {
  std::string message;
};

// Reads the header and hands each data row to `on_row` with its line number.
template <typename OnHeader, typename OnRow>
void scan_table(std::istream& in, OnHeader&& on_header, OnRow&& on_row) {
  std::string line;
  int line_no = 0;
  bool have_header = false;
  textio::Delimiter delimiter = textio::Delimiter::Comma;
  while (std::getline(in, line)) {
    ++line_no;
    if (textio::is_comment_or_blank(line)) continue;
    if (!have_header) {
      delimiter = textio::detect_delimiter(line);
      on_header(Header(textio::split_fields(line, delimiter)));
      have_header = true;
      continue;
    }
    on_row(line_no, textio::split_fields(line, delimiter));
  }
  if (!have_header) throw ConfigError("input has no header row");
}

double field_double(const std::vector<std::string>& fields, std::size_t idx,
                    const std::string& column) {
  if (idx >= fields.size()) throw RowError{"missing value for column '" + column + "'"};
  const auto v = textio::parse_double(fields[idx]);
  if (!v || std::isnan(*v)) {
    throw RowError{"column '" + column + "': cannot convert '" + fields[idx] + "'"};
  }
  return *v;
}

std::int64_t field_timestamp(const std::vector<std::string>& fields, std::size_t idx,
                             const std::string& column) {
  if (idx >= fields.size()) throw RowError{"missing value for column '" + column + "'"};
  if (auto v = textio::parse_int(fields[idx])) return *v;
  const auto d = textio::parse_double(fields[idx]);
  if (d && std::isfinite(*d) && std::floor(*d) == *d) return static_cast<std::int64_t>(*d);
  throw RowError{"column '" + column + "': cannot convert '" + fields[idx] + "'"};
}

void require_nonnegative(double v, const std::string& column) {
  if (v < 0.0) throw RowError{"range violation: column '" + column + "' is negative"};
}

double read_utilization(double u, const std::string& column, const ParseOptions& options,
                        int line_no, std::vector<RowIssue>& warnings) {
  if (u >= 0.0 && u <= 1.0) return u;
  if (options.rescale_percent && u > 1.0 && u <= 100.0) {
    warnings.push_back({line_no, "column '" + column + "' value " + textio::format_double(u) +
                                     " read as a percentage"});
    return u / 100.0;
  }
  throw RowError{"range violation: column '" + column + "' = " + textio::format_double(u) +
                 " outside [0, 1]"};
}

void check_order(std::int64_t ts, std::optional<std::int64_t>& last, int line_no) {
  if (last && ts <= *last) {
    throw DataError("line " + std::to_string(line_no) + ": timestamp " + std::to_string(ts) +
                    " does not increase (previous " + std::to_string(*last) + ")");
  }
  last = ts;
}

}  // namespace

bool header_is_distilled(const std::string& header_line, const ColumnMapping& columns) {
  Header header(textio::split_fields(header_line, textio::detect_delimiter(header_line)));
  return header.find(columns.throughput).has_value();
}

ParseResult<RawSample> parse_raw_samples(std::istream& in, const ParseOptions& options) {
  const auto& c = options.columns;
  if (!(options.sample_interval > 0.0)) throw ConfigError("sample interval must be positive");
  ParseResult<RawSample> result;
  std::size_t i_ts = 0, i_count = 0, i_proc = 0, i_util = 0;
  std::optional<std::size_t> i_threads, i_interval;
  std::optional<std::int64_t> last_ts;

  scan_table(
      in,
      [&](const Header& h) {
        i_ts = h.require(c.timestamp);
        i_count = h.require(c.request_count);
        i_proc = h.require(c.processing_time);
        i_util = h.require(c.utilization);
        i_threads = h.find(c.thread_count);
        i_interval = h.find(c.sample_interval);
      },
      [&](int line_no, const std::vector<std::string>& f) {
        RawSample s;
        try {
          s.timestamp_ms = field_timestamp(f, i_ts, c.timestamp);
          s.request_count = field_double(f, i_count, c.request_count);
          s.processing_time = field_double(f, i_proc, c.processing_time);
          s.cpu_utilization = read_utilization(field_double(f, i_util, c.utilization),
                                               c.utilization, options, line_no, result.warnings);
          if (i_threads) s.thread_count = field_double(f, *i_threads, c.thread_count);
          s.sample_interval = i_interval ? field_double(f, *i_interval, c.sample_interval)
                                         : options.sample_interval;
          require_nonnegative(s.request_count, c.request_count);
          require_nonnegative(s.processing_time, c.processing_time);
          if (s.thread_count) require_nonnegative(*s.thread_count, c.thread_count);
          if (!(s.sample_interval > 0.0)) {
            throw RowError{"range violation: sample interval must be positive"};
          }
        } catch (const RowError& e) {
          result.rejected.push_back({line_no, e.message});
          return;
        }
        check_order(s.timestamp_ms, last_ts, line_no);
        result.records.push_back(s);
      });
  return result;
}

ParseResult<MetricSample> parse_metric_samples(std::istream& in, const ParseOptions& options) {
  const auto& c = options.columns;
  ParseResult<MetricSample> result;
  std::size_t i_ts = 0, i_x = 0, i_n = 0, i_s = 0, i_r = 0, i_u = 0;
  std::optional<std::size_t> i_threads;
  std::optional<std::int64_t> last_ts;

  scan_table(
      in,
      [&](const Header& h) {
        i_ts = h.require(c.timestamp);
        i_x = h.require(c.throughput);
        i_n = h.require(c.concurrency);
        i_s = h.require(c.service_time);
        i_r = h.require(c.response_time);
        i_u = h.require(c.utilization);
        i_threads = h.find(c.thread_count);
      },
      [&](int line_no, const std::vector<std::string>& f) {
        MetricSample s;
        try {
          s.timestamp_ms = field_timestamp(f, i_ts, c.timestamp);
          s.throughput = field_double(f, i_x, c.throughput);
          s.concurrency = field_double(f, i_n, c.concurrency);
          s.service_time = field_double(f, i_s, c.service_time);
          s.response_time = field_double(f, i_r, c.response_time);
          s.utilization = read_utilization(field_double(f, i_u, c.utilization), c.utilization,
                                           options, line_no, result.warnings);
          if (i_threads) s.thread_count = field_double(f, *i_threads, c.thread_count);
          require_nonnegative(s.throughput, c.throughput);
          require_nonnegative(s.concurrency, c.concurrency);
          require_nonnegative(s.service_time, c.service_time);
          require_nonnegative(s.response_time, c.response_time);
          if (s.thread_count) require_nonnegative(*s.thread_count, c.thread_count);
        } catch (const RowError& e) {
          result.rejected.push_back({line_no, e.message});
          return;
        }
        check_order(s.timestamp_ms, last_ts, line_no);
        result.records.push_back(s);
      });
  return result;
}

ParseResult<MetricSample> derive_series(const std::vector<RawSample>& raw) {
  ParseResult<MetricSample> result;
  result.records.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    try {
      result.records.push_back(derive_metrics(raw[i]));
    } catch (const Error& e) {
      result.rejected.push_back({static_cast<int>(i + 1),
                                 "timestamp " + std::to_string(raw[i].timestamp_ms) + ": " +
                                     e.what()});
    }
  }
  return result;
}

// ---------------------------------------------------------------------------

void write_metric_table(std::ostream& out, const std::vector<MetricSample>& samples,
                        TableFormat format) {
  const bool with_threads = std::any_of(samples.begin(), samples.end(),
                                        [](const MetricSample& s) { return s.thread_count; });
  auto threads_of = [](const MetricSample& s) {
    return s.thread_count ? *s.thread_count : std::nan("");
  };

  switch (format) {
    case TableFormat::Csv:
      out << "Timestamp,Xdat,Nest,Sest,Rdat,Udat" << (with_threads ? ",Ndat" : "") << '\n';
      for (const auto& s : samples) {
        out << s.timestamp_ms << ',' << textio::format_double(s.throughput) << ','
            << textio::format_double(s.concurrency) << ','
            << textio::format_double(s.service_time) << ','
            << textio::format_double(s.response_time) << ','
            << textio::format_double(s.utilization);
        if (with_threads) out << ',' << textio::format_double(threads_of(s));
        out << '\n';
      }
      break;
    case TableFormat::KeyValue:
      for (const auto& s : samples) {
        out << "Timestamp=" << s.timestamp_ms
            << " Xdat=" << textio::format_double(s.throughput)
            << " Nest=" << textio::format_double(s.concurrency)
            << " Sest=" << textio::format_double(s.service_time)
            << " Rdat=" << textio::format_double(s.response_time)
            << " Udat=" << textio::format_double(s.utilization);
        if (s.thread_count) out << " Ndat=" << textio::format_double(*s.thread_count);
        out << '\n';
      }
      break;
    case TableFormat::Aligned: {
      auto col = [&](const std::string& text, int width) {
        out << std::string(text.size() < static_cast<std::size_t>(width) ? width - text.size() : 1,
                           ' ')
            << text;
      };
      col("Timestamp", 19);
      for (const char* h : {"Xdat", "Nest", "Sest", "Rdat", "Udat"}) col(h, 16);
      if (with_threads) col("Ndat", 16);
      out << '\n';
      for (const auto& s : samples) {
        col(std::to_string(s.timestamp_ms), 19);
        for (double v : {s.throughput, s.concurrency, s.service_time, s.response_time,
                         s.utilization}) {
          col(textio::format_fixed(v, 6), 16);
        }
        if (with_threads) col(textio::format_fixed(threads_of(s), 6), 16);
        out << '\n';
      }
      break;
    }
  }
}

void write_consistency(std::ostream& out, const std::vector<ConsistencyReport>& reports,
                       ReportFormat format, const std::string& line_prefix) {
  if (format == ReportFormat::JsonLines) {
    for (const auto& r : reports) {
      nlohmann::json j;
      j["timestamp"] = r.timestamp_ms;
      j["macro"] = {{"status", to_string(r.macro.status)},
                    {"relative_error", r.macro.relative_error}};
      j["micro"] = {{"status", to_string(r.micro.status)},
                    {"relative_error", r.micro.relative_error}};
      if (r.threads) {
        j["threads"] = {{"status", to_string(r.threads->status)},
                        {"relative_error", r.threads->relative_error}};
      }
      j["pass"] = r.passed();
      out << line_prefix << j.dump() << '\n';
    }
    return;
  }
  out << line_prefix << std::setw(15) << "Timestamp" << std::setw(12) << "macro_err"
      << std::setw(15) << "macro" << std::setw(12) << "micro_err" << std::setw(15) << "micro"
      << '\n';
  for (const auto& r : reports) {
    out << line_prefix << std::setw(15) << r.timestamp_ms << std::setw(12)
        << textio::format_fixed(r.macro.relative_error, 6) << std::setw(15)
        << to_string(r.macro.status) << std::setw(12)
        << textio::format_fixed(r.micro.relative_error, 6) << std::setw(15)
        << to_string(r.micro.status);
    if (r.threads) {
      out << "  threads " << textio::format_fixed(r.threads->relative_error, 6) << ' '
          << to_string(r.threads->status);
    }
    out << '\n';
  }
}

}  // namespace capplan::ingest
