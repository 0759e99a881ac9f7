#pragma once

// Monitoring-sample ingestion and the Little's-law derived metrics.
//
// Raw samples carry per-interval counters (request count C, accumulated
// processing time T_proc, CPU utilization). From them we derive throughput
// X = C/T_sample, response time R = T_proc/C, service time S = U/X and
// concurrency N = X*R. Already-distilled tables (Timestamp, Xdat, Nest, Sest,
// Rdat, Udat) are ingested as-is and can be checked against both laws.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace capplan::ingest {

inline constexpr double kDefaultSampleInterval = 300.0;
inline constexpr double kDivisionGuard = 1e-12;

struct RawSample {
  std::int64_t timestamp_ms = 0;
  double request_count = 0.0;    // completions in the interval
  double processing_time = 0.0;  // seconds accumulated in the interval
  double cpu_utilization = 0.0;  // fraction
  std::optional<double> thread_count;
  double sample_interval = kDefaultSampleInterval;  // seconds
};

struct MetricSample {
  std::int64_t timestamp_ms = 0;
  double throughput = 0.0;     // Xdat, requests/s
  double response_time = 0.0;  // Rdat, s
  double service_time = 0.0;   // Sest, s
  double concurrency = 0.0;    // Nest
  double utilization = 0.0;    // Udat, fraction
  std::optional<double> thread_count;  // Ndat, when measured
};

/// R = T_proc / C. Throws UndefinedRateError when C == 0.
double derive_response_time(double processing_time, double request_count);

/// The same quantity evaluated as (T_proc/T_sample)(T_sample/C).
double derive_response_time(double processing_time, double request_count,
                            double sample_interval);

/// X = C / T_sample. Throws DataError for T_sample <= 0.
double derive_throughput(double request_count, double sample_interval);

/// Microscopic Little's law solved for S: U / X.
double estimate_service_time(double utilization, double throughput);

/// Macroscopic Little's law: N = X * R.
double estimate_concurrency(double throughput, double response_time);

/// Validates a raw sample and derives all five metrics from it.
MetricSample derive_metrics(const RawSample& raw);

enum class CheckStatus { Pass, Fail, NotEvaluable };

const char* to_string(CheckStatus status);

struct CheckResult {
  CheckStatus status = CheckStatus::NotEvaluable;
  double relative_error = 0.0;
};

struct ConsistencyReport {
  std::int64_t timestamp_ms = 0;
  CheckResult macro;  // N_est vs X*R
  CheckResult micro;  // U_dat vs X*S_est
  std::optional<CheckResult> threads;  // N_dat vs N_est

  /// No evaluated check failed.
  bool passed() const;
};

/// Relative errors |N - X R| / max(N, eps) and |U - X S| / max(U, eps).
/// Samples with X <= 0 or non-finite fields are reported not evaluable.
ConsistencyReport consistency_check(const MetricSample& sample, double tolerance);

// ---------------------------------------------------------------------------
// Delimited-text parsing

/// Column names looked up in the header row (case-insensitive). Empty names
/// mean "not present" for optional columns.
struct ColumnMapping {
  std::string timestamp = "Timestamp";
  // distilled tables
  std::string throughput = "Xdat";
  std::string concurrency = "Nest";
  std::string service_time = "Sest";
  std::string response_time = "Rdat";
  std::string utilization = "Udat";
  // raw counters
  std::string request_count = "requestCount";
  std::string processing_time = "processingTime";
  // optional in both
  std::string thread_count = "Ndat";
  std::string sample_interval = "Tsample";
};

struct ParseOptions {
  ColumnMapping columns;
  double sample_interval = kDefaultSampleInterval;
  /// Treat utilizations in (1, 100] as percentages and divide by 100.
  bool rescale_percent = false;
};

struct RowIssue {
  int line = 0;
  std::string message;
};

template <typename Record>
struct ParseResult {
  std::vector<Record> records;
  std::vector<RowIssue> rejected;
  std::vector<RowIssue> warnings;
};

/// Missing required columns throw ConfigError; timestamps that do not
/// strictly increase throw DataError naming the line. Rows that fail
/// conversion or range checks are skipped and listed in `rejected`.
ParseResult<RawSample> parse_raw_samples(std::istream& in, const ParseOptions& options = {});
ParseResult<MetricSample> parse_metric_samples(std::istream& in,
                                               const ParseOptions& options = {});

/// True when the header names the distilled columns (throughput present).
bool header_is_distilled(const std::string& header_line, const ColumnMapping& columns = {});

/// Derives every raw sample. Intervals without completions are skipped and
/// reported, since their response time is undefined.
ParseResult<MetricSample> derive_series(const std::vector<RawSample>& raw);

// ---------------------------------------------------------------------------
// Output

enum class TableFormat { Csv, Aligned, KeyValue };

/// Six-column layout: Timestamp Xdat Nest Sest Rdat Udat (plus Ndat when any
/// sample carries it). Csv and KeyValue print exact round-trip decimals;
/// Aligned prints six decimals like a monitoring report.
void write_metric_table(std::ostream& out, const std::vector<MetricSample>& samples,
                        TableFormat format);

enum class ReportFormat { JsonLines, Aligned };

void write_consistency(std::ostream& out, const std::vector<ConsistencyReport>& reports,
                       ReportFormat format, const std::string& line_prefix = "");

}  // namespace capplan::ingest
