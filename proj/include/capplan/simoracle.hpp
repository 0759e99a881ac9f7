#pragma once

// Discrete-event simulation of M/M/m (open) and machine-repairman (closed)
// stations, used to cross-check the analytic solver. Runs are single
// threaded and bit-reproducible for a fixed seed.

#include <cstdint>
#include <iosfwd>
#include <optional>

namespace capplan::simoracle {

/// SplitMix64-seeded xoshiro256** generator. `stream` selects an
/// independent substream of the same seed.
class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next();
  /// Uniform on (0, 1].
  double uniform();
  double exponential(double mean);

 private:
  std::uint64_t s_[4];
};

enum class SystemKind { Open, Closed };

struct SimConfig {
  SystemKind kind = SystemKind::Open;
  double arrival_rate = 0.0;  // open
  int population = 0;         // closed
  double think_time = 0.0;    // closed
  int servers = 1;
  double service_time = 0.0;  // exponential mean
  std::uint64_t run_length = 1'000'000;  // measured completions
  std::optional<std::uint64_t> warmup;   // default: 10% of run_length
  std::uint64_t seed = 1;
  int batches = 20;
};

struct Estimate {
  double mean = 0.0;
  double std_error = 0.0;
};

struct SimResult {
  Estimate throughput;     // X_hat
  Estimate response_time;  // R_hat at the station (queue + service)
  double utilization = 0.0;   // U_hat, busy servers / m
  double queue_length = 0.0;  // Q_hat, time-average number at the station
  std::uint64_t completions = 0;
  double measured_time = 0.0;
};

/// Throws ConfigError for a non-open config or degenerate parameters and
/// SaturationError when lambda S / m >= 1.
SimResult simulate_open(const SimConfig& config);

/// Z = 0 sends a finished customer straight back to the queue.
SimResult simulate_closed(const SimConfig& config);

SimResult simulate(const SimConfig& config);

void write_result(std::ostream& out, const SimConfig& config, const SimResult& result);

}  // namespace capplan::simoracle
