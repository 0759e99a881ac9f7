#include "capplan/simoracle.hpp"

#include <cmath>
#include <deque>
#include <functional>
#include <ostream>
#include <queue>
#include <vector>

#include "capplan/error.hpp"
#include "capplan/textio.hpp"

namespace capplan::simoracle {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Rng::Rng(std::uint64_t seed, std::uint64_t stream) {
  // Substreams: the stream index perturbs the SplitMix64 starting point.
  std::uint64_t state = seed ^ (0xd1b54a32d192ed03ULL * (stream + 1));
  for (auto& word : s_) word = splitmix64(state);
}

std::uint64_t Rng::next() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform() {
  return (static_cast<double>(next() >> 11) + 1.0) * 0x1.0p-53;
}

double Rng::exponential(double mean) { return -mean * std::log(uniform()); }

namespace {

constexpr std::uint64_t kArrivalStream = 0;
constexpr std::uint64_t kServiceStream = 1;

// Collects completions after warmup into batches and integrates the
// station population and busy servers over the measured window.
class Recorder {
 public:
  Recorder(const SimConfig& config)
      : warmup_(config.warmup ? *config.warmup : config.run_length / 10),
        batch_size_(config.run_length / static_cast<std::uint64_t>(config.batches)),
        batches_(config.batches),
        servers_(config.servers) {}

  bool measuring() const { return seen_ >= warmup_; }
  bool done() const { return measured_ >= batch_size_ * static_cast<std::uint64_t>(batches_); }

  // Advance the clock, integrating the state held since the last event.
  void advance(double now, int at_station, int busy) {
    if (measuring()) {
      area_station_ += at_station * (now - last_);
      area_busy_ += busy * (now - last_);
    }
    last_ = now;
  }

  void complete(double now, double response) {
    ++seen_;
    if (seen_ == warmup_) {
      start_ = now;
      batch_start_ = now;
      return;
    }
    if (!measuring()) return;
    ++measured_;
    batch_response_ += response;
    ++batch_count_;
    if (batch_count_ == batch_size_) {
      batch_x_.push_back(static_cast<double>(batch_count_) / (now - batch_start_));
      batch_r_.push_back(batch_response_ / static_cast<double>(batch_count_));
      batch_start_ = now;
      batch_count_ = 0;
      batch_response_ = 0.0;
      end_ = now;
    }
  }

  SimResult result() const {
    SimResult r;
    r.throughput = summarize(batch_x_);
    r.response_time = summarize(batch_r_);
    r.completions = measured_;
    r.measured_time = end_ - start_;
    // Overall throughput is the ratio estimator, not the mean of batch rates.
    r.throughput.mean = static_cast<double>(measured_) / r.measured_time;
    r.queue_length = area_station_ / r.measured_time;
    r.utilization = area_busy_ / r.measured_time / servers_;
    return r;
  }

 private:
  static Estimate summarize(const std::vector<double>& v) {
    Estimate e;
    double sum = 0.0;
    for (double x : v) sum += x;
    e.mean = sum / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - e.mean) * (x - e.mean);
    const double var = ss / static_cast<double>(v.size() - 1);
    e.std_error = std::sqrt(var / static_cast<double>(v.size()));
    return e;
  }

  std::uint64_t warmup_;
  std::uint64_t batch_size_;
  int batches_;
  int servers_;
  std::uint64_t seen_ = 0;
  std::uint64_t measured_ = 0;
  double last_ = 0.0;
  double start_ = 0.0;
  double end_ = 0.0;
  double batch_start_ = 0.0;
  std::uint64_t batch_count_ = 0;
  double batch_response_ = 0.0;
  double area_station_ = 0.0;
  double area_busy_ = 0.0;
  std::vector<double> batch_x_;
  std::vector<double> batch_r_;
};

void validate_common(const SimConfig& c) {
  if (!(c.service_time > 0.0) || !std::isfinite(c.service_time)) {
    throw ConfigError("simulation needs a positive service time");
  }
  if (c.servers < 1) throw ConfigError("simulation needs at least one server");
  if (c.batches < 2) throw ConfigError("batch means need at least 2 batches");
  if (c.run_length < static_cast<std::uint64_t>(c.batches)) {
    throw ConfigError("run length shorter than the number of batches");
  }
}

struct Departure {
  double time;
  double arrived;  // arrival time at the station of the customer in service
  int customer;
  bool operator>(const Departure& o) const { return time > o.time; }
};

using DepartureQueue =
    std::priority_queue<Departure, std::vector<Departure>, std::greater<Departure>>;

}  // namespace

SimResult simulate_open(const SimConfig& config) {
  if (config.kind != SystemKind::Open) throw ConfigError("simulate_open needs an open config");
  validate_common(config);
  if (!(config.arrival_rate > 0.0)) throw ConfigError("open simulation needs lambda > 0");
  const double rho = config.arrival_rate * config.service_time / config.servers;
  if (rho >= 1.0) {
    throw SaturationError("unstable configuration: rho = " + textio::format_double(rho) +
                              " >= 1",
                          "station");
  }

  Rng arrivals(config.seed, kArrivalStream);
  Rng service(config.seed, kServiceStream);
  const double mean_gap = 1.0 / config.arrival_rate;

  Recorder rec(config);
  DepartureQueue departures;
  std::deque<double> waiting;  // arrival times, FIFO
  int busy = 0;
  double next_arrival = arrivals.exponential(mean_gap);

  while (!rec.done()) {
    const int at_station = busy + static_cast<int>(waiting.size());
    if (departures.empty() || next_arrival < departures.top().time) {
      const double now = next_arrival;
      rec.advance(now, at_station, busy);
      if (busy < config.servers) {
        ++busy;
        departures.push({now + service.exponential(config.service_time), now, 0});
      } else {
        waiting.push_back(now);
      }
      next_arrival = now + arrivals.exponential(mean_gap);
    } else {
      const auto d = departures.top();
      departures.pop();
      rec.advance(d.time, at_station, busy);
      rec.complete(d.time, d.time - d.arrived);
      if (!waiting.empty()) {
        const double arrived = waiting.front();
        waiting.pop_front();
        departures.push({d.time + service.exponential(config.service_time), arrived, 0});
      } else {
        --busy;
      }
    }
  }
  return rec.result();
}

SimResult simulate_closed(const SimConfig& config) {
  if (config.kind != SystemKind::Closed) throw ConfigError("simulate_closed needs a closed config");
  validate_common(config);
  if (config.population < 1) throw ConfigError("closed simulation needs N >= 1");
  if (!(config.think_time >= 0.0)) throw ConfigError("think time must be >= 0");

  Rng think(config.seed, kArrivalStream);
  Rng service(config.seed, kServiceStream);

  struct Wake {
    double time;
    int customer;
    bool operator>(const Wake& o) const { return time > o.time; }
  };
  std::priority_queue<Wake, std::vector<Wake>, std::greater<Wake>> thinking;

  Recorder rec(config);
  DepartureQueue departures;
  std::deque<std::pair<double, int>> waiting;
  int busy = 0;

  auto arrive = [&](double now, int customer) {
    if (busy < config.servers) {
      ++busy;
      departures.push({now + service.exponential(config.service_time), now, customer});
    } else {
      waiting.emplace_back(now, customer);
    }
  };

  if (config.think_time > 0.0) {
    for (int c = 0; c < config.population; ++c) {
      thinking.push({think.exponential(config.think_time), c});
    }
  } else {
    for (int c = 0; c < config.population; ++c) arrive(0.0, c);
  }

  while (!rec.done()) {
    const int at_station = busy + static_cast<int>(waiting.size());
    const bool think_next =
        !thinking.empty() && (departures.empty() || thinking.top().time < departures.top().time);
    if (think_next) {
      const auto w = thinking.top();
      thinking.pop();
      rec.advance(w.time, at_station, busy);
      arrive(w.time, w.customer);
      continue;
    }
    const auto d = departures.top();
    departures.pop();
    rec.advance(d.time, at_station, busy);
    rec.complete(d.time, d.time - d.arrived);
    --busy;
    if (!waiting.empty()) {
      const auto [arrived, customer] = waiting.front();
      waiting.pop_front();
      ++busy;
      departures.push({d.time + service.exponential(config.service_time), arrived, customer});
    }
    if (config.think_time > 0.0) {
      thinking.push({d.time + think.exponential(config.think_time), d.customer});
    } else {
      arrive(d.time, d.customer);
    }
  }
  return rec.result();
}

SimResult simulate(const SimConfig& config) {
  return config.kind == SystemKind::Open ? simulate_open(config) : simulate_closed(config);
}

void write_result(std::ostream& out, const SimConfig& c, const SimResult& r) {
  using textio::write_kv;
  out << textio::kind_tag("simulation") << '\n';
  write_kv(out, "system", c.kind == SystemKind::Open ? "open" : "closed");
  if (c.kind == SystemKind::Open) {
    write_kv(out, "lambda", c.arrival_rate);
  } else {
    write_kv(out, "N", static_cast<double>(c.population));
    write_kv(out, "Z", c.think_time);
  }
  write_kv(out, "m", static_cast<double>(c.servers));
  write_kv(out, "S", c.service_time);
  write_kv(out, "seed", std::to_string(c.seed));
  write_kv(out, "completions", std::to_string(r.completions));
  write_kv(out, "X_hat", r.throughput.mean);
  write_kv(out, "X_se", r.throughput.std_error);
  write_kv(out, "R_hat", r.response_time.mean);
  write_kv(out, "R_se", r.response_time.std_error);
  write_kv(out, "U_hat", r.utilization);
  write_kv(out, "Q_hat", r.queue_length);
}

}  // namespace capplan::simoracle
