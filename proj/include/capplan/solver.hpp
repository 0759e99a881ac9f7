#pragma once

// Analytic single-class queueing-network solver in the spirit of PDQ.
//
//   open workloads    per-node M/M/1 or M/M/m (Erlang C) residence times
//   closed workloads  exact MVA for single-server and delay nodes; exact
//                     finite-population birth-death solution for a lone
//                     multi-server node; Seidmann decomposition + MVA when a
//                     multi-server node sits inside a larger network
//
// Visit counts are fixed at one, so every demand is a per-visit service time.

#include <iosfwd>
#include <string>
#include <vector>

namespace capplan::solver {

enum class NodeKind { Queueing, Delay };

struct Node {
  std::string name;
  NodeKind kind = NodeKind::Queueing;
  int servers = 1;      // ignored for delay nodes
  double demand = 0.0;  // S, seconds per visit
};

enum class WorkloadKind { Open, Closed };

struct Workload {
  std::string name = "requests";
  WorkloadKind kind = WorkloadKind::Closed;
  double arrival_rate = 0.0;  // open only
  int population = 0;         // closed only
  double think_time = 0.0;    // closed only

  static Workload open(double arrival_rate, std::string name = "requests");
  static Workload closed(int population, double think_time, std::string name = "requests");
};

/// Validated, immutable network description.
class Network {
 public:
  /// Throws ConfigError for zero nodes, non-positive demands, fewer than one
  /// server, duplicate names, or an inconsistent workload.
  static Network build(std::vector<Node> nodes, Workload workload);

  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  const Workload& workload() const noexcept { return workload_; }

  /// Same nodes, closed population replaced.
  Network with_population(int population) const;
  /// Same nodes, open arrival rate replaced.
  Network with_arrival_rate(double arrival_rate) const;

 private:
  Network(std::vector<Node> nodes, Workload workload)
      : nodes_(std::move(nodes)), workload_(std::move(workload)) {}

  std::vector<Node> nodes_;
  Workload workload_;
};

/// Incremental construction mirroring the PDQ calls: create a workload,
/// create nodes, set demands, then build.
class NetworkBuilder {
 public:
  NetworkBuilder& open_workload(std::string name, double arrival_rate);
  NetworkBuilder& closed_workload(std::string name, int population, double think_time);
  NetworkBuilder& node(std::string name, NodeKind kind, int servers = 1);
  NetworkBuilder& demand(const std::string& node, double service_time);
  Network build() const;

 private:
  std::vector<Node> nodes_;
  Workload workload_;
  bool have_workload_ = false;
};

enum class Method { Open, OpenSplit, Mva, BirthDeath, ThreadPoolLimit, SeidmannMva };

const char* to_string(Method method);

struct NodeMetrics {
  std::string name;
  double utilization = 0.0;     // X S / m for queueing nodes, X S for delay nodes
  double queue_length = 0.0;    // Q, mean number resident (waiting + in service)
  double waiting_time = 0.0;    // W = R_node - S
  double residence_time = 0.0;  // R_node
  double per_server_load = 0.0; // rho = X S / m
};

struct Solution {
  bool solved = false;
  Method method = Method::Open;
  double throughput = 0.0;       // X
  double response_time = 0.0;    // R, summed over nodes
  double mean_population = 0.0;  // closed: N; open: sum of Q
  std::vector<NodeMetrics> nodes;
};

/// Probability an arrival waits in M/M/m with offered load a erlangs.
/// Evaluated through the Erlang B recurrence; throws SaturationError for a >= m.
double erlang_c(int servers, double offered_load);

/// Throws UsageError for closed workloads and SaturationError naming the
/// bottleneck when some queueing node has rho >= 1.
Solution solve_open(const Network& network);

/// The arrival stream is split evenly over `ways` identical copies of the
/// network. System throughput is the full rate; per-node metrics and the
/// response time describe one branch.
Solution solve_open_split(const Network& network, int ways);

/// Dispatches to the exact method that applies, else Seidmann + MVA.
Solution solve_closed(const Network& network);

/// Exact MVA. Throws UsageError if a queueing node has more than one server.
Solution solve_closed_mva(const Network& network);

/// Exact stationary solution of the machine-repairman chain for a network of
/// one queueing node. Z = 0 uses the closed-form limit.
Solution solve_closed_birth_death(const Network& network);

/// Each m-server node becomes a single server with demand S/m in tandem with
/// a delay of S(m-1)/m, then exact MVA. Approximate for m > 1.
Solution solve_closed_seidmann(const Network& network);

/// Open or closed, according to the workload.
Solution solve(const Network& network);

struct Bounds {
  double max_throughput = 0.0;  // min over queueing nodes of m/S
  double min_response = 0.0;    // sum of S
  double knee = 0.0;            // X_max (R_min + Z)
  std::string bottleneck;
};

Bounds system_bounds(const Network& network);

/// Closed form for N requests on m threads of service time S with Z = 0:
/// X = min(N, m)/S and R = S for N <= m, N S/m beyond. N may be fractional.
struct ThreadPoolPoint {
  double throughput = 0.0;
  double response_time = 0.0;
};
ThreadPoolPoint thread_pool_limit(double population, double servers, double service_time);

/// Fixed-width text report. Throws UsageError if the solution was not
/// produced for this network.
std::string report(const Network& network, const Solution& solution);

/// key=value export of the same content.
void write_solution_kv(std::ostream& out, const Network& network, const Solution& solution);

/// Plain-text network description:
///   closed <N> <Z> [name]      or  open <lambda> [name]     (workload line)
///   <name> queue <m> <S>       or  <name> delay <m> <S>     (one per node)
/// An optional leading "workload" or "node" keyword is accepted; '#' starts a comment.
Network parse_network_config(std::istream& in);

}  // namespace capplan::solver
