#include "capplan/solver.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "capplan/error.hpp"
#include "capplan/textio.hpp"

namespace capplan::solver {

Workload Workload::open(double arrival_rate, std::string name) {
  Workload w;
  w.name = std::move(name);
  w.kind = WorkloadKind::Open;
  w.arrival_rate = arrival_rate;
  return w;
}

Workload Workload::closed(int population, double think_time, std::string name) {
  Workload w;
  w.name = std::move(name);
  w.kind = WorkloadKind::Closed;
  w.population = population;
  w.think_time = think_time;
  return w;
}

Network Network::build(std::vector<Node> nodes, Workload workload) {
  if (nodes.empty()) throw ConfigError("network has no nodes");
  std::set<std::string> names;
  for (auto& n : nodes) {
    if (n.name.empty()) throw ConfigError("node with empty name");
    if (!names.insert(n.name).second) throw ConfigError("duplicate node name '" + n.name + "'");
    if (!(n.demand > 0.0) || !std::isfinite(n.demand)) {
      throw ConfigError("node '" + n.name + "': demand must be positive");
    }
    if (n.kind == NodeKind::Delay) {
      n.servers = 1;
    } else if (n.servers < 1) {
      throw ConfigError("node '" + n.name + "': needs at least one server");
    }
  }
  if (workload.kind == WorkloadKind::Open) {
    if (!(workload.arrival_rate > 0.0) || !std::isfinite(workload.arrival_rate)) {
      throw ConfigError("open workload needs a positive arrival rate");
    }
    workload.population = 0;
    workload.think_time = 0.0;
  } else {
    if (workload.population < 1) throw ConfigError("closed workload needs N >= 1");
    if (!(workload.think_time >= 0.0) || !std::isfinite(workload.think_time)) {
      throw ConfigError("think time must be >= 0");
    }
    workload.arrival_rate = 0.0;
  }
  return Network(std::move(nodes), std::move(workload));
}

Network Network::with_population(int population) const {
  Workload w = workload_;
  w.population = population;
  return build(nodes_, std::move(w));
}

Network Network::with_arrival_rate(double arrival_rate) const {
  Workload w = workload_;
  w.arrival_rate = arrival_rate;
  return build(nodes_, std::move(w));
}

NetworkBuilder& NetworkBuilder::open_workload(std::string name, double arrival_rate) {
  workload_ = Workload::open(arrival_rate, std::move(name));
  have_workload_ = true;
  return *this;
}

NetworkBuilder& NetworkBuilder::closed_workload(std::string name, int population,
                                                double think_time) {
  workload_ = Workload::closed(population, think_time, std::move(name));
  have_workload_ = true;
  return *this;
}

NetworkBuilder& NetworkBuilder::node(std::string name, NodeKind kind, int servers) {
  nodes_.push_back(Node{std::move(name), kind, servers, 0.0});
  return *this;
}

NetworkBuilder& NetworkBuilder::demand(const std::string& node, double service_time) {
  auto it = std::find_if(nodes_.begin(), nodes_.end(),
                         [&](const Node& n) { return n.name == node; });
  if (it == nodes_.end()) throw ConfigError("demand set on unknown node '" + node + "'");
  it->demand = service_time;
  return *this;
}

Network NetworkBuilder::build() const {
  if (!have_workload_) throw ConfigError("no workload created");
  return Network::build(nodes_, workload_);
}

const char* to_string(Method method) {
  switch (method) {
    case Method::Open: return "open (exact)";
    case Method::OpenSplit: return "open, split parallel (exact)";
    case Method::Mva: return "MVA (exact)";
    case Method::BirthDeath: return "birth-death (exact)";
    case Method::ThreadPoolLimit: return "birth-death, Z=0 limit (exact)";
    case Method::SeidmannMva: return "Seidmann + MVA (approx)";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Open networks

double erlang_c(int servers, double offered_load) {
  if (servers < 1) throw ConfigError("erlang_c: servers must be >= 1");
  if (offered_load < 0.0) throw ConfigError("erlang_c: offered load must be >= 0");
  const double m = servers;
  if (offered_load >= m) {
    throw SaturationError("erlang_c: offered load " + textio::format_double(offered_load) +
                              " >= " + std::to_string(servers) + " servers",
                          "");
  }
  // Erlang B: B(0) = 1, B(k) = a B(k-1) / (k + a B(k-1)).
  double b = 1.0;
  for (int k = 1; k <= servers; ++k) b = offered_load * b / (k + offered_load * b);
  const double rho = offered_load / m;
  return b / (1.0 - rho * (1.0 - b));
}

namespace {

NodeMetrics open_node(const Node& node, double rate) {
  NodeMetrics nm;
  nm.name = node.name;
  const double s = node.demand;
  if (node.kind == NodeKind::Delay) {
    nm.residence_time = s;
    nm.utilization = rate * s;
    nm.per_server_load = rate * s;
  } else {
    const double a = rate * s;
    const double rho = a / node.servers;
    if (rho >= 1.0) {
      throw SaturationError("node '" + node.name + "' saturated: rho = " +
                                textio::format_double(rho) + " >= 1",
                            node.name);
    }
    if (node.servers == 1) {
      nm.residence_time = s / (1.0 - a);
    } else {
      nm.residence_time = s + erlang_c(node.servers, a) * s / (node.servers * (1.0 - rho));
    }
    nm.utilization = rho;
    nm.per_server_load = rho;
  }
  nm.waiting_time = nm.residence_time - s;
  nm.queue_length = rate * nm.residence_time;
  return nm;
}

}  // namespace

Solution solve_open(const Network& network) {
  const auto& w = network.workload();
  if (w.kind != WorkloadKind::Open) throw UsageError("solve_open needs an open workload");
  Solution sol;
  sol.method = Method::Open;
  sol.throughput = w.arrival_rate;
  for (const auto& node : network.nodes()) {
    sol.nodes.push_back(open_node(node, w.arrival_rate));
    sol.response_time += sol.nodes.back().residence_time;
    sol.mean_population += sol.nodes.back().queue_length;
  }
  sol.solved = true;
  return sol;
}

Solution solve_open_split(const Network& network, int ways) {
  if (ways < 1) throw ConfigError("split needs at least one way");
  const double total = network.workload().arrival_rate;
  auto sol = solve_open(network.with_arrival_rate(total / ways));
  sol.method = Method::OpenSplit;
  sol.throughput = total;
  sol.mean_population *= ways;
  return sol;
}

// ---------------------------------------------------------------------------
// Closed networks

namespace {

struct MvaStation {
  bool delay = false;
  double demand = 0.0;
};

// Exact MVA over single-server queueing and delay stations. Returns the
// residence times and throughput at the full population.
struct MvaResult {
  double throughput = 0.0;
  std::vector<double> residence;
};

MvaResult run_mva(const std::vector<MvaStation>& stations, int population, double think) {
  std::vector<double> q(stations.size(), 0.0);
  MvaResult out;
  out.residence.assign(stations.size(), 0.0);
  for (int n = 1; n <= population; ++n) {
    double total = 0.0;
    for (std::size_t k = 0; k < stations.size(); ++k) {
      out.residence[k] = stations[k].delay ? stations[k].demand
                                           : stations[k].demand * (1.0 + q[k]);
      total += out.residence[k];
    }
    out.throughput = n / (think + total);
    for (std::size_t k = 0; k < stations.size(); ++k) q[k] = out.throughput * out.residence[k];
  }
  return out;
}

NodeMetrics closed_node(const Node& node, double x, double residence) {
  NodeMetrics nm;
  nm.name = node.name;
  nm.residence_time = residence;
  nm.queue_length = x * residence;
  nm.waiting_time = residence - node.demand;
  if (node.kind == NodeKind::Delay) {
    nm.utilization = x * node.demand;
    nm.per_server_load = nm.utilization;
  } else {
    nm.utilization = x * node.demand / node.servers;
    nm.per_server_load = nm.utilization;
  }
  return nm;
}

Solution finish_closed(const Network& network, Method method, double x,
                       const std::vector<double>& residence) {
  Solution sol;
  sol.method = method;
  sol.throughput = x;
  for (std::size_t i = 0; i < network.nodes().size(); ++i) {
    sol.nodes.push_back(closed_node(network.nodes()[i], x, residence[i]));
    sol.response_time += residence[i];
  }
  sol.mean_population = network.workload().population;
  sol.solved = true;
  return sol;
}

void require_closed(const Network& network, const char* who) {
  if (network.workload().kind != WorkloadKind::Closed) {
    throw UsageError(std::string(who) + " needs a closed workload");
  }
}

bool is_multiserver(const Node& n) { return n.kind == NodeKind::Queueing && n.servers > 1; }

}  // namespace

ThreadPoolPoint thread_pool_limit(double population, double servers, double service_time) {
  if (population < 0.0) throw ConfigError("population must be >= 0");
  if (!(servers >= 1.0)) throw ConfigError("servers must be >= 1");
  if (!(service_time > 0.0)) throw ConfigError("service time must be positive");
  ThreadPoolPoint p;
  if (population <= servers) {
    p.throughput = population / service_time;
    p.response_time = service_time;
  } else {
    p.throughput = servers / service_time;
    p.response_time = population * service_time / servers;
  }
  return p;
}

Solution solve_closed_mva(const Network& network) {
  require_closed(network, "solve_closed_mva");
  std::vector<MvaStation> stations;
  for (const auto& n : network.nodes()) {
    if (is_multiserver(n)) {
      throw UsageError("exact MVA does not apply: node '" + n.name + "' has " +
                       std::to_string(n.servers) + " servers");
    }
    stations.push_back({n.kind == NodeKind::Delay, n.demand});
  }
  const auto& w = network.workload();
  const auto r = run_mva(stations, w.population, w.think_time);
  return finish_closed(network, Method::Mva, r.throughput, r.residence);
}

Solution solve_closed_birth_death(const Network& network) {
  require_closed(network, "solve_closed_birth_death");
  if (network.nodes().size() != 1 || network.nodes().front().kind != NodeKind::Queueing) {
    throw UsageError("birth-death solution needs a network of exactly one queueing node");
  }
  const auto& node = network.nodes().front();
  const auto& w = network.workload();
  const int n_pop = w.population;
  const int m = node.servers;
  const double s = node.demand;

  if (w.think_time == 0.0) {
    const auto p = thread_pool_limit(n_pop, m, s);
    return finish_closed(network, Method::ThreadPoolLimit, p.throughput, {p.response_time});
  }

  // Unnormalized log-probabilities: p(k+1)/p(k) = ((N-k)/Z) / (min(k+1, m)/S).
  const double z = w.think_time;
  std::vector<double> logp(static_cast<std::size_t>(n_pop) + 1, 0.0);
  for (int k = 0; k < n_pop; ++k) {
    logp[k + 1] = logp[k] + std::log((n_pop - k) / z) - std::log(std::min(k + 1, m) / s);
  }
  const double peak = *std::max_element(logp.begin(), logp.end());

  struct Term {
    long double p;
    int k;
  };
  std::vector<Term> terms;
  terms.reserve(logp.size());
  for (int k = 0; k <= n_pop; ++k) {
    terms.push_back({std::exp(static_cast<long double>(logp[k] - peak)), k});
  }
  // Smallest terms first bounds the accumulated round-off.
  std::sort(terms.begin(), terms.end(), [](const Term& a, const Term& b) { return a.p < b.p; });

  long double norm = 0.0L, busy = 0.0L, resident = 0.0L;
  for (const auto& t : terms) {
    norm += t.p;
    busy += t.p * std::min(t.k, m);
    resident += t.p * t.k;
  }
  const double x = static_cast<double>(busy / norm / s);
  const double q = static_cast<double>(resident / norm);
  return finish_closed(network, Method::BirthDeath, x, {q / x});
}

Solution solve_closed_seidmann(const Network& network) {
  require_closed(network, "solve_closed_seidmann");
  std::vector<MvaStation> stations;
  for (const auto& n : network.nodes()) {
    if (is_multiserver(n)) {
      stations.push_back({false, n.demand / n.servers});
      stations.push_back({true, n.demand * (n.servers - 1) / n.servers});
    } else {
      stations.push_back({n.kind == NodeKind::Delay, n.demand});
    }
  }
  const auto& w = network.workload();
  const auto r = run_mva(stations, w.population, w.think_time);

  std::vector<double> residence;
  std::size_t k = 0;
  for (const auto& n : network.nodes()) {
    if (is_multiserver(n)) {
      residence.push_back(r.residence[k] + r.residence[k + 1]);
      k += 2;
    } else {
      residence.push_back(r.residence[k]);
      k += 1;
    }
  }
  return finish_closed(network, Method::SeidmannMva, r.throughput, residence);
}

Solution solve_closed(const Network& network) {
  require_closed(network, "solve_closed");
  const auto& nodes = network.nodes();
  const bool any_multi = std::any_of(nodes.begin(), nodes.end(), is_multiserver);
  if (!any_multi) return solve_closed_mva(network);
  if (nodes.size() == 1) return solve_closed_birth_death(network);
  return solve_closed_seidmann(network);
}

Solution solve(const Network& network) {
  return network.workload().kind == WorkloadKind::Open ? solve_open(network)
                                                       : solve_closed(network);
}

Bounds system_bounds(const Network& network) {
  Bounds b;
  b.max_throughput = std::numeric_limits<double>::infinity();
  for (const auto& n : network.nodes()) {
    b.min_response += n.demand;
    if (n.kind == NodeKind::Queueing) {
      const double cap = n.servers / n.demand;
      if (cap < b.max_throughput) {
        b.max_throughput = cap;
        b.bottleneck = n.name;
      }
    }
  }
  const double z = network.workload().kind == WorkloadKind::Closed
                       ? network.workload().think_time
                       : 0.0;
  b.knee = b.max_throughput * (b.min_response + z);
  return b;
}

// ---------------------------------------------------------------------------
// Reporting

namespace {

void check_solution(const Network& network, const Solution& solution) {
  if (!solution.solved) throw UsageError("report requested for an unsolved network");
  if (solution.nodes.size() != network.nodes().size()) {
    throw UsageError("solution does not belong to this network");
  }
  for (std::size_t i = 0; i < solution.nodes.size(); ++i) {
    if (solution.nodes[i].name != network.nodes()[i].name) {
      throw UsageError("solution does not belong to this network");
    }
  }
}

std::string num(double v) { return textio::format_fixed(v, 4); }

}  // namespace

std::string report(const Network& network, const Solution& solution) {
  check_solution(network, solution);
  const auto& w = network.workload();
  const auto bounds = system_bounds(network);
  std::ostringstream out;
  const std::string rule(78, '=');
  const std::string thin(78, '-');

  auto line = [&](const std::string& label, const std::string& value) {
    out << "  " << std::left << std::setw(22) << label << ": " << std::right << std::setw(14)
        << value << '\n';
  };

  out << rule << '\n' << "                       QUEUEING MODEL REPORT\n" << rule << '\n';
  out << "Workload: " << w.name << " ("
      << (w.kind == WorkloadKind::Open ? "open" : "closed") << ")\n";
  if (w.kind == WorkloadKind::Open) {
    line("Arrival rate lambda", num(w.arrival_rate));
  } else {
    line("Population N", std::to_string(w.population));
    line("Think time Z", num(w.think_time));
  }
  line("Nodes", std::to_string(network.nodes().size()));
  out << "Method: " << to_string(solution.method) << '\n';
  out << thin << '\n';

  out << std::left << std::setw(14) << "Node" << std::setw(7) << "Kind" << std::right
      << std::setw(6) << "m" << std::setw(11) << "S" << std::setw(10) << "U" << std::setw(11)
      << "Q" << std::setw(10) << "W" << std::setw(11) << "R" << '\n';
  for (std::size_t i = 0; i < network.nodes().size(); ++i) {
    const auto& n = network.nodes()[i];
    const auto& nm = solution.nodes[i];
    out << std::left << std::setw(14) << n.name << std::setw(7)
        << (n.kind == NodeKind::Delay ? "delay" : "queue") << std::right << std::setw(6)
        << (n.kind == NodeKind::Delay ? std::string("-") : std::to_string(n.servers))
        << std::setw(11) << num(n.demand) << std::setw(10) << num(nm.utilization)
        << std::setw(11) << num(nm.queue_length) << std::setw(10) << num(nm.waiting_time)
        << std::setw(11) << num(nm.residence_time) << '\n';
  }
  out << thin << '\n' << "System\n";
  line("Throughput X", num(solution.throughput));
  line("Response time R", num(solution.response_time));
  line("Mean population", num(solution.mean_population));
  line("Xmax", num(bounds.max_throughput));
  line("Rmin", num(bounds.min_response));
  line("Nknee", num(bounds.knee));
  line("Bottleneck", bounds.bottleneck.empty() ? "-" : bounds.bottleneck);
  out << rule << '\n';
  return out.str();
}

void write_solution_kv(std::ostream& out, const Network& network, const Solution& solution) {
  check_solution(network, solution);
  const auto& w = network.workload();
  const auto bounds = system_bounds(network);
  using textio::write_kv;
  write_kv(out, "workload.name", w.name);
  write_kv(out, "workload.kind", w.kind == WorkloadKind::Open ? "open" : "closed");
  if (w.kind == WorkloadKind::Open) {
    write_kv(out, "workload.lambda", w.arrival_rate);
  } else {
    write_kv(out, "workload.N", static_cast<double>(w.population));
    write_kv(out, "workload.Z", w.think_time);
  }
  write_kv(out, "method", to_string(solution.method));
  write_kv(out, "system.X", solution.throughput);
  write_kv(out, "system.R", solution.response_time);
  write_kv(out, "system.N", solution.mean_population);
  write_kv(out, "system.Xmax", bounds.max_throughput);
  write_kv(out, "system.Rmin", bounds.min_response);
  write_kv(out, "system.Nknee", bounds.knee);
  write_kv(out, "system.bottleneck", bounds.bottleneck);
  for (std::size_t i = 0; i < network.nodes().size(); ++i) {
    const auto& n = network.nodes()[i];
    const auto& nm = solution.nodes[i];
    const std::string p = "node." + n.name + ".";
    write_kv(out, p + "kind", n.kind == NodeKind::Delay ? "delay" : "queue");
    write_kv(out, p + "m", static_cast<double>(n.servers));
    write_kv(out, p + "S", n.demand);
    write_kv(out, p + "U", nm.utilization);
    write_kv(out, p + "Q", nm.queue_length);
    write_kv(out, p + "W", nm.waiting_time);
    write_kv(out, p + "R", nm.residence_time);
    write_kv(out, p + "rho", nm.per_server_load);
  }
}

}  // namespace capplan::solver
