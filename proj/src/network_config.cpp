#include <istream>
#include <optional>

#include "capplan/error.hpp"
#include "capplan/solver.hpp"
#include "capplan/textio.hpp"

namespace capplan::solver {

namespace {

double number(const std::string& text, int line_no, const char* what) {
  const auto v = textio::parse_double(text);
  if (!v) {
    throw ConfigError("line " + std::to_string(line_no) + ": " + what + " '" + text +
                      "' is not a number");
  }
  return *v;
}

int integer(const std::string& text, int line_no, const char* what) {
  const auto v = textio::parse_int(text);
  if (!v || *v < 0 || *v > 100'000'000) {
    throw ConfigError("line " + std::to_string(line_no) + ": " + what + " '" + text +
                      "' is not a valid count");
  }
  return static_cast<int>(*v);
}

}  // namespace

Network parse_network_config(std::istream& in) {
  std::vector<Node> nodes;
  std::optional<Workload> workload;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    auto f = textio::split_fields(line, textio::Delimiter::Whitespace);
    if (f.empty()) continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";

    if (f[0] == "workload") f.erase(f.begin());
    if (!f.empty() && (f[0] == "open" || f[0] == "closed")) {
      if (workload) throw ConfigError(where + "second workload line");
      if (f[0] == "open") {
        if (f.size() < 2) throw ConfigError(where + "expected 'open <lambda> [name]'");
        workload = Workload::open(number(f[1], line_no, "arrival rate"),
                                  f.size() > 2 ? f[2] : "requests");
      } else {
        if (f.size() < 3) throw ConfigError(where + "expected 'closed <N> <Z> [name]'");
        workload = Workload::closed(integer(f[1], line_no, "population"),
                                    number(f[2], line_no, "think time"),
                                    f.size() > 3 ? f[3] : "requests");
      }
      continue;
    }

    if (!f.empty() && f[0] == "node") f.erase(f.begin());
    if (f.size() != 4) throw ConfigError(where + "expected '<name> <queue|delay> <m> <S>'");
    Node node;
    node.name = f[0];
    if (f[1] == "queue" || f[1] == "queueing") {
      node.kind = NodeKind::Queueing;
    } else if (f[1] == "delay") {
      node.kind = NodeKind::Delay;
    } else {
      throw ConfigError(where + "unknown node kind '" + f[1] + "'");
    }
    node.servers = integer(f[2], line_no, "server count");
    node.demand = number(f[3], line_no, "service demand");
    nodes.push_back(node);
  }
  if (!workload) {
    throw ConfigError("missing workload line: expected 'closed <N> <Z>' or 'open <lambda>'");
  }
  if (nodes.empty()) throw ConfigError("no node lines: expected '<name> <queue|delay> <m> <S>'");
  return Network::build(std::move(nodes), std::move(*workload));
}

}  // namespace capplan::solver
