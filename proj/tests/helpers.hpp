#ifndef DYNOGRAPH_TEST_HELPERS_HPP
#define DYNOGRAPH_TEST_HELPERS_HPP

#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dynograph/graph.hpp"
#include "dynograph/parser.hpp"
#include "dynograph/rng.hpp"
#include "dynograph/system.hpp"

namespace testutil {

inline dynograph::SystemSpec parse_ok(const std::string& source) {
  dynograph::ParseResult r = dynograph::parse_model(source);
  if (!r.ok()) {
    std::string msg = "parse failed:";
    for (const auto& d : r.diagnostics)
      msg += "\n  " + dynograph::format_diagnostic(d, "<test>");
    throw std::runtime_error(msg);
  }
  return *r.spec;
}

inline std::string read_fixture(const std::string& name) {
  std::ifstream in(std::string(DYNOGRAPH_FIXTURE_DIR) + "/" + name, std::ios::binary);
  if (!in) throw std::runtime_error("missing fixture " + name);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Exhaustive simple-path enumeration, kept independent of the BFS used by
// the graph queries so it can serve as their oracle.
class PathOracle {
 public:
  explicit PathOracle(const dynograph::InfluenceGraph& g) : g_(g) {}

  std::vector<std::vector<std::string>> all_paths(const std::string& from,
                                                  const std::string& to) const {
    std::vector<std::vector<std::string>> paths;
    std::vector<std::string> current{from};
    std::set<std::string> visited{from};
    dfs(from, to, current, visited, paths);
    return paths;
  }

  bool reaches(const std::string& from, const std::string& to) const {
    return !all_paths(from, to).empty();
  }

  bool blocks(const std::set<std::string>& blockers, const std::string& l,
              const std::string& k) const {
    for (const auto& path : all_paths(l, k)) {
      bool hit = false;
      for (const auto& n : path)
        if (blockers.count(n)) hit = true;
      if (!hit) return false;
    }
    return true;  // vacuous when no path exists
  }

  bool dynindep(const std::string& j, const std::string& k) const {
    if (reaches(j, k) || reaches(k, j)) return false;
    for (const auto& w : g_.nodes) {
      if (w == j || w == k) continue;
      if (reaches(w, j) && reaches(w, k)) return false;
    }
    return true;
  }

  bool scli_literal(const std::string& j, const std::string& k) const {
    if (g_.has_edge(j, k)) return false;
    for (const auto& d : g_.nodes) {
      if (d == j || d == k) continue;
      if (g_.has_edge(j, d) && g_.has_edge(d, k)) return false;
    }
    return true;
  }

 private:
  void dfs(const std::string& at, const std::string& to, std::vector<std::string>& current,
           std::set<std::string>& visited,
           std::vector<std::vector<std::string>>& paths) const {
    for (const auto& [a, b] : g_.edges) {
      if (a != at || visited.count(b)) continue;
      current.push_back(b);
      if (b == to) {
        paths.push_back(current);
      } else {
        visited.insert(b);
        dfs(b, to, current, visited, paths);
        visited.erase(b);
      }
      current.pop_back();
    }
  }

  const dynograph::InfluenceGraph& g_;
};

// Deterministic pseudo-random helper for generators.
class TestRng {
 public:
  explicit TestRng(std::uint64_t seed) : seed_(seed) {}
  double uniform() { return dynograph::rng::uniform01(next()); }
  int range(int lo, int hi) {  // inclusive
    return lo + static_cast<int>(next() % static_cast<std::uint64_t>(hi - lo + 1));
  }
  bool chance(double p) { return uniform() < p; }

 private:
  std::uint64_t next() { return dynograph::rng::mix64(seed_ += 0x9E3779B97F4A7C15ULL); }
  std::uint64_t seed_;
};

inline dynograph::InfluenceGraph random_graph(std::uint64_t seed) {
  TestRng rng(seed);
  const int n = rng.range(2, 8);
  std::vector<std::string> nodes;
  for (int i = 0; i < n; ++i) nodes.push_back("N" + std::to_string(i));
  const double p = 0.15 + 0.35 * rng.uniform();
  std::vector<std::pair<std::string, std::string>> edges;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j && rng.chance(p)) edges.emplace_back(nodes[i], nodes[j]);
  return dynograph::InfluenceGraph::make(nodes, edges);
}

}  // namespace testutil

#endif  // DYNOGRAPH_TEST_HELPERS_HPP
