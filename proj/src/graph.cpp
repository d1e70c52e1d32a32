#include "dynograph/graph.hpp"

#include <algorithm>
#include <deque>

#include "dynograph/rng.hpp"
#include "dynograph/validate.hpp"

namespace dynograph {

const char* to_string(Relation r) {
  switch (r) {
    case Relation::Wcli: return "wcli";
    case Relation::DirectInfluence: return "direct";
    case Relation::ScliLiteral: return "scli-literal";
    case Relation::Influence: return "influence";
    case Relation::IndirectInfluence: return "indirect";
    case Relation::Blocks: return "blocks";
    case Relation::DynamicalIndependence: return "dynindep";
    case Relation::NonInfluenced: return "noninfluenced";
    case Relation::Faithful: return "faithful";
    case Relation::Instrumental: return "instrumental";
  }
  return "?";
}

InfluenceGraph InfluenceGraph::make(
    std::vector<std::string> nodes,
    std::vector<std::pair<std::string, std::string>> edges) {
  InfluenceGraph g;
  g.nodes = std::move(nodes);
  for (const auto& [from, to] : edges) {
    if (from == to) throw GraphError("self-loop on '" + from + "' not allowed");
    if (std::find(g.nodes.begin(), g.nodes.end(), from) == g.nodes.end())
      throw GraphError("edge endpoint '" + from + "' is not a node");
    if (std::find(g.nodes.begin(), g.nodes.end(), to) == g.nodes.end())
      throw GraphError("edge endpoint '" + to + "' is not a node");
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  g.edges = std::move(edges);
  return g;
}

bool InfluenceGraph::has_node(const std::string& n) const {
  return std::find(nodes.begin(), nodes.end(), n) != nodes.end();
}

bool InfluenceGraph::has_edge(const std::string& from, const std::string& to) const {
  return std::binary_search(edges.begin(), edges.end(), std::make_pair(from, to));
}

int InfluenceGraph::index_of(const std::string& n) const {
  auto it = std::find(nodes.begin(), nodes.end(), n);
  return it == nodes.end() ? -1 : static_cast<int>(it - nodes.begin());
}

InfluenceGraph derive_graph(const SystemSpec& spec) {
  ValidationReport report = validate(spec);
  if (!report.ok())
    throw GraphError("cannot derive a graph from an invalid spec (" +
                     report.violations.front().message + ")");

  std::vector<std::string> nodes;
  for (const auto& c : spec.components) nodes.push_back(c.name);
  for (const auto& i : spec.inputs) nodes.push_back(i.name);

  std::vector<std::pair<std::string, std::string>> edges;
  for (const auto& c : spec.components) {
    for (const auto& j : dependencies(spec, c.name)) edges.emplace_back(j, c.name);
    for (const auto& j : input_dependencies(spec, c.name)) edges.emplace_back(j, c.name);
  }
  return InfluenceGraph::make(std::move(nodes), std::move(edges));
}

namespace {

void require_node(const InfluenceGraph& g, const std::string& n) {
  if (!g.has_node(n)) throw GraphError("unknown node '" + n + "'");
}

void require_pair(const InfluenceGraph& g, const std::string& j, const std::string& k) {
  require_node(g, j);
  require_node(g, k);
  if (j == k) throw GraphError("relation undefined on the diagonal (j = k)");
}

// BFS shortest path from -> to avoiding `excluded`; empty when unreachable.
std::vector<std::string> shortest_path(const InfluenceGraph& g, const std::string& from,
                                       const std::string& to,
                                       const std::set<std::string>& excluded = {}) {
  if (excluded.count(from) || excluded.count(to)) return {};
  std::deque<std::string> queue{from};
  std::unordered_map<std::string, std::string> parent{{from, ""}};
  while (!queue.empty()) {
    std::string u = queue.front();
    queue.pop_front();
    for (const auto& [a, b] : g.edges) {
      if (a != u || excluded.count(b) || parent.count(b)) continue;
      parent[b] = u;
      if (b == to) {
        std::vector<std::string> path{to};
        for (std::string n = u; !n.empty(); n = parent[n]) path.push_back(n);
        std::reverse(path.begin(), path.end());
        return path;
      }
      queue.push_back(b);
    }
  }
  return {};
}

bool reachable(const InfluenceGraph& g, const std::string& from, const std::string& to,
               const std::set<std::string>& excluded = {}) {
  return !shortest_path(g, from, to, excluded).empty();
}

}  // namespace

QueryVerdict direct_influence(const InfluenceGraph& g, const std::string& j,
                              const std::string& k) {
  require_pair(g, j, k);
  QueryVerdict v;
  v.relation = Relation::DirectInfluence;
  v.holds = g.has_edge(j, k);
  if (v.holds) v.witness = {j, k};
  return v;
}

QueryVerdict wcli(const InfluenceGraph& g, const std::string& j, const std::string& k) {
  QueryVerdict v = direct_influence(g, j, k);
  v.relation = Relation::Wcli;
  v.holds = !v.holds;
  return v;
}

QueryVerdict influence(const InfluenceGraph& g, const std::string& j, const std::string& k) {
  require_pair(g, j, k);
  QueryVerdict v;
  v.relation = Relation::Influence;
  v.witness = shortest_path(g, j, k);
  v.holds = !v.witness.empty();
  return v;
}

QueryVerdict indirect_influence(const InfluenceGraph& g, const std::string& j,
                                const std::string& k) {
  QueryVerdict v = influence(g, j, k);
  v.relation = Relation::IndirectInfluence;
  if (g.has_edge(j, k)) {
    v.holds = false;
    v.note = "influence is direct";
  }
  return v;
}

QueryVerdict scli_literal(const InfluenceGraph& g, const std::string& j,
                          const std::string& k) {
  require_pair(g, j, k);
  QueryVerdict v;
  v.relation = Relation::ScliLiteral;
  if (g.has_edge(j, k)) {
    v.holds = false;
    v.witness = {j, k};
    v.note = "direct influence";
    return v;
  }
  for (const auto& d : g.nodes) {
    if (d == j || d == k) continue;
    if (g.has_edge(j, d) && g.has_edge(d, k)) {
      v.holds = false;
      v.witness = {j, d, k};
      v.note = "two-hop chain through " + d;
      return v;
    }
  }
  v.holds = true;
  return v;
}

QueryVerdict blocks(const InfluenceGraph& g, const std::set<std::string>& blockers,
                    const std::string& l, const std::string& k) {
  require_pair(g, l, k);
  for (const auto& c : blockers) {
    require_node(g, c);
    if (c == l || c == k)
      throw GraphError("blocker set must not contain the queried endpoints");
  }
  QueryVerdict v;
  v.relation = Relation::Blocks;
  std::vector<std::string> open = shortest_path(g, l, k, blockers);
  if (open.empty()) {
    v.holds = true;
    if (!reachable(g, l, k)) v.note = "vacuous: no path from " + l + " to " + k;
  } else {
    v.holds = false;
    v.witness = std::move(open);  // a path missing every blocker
  }
  return v;
}

QueryVerdict dynamical_independence(const InfluenceGraph& g, const std::string& j,
                                    const std::string& k) {
  require_pair(g, j, k);
  QueryVerdict v;
  v.relation = Relation::DynamicalIndependence;
  std::vector<std::string> p = shortest_path(g, j, k);
  if (!p.empty()) {
    v.holds = false;
    v.witness = std::move(p);
    v.note = "path from " + j + " to " + k;
    return v;
  }
  p = shortest_path(g, k, j);
  if (!p.empty()) {
    v.holds = false;
    v.witness = std::move(p);
    v.note = "path from " + k + " to " + j;
    return v;
  }
  for (const auto& w : g.nodes) {
    if (w == j || w == k) continue;
    if (reachable(g, w, j) && reachable(g, w, k)) {
      v.holds = false;
      v.witness = {w};
      v.note = "common ancestor " + w;
      return v;
    }
  }
  v.holds = true;
  return v;
}

Lemma3Partition lemma3_partition(const InfluenceGraph& g, const std::string& j,
                                 const std::string& k) {
  if (!dynamical_independence(g, j, k).holds)
    throw GraphError("lemma3_partition requires dynamical independence of '" + j +
                     "' and '" + k + "'");
  Lemma3Partition part;
  for (const auto& n : g.nodes) {
    if (n == j || (n != k && reachable(g, n, j)))
      part.a.push_back(n);
    else if (n == k || reachable(g, n, k))
      part.b.push_back(n);
    else
      part.c.push_back(n);
  }
  return part;
}

QueryVerdict non_influenced(const InfluenceGraph& g, const std::set<std::string>& group) {
  for (const auto& n : group) require_node(g, n);
  QueryVerdict v;
  v.relation = Relation::NonInfluenced;
  for (const auto& [from, to] : g.edges) {
    if (group.count(to) && !group.count(from)) {
      v.holds = false;
      v.witness = {from, to};
      v.note = "edge into the group from " + from;
      return v;
    }
  }
  v.holds = true;
  return v;
}

FaithfulnessReport faithfulness_across(const std::vector<InfluenceGraph>& graphs) {
  for (size_t i = 0; i + 1 < graphs.size(); ++i)
    for (const auto& n : graphs[i].nodes)
      if (!graphs[i + 1].has_node(n))
        throw GraphError("node sets are not nested: '" + n + "' missing from graph " +
                         std::to_string(i + 1));

  FaithfulnessReport report;
  for (size_t s = 0; s < graphs.size(); ++s) {
    for (size_t l = s + 1; l < graphs.size(); ++l) {
      const InfluenceGraph& small = graphs[s];
      const InfluenceGraph& large = graphs[l];
      // Direct influence in the larger system must persist in the smaller.
      for (const auto& [from, to] : large.edges)
        if (small.has_node(from) && small.has_node(to) && !small.has_edge(from, to))
          report.violations.push_back({from, to, s, l, false});
      // Reverse direction: influence present in the smaller system that the
      // larger one no longer shows as direct.
      for (const auto& [from, to] : small.edges)
        if (!large.has_edge(from, to))
          report.unstable.push_back({from, to, s, l, reachable(large, from, to)});
    }
  }
  return report;
}

QueryVerdict instrumental_query(const InfluenceGraph& gSmall, const InfluenceGraph& gLarge,
                                const std::string& I, const std::string& j,
                                const std::string& k) {
  require_node(gSmall, I);
  require_node(gSmall, k);
  require_node(gLarge, I);
  require_node(gLarge, k);
  require_node(gLarge, j);
  if (j == I || j == k)
    throw GraphError("mediator must differ from the instrument and the outcome");

  QueryVerdict v;
  v.relation = Relation::Instrumental;
  v.note =
      "caveats: assumes a faithful probability, independent initial values and "
      "the uniqueness-in-law decomposition; these are not checked";

  QueryVerdict ni = non_influenced(gLarge, {I});
  if (!ni.holds) {
    v.holds = false;
    v.witness = ni.witness;
    v.note = "instrument is influenced in the large system; " + v.note;
    return v;
  }
  if (!gSmall.has_edge(I, k)) {
    v.holds = false;
    v.note = "no direct influence of " + I + " on " + k + " in the small system; " + v.note;
    return v;
  }
  QueryVerdict blk = blocks(gLarge, {j}, I, k);
  if (!blk.holds) {
    v.holds = false;
    v.witness = blk.witness;
    v.note = j + " does not block the paths from " + I + " to " + k + "; " + v.note;
    return v;
  }
  v.holds = true;
  v.witness = shortest_path(gLarge, I, k);
  v.note = "causal influence of " + j + " on " + k + " under the stated assumptions; " + v.note;
  return v;
}

std::string export_dot(const InfluenceGraph& g) {
  std::string out = "digraph influence {\n";
  for (const auto& n : g.nodes) out += "  " + n + ";\n";
  for (const auto& [from, to] : g.edges) out += "  " + from + " -> " + to + ";\n";
  out += "}\n";
  return out;
}

nlohmann::ordered_json graph_to_json(const InfluenceGraph& g) {
  nlohmann::ordered_json j;
  j["nodes"] = g.nodes;
  j["edges"] = nlohmann::ordered_json::array();
  for (const auto& [from, to] : g.edges)
    j["edges"].push_back(nlohmann::ordered_json::array({from, to}));
  return j;
}

InfluenceGraph graph_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("nodes") || !j.contains("edges"))
    throw GraphError("graph JSON needs 'nodes' and 'edges'");
  std::vector<std::string> nodes;
  for (const auto& n : j.at("nodes")) nodes.push_back(n.get<std::string>());
  std::vector<std::pair<std::string, std::string>> edges;
  for (const auto& e : j.at("edges")) {
    if (!e.is_array() || e.size() != 2)
      throw GraphError("each edge must be a [from, to] pair");
    edges.emplace_back(e[0].get<std::string>(), e[1].get<std::string>());
  }
  return InfluenceGraph::make(std::move(nodes), std::move(edges));
}

bool numeric_dependence_probe(const SystemSpec& spec, const std::string& j,
                              const std::string& k, int probeCount, double perturbation) {
  if (!validate(spec).ok()) throw PreconditionError("spec does not validate");
  const ComponentSpec* cj = spec.find_component(j);
  const ComponentSpec* ck = spec.find_component(k);
  if (!cj) throw UnknownNameError("unknown component '" + j + "'");
  if (!ck) throw UnknownNameError("unknown component '" + k + "'");

  NameIndex names = spec.name_index();
  CompiledExpr drift = CompiledExpr::compile(ck->drift, names);
  const int jSlot = names.comps.at(j);
  const size_t m = spec.components.size();

  std::vector<double> state(m), attrs(spec.attributes.size()), inputs(spec.inputs.size());
  for (size_t a = 0; a < spec.attributes.size(); ++a) attrs[a] = spec.attributes[a].mean;

  const std::uint64_t probeSeed = UINT64_C(0x6e756d70726f6265);  // fixed internal stream
  for (int p = 0; p < probeCount; ++p) {
    const double t = 10.0 * rng::uniform01(rng::key(probeSeed, {static_cast<std::uint64_t>(p), 0}));
    for (size_t c = 0; c < m; ++c) {
      std::uint64_t kc = rng::key(probeSeed, {static_cast<std::uint64_t>(p), 1 + c});
      if (spec.components[c].kind == ComponentKind::Counting)
        state[c] = static_cast<double>(kc % 3);  // small integer counts
      else
        state[c] = 4.0 * rng::uniform01(kc) - 2.0;
    }
    for (size_t i = 0; i < spec.inputs.size(); ++i)
      inputs[i] = spec.inputs[i].left_limit_at(t);

    const double base = state[jSlot];
    state[jSlot] = base + perturbation;
    const double up = drift.eval(t, state.data(), attrs.data(), inputs.data());
    state[jSlot] = base - perturbation;
    const double down = drift.eval(t, state.data(), attrs.data(), inputs.data());
    state[jSlot] = base;

    const double scale = std::max({1.0, std::abs(up), std::abs(down)});
    if (std::abs(up - down) > 1e-12 * scale) return true;
  }
  return false;
}

}  // namespace dynograph
