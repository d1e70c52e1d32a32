#ifndef DYNOGRAPH_GRAPH_HPP
#define DYNOGRAPH_GRAPH_HPP

#include <cstddef>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dynograph/system.hpp"

namespace dynograph {

struct GraphError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Directed influence graph: vertices are state components (and exogenous
// input schedules, which appear as source nodes); an edge (j,k) records that
// j appears in k's drift. Cycles and mutual pairs are allowed; self-loops
// are not.
struct InfluenceGraph {
  std::vector<std::string> nodes;  // declaration order
  std::vector<std::pair<std::string, std::string>> edges;  // lex-sorted, unique

  // Sorts and dedups edges; rejects self-pairs and unknown endpoints.
  static InfluenceGraph make(std::vector<std::string> nodes,
                             std::vector<std::pair<std::string, std::string>> edges);

  bool has_node(const std::string& n) const;
  bool has_edge(const std::string& from, const std::string& to) const;
  int index_of(const std::string& n) const;  // -1 when absent
};

inline bool operator==(const InfluenceGraph& a, const InfluenceGraph& b) {
  return a.nodes == b.nodes && a.edges == b.edges;
}

enum class Relation {
  Wcli,
  DirectInfluence,
  ScliLiteral,
  Influence,
  IndirectInfluence,
  Blocks,
  DynamicalIndependence,
  NonInfluenced,
  Faithful,
  Instrumental
};

const char* to_string(Relation r);

struct QueryVerdict {
  Relation relation = Relation::Wcli;
  bool holds = false;
  std::vector<std::string> witness;  // path or node set justifying the verdict
  std::string note;
};

// Edge (j,k) iff j is in dependencies(spec, k); inputs referenced by a drift
// gain an edge into that component and never receive edges themselves.
// Requires validate(spec) to pass.
InfluenceGraph derive_graph(const SystemSpec& spec);

// j and k must be distinct declared nodes for the pairwise queries below.
QueryVerdict wcli(const InfluenceGraph& g, const std::string& j, const std::string& k);
QueryVerdict direct_influence(const InfluenceGraph& g, const std::string& j,
                              const std::string& k);

// Reachability over directed edges; witness is one shortest path.
QueryVerdict influence(const InfluenceGraph& g, const std::string& j, const std::string& k);

// Influence without direct influence.
QueryVerdict indirect_influence(const InfluenceGraph& g, const std::string& j,
                                const std::string& k);

// The literal two-hop reading: wcli(j,k) and no D with edges (j,D) and (D,k).
// Differs from path reachability on chains longer than two edges.
QueryVerdict scli_literal(const InfluenceGraph& g, const std::string& j,
                          const std::string& k);

// Every directed path l -> k meets `blockers`; vacuously true when no path
// exists. l and k may not belong to the blocker set.
QueryVerdict blocks(const InfluenceGraph& g, const std::set<std::string>& blockers,
                    const std::string& l, const std::string& k);

// No path either way and no common ancestor.
QueryVerdict dynamical_independence(const InfluenceGraph& g, const std::string& j,
                                    const std::string& k);

struct Lemma3Partition {
  std::vector<std::string> a;  // j and its ancestors
  std::vector<std::string> b;  // k and its ancestors
  std::vector<std::string> c;  // everything else
};

// Requires dynamical_independence(g, j, k); groups a and b are non-influenced.
Lemma3Partition lemma3_partition(const InfluenceGraph& g, const std::string& j,
                                 const std::string& k);

// No edge from outside the group into the group.
QueryVerdict non_influenced(const InfluenceGraph& g, const std::set<std::string>& group);

struct FaithfulnessFinding {
  std::string from, to;
  std::size_t smallIndex = 0, largeIndex = 0;
  // For unstable notes: whether the influence persists along a path in the
  // larger graph (direct became indirect) or disappears entirely.
  bool stillIndirect = false;
};

struct FaithfulnessReport {
  // Shared pair with an edge in the larger graph that is absent in the
  // smaller one: marginalization cancelled a direct influence.
  std::vector<FaithfulnessFinding> violations;
  // Reverse direction, reported as notes: an edge of the smaller graph that
  // the larger graph does not carry.
  std::vector<FaithfulnessFinding> unstable;
  bool consistent() const { return violations.empty(); }
};

// Graphs ordered small to large; node set of graph i must be contained in
// that of graph i+1.
FaithfulnessReport faithfulness_across(const std::vector<InfluenceGraph>& graphs);

// Lemma-5 style instrumental check: I non-influenced in the large system,
// I -> k direct in the small system, and j blocks the paths from I to k in
// the large system. The probabilistic assumptions are caveats in the note,
// not checked.
QueryVerdict instrumental_query(const InfluenceGraph& gSmall, const InfluenceGraph& gLarge,
                                const std::string& I, const std::string& j,
                                const std::string& k);

// Deterministic DOT: nodes in declaration order, edges lex-sorted, mutual
// pairs as two directed edges.
std::string export_dot(const InfluenceGraph& g);

nlohmann::ordered_json graph_to_json(const InfluenceGraph& g);

// Inverse of graph_to_json; accepts any object with "nodes" and "edges".
// Extra keys (edge annotations and the like) are ignored.
InfluenceGraph graph_from_json(const nlohmann::json& j);

// Semantic cross-check of syntactic dependence: evaluates k's drift at
// random state points with j perturbed both ways; true iff any pair differs
// by more than 1e-12 relative. Evaluation errors propagate.
bool numeric_dependence_probe(const SystemSpec& spec, const std::string& j,
                              const std::string& k, int probeCount, double perturbation);

}  // namespace dynograph

#endif  // DYNOGRAPH_GRAPH_HPP
