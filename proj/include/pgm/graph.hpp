#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace pgm {

using NodeSet = std::set<std::string>;

/// Directed graph over named nodes. Node order is insertion order; neighbor sets are name-sorted.
/// Acyclicity is not enforced here (see validate_dag).
class DirectedGraph {
 public:
  DirectedGraph() = default;
  explicit DirectedGraph(const std::vector<std::string>& nodes,
                         const std::vector<std::pair<std::string, std::string>>& edges = {});

  void add_node(const std::string& v);
  /// Adds parent -> child, creating missing nodes. Self-loops and duplicates are rejected.
  void add_edge(const std::string& parent, const std::string& child);
  void remove_edge(const std::string& parent, const std::string& child);

  bool contains(const std::string& v) const { return parents_.count(v) > 0; }
  bool has_edge(const std::string& parent, const std::string& child) const;
  bool adjacent(const std::string& a, const std::string& b) const { return has_edge(a, b) || has_edge(b, a); }

  const std::vector<std::string>& nodes() const noexcept { return nodes_; }
  std::vector<std::pair<std::string, std::string>> edges() const;
  std::size_t edge_count() const;

  const NodeSet& parents(const std::string& v) const;
  const NodeSet& children(const std::string& v) const;
  NodeSet ancestors(const std::string& v) const;
  NodeSet descendants(const std::string& v) const;
  /// Other parents of v's children.
  NodeSet spouses(const std::string& v) const;

 private:
  std::vector<std::string> nodes_;
  std::map<std::string, NodeSet> parents_;
  std::map<std::string, NodeSet> children_;
};

/// Undirected simple graph over named nodes.
class UndirectedGraph {
 public:
  UndirectedGraph() = default;
  explicit UndirectedGraph(const std::vector<std::string>& nodes,
                           const std::vector<std::pair<std::string, std::string>>& edges = {});

  void add_node(const std::string& v);
  /// Idempotent; self-loops are rejected.
  void add_edge(const std::string& a, const std::string& b);
  void remove_edge(const std::string& a, const std::string& b);

  bool contains(const std::string& v) const { return adj_.count(v) > 0; }
  bool has_edge(const std::string& a, const std::string& b) const;
  const std::vector<std::string>& nodes() const noexcept { return nodes_; }
  const NodeSet& neighbors(const std::string& v) const;
  /// Each edge once, as (smaller name, larger name), sorted.
  std::vector<std::pair<std::string, std::string>> edges() const;
  std::size_t edge_count() const;
  bool is_clique(const NodeSet& s) const;
  bool connected() const;

  friend bool operator==(const UndirectedGraph& a, const UndirectedGraph& b);

 private:
  std::vector<std::string> nodes_;
  std::map<std::string, NodeSet> adj_;
};

/// One cycle (closed: first node repeated at the end) if g has any.
std::optional<std::vector<std::string>> find_cycle(const DirectedGraph& g);

/// Throws not_a_dag naming one cycle.
void validate_dag(const DirectedGraph& g);

/// Kahn's algorithm, always taking the name-smallest available node.
std::vector<std::string> topological_sort(const DirectedGraph& g);

UndirectedGraph skeleton(const DirectedGraph& g);
UndirectedGraph moralize(const DirectedGraph& g);

struct Triangulation {
  UndirectedGraph chordal;
  /// elim_cliques[i] = ordering[i] plus its neighbors not yet eliminated at step i.
  std::vector<NodeSet> elim_cliques;
};

Triangulation triangulate(const UndirectedGraph& g, const std::vector<std::string>& ordering);

/// Maximum cardinality search followed by a perfect-elimination check.
bool is_chordal(const UndirectedGraph& g);

/// Elimination cliques reduced to the maximal ones, first occurrence order.
std::vector<NodeSet> max_cliques(const UndirectedGraph& chordal, const std::vector<NodeSet>& elim_cliques);

/// All maximal cliques of an arbitrary graph (Bron-Kerbosch with pivoting), sorted.
std::vector<NodeSet> enumerate_maximal_cliques(const UndirectedGraph& g);

bool d_separated(const DirectedGraph& g, const NodeSet& x, const NodeSet& y, const NodeSet& z);

/// Nodes reachable from x through an active trail given z.
NodeSet d_connected_nodes(const DirectedGraph& g, const NodeSet& x, const NodeSet& z);

NodeSet markov_blanket(const DirectedGraph& g, const std::string& v);
NodeSet markov_blanket(const UndirectedGraph& g, const std::string& v);

using EdgeKey = std::pair<std::string, std::string>;
/// Unordered edge key with the name-smaller endpoint first.
inline EdgeKey edge_key(const std::string& a, const std::string& b) { return a < b ? EdgeKey{a, b} : EdgeKey{b, a}; }
using EdgeWeights = std::map<EdgeKey, double>;

struct SpanningTree {
  UndirectedGraph tree;
  double total_weight = 0.0;
  bool disconnected = false;
};

/// Kruskal over g's edges, heaviest first, ties by edge key. Missing weights count as 0.
SpanningTree max_weight_spanning_tree(const UndirectedGraph& g, const EdgeWeights& weights);

/// Orients a tree away from root (breadth-first, children visited by name).
DirectedGraph orient_tree(const UndirectedGraph& tree, const std::string& root);

struct MecSignature {
  UndirectedGraph skeleton;
  /// (a, c, b) with a -> c <- b, a < b, a and b non-adjacent.
  std::set<std::tuple<std::string, std::string, std::string>> v_structures;
};

MecSignature mec_signature(const DirectedGraph& g);
bool mec_equivalent(const DirectedGraph& g1, const DirectedGraph& g2);

std::string to_dot(const DirectedGraph& g, const std::string& name = "G");
std::string to_dot(const UndirectedGraph& g, const std::string& name = "G");

}  // namespace pgm
