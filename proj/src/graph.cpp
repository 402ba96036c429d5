#include "pgm/graph.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <numeric>
#include <queue>
#include <sstream>

#include "pgm/error.hpp"

namespace pgm {

namespace {

const NodeSet& lookup(const std::map<std::string, NodeSet>& m, const std::string& v) {
  auto it = m.find(v);
  if (it == m.end()) fail(Errc::lookup, "unknown node '" + v + "'");
  return it->second;
}

}  // namespace

// ---------------------------------------------------------------------------
// DirectedGraph

DirectedGraph::DirectedGraph(const std::vector<std::string>& nodes,
                             const std::vector<std::pair<std::string, std::string>>& edges) {
  for (const auto& v : nodes) add_node(v);
  for (const auto& [a, b] : edges) add_edge(a, b);
}

void DirectedGraph::add_node(const std::string& v) {
  if (contains(v)) return;
  nodes_.push_back(v);
  parents_[v];
  children_[v];
}

void DirectedGraph::add_edge(const std::string& parent, const std::string& child) {
  if (parent == child) fail(Errc::argument, "self-loop on '" + parent + "'");
  add_node(parent);
  add_node(child);
  if (!children_[parent].insert(child).second)
    fail(Errc::argument, "duplicate edge " + parent + " -> " + child);
  parents_[child].insert(parent);
}

void DirectedGraph::remove_edge(const std::string& parent, const std::string& child) {
  if (!has_edge(parent, child)) fail(Errc::lookup, "no edge " + parent + " -> " + child);
  children_[parent].erase(child);
  parents_[child].erase(parent);
}

bool DirectedGraph::has_edge(const std::string& parent, const std::string& child) const {
  auto it = children_.find(parent);
  return it != children_.end() && it->second.count(child) > 0;
}

std::vector<std::pair<std::string, std::string>> DirectedGraph::edges() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& v : nodes_)
    for (const auto& c : children_.at(v)) out.emplace_back(v, c);
  return out;
}

std::size_t DirectedGraph::edge_count() const {
  std::size_t n = 0;
  for (const auto& [v, cs] : children_) n += cs.size();
  return n;
}

const NodeSet& DirectedGraph::parents(const std::string& v) const { return lookup(parents_, v); }
const NodeSet& DirectedGraph::children(const std::string& v) const { return lookup(children_, v); }

NodeSet DirectedGraph::ancestors(const std::string& v) const {
  NodeSet out;
  std::vector<std::string> stack(parents(v).begin(), parents(v).end());
  while (!stack.empty()) {
    auto u = stack.back();
    stack.pop_back();
    if (!out.insert(u).second) continue;
    for (const auto& p : parents_.at(u)) stack.push_back(p);
  }
  return out;
}

NodeSet DirectedGraph::descendants(const std::string& v) const {
  NodeSet out;
  std::vector<std::string> stack(children(v).begin(), children(v).end());
  while (!stack.empty()) {
    auto u = stack.back();
    stack.pop_back();
    if (!out.insert(u).second) continue;
    for (const auto& c : children_.at(u)) stack.push_back(c);
  }
  return out;
}

NodeSet DirectedGraph::spouses(const std::string& v) const {
  NodeSet out;
  for (const auto& c : children(v))
    for (const auto& p : parents_.at(c))
      if (p != v) out.insert(p);
  return out;
}

// ---------------------------------------------------------------------------
// UndirectedGraph

UndirectedGraph::UndirectedGraph(const std::vector<std::string>& nodes,
                                 const std::vector<std::pair<std::string, std::string>>& edges) {
  for (const auto& v : nodes) add_node(v);
  for (const auto& [a, b] : edges) add_edge(a, b);
}

void UndirectedGraph::add_node(const std::string& v) {
  if (contains(v)) return;
  nodes_.push_back(v);
  adj_[v];
}

void UndirectedGraph::add_edge(const std::string& a, const std::string& b) {
  if (a == b) fail(Errc::argument, "self-loop on '" + a + "'");
  add_node(a);
  add_node(b);
  adj_[a].insert(b);
  adj_[b].insert(a);
}

void UndirectedGraph::remove_edge(const std::string& a, const std::string& b) {
  if (!has_edge(a, b)) fail(Errc::lookup, "no edge " + a + " - " + b);
  adj_[a].erase(b);
  adj_[b].erase(a);
}

bool UndirectedGraph::has_edge(const std::string& a, const std::string& b) const {
  auto it = adj_.find(a);
  return it != adj_.end() && it->second.count(b) > 0;
}

const NodeSet& UndirectedGraph::neighbors(const std::string& v) const { return lookup(adj_, v); }

std::vector<std::pair<std::string, std::string>> UndirectedGraph::edges() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [v, ns] : adj_)
    for (const auto& u : ns)
      if (v < u) out.emplace_back(v, u);
  return out;
}

std::size_t UndirectedGraph::edge_count() const {
  std::size_t n = 0;
  for (const auto& [v, ns] : adj_) n += ns.size();
  return n / 2;
}

bool UndirectedGraph::is_clique(const NodeSet& s) const {
  for (auto a = s.begin(); a != s.end(); ++a)
    for (auto b = std::next(a); b != s.end(); ++b)
      if (!has_edge(*a, *b)) return false;
  return true;
}

bool UndirectedGraph::connected() const {
  if (nodes_.empty()) return true;
  NodeSet seen{nodes_.front()};
  std::vector<std::string> stack{nodes_.front()};
  while (!stack.empty()) {
    auto v = stack.back();
    stack.pop_back();
    for (const auto& u : adj_.at(v))
      if (seen.insert(u).second) stack.push_back(u);
  }
  return seen.size() == nodes_.size();
}

bool operator==(const UndirectedGraph& a, const UndirectedGraph& b) { return a.adj_ == b.adj_; }

// ---------------------------------------------------------------------------
// DAG structure

std::optional<std::vector<std::string>> find_cycle(const DirectedGraph& g) {
  enum Color { white, grey, black };
  std::map<std::string, Color> color;
  for (const auto& v : g.nodes()) color[v] = white;
  std::vector<std::string> path;
  std::optional<std::vector<std::string>> found;

  std::function<bool(const std::string&)> visit = [&](const std::string& v) {
    color[v] = grey;
    path.push_back(v);
    for (const auto& c : g.children(v)) {
      if (color[c] == grey) {
        auto start = std::find(path.begin(), path.end(), c);
        std::vector<std::string> cycle(start, path.end());
        cycle.push_back(c);
        found = cycle;
        return true;
      }
      if (color[c] == white && visit(c)) return true;
    }
    path.pop_back();
    color[v] = black;
    return false;
  };

  for (const auto& v : g.nodes())
    if (color[v] == white && visit(v)) return found;
  return std::nullopt;
}

void validate_dag(const DirectedGraph& g) {
  if (auto cycle = find_cycle(g)) {
    std::string text;
    for (std::size_t i = 0; i < cycle->size(); ++i) text += (i ? " -> " : "") + (*cycle)[i];
    fail(Errc::not_a_dag, "graph has a cycle: " + text);
  }
}

std::vector<std::string> topological_sort(const DirectedGraph& g) {
  validate_dag(g);
  std::map<std::string, std::size_t> indegree;
  std::priority_queue<std::string, std::vector<std::string>, std::greater<>> ready;
  for (const auto& v : g.nodes()) {
    indegree[v] = g.parents(v).size();
    if (indegree[v] == 0) ready.push(v);
  }
  std::vector<std::string> order;
  while (!ready.empty()) {
    auto v = ready.top();
    ready.pop();
    order.push_back(v);
    for (const auto& c : g.children(v))
      if (--indegree[c] == 0) ready.push(c);
  }
  return order;
}

UndirectedGraph skeleton(const DirectedGraph& g) {
  UndirectedGraph out(g.nodes());
  for (const auto& [a, b] : g.edges()) out.add_edge(a, b);
  return out;
}

UndirectedGraph moralize(const DirectedGraph& g) {
  validate_dag(g);
  auto out = skeleton(g);
  for (const auto& v : g.nodes()) {
    const auto& ps = g.parents(v);
    for (auto a = ps.begin(); a != ps.end(); ++a)
      for (auto b = std::next(a); b != ps.end(); ++b) out.add_edge(*a, *b);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Chordal graphs and cliques

Triangulation triangulate(const UndirectedGraph& g, const std::vector<std::string>& ordering) {
  NodeSet given(ordering.begin(), ordering.end());
  if (given.size() != ordering.size() || given.size() != g.nodes().size())
    fail(Errc::ordering, "elimination ordering must be a permutation of the graph's nodes");
  for (const auto& v : ordering)
    if (!g.contains(v)) fail(Errc::ordering, "ordering names unknown node '" + v + "'");

  Triangulation out{g, {}};
  UndirectedGraph work = g;
  NodeSet eliminated;
  for (const auto& v : ordering) {
    NodeSet clique{v};
    for (const auto& u : work.neighbors(v))
      if (!eliminated.count(u)) clique.insert(u);
    for (auto a = clique.begin(); a != clique.end(); ++a)
      for (auto b = std::next(a); b != clique.end(); ++b) {
        work.add_edge(*a, *b);
        out.chordal.add_edge(*a, *b);
      }
    eliminated.insert(v);
    out.elim_cliques.push_back(std::move(clique));
  }
  return out;
}

bool is_chordal(const UndirectedGraph& g) {
  // Maximum cardinality search; the reverse visit order is a perfect elimination
  // ordering exactly when the graph is chordal.
  const auto& nodes = g.nodes();
  std::map<std::string, int> weight;
  for (const auto& v : nodes) weight[v] = 0;
  std::vector<std::string> visit;
  NodeSet done;
  while (visit.size() < nodes.size()) {
    std::string best;
    int best_w = -1;
    for (const auto& v : nodes)
      if (!done.count(v) && weight[v] > best_w) best = v, best_w = weight[v];
    visit.push_back(best);
    done.insert(best);
    for (const auto& u : g.neighbors(best))
      if (!done.count(u)) ++weight[u];
  }
  std::map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < visit.size(); ++i) pos[visit[i]] = i;
  for (const auto& v : visit) {
    NodeSet earlier;
    for (const auto& u : g.neighbors(v))
      if (pos[u] < pos[v]) earlier.insert(u);
    if (!g.is_clique(earlier)) return false;
  }
  return true;
}

std::vector<NodeSet> max_cliques(const UndirectedGraph& chordal, const std::vector<NodeSet>& elim_cliques) {
  std::vector<NodeSet> out;
  for (std::size_t i = 0; i < elim_cliques.size(); ++i) {
    const auto& c = elim_cliques[i];
    if (!chordal.is_clique(c)) fail(Errc::internal, "elimination set is not a clique of the chordal graph");
    bool dominated = false;
    for (std::size_t j = 0; j < elim_cliques.size() && !dominated; ++j) {
      if (i == j) continue;
      const auto& d = elim_cliques[j];
      const bool subset = std::includes(d.begin(), d.end(), c.begin(), c.end());
      // Keep the first of identical sets.
      if (subset && (d.size() > c.size() || j < i)) dominated = true;
    }
    if (!dominated) out.push_back(c);
  }
  return out;
}

std::vector<NodeSet> enumerate_maximal_cliques(const UndirectedGraph& g) {
  std::vector<NodeSet> out;
  std::function<void(NodeSet, NodeSet, NodeSet)> expand = [&](NodeSet r, NodeSet p, NodeSet x) {
    if (p.empty() && x.empty()) {
      out.push_back(r);
      return;
    }
    std::string pivot;
    std::size_t best = 0;
    bool have = false;
    for (const auto* s : {&p, &x})
      for (const auto& u : *s) {
        std::size_t k = 0;
        for (const auto& w : g.neighbors(u)) k += p.count(w);
        if (!have || k > best) pivot = u, best = k, have = true;
      }
    std::vector<std::string> candidates;
    for (const auto& v : p)
      if (!g.has_edge(pivot, v)) candidates.push_back(v);
    for (const auto& v : candidates) {
      NodeSet r2 = r, p2, x2;
      r2.insert(v);
      for (const auto& w : g.neighbors(v)) {
        if (p.count(w)) p2.insert(w);
        if (x.count(w)) x2.insert(w);
      }
      expand(r2, p2, x2);
      p.erase(v);
      x.insert(v);
    }
  };
  expand({}, NodeSet(g.nodes().begin(), g.nodes().end()), {});
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// Independence structure

NodeSet d_connected_nodes(const DirectedGraph& g, const NodeSet& x, const NodeSet& z) {
  for (const auto* s : {&x, &z})
    for (const auto& v : *s)
      if (!g.contains(v)) fail(Errc::lookup, "unknown node '" + v + "'");

  // Nodes with a descendant in z (z included) make colliders active.
  NodeSet z_anc = z;
  for (const auto& v : z) {
    auto a = g.ancestors(v);
    z_anc.insert(a.begin(), a.end());
  }

  // up = arrived from a child, down = arrived from a parent.
  enum Dir { up, down };
  std::set<std::pair<std::string, Dir>> visited;
  std::deque<std::pair<std::string, Dir>> queue;
  for (const auto& v : x) queue.emplace_back(v, up);
  NodeSet reached;
  while (!queue.empty()) {
    auto [v, dir] = queue.front();
    queue.pop_front();
    if (!visited.insert({v, dir}).second) continue;
    const bool observed = z.count(v) > 0;
    if (!observed) reached.insert(v);
    if (dir == up && !observed) {
      for (const auto& p : g.parents(v)) queue.emplace_back(p, up);
      for (const auto& c : g.children(v)) queue.emplace_back(c, down);
    } else if (dir == down) {
      if (!observed)
        for (const auto& c : g.children(v)) queue.emplace_back(c, down);
      if (z_anc.count(v))
        for (const auto& p : g.parents(v)) queue.emplace_back(p, up);
    }
  }
  return reached;
}

bool d_separated(const DirectedGraph& g, const NodeSet& x, const NodeSet& y, const NodeSet& z) {
  auto overlap = [](const NodeSet& a, const NodeSet& b) {
    return std::any_of(a.begin(), a.end(), [&](const std::string& v) { return b.count(v) > 0; });
  };
  if (overlap(x, y) || overlap(x, z) || overlap(y, z))
    fail(Errc::argument, "d-separation query sets must be disjoint");
  for (const auto& v : y)
    if (!g.contains(v)) fail(Errc::lookup, "unknown node '" + v + "'");
  auto reached = d_connected_nodes(g, x, z);
  return !overlap(reached, y);
}

NodeSet markov_blanket(const DirectedGraph& g, const std::string& v) {
  NodeSet out = g.parents(v);
  const auto& ch = g.children(v);
  out.insert(ch.begin(), ch.end());
  auto sp = g.spouses(v);
  out.insert(sp.begin(), sp.end());
  return out;
}

NodeSet markov_blanket(const UndirectedGraph& g, const std::string& v) { return g.neighbors(v); }

// ---------------------------------------------------------------------------
// Trees

SpanningTree max_weight_spanning_tree(const UndirectedGraph& g, const EdgeWeights& weights) {
  struct Candidate {
    EdgeKey key;
    double w;
  };
  std::vector<Candidate> cands;
  for (const auto& [a, b] : g.edges()) {
    auto it = weights.find(edge_key(a, b));
    cands.push_back({edge_key(a, b), it == weights.end() ? 0.0 : it->second});
  }
  std::stable_sort(cands.begin(), cands.end(), [](const Candidate& l, const Candidate& r) {
    if (l.w != r.w) return l.w > r.w;
    return l.key < r.key;
  });

  std::map<std::string, std::string> parent;
  for (const auto& v : g.nodes()) parent[v] = v;
  std::function<std::string(const std::string&)> root = [&](const std::string& v) -> std::string {
    if (parent[v] == v) return v;
    return parent[v] = root(parent[v]);
  };

  SpanningTree out{UndirectedGraph(g.nodes()), 0.0, false};
  std::size_t added = 0;
  for (const auto& c : cands) {
    auto ra = root(c.key.first), rb = root(c.key.second);
    if (ra == rb) continue;
    parent[ra] = rb;
    out.tree.add_edge(c.key.first, c.key.second);
    out.total_weight += c.w;
    ++added;
  }
  out.disconnected = !g.nodes().empty() && added + 1 < g.nodes().size();
  return out;
}

DirectedGraph orient_tree(const UndirectedGraph& tree, const std::string& root) {
  if (!tree.contains(root)) fail(Errc::lookup, "unknown root '" + root + "'");
  DirectedGraph out(tree.nodes());
  NodeSet seen{root};
  std::deque<std::string> queue{root};
  while (!queue.empty()) {
    auto v = queue.front();
    queue.pop_front();
    for (const auto& u : tree.neighbors(v)) {
      if (seen.count(u)) continue;
      seen.insert(u);
      out.add_edge(v, u);
      queue.push_back(u);
    }
  }
  // Other components are rooted at their name-smallest node.
  for (const auto& v : tree.nodes()) {
    if (seen.count(v)) continue;
    seen.insert(v);
    queue.push_back(v);
    while (!queue.empty()) {
      auto w = queue.front();
      queue.pop_front();
      for (const auto& u : tree.neighbors(w)) {
        if (seen.count(u)) continue;
        seen.insert(u);
        out.add_edge(w, u);
        queue.push_back(u);
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Markov equivalence

MecSignature mec_signature(const DirectedGraph& g) {
  validate_dag(g);
  MecSignature sig{skeleton(g), {}};
  for (const auto& c : g.nodes()) {
    const auto& ps = g.parents(c);
    for (auto a = ps.begin(); a != ps.end(); ++a)
      for (auto b = std::next(a); b != ps.end(); ++b)
        if (!g.adjacent(*a, *b)) sig.v_structures.emplace(*a, c, *b);
  }
  return sig;
}

bool mec_equivalent(const DirectedGraph& g1, const DirectedGraph& g2) {
  auto s1 = mec_signature(g1);
  auto s2 = mec_signature(g2);
  return s1.skeleton == s2.skeleton && s1.v_structures == s2.v_structures;
}

// ---------------------------------------------------------------------------
// DOT export

namespace {

std::string quoted(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string to_dot(const DirectedGraph& g, const std::string& name) {
  std::ostringstream os;
  os << "digraph " << quoted(name) << " {\n";
  for (const auto& v : g.nodes()) os << "  " << quoted(v) << ";\n";
  for (const auto& [a, b] : g.edges()) os << "  " << quoted(a) << " -> " << quoted(b) << ";\n";
  os << "}\n";
  return os.str();
}

std::string to_dot(const UndirectedGraph& g, const std::string& name) {
  std::ostringstream os;
  os << "graph " << quoted(name) << " {\n";
  for (const auto& v : g.nodes()) os << "  " << quoted(v) << ";\n";
  for (const auto& [a, b] : g.edges()) os << "  " << quoted(a) << " -- " << quoted(b) << ";\n";
  os << "}\n";
  return os.str();
}

}  // namespace pgm
