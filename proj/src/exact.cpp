#include "pgm/exact.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <set>
#include <sstream>

namespace pgm {

namespace {

constexpr double neg_inf = -std::numeric_limits<double>::infinity();

using Adjacency = std::map<std::string, std::set<std::string>>;

Adjacency adjacency_of(const UndirectedGraph& g) {
  Adjacency adj;
  for (const auto& v : g.nodes()) adj[v] = g.neighbors(v);
  return adj;
}

/// Removes v from the working graph after connecting its neighbors; returns the elimination clique size.
std::size_t eliminate_node(Adjacency& adj, const std::string& v) {
  const auto nbrs = adj.at(v);
  for (const auto& a : nbrs) {
    adj[a].erase(v);
    for (const auto& b : nbrs)
      if (a != b) adj[a].insert(b);
  }
  adj.erase(v);
  return nbrs.size() + 1;
}

double heuristic_cost(const Adjacency& adj, const GraphicalModel& m, const std::string& v, OrderingHeuristic h) {
  const auto& nbrs = adj.at(v);
  switch (h) {
    case OrderingHeuristic::min_neighbors: return static_cast<double>(nbrs.size());
    case OrderingHeuristic::min_weight: {
      double w = 1.0;
      for (const auto& u : nbrs) w *= static_cast<double>(m.variable(u)->cardinality());
      return w;
    }
    case OrderingHeuristic::min_fill: {
      double fill = 0.0;
      for (auto a = nbrs.begin(); a != nbrs.end(); ++a)
        for (auto b = std::next(a); b != nbrs.end(); ++b)
          if (!adj.at(*a).count(*b)) fill += 1.0;
      return fill;
    }
    case OrderingHeuristic::given: break;
  }
  return 0.0;
}

}  // namespace

const char* heuristic_name(OrderingHeuristic h) {
  switch (h) {
    case OrderingHeuristic::given: return "given";
    case OrderingHeuristic::min_neighbors: return "min_neighbors";
    case OrderingHeuristic::min_weight: return "min_weight";
    case OrderingHeuristic::min_fill: return "min_fill";
  }
  return "?";
}

OrderingHeuristic parse_heuristic(const std::string& name) {
  for (auto h : {OrderingHeuristic::given, OrderingHeuristic::min_neighbors, OrderingHeuristic::min_weight,
                 OrderingHeuristic::min_fill})
    if (name == heuristic_name(h)) return h;
  fail(Errc::argument, "unknown ordering heuristic '" + name + "'");
}

EliminationOrdering choose_ordering(const GraphicalModel& m, OrderingHeuristic heuristic,
                                    const std::vector<std::string>& keep) {
  if (heuristic == OrderingHeuristic::given)
    fail(Errc::argument, "the 'given' heuristic needs an explicit order (use given_ordering)");
  for (const auto& k : keep) m.require_index(k);
  Adjacency adj = adjacency_of(interaction_graph(m));
  std::set<std::string> remaining;
  for (const auto& v : m.variables())
    if (std::find(keep.begin(), keep.end(), v->name()) == keep.end()) remaining.insert(v->name());

  EliminationOrdering out;
  out.heuristic = heuristic;
  while (!remaining.empty()) {
    std::string best;
    double best_cost = std::numeric_limits<double>::infinity();
    for (const auto& v : remaining) {
      const double c = heuristic_cost(adj, m, v, heuristic);
      if (c < best_cost) best = v, best_cost = c;
    }
    out.induced_width = std::max(out.induced_width, eliminate_node(adj, best) - 1);
    out.order.push_back(best);
    remaining.erase(best);
  }
  return out;
}

EliminationOrdering given_ordering(const GraphicalModel& m, const std::vector<std::string>& order) {
  std::set<std::string> seen;
  for (const auto& v : order) {
    if (!m.index_of(v)) fail(Errc::ordering, "ordering names unknown variable '" + v + "'");
    if (!seen.insert(v).second) fail(Errc::ordering, "ordering repeats '" + v + "'");
  }
  Adjacency adj = adjacency_of(interaction_graph(m));
  EliminationOrdering out{order, OrderingHeuristic::given, 0};
  for (const auto& v : order) out.induced_width = std::max(out.induced_width, eliminate_node(adj, v) - 1);
  return out;
}

// ---------------------------------------------------------------------------
// Variable elimination

namespace {

/// Per-semiring working representation: sum/max/or_and run on linear tables, min_sum on log scores.
struct VeAlgebra {
  SemiringKind kind;

  Factor prepare(const Factor& f) const {
    const Factor lin = f.to_linear();
    switch (kind) {
      case SemiringKind::min_sum: return Factor(lin.scope(), lin.values().log(), Domain::log);
      case SemiringKind::or_and:
        return Factor(lin.scope(), (lin.values() > 0.0).cast<double>(), Domain::linear);
      default: return lin;
    }
  }

  Factor unit(const std::vector<VarRef>& scope) const {
    return Factor::constant(scope, kind == SemiringKind::min_sum ? 0.0 : 1.0,
                            kind == SemiringKind::min_sum ? Domain::log : Domain::linear);
  }

  Factor combine(const Factor& a, const Factor& b) const {
    if (kind == SemiringKind::or_and) return pgm::combine(a, b, Semiring<double>::or_and());
    return product(a, b);
  }

  Semiring<double> aggregate() const {
    switch (kind) {
      case SemiringKind::sum_product: return Semiring<double>::sum_product();
      case SemiringKind::or_and: return Semiring<double>::or_and();
      default: return Semiring<double>::max_product();
    }
  }

  /// Rescales in place and returns the log of the scale removed.
  double rescale(Factor& f) const {
    switch (kind) {
      case SemiringKind::sum_product: {
        const double s = f.values().sum();
        if (!(s > 0.0)) fail(Errc::zero_evidence, "all probability mass eliminated (evidence has probability zero)");
        f = Factor(f.scope(), f.values() / s);
        return std::log(s);
      }
      case SemiringKind::max_product: {
        const double s = f.values().maxCoeff();
        if (!(s > 0.0)) fail(Errc::zero_evidence, "all probability mass eliminated (evidence has probability zero)");
        f = Factor(f.scope(), f.values() / s);
        return std::log(s);
      }
      case SemiringKind::min_sum: {
        const double s = f.values().maxCoeff();
        if (s == neg_inf) fail(Errc::zero_evidence, "every assignment has infinite energy");
        f = Factor(f.scope(), f.values() - s, Domain::log);
        return s;
      }
      case SemiringKind::or_and: return 0.0;
    }
    return 0.0;
  }
};

}  // namespace

EliminationResult variable_elimination(const GraphicalModel& m, const std::vector<std::string>& query,
                                       const IndexEvidence& evidence, const Semiring<double>& semiring,
                                       const std::optional<EliminationOrdering>& ordering) {
  check_evidence(m, evidence);
  std::set<std::string> qset;
  for (const auto& q : query) {
    m.require_index(q);
    if (!qset.insert(q).second) fail(Errc::argument, "query repeats '" + q + "'");
    if (evidence.count(q)) fail(Errc::argument, "variable '" + q + "' is both queried and observed");
  }

  std::vector<std::string> keep(query.begin(), query.end());
  for (const auto& [name, s] : evidence) keep.push_back(name);
  EliminationOrdering order = ordering ? *ordering : choose_ordering(m, OrderingHeuristic::min_fill, keep);
  {
    std::set<std::string> covered(order.order.begin(), order.order.end());
    for (const auto& v : order.order) {
      if (!m.index_of(v)) fail(Errc::ordering, "ordering names unknown variable '" + v + "'");
      if (qset.count(v)) fail(Errc::ordering, "ordering eliminates query variable '" + v + "'");
    }
    for (const auto& v : m.variables())
      if (!qset.count(v->name()) && !evidence.count(v->name()) && !covered.count(v->name()))
        fail(Errc::ordering, "ordering does not eliminate '" + v->name() + "'");
  }

  const VeAlgebra alg{semiring.kind};
  std::vector<Factor> pool;
  for (const auto& f : m.factors()) pool.push_back(alg.prepare(reduce(f.to_linear(), evidence)));

  EliminationResult out;
  out.ordering = order;
  for (const auto& v : order.order) {
    if (evidence.count(v)) continue;
    std::vector<Factor> bucket, rest;
    for (auto& f : pool) (f.contains(v) ? bucket : rest).push_back(std::move(f));
    pool = std::move(rest);
    if (bucket.empty()) {
      // A variable in no factor contributes a factor of card(v) to sums only.
      if (semiring.kind == SemiringKind::sum_product)
        out.log_normalizer += std::log(static_cast<double>(m.variable(v)->cardinality()));
      continue;
    }
    Factor prod = bucket.front();
    for (std::size_t i = 1; i < bucket.size(); ++i) prod = alg.combine(prod, bucket[i]);
    out.max_scope = std::max(out.max_scope, prod.arity());
    Factor tau = eliminate(prod, {v}, alg.aggregate());
    out.log_normalizer += alg.rescale(tau);
    pool.push_back(std::move(tau));
  }

  std::vector<VarRef> qscope;
  for (const auto& q : query) qscope.push_back(m.variable(q));
  Factor result = alg.unit(qscope);
  for (const auto& f : pool) result = alg.combine(result, f);
  result = reorder(result, query);
  out.log_normalizer += alg.rescale(result);
  if (semiring.kind == SemiringKind::min_sum) {
    // Report energies: E = -(log score - best), so the minimum is zero.
    Factor::Table energy = -result.values();
    out.factor = Factor(result.scope(), energy.unaryExpr([](double e) { return e == 0.0 ? 0.0 : e; }));
  } else {
    out.factor = std::move(result);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Tree belief propagation

namespace {

/// Bipartite tree traversal: nodes 0..n-1 variables, n.. factors.
struct TreeSchedule {
  std::size_t n_vars = 0;
  std::vector<std::vector<std::size_t>> adj;
  std::vector<std::size_t> parent;  // SIZE_MAX for roots
  std::vector<std::size_t> preorder;
  std::vector<std::size_t> roots;
  static constexpr std::size_t none = static_cast<std::size_t>(-1);

  bool is_var(std::size_t u) const { return u < n_vars; }
};

TreeSchedule make_schedule(const GraphicalModel& m, const std::vector<Factor>& factors) {
  if (!to_factor_graph(m).is_forest())
    fail(Errc::not_a_tree, "factor graph has a cycle; use the junction tree engine");
  TreeSchedule s;
  s.n_vars = m.variable_count();
  const std::size_t n = s.n_vars + factors.size();
  s.adj.assign(n, {});
  s.parent.assign(n, TreeSchedule::none);
  for (std::size_t j = 0; j < factors.size(); ++j)
    for (const auto& v : factors[j].scope()) {
      const auto i = m.require_index(v->name());
      s.adj[i].push_back(s.n_vars + j);
      s.adj[s.n_vars + j].push_back(i);
    }
  std::vector<bool> seen(n, false);
  auto walk = [&](std::size_t root) {
    s.roots.push_back(root);
    std::vector<std::size_t> stack{root};
    seen[root] = true;
    while (!stack.empty()) {
      const auto u = stack.back();
      stack.pop_back();
      s.preorder.push_back(u);
      for (auto it = s.adj[u].rbegin(); it != s.adj[u].rend(); ++it)
        if (!seen[*it]) {
          seen[*it] = true;
          s.parent[*it] = u;
          stack.push_back(*it);
        }
    }
  };
  for (std::size_t i = 0; i < n; ++i)
    if (!seen[i]) walk(i);
  return s;
}

struct Normalizer {
  SemiringKind kind;
  double operator()(Factor& f) const {
    const double s = kind == SemiringKind::max_product ? f.values().maxCoeff() : f.values().sum();
    if (!(s > 0.0)) fail(Errc::zero_evidence, "message vanished (evidence has probability zero)");
    f = Factor(f.scope(), f.values() / s);
    return std::log(s);
  }
};

}  // namespace

TreeBpResult tree_bp(const GraphicalModel& m, const IndexEvidence& evidence, const Semiring<double>& semiring) {
  if (semiring.kind != SemiringKind::sum_product && semiring.kind != SemiringKind::max_product)
    fail(Errc::unsupported, "tree_bp supports sum_product and max_product");
  check_evidence(m, evidence);
  std::vector<Factor> factors;
  for (const auto& f : m.factors()) factors.push_back(mask(f.to_linear(), evidence));
  const TreeSchedule s = make_schedule(m, factors);
  const Normalizer norm{semiring.kind};
  const auto& vars = m.variables();
  auto unit = [&](std::size_t i) { return mask(Factor::ones({vars[i]}), evidence); };

  TreeBpResult out;
  auto& msgs = out.store.messages;

  auto incoming_product = [&](std::size_t u, std::size_t except, Factor start) {
    for (auto w : s.adj[u])
      if (w != except) start = product(start, msgs.at({w, u}));
    return start;
  };

  auto send = [&](std::size_t u, std::size_t w) {
    Factor msg;
    if (s.is_var(u)) {
      msg = incoming_product(u, w, unit(u));
    } else {
      Factor prod = incoming_product(u, w, factors[u - s.n_vars]);
      msg = marginalize_to(prod, {vars[w]->name()}, semiring);
    }
    const double c = norm(msg);
    msgs[{u, w}] = std::move(msg);
    ++out.store.passes;
    return c;
  };

  // Collect toward each root, accumulating the normalizers that make up Z.
  for (auto it = s.preorder.rbegin(); it != s.preorder.rend(); ++it)
    if (s.parent[*it] != TreeSchedule::none) out.log_partition += send(*it, s.parent[*it]);
  for (auto root : s.roots) {
    Factor belief = s.is_var(root) ? incoming_product(root, TreeSchedule::none, unit(root))
                                   : incoming_product(root, TreeSchedule::none, factors[root - s.n_vars]);
    const double z = semiring.kind == SemiringKind::max_product ? belief.values().maxCoeff() : belief.values().sum();
    if (!(z > 0.0)) fail(Errc::zero_evidence, "evidence has probability zero");
    out.log_partition += std::log(z);
  }
  // Distribute away from the roots.
  for (auto u : s.preorder)
    for (auto w : s.adj[u])
      if (s.parent[w] == u) send(u, w);

  for (std::size_t i = 0; i < s.n_vars; ++i) {
    Factor b = incoming_product(i, TreeSchedule::none, unit(i));
    norm(b);
    out.marginals.push_back(std::move(b));
  }
  for (std::size_t j = 0; j < factors.size(); ++j) {
    Factor b = incoming_product(s.n_vars + j, TreeSchedule::none, factors[j]);
    norm(b);
    out.factor_beliefs.push_back(std::move(b));
  }
  return out;
}

MapResult max_product_decode(const GraphicalModel& m, const IndexEvidence& evidence) {
  const auto bp = tree_bp(m, evidence, Semiring<double>::max_product());
  std::vector<Factor> factors;
  for (const auto& f : m.factors()) factors.push_back(mask(f.to_linear(), evidence));
  const TreeSchedule s = make_schedule(m, factors);
  const auto& vars = m.variables();
  const auto& msgs = bp.store.messages;

  Assignment x(m.variable_count(), -1);
  for (auto u : s.preorder) {
    const auto p = s.parent[u];
    if (s.is_var(u)) {
      if (p != TreeSchedule::none) continue;  // set by its parent factor
      Factor b = mask(Factor::ones({vars[u]}), evidence);
      for (auto w : s.adj[u]) b = product(b, msgs.at({w, u}));
      x[u] = static_cast<int>(argmax_index(b));
      continue;
    }
    // Factor node: choose its child variables given the parent variable (back-pointer step).
    Factor table = factors[u - s.n_vars];
    for (auto w : s.adj[u])
      if (w != p) table = product(table, msgs.at({w, u}));
    if (p != TreeSchedule::none) table = reduce(table, IndexEvidence{{vars[p]->name(), x[p]}});
    if (table.arity() == 0) continue;
    const auto best = table.unflatten(argmax_index(table));
    for (std::size_t k = 0; k < table.arity(); ++k) x[m.require_index(table.scope()[k]->name())] = best[k];
  }
  MapResult out{x, log_joint(m, x)};
  return out;
}

// ---------------------------------------------------------------------------
// Junction tree

std::vector<std::size_t> JunctionTree::neighbors(std::size_t c) const {
  std::vector<std::size_t> out;
  for (const auto& [a, b] : edges) {
    if (a == c) out.push_back(b);
    if (b == c) out.push_back(a);
  }
  return out;
}

std::vector<std::string> JunctionTree::clique_names(std::size_t c) const {
  std::vector<std::string> out;
  for (const auto& v : cliques[c]) out.push_back(v->name());
  return out;
}

namespace {

std::vector<std::string> names_of(const std::vector<VarRef>& vs) {
  std::vector<std::string> out;
  for (const auto& v : vs) out.push_back(v->name());
  return out;
}

bool scope_within(const std::vector<VarRef>& scope, const std::vector<VarRef>& clique) {
  for (const auto& v : scope)
    if (std::none_of(clique.begin(), clique.end(), [&](const VarRef& c) { return c->name() == v->name(); }))
      return false;
  return true;
}

std::vector<std::string> sorted_names(const std::vector<VarRef>& vs) {
  auto n = names_of(vs);
  std::sort(n.begin(), n.end());
  return n;
}

}  // namespace

JunctionTree build_junction_tree(const GraphicalModel& m, OrderingHeuristic heuristic) {
  JunctionTree jt;
  jt.variables = m.variables();
  const auto factors = m.factors();
  if (m.variable_count() == 0) return jt;

  const auto g = interaction_graph(m);
  const auto ordering = heuristic == OrderingHeuristic::given ? given_ordering(m, m.variable_names())
                                                              : choose_ordering(m, heuristic);
  const auto tri = triangulate(g, ordering.order);
  const auto maximal = max_cliques(tri.chordal, tri.elim_cliques);
  for (const auto& c : maximal) {
    std::vector<VarRef> clique;
    for (const auto& v : m.variables())
      if (c.count(v->name())) clique.push_back(v);
    jt.cliques.push_back(std::move(clique));
  }

  // Complete cluster graph weighted by sepset size; zero-weight edges are kept.
  const std::size_t k = jt.cliques.size();
  auto label = [](std::size_t i) { return "C" + std::to_string(i); };
  UndirectedGraph cluster;
  std::map<std::string, std::size_t> by_label;
  for (std::size_t i = 0; i < k; ++i) {
    cluster.add_node(label(i));
    by_label[label(i)] = i;
  }
  EdgeWeights w;
  auto sepset = [&](std::size_t i, std::size_t j) {
    std::vector<VarRef> s;
    for (const auto& v : jt.cliques[i])
      if (scope_within({v}, jt.cliques[j])) s.push_back(v);
    return s;
  };
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j) {
      cluster.add_edge(label(i), label(j));
      w[edge_key(label(i), label(j))] = static_cast<double>(sepset(i, j).size());
    }
  const auto tree = max_weight_spanning_tree(cluster, w);
  for (const auto& [a, b] : tree.tree.edges()) {
    auto i = by_label.at(a), j = by_label.at(b);
    if (i > j) std::swap(i, j);
    jt.edges.emplace_back(i, j);
  }
  std::sort(jt.edges.begin(), jt.edges.end());
  for (const auto& [i, j] : jt.edges) jt.sepsets.push_back(sepset(i, j));

  // Each factor goes to the containing clique whose sorted name list is smallest.
  jt.assigned.assign(k, {});
  for (std::size_t f = 0; f < factors.size(); ++f) {
    std::optional<std::size_t> best;
    for (std::size_t c = 0; c < k; ++c) {
      if (!scope_within(factors[f].scope(), jt.cliques[c])) continue;
      if (!best || sorted_names(jt.cliques[c]) < sorted_names(jt.cliques[*best])) best = c;
    }
    if (!best) fail(Errc::internal, "factor " + std::to_string(f) + " fits in no clique");
    jt.assigned[*best].push_back(f);
  }
  for (std::size_t c = 0; c < k; ++c) {
    Factor psi = Factor::ones(jt.cliques[c]);
    for (auto f : jt.assigned[c]) psi = product(psi, factors[f].to_linear());
    jt.potentials.push_back(std::move(psi));
  }

  if (!is_tree(jt) || !has_running_intersection(jt) || !has_family_preservation(jt, m))
    fail(Errc::internal, "junction tree construction violated a structural property");
  return jt;
}

bool is_tree(const JunctionTree& jt) {
  const std::size_t k = jt.cliques.size();
  if (k == 0) return jt.edges.empty();
  if (jt.edges.size() + 1 != k) return false;
  std::vector<bool> seen(k, false);
  std::vector<std::size_t> stack{0};
  seen[0] = true;
  std::size_t count = 1;
  while (!stack.empty()) {
    auto c = stack.back();
    stack.pop_back();
    for (auto d : jt.neighbors(c))
      if (!seen[d]) seen[d] = true, ++count, stack.push_back(d);
  }
  return count == k;
}

bool has_running_intersection(const JunctionTree& jt) {
  // In a tree, the cliques holding v form a subtree iff they span exactly (count - 1) tree edges.
  for (const auto& v : jt.variables) {
    std::set<std::size_t> holders;
    for (std::size_t c = 0; c < jt.cliques.size(); ++c)
      if (scope_within({v}, jt.cliques[c])) holders.insert(c);
    if (holders.empty()) continue;
    std::size_t inner = 0;
    for (const auto& [a, b] : jt.edges)
      if (holders.count(a) && holders.count(b)) ++inner;
    if (inner + 1 != holders.size()) return false;
  }
  return true;
}

bool has_family_preservation(const JunctionTree& jt, const GraphicalModel& m) {
  const auto factors = m.factors();
  for (const auto& f : factors) {
    bool ok = std::any_of(jt.cliques.begin(), jt.cliques.end(),
                          [&](const std::vector<VarRef>& c) { return scope_within(f.scope(), c); });
    if (!ok) return false;
  }
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < jt.assigned.size(); ++c)
    for (auto f : jt.assigned[c]) {
      if (f >= factors.size() || !scope_within(factors[f].scope(), jt.cliques[c])) return false;
      ++assigned;
    }
  return assigned == factors.size();
}

void jt_calibrate(JunctionTree& jt, const IndexEvidence& evidence, const Semiring<double>& semiring) {
  if (semiring.kind != SemiringKind::sum_product && semiring.kind != SemiringKind::max_product)
    fail(Errc::unsupported, "junction tree calibration supports sum_product and max_product");
  for (const auto& [name, s] : evidence) {
    auto it = std::find_if(jt.variables.begin(), jt.variables.end(),
                           [&](const VarRef& v) { return v->name() == name; });
    if (it == jt.variables.end()) fail(Errc::lookup, "unknown variable '" + name + "'");
    if (s < 0 || static_cast<std::size_t>(s) >= (*it)->cardinality())
      fail(Errc::evidence, "evidence state index out of range for '" + name + "'");
  }
  const std::size_t k = jt.cliques.size();
  const Normalizer norm{semiring.kind};
  std::vector<Factor> psi;
  for (const auto& p : jt.potentials) psi.push_back(mask(p, evidence));
  std::vector<std::vector<std::size_t>> nbrs(k);
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> edge_index;
  for (std::size_t e = 0; e < jt.edges.size(); ++e) {
    auto [a, b] = jt.edges[e];
    nbrs[a].push_back(b);
    nbrs[b].push_back(a);
    edge_index[{a, b}] = edge_index[{b, a}] = e;
  }

  jt.messages.clear();
  jt.passes = 0;
  std::map<std::pair<std::size_t, std::size_t>, double> scale;  // total log scale carried by each message

  auto send = [&](std::size_t i, std::size_t j) {
    Factor prod = psi[i];
    double carried = 0.0;
    for (auto n : nbrs[i])
      if (n != j) {
        prod = product(prod, jt.messages.at({n, i}));
        carried += scale.at({n, i});
      }
    Factor msg = marginalize_to(prod, names_of(jt.sepsets[edge_index.at({i, j})]), semiring);
    carried += norm(msg);
    jt.messages[{i, j}] = std::move(msg);
    scale[{i, j}] = carried;
    ++jt.passes;
  };

  std::vector<std::size_t> parent(k, static_cast<std::size_t>(-1)), order;
  std::vector<bool> seen(k, false);
  for (std::size_t r = 0; r < k; ++r) {
    if (seen[r]) continue;
    std::deque<std::size_t> queue{r};
    seen[r] = true;
    while (!queue.empty()) {
      auto c = queue.front();
      queue.pop_front();
      order.push_back(c);
      for (auto d : nbrs[c])
        if (!seen[d]) seen[d] = true, parent[d] = c, queue.push_back(d);
    }
  }
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if (parent[*it] != static_cast<std::size_t>(-1)) send(*it, parent[*it]);
  for (auto c : order)
    for (auto d : nbrs[c])
      if (parent[d] == c) send(c, d);

  jt.beliefs.clear();
  jt.log_scale.clear();
  for (std::size_t c = 0; c < k; ++c) {
    Factor b = psi[c];
    double carried = 0.0;
    for (auto n : nbrs[c]) {
      b = product(b, jt.messages.at({n, c}));
      carried += scale.at({n, c});
    }
    b = reorder(b, jt.clique_names(c));
    carried += norm(b);
    jt.beliefs.push_back(std::move(b));
    jt.log_scale.push_back(carried);
  }
  jt.semiring = semiring.kind;
  jt.evidence = evidence;
  jt.calibrated = true;
}

namespace {

std::size_t smallest_clique_with(const JunctionTree& jt, const std::vector<std::string>& vars) {
  std::optional<std::size_t> best;
  for (std::size_t c = 0; c < jt.cliques.size(); ++c) {
    const auto names = jt.clique_names(c);
    const bool all = std::all_of(vars.begin(), vars.end(), [&](const std::string& v) {
      return std::find(names.begin(), names.end(), v) != names.end();
    });
    if (all && (!best || jt.cliques[c].size() < jt.cliques[*best].size())) best = c;
  }
  if (!best) fail(Errc::unsupported, "no single clique contains the requested variables");
  return *best;
}

}  // namespace

Factor query_joint(const JunctionTree& jt, const std::vector<std::string>& vars) {
  if (!jt.calibrated) fail(Errc::state, "junction tree is not calibrated");
  for (const auto& v : vars)
    if (std::none_of(jt.variables.begin(), jt.variables.end(), [&](const VarRef& x) { return x->name() == v; }))
      fail(Errc::lookup, "unknown variable '" + v + "'");
  const auto c = smallest_clique_with(jt, vars);
  const auto sr = jt.semiring == SemiringKind::max_product ? Semiring<double>::max_product()
                                                           : Semiring<double>::sum_product();
  Factor f = reorder(marginalize_to(jt.beliefs[c], vars, sr), vars);
  return normalize(f).first;
}

Factor query(const JunctionTree& jt, const std::string& var) { return query_joint(jt, {var}); }

double log_partition(const JunctionTree& jt) {
  if (!jt.calibrated) fail(Errc::state, "junction tree is not calibrated");
  return jt.log_scale.empty() ? 0.0 : jt.log_scale.front();
}

Assignment jt_decode(const JunctionTree& jt) {
  if (!jt.calibrated || jt.semiring != SemiringKind::max_product)
    fail(Errc::state, "decoding needs a max-product calibrated junction tree");
  std::map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < jt.variables.size(); ++i) pos[jt.variables[i]->name()] = i;
  Assignment x(jt.variables.size(), 0);
  std::vector<bool> fixed(jt.variables.size(), false);
  std::vector<bool> seen(jt.cliques.size(), false);
  for (std::size_t r = 0; r < jt.cliques.size(); ++r) {
    if (seen[r]) continue;
    std::deque<std::size_t> queue{r};
    seen[r] = true;
    while (!queue.empty()) {
      auto c = queue.front();
      queue.pop_front();
      IndexEvidence known;
      for (const auto& v : jt.cliques[c])
        if (fixed[pos[v->name()]]) known[v->name()] = x[pos[v->name()]];
      Factor rest = reduce(jt.beliefs[c], known);
      if (rest.arity() > 0) {
        const auto best = rest.unflatten(argmax_index(rest));
        for (std::size_t i = 0; i < rest.arity(); ++i) {
          const auto p = pos[rest.scope()[i]->name()];
          x[p] = best[i];
          fixed[p] = true;
        }
      }
      for (auto d : jt.neighbors(c))
        if (!seen[d]) seen[d] = true, queue.push_back(d);
    }
  }
  return x;
}

MapResult jt_map(const GraphicalModel& m, const IndexEvidence& evidence) {
  auto jt = build_junction_tree(m);
  jt_calibrate(jt, evidence, Semiring<double>::max_product());
  auto x = jt_decode(jt);
  return {x, log_joint(m, x)};
}

std::string to_dot(const JunctionTree& jt, const std::string& name) {
  auto join = [](const std::vector<VarRef>& vs) {
    std::string s;
    for (std::size_t i = 0; i < vs.size(); ++i) s += (i ? "," : "") + vs[i]->name();
    return s;
  };
  std::ostringstream os;
  os << "graph \"" << name << "\" {\n";
  for (std::size_t c = 0; c < jt.cliques.size(); ++c)
    os << "  C" << c << " [shape=ellipse, label=\"" << join(jt.cliques[c]) << "\"];\n";
  for (std::size_t e = 0; e < jt.edges.size(); ++e) {
    os << "  S" << e << " [shape=box, label=\"" << join(jt.sepsets[e]) << "\"];\n";
    os << "  C" << jt.edges[e].first << " -- S" << e << ";\n";
    os << "  S" << e << " -- C" << jt.edges[e].second << ";\n";
  }
  os << "}\n";
  return os.str();
}

}  // namespace pgm
