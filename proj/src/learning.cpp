#include "pgm/learning.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "pgm/exact.hpp"

namespace pgm {

// ---------------------------------------------------------------------------
// Dataset

Dataset::Dataset(std::vector<VarRef> variables, Eigen::MatrixXi rows)
    : variables_(std::move(variables)), rows_(std::move(rows)) {
  if (static_cast<std::size_t>(rows_.cols()) != variables_.size() && rows_.rows() > 0)
    fail(Errc::shape, "dataset has " + std::to_string(rows_.cols()) + " columns for " +
                          std::to_string(variables_.size()) + " variables");
  if (rows_.rows() == 0) rows_.resize(0, static_cast<Eigen::Index>(variables_.size()));
  for (Eigen::Index r = 0; r < rows_.rows(); ++r)
    for (Eigen::Index c = 0; c < rows_.cols(); ++c) {
      const int s = rows_(r, c);
      if (s < 0 || static_cast<std::size_t>(s) >= variables_[static_cast<std::size_t>(c)]->cardinality())
        fail(Errc::assignment, "row " + std::to_string(r) + " has invalid state " + std::to_string(s) + " for '" +
                                   variables_[static_cast<std::size_t>(c)]->name() + "'");
    }
}

Dataset::Dataset(std::vector<VarRef> variables, const std::vector<Assignment>& rows)
    : Dataset(variables, [&] {
        Eigen::MatrixXi m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(variables.size()));
        for (std::size_t r = 0; r < rows.size(); ++r) {
          if (rows[r].size() != variables.size()) fail(Errc::shape, "row " + std::to_string(r) + " has the wrong length");
          for (std::size_t c = 0; c < variables.size(); ++c)
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        }
        return m;
      }()) {}

Dataset Dataset::from_batch(const SampleBatch& batch) { return Dataset(batch.variables, batch.samples); }

std::size_t Dataset::column(const std::string& name) const {
  for (std::size_t i = 0; i < variables_.size(); ++i)
    if (variables_[i]->name() == name) return i;
  fail(Errc::lookup, "dataset has no variable '" + name + "'");
}

std::vector<std::string> Dataset::names() const {
  std::vector<std::string> out;
  for (const auto& v : variables_) out.push_back(v->name());
  return out;
}

std::size_t CountTable::total() const { return std::accumulate(counts.begin(), counts.end(), std::size_t(0)); }

Factor CountTable::as_factor() const {
  Factor::Table t(static_cast<Eigen::Index>(counts.size()));
  for (std::size_t i = 0; i < counts.size(); ++i) t[static_cast<Eigen::Index>(i)] = static_cast<double>(counts[i]);
  return Factor(scope, std::move(t));
}

CountTable counts(const Dataset& d, const std::vector<std::string>& scope) {
  CountTable out;
  std::vector<std::size_t> cols;
  std::size_t size = 1;
  for (const auto& name : scope) {
    cols.push_back(d.column(name));
    out.scope.push_back(d.variables()[cols.back()]);
    size *= out.scope.back()->cardinality();
  }
  out.counts.assign(size, 0);
  const auto& rows = d.rows();
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    std::size_t flat = 0;
    for (std::size_t k = 0; k < cols.size(); ++k)
      flat = flat * out.scope[k]->cardinality() + static_cast<std::size_t>(rows(r, static_cast<Eigen::Index>(cols[k])));
    ++out.counts[flat];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Parameter estimation

namespace {

std::vector<std::string> sorted_parents(const DirectedGraph& g, const std::string& child) {
  const auto& p = g.parents(child);
  return {p.begin(), p.end()};
}

std::vector<std::string> family_scope(const std::string& child, const std::vector<std::string>& parents) {
  std::vector<std::string> scope{child};
  scope.insert(scope.end(), parents.begin(), parents.end());
  return scope;
}

void require_rows(const Dataset& d) {
  if (d.size() == 0) fail(Errc::argument, "insufficient data: the dataset has no rows");
}

}  // namespace

MleResult mle_bn(const DirectedGraph& structure, const Dataset& d, double pseudocount) {
  validate_dag(structure);
  if (!(pseudocount >= 0.0) || !std::isfinite(pseudocount)) fail(Errc::argument, "pseudocount must be finite and nonnegative");
  MleResult out;
  for (const auto& v : d.variables())
    if (structure.contains(v->name())) out.model.add_variable(v);
  for (const auto& node : structure.nodes())
    if (!out.model.index_of(node)) fail(Errc::lookup, "dataset has no variable '" + node + "'");

  for (const auto& v : out.model.variables()) {
    const auto parents = sorted_parents(structure, v->name());
    const auto table = counts(d, family_scope(v->name(), parents));
    const std::size_t card = v->cardinality();
    const std::size_t n_parent = table.counts.size() / card;
    Factor::Table cpd(static_cast<Eigen::Index>(table.counts.size()));
    for (std::size_t p = 0; p < n_parent; ++p) {
      double n_p = 0.0;
      for (std::size_t c = 0; c < card; ++c) n_p += static_cast<double>(table.counts[c * n_parent + p]);
      const double denom = n_p + pseudocount * static_cast<double>(card);
      for (std::size_t c = 0; c < card; ++c) {
        const auto idx = static_cast<Eigen::Index>(c * n_parent + p);
        cpd[idx] = denom > 0.0 ? (static_cast<double>(table.counts[c * n_parent + p]) + pseudocount) / denom
                               : 1.0 / static_cast<double>(card);
      }
      if (denom == 0.0)
        out.warnings.push_back("parent configuration " + std::to_string(p) + " of '" + v->name() +
                               "' never occurs; using a uniform row");
    }
    out.model.set_cpd(Factor(table.scope, std::move(cpd)));
  }
  return out;
}

double log_likelihood(const BayesianNetwork& bn, const Dataset& d) {
  std::vector<std::size_t> cols;
  for (const auto& v : bn.variables()) cols.push_back(d.column(v->name()));
  double total = 0.0;
  Assignment x(cols.size());
  for (Eigen::Index r = 0; r < d.rows().rows(); ++r) {
    for (std::size_t k = 0; k < cols.size(); ++k) x[k] = d.rows()(r, static_cast<Eigen::Index>(cols[k]));
    total += log_joint(bn, x);
  }
  return total;
}

void DirichletParams::validate() const {
  if (alpha.size() < 2) fail(Errc::argument, "a Dirichlet needs at least two concentrations");
  for (double a : alpha)
    if (!(a > 0.0) || !std::isfinite(a)) fail(Errc::argument, "Dirichlet concentrations must be positive and finite");
}

std::vector<double> DirichletParams::mean() const {
  validate();
  const double total = std::accumulate(alpha.begin(), alpha.end(), 0.0);
  std::vector<double> out;
  for (double a : alpha) out.push_back(a / total);
  return out;
}

DirichletParams dirichlet_posterior(const DirichletParams& prior, const std::vector<double>& observed) {
  prior.validate();
  if (observed.size() != prior.alpha.size())
    fail(Errc::shape, "prior has " + std::to_string(prior.alpha.size()) + " categories but counts have " +
                          std::to_string(observed.size()));
  DirichletParams out = prior;
  for (std::size_t k = 0; k < observed.size(); ++k) {
    if (!(observed[k] >= 0.0)) fail(Errc::argument, "counts must be nonnegative");
    out.alpha[k] += observed[k];
  }
  return out;
}

DirichletParams dirichlet_posterior(const DirichletParams& prior, const CountTable& table) {
  std::vector<double> observed(table.counts.begin(), table.counts.end());
  return dirichlet_posterior(prior, observed);
}

std::vector<double> posterior_mean(const DirichletParams& p) { return p.mean(); }

// ---------------------------------------------------------------------------
// Structure scores

const char* score_name(ScoreKind k) {
  switch (k) {
    case ScoreKind::loglik: return "loglik";
    case ScoreKind::aic: return "aic";
    case ScoreKind::bic: return "bic";
    case ScoreKind::bd: return "bd";
  }
  return "?";
}

ScoreKind parse_score(const std::string& name) {
  for (auto k : {ScoreKind::loglik, ScoreKind::aic, ScoreKind::bic, ScoreKind::bd})
    if (name == score_name(k)) return k;
  fail(Errc::argument, "unknown score '" + name + "' (expected loglik, aic, bic or bd)");
}

std::size_t family_parameter_count(const Dataset& d, const std::string& child, const std::vector<std::string>& parents) {
  std::size_t n = d.variable(child)->cardinality() - 1;
  for (const auto& p : parents) n *= d.variable(p)->cardinality();
  return n;
}

std::size_t parameter_count(const DirectedGraph& g, const Dataset& d) {
  std::size_t total = 0;
  for (const auto& v : g.nodes()) total += family_parameter_count(d, v, sorted_parents(g, v));
  return total;
}

double family_score(const Dataset& d, const std::string& child, const std::vector<std::string>& parents, ScoreKind kind,
                    double bd_prior) {
  require_rows(d);
  const auto table = counts(d, family_scope(child, parents));
  const std::size_t card = d.variable(child)->cardinality();
  const std::size_t n_parent = table.counts.size() / card;
  if (kind == ScoreKind::bd) {
    if (!(bd_prior > 0.0)) fail(Errc::argument, "bd prior count must be positive");
    double s = 0.0;
    const double a_ij = bd_prior * static_cast<double>(card);
    for (std::size_t p = 0; p < n_parent; ++p) {
      double n_ij = 0.0;
      for (std::size_t c = 0; c < card; ++c) {
        const double n = static_cast<double>(table.counts[c * n_parent + p]);
        n_ij += n;
        s += std::lgamma(bd_prior + n) - std::lgamma(bd_prior);
      }
      s += std::lgamma(a_ij) - std::lgamma(a_ij + n_ij);
    }
    return s;
  }
  double ll = 0.0;
  for (std::size_t p = 0; p < n_parent; ++p) {
    double n_ij = 0.0;
    for (std::size_t c = 0; c < card; ++c) n_ij += static_cast<double>(table.counts[c * n_parent + p]);
    for (std::size_t c = 0; c < card; ++c) {
      const double n = static_cast<double>(table.counts[c * n_parent + p]);
      if (n > 0.0) ll += n * std::log(n / n_ij);
    }
  }
  const double params = static_cast<double>(family_parameter_count(d, child, parents));
  switch (kind) {
    case ScoreKind::aic: return ll - params;
    case ScoreKind::bic: return ll - 0.5 * std::log(static_cast<double>(d.size())) * params;
    default: return ll;
  }
}

double score(const DirectedGraph& g, const Dataset& d, ScoreKind kind, double bd_prior) {
  validate_dag(g);
  require_rows(d);
  double s = 0.0;
  for (const auto& v : g.nodes()) s += family_score(d, v, sorted_parents(g, v), kind, bd_prior);
  return s;
}

// ---------------------------------------------------------------------------
// Tree and score-based structure search

double mutual_information(const Dataset& d, const std::string& a, const std::string& b) {
  require_rows(d);
  const auto table = counts(d, {a, b});
  const std::size_t ca = table.scope[0]->cardinality(), cb = table.scope[1]->cardinality();
  const double n = static_cast<double>(d.size());
  std::vector<double> pa(ca, 0.0), pb(cb, 0.0);
  for (std::size_t i = 0; i < ca; ++i)
    for (std::size_t j = 0; j < cb; ++j) {
      const double p = static_cast<double>(table.counts[i * cb + j]) / n;
      pa[i] += p;
      pb[j] += p;
    }
  double mi = 0.0;
  for (std::size_t i = 0; i < ca; ++i)
    for (std::size_t j = 0; j < cb; ++j) {
      const double p = static_cast<double>(table.counts[i * cb + j]) / n;
      if (p > 0.0) mi += p * std::log(p / (pa[i] * pb[j]));
    }
  return std::max(0.0, mi);
}

DirectedGraph chow_liu_tree(const std::vector<std::string>& nodes, const EdgeWeights& weights, const std::string& root) {
  if (nodes.size() < 2) fail(Errc::argument, "Chow-Liu needs at least two variables");
  if (std::find(nodes.begin(), nodes.end(), root) == nodes.end()) fail(Errc::lookup, "root '" + root + "' is not a variable");
  UndirectedGraph complete;
  for (const auto& v : nodes) complete.add_node(v);
  for (std::size_t i = 0; i < nodes.size(); ++i)
    for (std::size_t j = i + 1; j < nodes.size(); ++j) complete.add_edge(nodes[i], nodes[j]);
  return orient_tree(max_weight_spanning_tree(complete, weights).tree, root);
}

ChowLiuResult chow_liu(const Dataset& d, const std::string& root, double pseudocount) {
  require_rows(d);
  ChowLiuResult out;
  const auto names = d.names();
  for (const auto& name : names) {
    const auto c = counts(d, {name});
    if (std::count_if(c.counts.begin(), c.counts.end(), [](std::size_t k) { return k > 0; }) <= 1)
      out.warnings.push_back("variable '" + name + "' is constant; its mutual information is 0");
  }
  for (std::size_t i = 0; i < names.size(); ++i)
    for (std::size_t j = i + 1; j < names.size(); ++j)
      out.weights[edge_key(names[i], names[j])] = mutual_information(d, names[i], names[j]);
  out.tree = chow_liu_tree(names, out.weights, root);
  for (const auto& [p, c] : out.tree.edges()) out.total_weight += out.weights.at(edge_key(p, c));
  out.model = mle_bn(out.tree, d, pseudocount).model;
  return out;
}

namespace {

class FamilyCache {
 public:
  FamilyCache(const Dataset& d, ScoreKind kind, double prior) : d_(d), kind_(kind), prior_(prior) {}
  double operator()(const std::string& child, const NodeSet& parents) {
    auto key = std::make_pair(child, parents);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    const double s = family_score(d_, child, {parents.begin(), parents.end()}, kind_, prior_);
    cache_.emplace(std::move(key), s);
    return s;
  }

 private:
  const Dataset& d_;
  ScoreKind kind_;
  double prior_;
  std::map<std::pair<std::string, NodeSet>, double> cache_;
};

double total_score(const DirectedGraph& g, FamilyCache& fs) {
  double s = 0.0;
  for (const auto& v : g.nodes()) s += fs(v, g.parents(v));
  return s;
}

HillClimbResult climb(DirectedGraph g, FamilyCache& fs, const HillClimbOptions& options) {
  const auto& nodes = g.nodes();
  HillClimbResult r;
  for (; r.moves < options.max_moves; ++r.moves) {
    enum class Move { none, add, remove, reverse };
    Move best = Move::none;
    std::string from, to;
    double best_delta = 1e-10;
    for (const auto& a : nodes)
      for (const auto& b : nodes) {
        if (a == b) continue;
        const auto& pb = g.parents(b);
        if (g.has_edge(a, b)) {
          NodeSet without = pb;
          without.erase(a);
          const double del = fs(b, without) - fs(b, pb);
          if (del > best_delta) best_delta = del, best = Move::remove, from = a, to = b;
          const auto& pa = g.parents(a);
          if (pa.size() >= options.max_in_degree) continue;
          g.remove_edge(a, b);
          const bool cycle = g.descendants(a).count(b) > 0;
          g.add_edge(a, b);
          if (cycle) continue;
          NodeSet with = pa;
          with.insert(b);
          const double rev = del + fs(a, with) - fs(a, pa);
          if (rev > best_delta) best_delta = rev, best = Move::reverse, from = a, to = b;
        } else if (!g.has_edge(b, a)) {
          if (pb.size() >= options.max_in_degree || g.descendants(b).count(a)) continue;
          NodeSet with = pb;
          with.insert(a);
          const double add = fs(b, with) - fs(b, pb);
          if (add > best_delta) best_delta = add, best = Move::add, from = a, to = b;
        }
      }
    if (best == Move::none) break;
    if (best == Move::add) g.add_edge(from, to);
    if (best == Move::remove) g.remove_edge(from, to);
    if (best == Move::reverse) {
      g.remove_edge(from, to);
      g.add_edge(to, from);
    }
  }
  r.score = total_score(g, fs);
  r.graph = std::move(g);
  return r;
}

}  // namespace

HillClimbResult hill_climb(const Dataset& d, const HillClimbOptions& options, RandomSource* rng) {
  require_rows(d);
  if (options.restarts > 0 && !rng) fail(Errc::argument, "hill-climbing restarts need a random source");
  FamilyCache fs(d, options.kind, options.bd_prior);
  DirectedGraph empty;
  for (const auto& name : d.names()) empty.add_node(name);
  HillClimbResult best = climb(empty, fs, options);
  for (std::size_t k = 0; k < options.restarts; ++k) {
    auto order = d.names();
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng->below(i)]);
    DirectedGraph start = empty;
    for (std::size_t j = 0; j < order.size(); ++j)
      for (std::size_t i = 0; i < j; ++i)
        if (start.parents(order[j]).size() < options.max_in_degree && rng->uniform() < 0.3)
          start.add_edge(order[i], order[j]);
    auto run = climb(start, fs, options);
    if (run.score > best.score + 1e-12) best = std::move(run);
  }
  return best;
}

// ---------------------------------------------------------------------------
// Constraint-based discovery

CiResult ci_test(const Dataset& d, const std::string& x, const std::string& y, const NodeSet& z, double alpha) {
  if (x == y) fail(Errc::argument, "ci_test needs two distinct variables");
  if (z.count(x) || z.count(y)) fail(Errc::argument, "conditioning set must exclude the tested pair");
  require_rows(d);
  std::vector<std::string> scope(z.begin(), z.end());
  scope.push_back(x);
  scope.push_back(y);
  const auto table = counts(d, scope);
  const std::size_t cx = d.variable(x)->cardinality(), cy = d.variable(y)->cardinality();
  const std::size_t cell = cx * cy;
  const std::size_t strata = table.counts.size() / cell;

  CiResult r;
  r.dof = (cx - 1) * (cy - 1) * strata;
  double g = 0.0;
  for (std::size_t s = 0; s < strata; ++s) {
    const std::size_t* o = table.counts.data() + s * cell;
    std::vector<double> rows(cx, 0.0), cols(cy, 0.0);
    double n = 0.0;
    for (std::size_t i = 0; i < cx; ++i)
      for (std::size_t j = 0; j < cy; ++j) {
        rows[i] += static_cast<double>(o[i * cy + j]);
        cols[j] += static_cast<double>(o[i * cy + j]);
        n += static_cast<double>(o[i * cy + j]);
      }
    if (n == 0.0) continue;
    for (std::size_t i = 0; i < cx; ++i)
      for (std::size_t j = 0; j < cy; ++j) {
        const double obs = static_cast<double>(o[i * cy + j]);
        if (obs > 0.0) g += 2.0 * obs * std::log(obs * n / (rows[i] * cols[j]));
      }
  }
  r.statistic = std::max(0.0, g);
  if (r.dof == 0) {
    r.warning = "zero degrees of freedom; reporting independence";
    return r;
  }
  r.p_value = boost::math::gamma_q(static_cast<double>(r.dof) / 2.0, r.statistic / 2.0);
  r.independent = r.p_value >= alpha;
  return r;
}

CiResult ci_test(const DirectedGraph& oracle, const std::string& x, const std::string& y, const NodeSet& z) {
  if (x == y) fail(Errc::argument, "ci_test needs two distinct variables");
  CiResult r;
  r.independent = d_separated(oracle, {x}, {y}, z);
  r.p_value = r.independent ? 1.0 : 0.0;
  return r;
}

CiTest data_ci_test(const Dataset& d, double alpha) {
  return [&d, alpha](const std::string& x, const std::string& y, const NodeSet& z) { return ci_test(d, x, y, z, alpha); };
}

CiTest oracle_ci_test(const DirectedGraph& g) {
  return [g](const std::string& x, const std::string& y, const NodeSet& z) { return ci_test(g, x, y, z); };
}

bool Cpdag::is_undirected(const std::string& a, const std::string& b) const {
  return skeleton.has_edge(a, b) && !is_directed(a, b) && !is_directed(b, a);
}

std::vector<EdgeKey> Cpdag::undirected_edges() const {
  std::vector<EdgeKey> out;
  for (const auto& [a, b] : skeleton.edges())
    if (is_undirected(a, b)) out.push_back(edge_key(a, b));
  return out;
}

std::string Cpdag::to_dot(const std::string& name) const {
  std::ostringstream os;
  os << "digraph \"" << name << "\" {\n";
  for (const auto& v : skeleton.nodes()) os << "  \"" << v << "\";\n";
  for (const auto& [t, h] : directed) os << "  \"" << t << "\" -> \"" << h << "\";\n";
  for (const auto& [a, b] : undirected_edges()) os << "  \"" << a << "\" -> \"" << b << "\" [dir=none];\n";
  os << "}\n";
  return os.str();
}

void apply_meek_rules(Cpdag& g) {
  const auto& nodes = g.skeleton.nodes();
  auto adjacent = [&](const std::string& a, const std::string& b) { return g.skeleton.has_edge(a, b); };
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& [p, q] : g.skeleton.edges())
      for (const auto& [u, v] : {std::pair{p, q}, std::pair{q, p}}) {
        if (!g.is_undirected(u, v) || g.conflicted.count(edge_key(u, v))) continue;
        bool orient = false;
        // Rule 1: a -> u - v with a, v non-adjacent.
        for (const auto& a : nodes)
          if (!orient && g.is_directed(a, u) && a != v && !adjacent(a, v)) orient = true;
        // Rule 2: u -> w -> v.
        for (const auto& w : nodes)
          if (!orient && g.is_directed(u, w) && g.is_directed(w, v)) orient = true;
        // Rule 3: u - c -> v and u - d -> v with c, d non-adjacent.
        for (const auto& c : nodes) {
          if (orient) break;
          if (!g.is_undirected(u, c) || !g.is_directed(c, v)) continue;
          for (const auto& d : nodes)
            if (d > c && g.is_undirected(u, d) && g.is_directed(d, v) && !adjacent(c, d)) {
              orient = true;
              break;
            }
        }
        // Rule 4: u - c -> d -> v with c, v non-adjacent and u adjacent to d.
        for (const auto& c : nodes) {
          if (orient) break;
          if (!g.is_undirected(u, c) || adjacent(c, v)) continue;
          for (const auto& d : nodes)
            if (g.is_directed(c, d) && g.is_directed(d, v) && adjacent(u, d)) {
              orient = true;
              break;
            }
        }
        if (orient) {
          g.directed.insert({u, v});
          changed = true;
        }
      }
  }
}

Cpdag cpdag_of(const DirectedGraph& dag) {
  validate_dag(dag);
  Cpdag out;
  const auto sig = mec_signature(dag);
  out.skeleton = sig.skeleton;
  for (const auto& [a, c, b] : sig.v_structures) {
    out.directed.insert({a, c});
    out.directed.insert({b, c});
  }
  apply_meek_rules(out);
  return out;
}

namespace {

/// Calls visit on every size-k subset of items (lexicographic); stops when visit returns true.
bool for_each_subset(const std::vector<std::string>& items, std::size_t k,
                     const std::function<bool(const NodeSet&)>& visit) {
  if (k > items.size()) return false;
  std::vector<std::size_t> idx(k);
  std::iota(idx.begin(), idx.end(), 0);
  while (true) {
    NodeSet s;
    for (auto i : idx) s.insert(items[i]);
    if (visit(s)) return true;
    std::size_t pos = k;
    while (pos > 0 && idx[pos - 1] == items.size() - k + pos - 1) --pos;
    if (pos == 0) return false;
    ++idx[pos - 1];
    for (std::size_t j = pos; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

}  // namespace

Cpdag pc(const CiTest& test, const std::vector<std::string>& variables, std::optional<std::size_t> max_conditioning) {
  Cpdag out;
  for (const auto& v : variables) out.skeleton.add_node(v);
  for (std::size_t i = 0; i < variables.size(); ++i)
    for (std::size_t j = i + 1; j < variables.size(); ++j) out.skeleton.add_edge(variables[i], variables[j]);

  for (std::size_t level = 0;; ++level) {
    if (max_conditioning && level > *max_conditioning) break;
    std::map<std::string, NodeSet> frozen;
    bool any = false;
    for (const auto& v : out.skeleton.nodes()) {
      frozen[v] = out.skeleton.neighbors(v);
      if (frozen[v].size() > level) any = true;
    }
    if (!any) break;
    for (const auto& [a, b] : out.skeleton.edges()) {
      for (const auto& [s, other] : {std::pair{a, b}, std::pair{b, a}}) {
        if (!out.skeleton.has_edge(a, b)) break;
        std::vector<std::string> candidates;
        for (const auto& c : frozen[s])
          if (c != other) candidates.push_back(c);
        for_each_subset(candidates, level, [&](const NodeSet& z) {
          if (!test(a, b, z).independent) return false;
          out.skeleton.remove_edge(a, b);
          out.sepsets[edge_key(a, b)] = z;
          return true;
        });
      }
    }
  }

  std::map<EdgeKey, std::set<std::pair<std::string, std::string>>> proposals;
  for (const auto& c : out.skeleton.nodes()) {
    const auto& nb = out.skeleton.neighbors(c);
    for (auto ia = nb.begin(); ia != nb.end(); ++ia)
      for (auto ib = std::next(ia); ib != nb.end(); ++ib) {
        if (out.skeleton.has_edge(*ia, *ib)) continue;
        auto sep = out.sepsets.find(edge_key(*ia, *ib));
        if (sep != out.sepsets.end() && sep->second.count(c)) continue;
        proposals[edge_key(*ia, c)].insert({*ia, c});
        proposals[edge_key(*ib, c)].insert({*ib, c});
      }
  }
  for (const auto& [key, dirs] : proposals) {
    if (dirs.size() == 1) {
      out.directed.insert(*dirs.begin());
    } else {
      out.conflicted.insert(key);
      out.conflicts.push_back(key.first + " - " + key.second + ": conflicting v-structure orientations; left undirected");
    }
  }
  apply_meek_rules(out);
  return out;
}

// ---------------------------------------------------------------------------
// Undirected and conditional models

namespace {

struct FamilyIndex {
  std::vector<std::vector<std::size_t>> cols;  ///< dataset column per factor scope position
  std::vector<std::vector<std::size_t>> cards;
};

FamilyIndex family_index(const MarkovRandomField& m, const Dataset& d) {
  FamilyIndex fi;
  for (const auto& f : m.factor_list()) {
    std::vector<std::size_t> cols, cards;
    for (const auto& v : f.scope()) {
      cols.push_back(d.column(v->name()));
      cards.push_back(v->cardinality());
    }
    fi.cols.push_back(std::move(cols));
    fi.cards.push_back(std::move(cards));
  }
  return fi;
}

std::size_t cell_of(const FamilyIndex& fi, std::size_t f, const Eigen::MatrixXi& rows, Eigen::Index r) {
  std::size_t flat = 0;
  for (std::size_t k = 0; k < fi.cols[f].size(); ++k)
    flat = flat * fi.cards[f][k] + static_cast<std::size_t>(rows(r, static_cast<Eigen::Index>(fi.cols[f][k])));
  return flat;
}

MrfParameters zeros_like(const MarkovRandomField& m) {
  MrfParameters out;
  for (const auto& f : m.factor_list()) out.push_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(f.size())));
  return out;
}

void check_theta(const MarkovRandomField& m, const MrfParameters& theta) {
  if (theta.size() != m.factor_list().size()) fail(Errc::shape, "one parameter vector per factor is required");
  for (std::size_t f = 0; f < theta.size(); ++f)
    if (static_cast<std::size_t>(theta[f].size()) != m.factor_list()[f].size())
      fail(Errc::shape, "parameter vector " + std::to_string(f) + " does not match its factor table");
}

double max_abs(const MrfParameters& v) {
  double m = 0.0;
  for (const auto& x : v)
    if (x.size()) m = std::max(m, x.cwiseAbs().maxCoeff());
  return m;
}

double squared_norm(const MrfParameters& v) {
  double s = 0.0;
  for (const auto& x : v) s += x.squaredNorm();
  return s;
}

template <class Objective>
MrfFitResult gradient_ascent(const MarkovRandomField& structure, const MrfFitOptions& options, Objective objective) {
  MrfFitResult r;
  r.theta = zeros_like(structure);
  for (r.iterations = 0; r.iterations < options.max_iterations; ++r.iterations) {
    auto [value, grad] = objective(r.theta);
    for (std::size_t f = 0; f < grad.size(); ++f) grad[f] -= options.l2 * r.theta[f];
    r.objective_trace.push_back(value - 0.5 * options.l2 * squared_norm(r.theta));
    r.gradient_norm = max_abs(grad);
    if (r.gradient_norm < options.tolerance) {
      r.converged = true;
      break;
    }
    for (std::size_t f = 0; f < grad.size(); ++f) r.theta[f] += options.learning_rate * grad[f];
  }
  r.model = with_parameters(structure, r.theta);
  return r;
}

}  // namespace

MrfParameters log_potentials(const MarkovRandomField& m) {
  MrfParameters out;
  for (const auto& f : m.factor_list()) out.push_back(f.to_log().values().matrix());
  return out;
}

MarkovRandomField with_parameters(const MarkovRandomField& structure, const MrfParameters& theta) {
  check_theta(structure, theta);
  MarkovRandomField m;
  for (const auto& v : structure.variables()) m.add_variable(v);
  for (std::size_t f = 0; f < theta.size(); ++f)
    m.add_factor(Factor(structure.factor_list()[f].scope(), Factor::Table(theta[f].array().exp())));
  return m;
}

MrfObjective mrf_log_likelihood(const MarkovRandomField& structure, const Dataset& d, const MrfParameters& theta) {
  require_rows(d);
  check_theta(structure, theta);
  const auto fi = family_index(structure, d);
  MrfObjective out;
  out.empirical_moments = zeros_like(structure);
  const double n = static_cast<double>(d.size());
  for (Eigen::Index r = 0; r < d.rows().rows(); ++r)
    for (std::size_t f = 0; f < theta.size(); ++f)
      out.empirical_moments[f][static_cast<Eigen::Index>(cell_of(fi, f, d.rows(), r))] += 1.0 / n;

  const auto model = with_parameters(structure, theta);
  auto jt = build_junction_tree(model);
  jt_calibrate(jt);
  out.value = -log_partition(jt);
  for (std::size_t f = 0; f < theta.size(); ++f) {
    const auto& scope = structure.factor_list()[f].scope_names();
    const Factor marginal = scope.empty() ? Factor::ones({}) : reorder(query_joint(jt, scope), scope);
    out.model_moments.push_back(marginal.values().matrix());
    out.gradient.push_back(out.empirical_moments[f] - out.model_moments[f]);
    out.value += theta[f].dot(out.empirical_moments[f]);
  }
  return out;
}

MrfFitResult fit_mrf(const MarkovRandomField& structure, const Dataset& d, const MrfFitOptions& options) {
  require_rows(d);
  MrfObjective last;
  auto r = gradient_ascent(structure, options, [&](const MrfParameters& theta) {
    last = mrf_log_likelihood(structure, d, theta);
    return std::pair{last.value, last.gradient};
  });
  const auto final_obj = mrf_log_likelihood(structure, d, r.theta);
  r.moment_mismatch = 0.0;
  for (std::size_t f = 0; f < r.theta.size(); ++f)
    if (r.theta[f].size())
      r.moment_mismatch = std::max(r.moment_mismatch, final_obj.gradient[f].cwiseAbs().maxCoeff());
  if (options.l2 == 0.0)
    for (std::size_t f = 0; f < r.theta.size(); ++f)
      if ((final_obj.empirical_moments[f].array() == 0.0).any())
        r.warnings.push_back("factor " + std::to_string(f) +
                             " has an unobserved cell; without L2 its parameter diverges to -infinity");
  return r;
}

PseudoLikelihood pseudo_likelihood(const MarkovRandomField& structure, const Dataset& d, const MrfParameters& theta) {
  require_rows(d);
  check_theta(structure, theta);
  const auto fi = family_index(structure, d);
  const auto& factors = structure.factor_list();
  const std::size_t nv = structure.variable_count();
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> touching(nv);  // (factor, scope position)
  for (std::size_t f = 0; f < factors.size(); ++f)
    for (std::size_t k = 0; k < factors[f].arity(); ++k)
      touching[structure.require_index(factors[f].scope()[k]->name())].push_back({f, k});
  std::vector<std::size_t> col(nv);
  for (std::size_t i = 0; i < nv; ++i) col[i] = d.column(structure.variables()[i]->name());

  PseudoLikelihood out;
  out.gradient = zeros_like(structure);
  const double n = static_cast<double>(d.size());
  const auto& rows = d.rows();
  std::vector<double> score;
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    for (std::size_t i = 0; i < nv; ++i) {
      const std::size_t card = structure.variables()[i]->cardinality();
      const int observed = rows(r, static_cast<Eigen::Index>(col[i]));
      // Cell of each touching factor at the observed row, and the stride of variable i in it.
      std::vector<std::size_t> base, stride;
      for (const auto& [f, k] : touching[i]) {
        const std::size_t cell = cell_of(fi, f, rows, r);
        std::size_t s = 1;
        for (std::size_t q = k + 1; q < fi.cards[f].size(); ++q) s *= fi.cards[f][q];
        base.push_back(cell - static_cast<std::size_t>(observed) * s);
        stride.push_back(s);
      }
      score.assign(card, 0.0);
      for (std::size_t s = 0; s < card; ++s)
        for (std::size_t t = 0; t < touching[i].size(); ++t)
          score[s] += theta[touching[i][t].first][static_cast<Eigen::Index>(base[t] + s * stride[t])];
      const double top = *std::max_element(score.begin(), score.end());
      double z = 0.0;
      for (double v : score) z += std::exp(v - top);
      const double log_z = top + std::log(z);
      out.value += (score[static_cast<std::size_t>(observed)] - log_z) / n;
      for (std::size_t t = 0; t < touching[i].size(); ++t) {
        auto& g = out.gradient[touching[i][t].first];
        g[static_cast<Eigen::Index>(base[t] + static_cast<std::size_t>(observed) * stride[t])] += 1.0 / n;
        for (std::size_t s = 0; s < card; ++s)
          g[static_cast<Eigen::Index>(base[t] + s * stride[t])] -= std::exp(score[s] - log_z) / n;
      }
    }
  }
  return out;
}

MrfFitResult fit_pseudo_likelihood(const MarkovRandomField& structure, const Dataset& d, const MrfFitOptions& options) {
  require_rows(d);
  auto r = gradient_ascent(structure, options, [&](const MrfParameters& theta) {
    auto pl = pseudo_likelihood(structure, d, theta);
    return std::pair{pl.value, pl.gradient};
  });
  r.moment_mismatch = std::numeric_limits<double>::quiet_NaN();
  return r;
}

CrfObjective crf_objective(const ChainCRF& crf, const std::vector<CrfExample>& data, const Eigen::VectorXd& w,
                           double l2) {
  const auto nf = static_cast<Eigen::Index>(crf.feature_count());
  if (w.size() != nf) fail(Errc::shape, "weight vector length mismatch");
  CrfObjective out;
  out.gradient = Eigen::VectorXd::Zero(nf);
  const std::size_t k = crf.label_count();
  for (const auto& ex : data) {
    if (ex.x.empty() || ex.x.size() != ex.y.size()) fail(Errc::shape, "each example needs one label per position");
    const Eigen::VectorXd observed = crf.feature_sum(ex.x, ex.y);
    if (!observed.allFinite()) fail(Errc::feature, "a feature function returned a non-finite value");
    const auto chain = crf.condition(ex.x, w);
    const auto bp = tree_bp(chain);
    out.value += w.dot(observed) - bp.log_partition;
    out.gradient += observed;
    for (std::size_t t = 0; t < ex.x.size(); ++t) {
      for (std::size_t y = 0; y < k; ++y)
        out.gradient -= bp.marginals[t][y] * crf.node_features(ex.x, t, static_cast<int>(y));
      if (t == 0) continue;
      const Factor& pair = bp.factor_beliefs[2 * t];
      for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = 0; b < k; ++b)
          out.gradient -= pair[a * k + b] * crf.edge_features(ex.x, t, static_cast<int>(a), static_cast<int>(b));
    }
  }
  out.value -= 0.5 * l2 * w.squaredNorm();
  out.gradient -= l2 * w;
  return out;
}

CrfFitResult fit_chain_crf(ChainCRF& crf, const std::vector<CrfExample>& data, const CrfFitOptions& options) {
  if (data.empty()) fail(Errc::argument, "insufficient data: no training sequences");
  Eigen::VectorXd w = crf.weights();
  if (w.size() != static_cast<Eigen::Index>(crf.feature_count()))
    w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(crf.feature_count()));
  CrfFitResult r;
  const double n = static_cast<double>(data.size());
  for (std::size_t step = 0; step < options.steps; ++step) {
    const auto obj = crf_objective(crf, data, w, options.l2);
    r.loss_trace.push_back(-obj.value);
    w += options.learning_rate * obj.gradient / n;
  }
  r.loss_trace.push_back(-crf_objective(crf, data, w, options.l2).value);
  crf.set_weights(w);
  r.weights = w;
  return r;
}

// ---------------------------------------------------------------------------
// Gaussian mixtures

void GmmParams::validate() const {
  const auto k = means.size();
  if (k == 0 || static_cast<std::size_t>(weights.size()) != k || covariances.size() != k)
    fail(Errc::argument, "mixture needs matching weights, means and covariances");
  if ((weights.array() < 0.0).any() || std::abs(weights.sum() - 1.0) > 1e-12)
    fail(Errc::argument, "mixture weights must lie on the simplex");
  for (std::size_t c = 0; c < k; ++c) {
    const auto& s = covariances[c];
    if (s.rows() != means[c].size() || s.cols() != means[c].size())
      fail(Errc::shape, "covariance " + std::to_string(c) + " does not match its mean");
    if (!s.isApprox(s.transpose(), 1e-12)) fail(Errc::argument, "covariance " + std::to_string(c) + " is not symmetric");
    if (s.llt().info() != Eigen::Success) fail(Errc::argument, "covariance " + std::to_string(c) + " is not positive definite");
  }
}

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

/// N × K matrix of log π_k + log N(x_n | μ_k, Σ_k).
Eigen::MatrixXd weighted_log_densities(const Eigen::MatrixXd& data, const GmmParams& p) {
  const auto n = data.rows();
  const auto dim = static_cast<double>(data.cols());
  Eigen::MatrixXd out(n, static_cast<Eigen::Index>(p.components()));
  for (std::size_t k = 0; k < p.components(); ++k) {
    const Eigen::LLT<Eigen::MatrixXd> llt(p.covariances[k]);
    if (llt.info() != Eigen::Success) fail(Errc::degenerate_distribution, "covariance is not positive definite");
    const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    const Eigen::MatrixXd centered = (data.rowwise() - p.means[k].transpose()).transpose();
    const Eigen::MatrixXd solved = llt.matrixL().solve(centered);
    const Eigen::VectorXd mahal = solved.colwise().squaredNorm().transpose();
    out.col(static_cast<Eigen::Index>(k)) =
        (std::log(p.weights[static_cast<Eigen::Index>(k)]) - 0.5 * (dim * kLog2Pi + log_det)) -
        0.5 * mahal.array();
  }
  return out;
}

/// Row-wise log-sum-exp; fills normalized responsibilities.
double e_step(const Eigen::MatrixXd& data, const GmmParams& p, Eigen::MatrixXd& resp) {
  resp = weighted_log_densities(data, p);
  double ll = 0.0;
  for (Eigen::Index r = 0; r < resp.rows(); ++r) {
    const double top = resp.row(r).maxCoeff();
    const double lse = top + std::log((resp.row(r).array() - top).exp().sum());
    resp.row(r) = (resp.row(r).array() - lse).unaryExpr([](double v) { return std::exp(v); });
    resp.row(r) /= resp.row(r).sum();
    ll += lse;
  }
  return ll;
}

GmmParams seed_kmeanspp(const Eigen::MatrixXd& data, std::size_t k, RandomSource& rng) {
  const auto n = static_cast<std::size_t>(data.rows());
  const auto dim = data.cols();
  GmmParams p;
  p.weights = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(k), 1.0 / static_cast<double>(k));
  p.means.push_back(data.row(static_cast<Eigen::Index>(rng.below(n))).transpose());
  std::vector<double> d2(n);
  while (p.means.size() < k) {
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& m : p.means) best = std::min(best, (data.row(static_cast<Eigen::Index>(i)).transpose() - m).squaredNorm());
      d2[i] = best;
    }
    const bool all_zero = std::all_of(d2.begin(), d2.end(), [](double v) { return v == 0.0; });
    const std::size_t pick = all_zero ? rng.below(n) : rng.categorical(d2);
    p.means.push_back(data.row(static_cast<Eigen::Index>(pick)).transpose());
  }
  p.covariances.assign(k, Eigen::MatrixXd::Identity(dim, dim));
  return p;
}

GmmResult em_run(const Eigen::MatrixXd& data, GmmParams p, const GmmOptions& options, RandomSource& rng,
                 const Eigen::MatrixXd& data_cov, double floor) {
  const auto n = data.rows();
  const auto dim = data.cols();
  const auto k = static_cast<Eigen::Index>(p.components());
  GmmResult r;
  bool reseeded = false;
  double ll = e_step(data, p, r.responsibilities);
  for (r.iterations = 0; r.iterations < options.max_iterations; ++r.iterations) {
    if (!r.loglik_trace.empty()) {
      const double prev = r.loglik_trace.back();
      if (!reseeded && ll < prev - 1e-8) ++r.monotonicity_violations;
      if (!reseeded && ll - prev < options.tolerance) {
        r.converged = true;
        break;
      }
    }
    r.loglik_trace.push_back(ll);
    reseeded = false;

    const Eigen::VectorXd nk = r.responsibilities.colwise().sum().transpose();
    for (Eigen::Index c = 0; c < k; ++c) {
      const auto cs = static_cast<std::size_t>(c);
      bool collapsed = !(nk[c] > 0.0);
      if (!collapsed) {
        const Eigen::VectorXd w = r.responsibilities.col(c);
        p.means[cs] = (data.transpose() * w) / nk[c];
        const Eigen::MatrixXd centered = data.rowwise() - p.means[cs].transpose();
        Eigen::MatrixXd cov = (centered.transpose() * w.asDiagonal() * centered) / nk[c];
        cov = 0.5 * (cov + cov.transpose());
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov, Eigen::EigenvaluesOnly);
        collapsed = eig.eigenvalues().minCoeff() < floor;
        p.covariances[cs] = cov;
        p.weights[c] = nk[c] / static_cast<double>(n);
      }
      if (collapsed) {
        const auto row = static_cast<Eigen::Index>(rng.below(static_cast<std::size_t>(n)));
        p.means[cs] = data.row(row).transpose();
        p.covariances[cs] = data_cov + floor * Eigen::MatrixXd::Identity(dim, dim);
        p.weights[c] = 1.0 / static_cast<double>(k);
        r.events.push_back("iteration " + std::to_string(r.iterations) + ": component " + std::to_string(c) +
                           " collapsed and was reseeded at row " + std::to_string(row));
        reseeded = true;
      }
    }
    p.weights /= p.weights.sum();
    ll = e_step(data, p, r.responsibilities);
  }
  if (!r.converged || r.loglik_trace.empty()) r.loglik_trace.push_back(ll);
  else if (ll != r.loglik_trace.back()) r.loglik_trace.push_back(ll);
  r.params = std::move(p);
  return r;
}

}  // namespace

double gmm_log_likelihood(const Eigen::MatrixXd& data, const GmmParams& params) {
  params.validate();
  Eigen::MatrixXd resp;
  return e_step(data, params, resp);
}

GmmResult em_gmm(const Eigen::MatrixXd& data, const GmmOptions& options, RandomSource& rng) {
  const auto n = static_cast<std::size_t>(data.rows());
  if (options.components == 0) fail(Errc::argument, "a mixture needs at least one component");
  if (n < options.components) fail(Errc::argument, "insufficient data: fewer rows than components");
  if (!data.allFinite()) fail(Errc::argument, "data must be finite");
  const Eigen::RowVectorXd mean = data.colwise().mean();
  const Eigen::MatrixXd centered = data.rowwise() - mean;
  const Eigen::MatrixXd data_cov = centered.transpose() * centered / static_cast<double>(n);
  double floor = 1e-6 * data_cov.trace() / static_cast<double>(data.cols());
  if (!(floor > 0.0)) floor = 1e-12;

  const std::size_t runs = std::max<std::size_t>(1, options.restarts);
  std::optional<GmmResult> best;
  for (std::size_t run = 0; run < runs; ++run) {
    GmmParams init;
    if (run == 0 && options.init) {
      init = *options.init;
      init.validate();
      if (init.components() != options.components) fail(Errc::argument, "initial mixture has the wrong component count");
    } else {
      init = seed_kmeanspp(data, options.components, rng);
    }
    auto r = em_run(data, std::move(init), options, rng, data_cov, floor);
    if (!best || r.loglik_trace.back() > best->loglik_trace.back()) best = std::move(r);
  }
  return std::move(*best);
}

}  // namespace pgm
