#include "pgm/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "pgm/factor_impl.hpp"

namespace pgm {

// ---------------------------------------------------------------------------
// GraphicalModel

void GraphicalModel::add_variable(VarRef v) {
  if (!v) fail(Errc::argument, "null variable");
  if (index_.count(v->name())) fail(Errc::invalid_model, "duplicate variable '" + v->name() + "'");
  index_[v->name()] = variables_.size();
  variables_.push_back(std::move(v));
}

std::optional<std::size_t> GraphicalModel::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t GraphicalModel::require_index(const std::string& name) const {
  if (auto i = index_of(name)) return *i;
  fail(Errc::lookup, "unknown variable '" + name + "'");
}

std::vector<std::string> GraphicalModel::variable_names() const {
  std::vector<std::string> out;
  for (const auto& v : variables_) out.push_back(v->name());
  return out;
}

void GraphicalModel::check_scope(const Factor& f) const {
  for (const auto& v : f.scope()) {
    auto i = index_of(v->name());
    if (!i) fail(Errc::scope, "factor mentions unknown variable '" + v->name() + "'");
    if (!variables_[*i]->same_definition(*v))
      fail(Errc::incompatible_variable, "factor redefines the states of '" + v->name() + "'");
  }
}

// ---------------------------------------------------------------------------
// BayesianNetwork

void BayesianNetwork::add_variable(VarRef v) {
  GraphicalModel::add_variable(v);
  dag_.add_node(v->name());
}

void BayesianNetwork::set_cpd(Factor cpd) {
  if (cpd.arity() == 0) fail(Errc::scope, "a CPD needs the child variable in its scope");
  check_scope(cpd);
  const auto child = cpd.scope().front()->name();
  if (auto old = cpds_.find(child); old != cpds_.end()) {
    for (std::size_t k = 1; k < old->second.arity(); ++k) dag_.remove_edge(old->second.scope()[k]->name(), child);
    cpds_.erase(old);
  }
  for (std::size_t k = 1; k < cpd.arity(); ++k) dag_.add_edge(cpd.scope()[k]->name(), child);
  cpds_.emplace(child, std::move(cpd));
}

void BayesianNetwork::set_cpd(const std::string& child, const std::vector<std::string>& parents,
                              const std::vector<std::vector<double>>& rows) {
  std::vector<VarRef> scope{variable(child)};
  std::size_t n_parent = 1;
  for (const auto& p : parents) {
    scope.push_back(variable(p));
    n_parent *= scope.back()->cardinality();
  }
  const auto card = scope.front()->cardinality();
  if (rows.size() != n_parent)
    fail(Errc::shape, "CPD of '" + child + "' needs " + std::to_string(n_parent) + " parent rows, got " +
                          std::to_string(rows.size()));
  Factor::Table values(static_cast<Eigen::Index>(card * n_parent));
  for (std::size_t p = 0; p < n_parent; ++p) {
    if (rows[p].size() != card)
      fail(Errc::shape, "CPD row " + std::to_string(p) + " of '" + child + "' has the wrong length");
    for (std::size_t c = 0; c < card; ++c) values[static_cast<Eigen::Index>(c * n_parent + p)] = rows[p][c];
  }
  set_cpd(Factor(std::move(scope), std::move(values)));
}

const Factor& BayesianNetwork::cpd(const std::string& child) const {
  auto it = cpds_.find(child);
  if (it == cpds_.end()) fail(Errc::lookup, "no CPD for '" + child + "'");
  return it->second;
}

std::vector<std::string> BayesianNetwork::parents(const std::string& child) const {
  const auto& f = cpd(child);
  auto names = f.scope_names();
  return {names.begin() + 1, names.end()};
}

std::vector<Factor> BayesianNetwork::factors() const {
  std::vector<Factor> out;
  for (const auto& v : variables())
    if (auto it = cpds_.find(v->name()); it != cpds_.end()) out.push_back(it->second);
  return out;
}

std::vector<Violation> BayesianNetwork::validate() const {
  std::vector<Violation> out;
  if (auto cycle = find_cycle(dag_)) {
    std::string text;
    for (std::size_t i = 0; i < cycle->size(); ++i) text += (i ? " -> " : "") + (*cycle)[i];
    out.push_back({cycle->front(), "acyclicity", "graph has a cycle: " + text});
  }
  for (const auto& v : variables()) {
    auto it = cpds_.find(v->name());
    if (it == cpds_.end()) {
      out.push_back({v->name(), "missing-cpd", "variable '" + v->name() + "' has no CPD"});
      continue;
    }
    const Factor f = it->second.to_linear();
    if (!f.values().allFinite()) {
      out.push_back({v->name(), "finite", "CPD of '" + v->name() + "' has non-finite entries"});
      continue;
    }
    const std::size_t card = v->cardinality();
    const std::size_t n_parent = f.size() / card;
    for (std::size_t p = 0; p < n_parent; ++p) {
      double s = 0.0;
      for (std::size_t c = 0; c < card; ++c) s += f[c * n_parent + p];
      if (std::abs(s - 1.0) > 1e-9) {
        std::ostringstream os;
        os.precision(12);
        os << "CPD of '" << v->name() << "' parent configuration " << p << " sums to " << s;
        out.push_back({v->name(), "normalization", os.str()});
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// MarkovRandomField

void MarkovRandomField::add_factor(Factor f) {
  check_scope(f);
  factors_.push_back(std::move(f));
}

std::vector<Violation> MarkovRandomField::validate() const {
  std::vector<Violation> out;
  for (std::size_t i = 0; i < factors_.size(); ++i) {
    const auto& f = factors_[i];
    const std::string subject = "factor " + std::to_string(i);
    if (f.domain() == Domain::linear && !f.values().allFinite())
      out.push_back({subject, "finite", "factor " + std::to_string(i) + " has non-finite entries"});
  }
  return out;
}

UndirectedGraph MarkovRandomField::skeleton() const { return interaction_graph(*this); }

bool MarkovRandomField::is_pairwise() const {
  for (const auto& f : factors_)
    if (f.arity() > 2) return false;
  return true;
}

void require_valid(const GraphicalModel& m) {
  auto violations = m.validate();
  if (violations.empty()) return;
  std::string text = "model is invalid:";
  for (const auto& v : violations) text += "\n  [" + v.rule + "] " + v.message;
  fail(Errc::invalid_model, text);
}

UndirectedGraph interaction_graph(const GraphicalModel& m) {
  UndirectedGraph g(m.variable_names());
  for (const auto& f : m.factors()) {
    auto names = f.scope_names();
    for (std::size_t a = 0; a < names.size(); ++a)
      for (std::size_t b = a + 1; b < names.size(); ++b) g.add_edge(names[a], names[b]);
  }
  return g;
}

MarkovRandomField bn_to_mrf(const BayesianNetwork& bn) { return as_mrf(bn); }

MarkovRandomField as_mrf(const GraphicalModel& m) {
  MarkovRandomField out;
  for (const auto& v : m.variables()) out.add_variable(v);
  for (auto& f : m.factors()) out.add_factor(std::move(f));
  return out;
}

// ---------------------------------------------------------------------------
// FactorGraph

std::vector<std::pair<std::size_t, std::string>> FactorGraph::edges() const {
  std::vector<std::pair<std::size_t, std::string>> out;
  for (std::size_t i = 0; i < factor_scopes.size(); ++i)
    for (const auto& v : factor_scopes[i]) out.emplace_back(i, v);
  return out;
}

namespace {

struct DisjointSets {
  std::vector<std::size_t> parent;
  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  bool unite(std::size_t a, std::size_t b) {
    a = find(a), b = find(b);
    if (a == b) return false;
    parent[a] = b;
    return true;
  }
};

}  // namespace

bool FactorGraph::is_forest() const {
  std::map<std::string, std::size_t> id;
  for (std::size_t i = 0; i < variables.size(); ++i) id[variables[i]] = i;
  DisjointSets ds(variables.size() + factor_scopes.size());
  for (const auto& [f, v] : edges())
    if (!ds.unite(variables.size() + f, id.at(v))) return false;
  return true;
}

bool FactorGraph::is_connected() const {
  std::map<std::string, std::size_t> id;
  for (std::size_t i = 0; i < variables.size(); ++i) id[variables[i]] = i;
  const std::size_t n = variables.size() + factor_scopes.size();
  DisjointSets ds(n);
  std::size_t components = n;
  for (const auto& [f, v] : edges())
    if (ds.unite(variables.size() + f, id.at(v))) --components;
  return components <= 1;
}

FactorGraph to_factor_graph(const GraphicalModel& m) {
  FactorGraph fg;
  fg.variables = m.variable_names();
  for (const auto& f : m.factors()) fg.factor_scopes.push_back(f.scope_names());
  return fg;
}

// ---------------------------------------------------------------------------
// Evidence and joint scores

IndexEvidence index_evidence(const GraphicalModel& m, const Evidence& evidence) {
  IndexEvidence out;
  for (const auto& [name, label] : evidence) out[name] = m.variable(name)->state_index(label);
  return out;
}

void check_evidence(const GraphicalModel& m, const IndexEvidence& evidence) {
  for (const auto& [name, s] : evidence) {
    const auto& v = m.variable(name);
    if (s < 0 || static_cast<std::size_t>(s) >= v->cardinality())
      fail(Errc::evidence, "evidence state index " + std::to_string(s) + " out of range for '" + name + "'");
  }
}

double log_joint(const GraphicalModel& m, const Assignment& x) {
  if (x.size() != m.variable_count())
    fail(Errc::assignment, "assignment has " + std::to_string(x.size()) + " entries, model has " +
                               std::to_string(m.variable_count()) + " variables");
  double total = 0.0;
  std::vector<int> local;
  for (const auto& f : m.factors()) {
    local.clear();
    for (const auto& v : f.scope()) local.push_back(x[m.require_index(v->name())]);
    const double value = f.at(local);
    total += f.domain() == Domain::log ? value : std::log(value);
  }
  return total;
}

double log_joint(const GraphicalModel& m, const IndexEvidence& x) {
  Assignment full(m.variable_count());
  for (std::size_t i = 0; i < m.variable_count(); ++i) {
    auto it = x.find(m.variables()[i]->name());
    if (it == x.end()) fail(Errc::assignment, "assignment is missing '" + m.variables()[i]->name() + "'");
    full[i] = it->second;
  }
  return log_joint(m, full);
}

Evidence assignment_labels(const GraphicalModel& m, const Assignment& x) {
  Evidence out;
  for (std::size_t i = 0; i < x.size() && i < m.variable_count(); ++i)
    out[m.variables()[i]->name()] = m.variables()[i]->state_label(x[i]);
  return out;
}

// ---------------------------------------------------------------------------
// LocalScorer

LocalScorer::LocalScorer(const GraphicalModel& m) : model_(&m), factors_(m.factors()) {
  touching_.resize(m.variable_count());
  for (std::size_t f = 0; f < factors_.size(); ++f) {
    std::vector<std::size_t> idx;
    for (const auto& v : factors_[f].scope()) {
      idx.push_back(m.require_index(v->name()));
      touching_[idx.back()].push_back(f);
    }
    scope_index_.push_back(std::move(idx));
  }
}

double LocalScorer::log_score(std::size_t i, const Assignment& x, int state) const {
  double total = 0.0;
  std::vector<int> local;
  for (auto f : touching_[i]) {
    local.clear();
    for (auto k : scope_index_[f]) local.push_back(k == i ? state : x[k]);
    const double v = factors_[f].at(local);
    total += factors_[f].domain() == Domain::log ? v : std::log(v);
  }
  return total;
}

std::vector<double> LocalScorer::log_scores(std::size_t i, const Assignment& x) const {
  const int card = static_cast<int>(model_->variables()[i]->cardinality());
  std::vector<double> out(static_cast<std::size_t>(card));
  for (int s = 0; s < card; ++s) out[static_cast<std::size_t>(s)] = log_score(i, x, s);
  return out;
}

std::vector<double> LocalScorer::conditional(std::size_t i, const Assignment& x) const {
  auto p = log_scores(i, x);
  const double top = *std::max_element(p.begin(), p.end());
  if (!std::isfinite(top))
    fail(Errc::trapped_state, "every state of '" + model_->variables()[i]->name() +
                                  "' has zero probability given the rest of the assignment");
  double total = 0.0;
  for (auto& v : p) total += (v = std::exp(v - top));
  for (auto& v : p) v /= total;
  return p;
}

// ---------------------------------------------------------------------------
// Enumeration

void for_each_assignment(const std::vector<VarRef>& vars, const std::function<void(const Assignment&)>& visit) {
  Assignment x(vars.size(), 0);
  while (true) {
    visit(x);
    std::size_t k = vars.size();
    while (k > 0) {
      --k;
      if (static_cast<std::size_t>(++x[k]) < vars[k]->cardinality()) break;
      x[k] = 0;
      if (k == 0) return;
    }
    if (vars.empty()) return;
  }
}

Factor enumerate_joint(const GraphicalModel& m, const IndexEvidence& evidence, std::size_t cap) {
  check_evidence(m, evidence);
  const auto& vars = m.variables();
  std::size_t n = 1;
  for (const auto& v : vars) {
    if (n > cap / v->cardinality()) fail(Errc::too_large, "joint table exceeds the enumeration cap");
    n *= v->cardinality();
  }
  Factor::Table table = Factor::Table::Ones(static_cast<Eigen::Index>(n));
  const auto cards = detail::cards_of(vars);
  for (const auto& raw : m.factors()) {
    const Factor f = raw.to_linear();
    detail::Odometer odo(cards, {detail::mapped_strides(vars, f.scope())});
    for (std::size_t i = 0; i < n; ++i, odo.next()) table[static_cast<Eigen::Index>(i)] *= f[odo.offset(0)];
  }
  return mask(Factor(vars, std::move(table)), evidence);
}

Factor enumerate_marginal(const GraphicalModel& m, const std::vector<std::string>& query,
                          const IndexEvidence& evidence, std::size_t cap) {
  for (const auto& q : query) m.require_index(q);
  const Factor joint = enumerate_joint(m, evidence, cap);
  if (!(joint.values().sum() > 0.0)) fail(Errc::zero_evidence, "evidence has probability zero");
  auto marginal = reorder(marginalize_to(joint, query), query);
  return normalize(marginal).first;
}

double enumerate_partition(const GraphicalModel& m, const IndexEvidence& evidence, std::size_t cap) {
  return enumerate_joint(m, evidence, cap).values().sum();
}

MapResult enumerate_map(const GraphicalModel& m, const IndexEvidence& evidence, std::size_t cap) {
  const Factor joint = enumerate_joint(m, evidence, cap);
  const double best = joint.values().maxCoeff();
  if (!(best > 0.0)) fail(Errc::zero_evidence, "every assignment has probability zero");
  std::size_t idx = 0;
  while (joint[idx] < best * (1.0 - 1e-12)) ++idx;
  MapResult out;
  out.assignment = joint.unflatten(idx);
  out.log_score = log_joint(m, out.assignment);
  return out;
}

// ---------------------------------------------------------------------------
// ChainCRF

ChainCRF::ChainCRF(std::vector<std::string> labels) : labels_(std::move(labels)) {
  if (labels_.empty()) fail(Errc::argument, "a chain CRF needs at least one label");
  make_variable("label", labels_);  // validates uniqueness
}

std::size_t ChainCRF::add_node_feature(std::string name, NodeFeature f) {
  const auto id = names_.size();
  names_.push_back(std::move(name));
  node_.emplace_back(id, std::move(f));
  weights_.conservativeResize(static_cast<Eigen::Index>(names_.size()));
  weights_[static_cast<Eigen::Index>(id)] = 0.0;
  return id;
}

std::size_t ChainCRF::add_edge_feature(std::string name, EdgeFeature f) {
  const auto id = names_.size();
  names_.push_back(std::move(name));
  edge_.emplace_back(id, std::move(f));
  weights_.conservativeResize(static_cast<Eigen::Index>(names_.size()));
  weights_[static_cast<Eigen::Index>(id)] = 0.0;
  return id;
}

void ChainCRF::add_indicator_features(std::size_t observation_dim) {
  for (std::size_t d = 0; d < observation_dim; ++d)
    for (int k = 0; k < static_cast<int>(labels_.size()); ++k)
      add_node_feature("obs" + std::to_string(d) + "|" + labels_[static_cast<std::size_t>(k)],
                       [d, k](const CrfObservation& x, std::size_t t, int y) {
                         return y == k ? x[t][static_cast<Eigen::Index>(d)] : 0.0;
                       });
  for (int a = 0; a < static_cast<int>(labels_.size()); ++a)
    for (int b = 0; b < static_cast<int>(labels_.size()); ++b)
      add_edge_feature("trans|" + labels_[static_cast<std::size_t>(a)] + ">" + labels_[static_cast<std::size_t>(b)],
                       [a, b](const CrfObservation&, std::size_t, int yp, int y) {
                         return (yp == a && y == b) ? 1.0 : 0.0;
                       });
}

void ChainCRF::set_weights(Eigen::VectorXd w) {
  if (static_cast<std::size_t>(w.size()) != names_.size()) fail(Errc::shape, "weight vector length mismatch");
  weights_ = std::move(w);
}

namespace {

double checked(double v, const std::string& name) {
  if (!std::isfinite(v)) fail(Errc::feature, "feature '" + name + "' returned a non-finite value");
  return v;
}

}  // namespace

Eigen::VectorXd ChainCRF::node_features(const CrfObservation& x, std::size_t t, int y) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(names_.size()));
  for (const auto& [id, f] : node_) out[static_cast<Eigen::Index>(id)] = checked(f(x, t, y), names_[id]);
  return out;
}

Eigen::VectorXd ChainCRF::edge_features(const CrfObservation& x, std::size_t t, int y_prev, int y) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(names_.size()));
  for (const auto& [id, f] : edge_) out[static_cast<Eigen::Index>(id)] = checked(f(x, t, y_prev, y), names_[id]);
  return out;
}

Eigen::VectorXd ChainCRF::feature_sum(const CrfObservation& x, const std::vector<int>& y) const {
  if (x.size() != y.size()) fail(Errc::shape, "observation and label sequences differ in length");
  Eigen::VectorXd total = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(names_.size()));
  for (std::size_t t = 0; t < y.size(); ++t) {
    total += node_features(x, t, y[t]);
    if (t > 0) total += edge_features(x, t, y[t - 1], y[t]);
  }
  return total;
}

MarkovRandomField ChainCRF::condition(const CrfObservation& x) const { return condition(x, weights_); }

MarkovRandomField ChainCRF::condition(const CrfObservation& x, const Eigen::VectorXd& w) const {
  if (static_cast<std::size_t>(w.size()) != names_.size()) fail(Errc::shape, "weight vector length mismatch");
  MarkovRandomField m;
  std::vector<VarRef> ys;
  for (std::size_t t = 0; t < x.size(); ++t) {
    ys.push_back(make_variable("Y" + std::to_string(t + 1), labels_));
    m.add_variable(ys.back());
  }
  const int k = static_cast<int>(labels_.size());
  for (std::size_t t = 0; t < x.size(); ++t) {
    Factor::Table unary(k);
    for (int y = 0; y < k; ++y) unary[y] = std::exp(w.dot(node_features(x, t, y)));
    m.add_factor(Factor({ys[t]}, std::move(unary)));
    if (t == 0) continue;
    Factor::Table pair(k * k);
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b) pair[a * k + b] = std::exp(w.dot(edge_features(x, t, a, b)));
    m.add_factor(Factor({ys[t - 1], ys[t]}, std::move(pair)));
  }
  return m;
}

}  // namespace pgm
