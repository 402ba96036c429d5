#include "pgm/variational.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

namespace pgm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Log table plus model indices of a factor's scope.
struct LogFactor {
  Factor log_table;
  std::vector<std::size_t> vars;
};

std::vector<LogFactor> log_factors(const GraphicalModel& m) {
  std::vector<LogFactor> out;
  for (const auto& f : m.factors()) {
    LogFactor lf{f.to_log(), {}};
    for (const auto& v : f.scope()) lf.vars.push_back(m.require_index(v->name()));
    out.push_back(std::move(lf));
  }
  return out;
}

/// E_q[log φ], skipping entries of zero q-weight; −infinity when q has mass on a zero of φ.
double expected_log(const LogFactor& f, const std::vector<std::vector<double>>& q) {
  const Factor& t = f.log_table;
  if (t.arity() == 0) return t[0];
  double total = 0.0;
  for (std::size_t flat = 0; flat < t.size(); ++flat) {
    const auto states = t.unflatten(flat);
    double w = 1.0;
    for (std::size_t k = 0; k < states.size() && w > 0.0; ++k) w *= q[f.vars[k]][static_cast<std::size_t>(states[k])];
    if (w == 0.0) continue;
    if (std::isinf(t[flat])) return kNegInf;
    total += w * t[flat];
  }
  return total;
}

double row_entropy(const std::vector<double>& row) {
  double h = 0.0;
  for (double p : row)
    if (p > 0.0) h -= p * std::log(p);
  return h;
}

double elbo_of(const std::vector<LogFactor>& factors, const std::vector<std::vector<double>>& q) {
  double value = 0.0;
  for (const auto& row : q) value += row_entropy(row);
  for (const auto& f : factors) {
    const double e = expected_log(f, q);
    if (std::isinf(e)) return kNegInf;
    value += e;
  }
  return value;
}

void normalize_in_place(std::vector<double>& v, const char* what) {
  const double z = std::accumulate(v.begin(), v.end(), 0.0);
  if (!(z > 0.0) || !std::isfinite(z)) fail(Errc::zero_evidence, std::string(what) + " has no mass");
  for (auto& x : v) x /= z;
}

}  // namespace

// ---------------------------------------------------------------------------
// KL divergence

double kl_divergence(const Factor& q, const Factor& p) {
  if (q.arity() != p.arity()) fail(Errc::scope, "kl_divergence needs distributions over the same scope");
  const Factor pq = reorder(p.to_linear(), q.scope_names());
  for (std::size_t k = 0; k < q.arity(); ++k)
    if (pq.scope()[k]->cardinality() != q.scope()[k]->cardinality())
      fail(Errc::incompatible_variable, "kl_divergence scopes disagree on cardinality");
  const auto [qn, zq] = normalize(q.to_linear());
  const auto [pn, zp] = normalize(pq);
  (void)zq;
  (void)zp;
  double kl = 0.0;
  for (std::size_t i = 0; i < qn.size(); ++i) {
    if (qn[i] == 0.0) continue;
    if (pn[i] == 0.0) return std::numeric_limits<double>::infinity();
    kl += qn[i] * std::log(qn[i] / pn[i]);
  }
  return kl;
}

// ---------------------------------------------------------------------------
// FactoredDistribution

FactoredDistribution FactoredDistribution::uniform(const std::vector<VarRef>& variables) {
  FactoredDistribution d;
  d.variables = variables;
  for (const auto& v : variables)
    d.q.emplace_back(v->cardinality(), 1.0 / static_cast<double>(v->cardinality()));
  return d;
}

FactoredDistribution FactoredDistribution::perturbed(const std::vector<VarRef>& variables, RandomSource& rng,
                                                     double weight) {
  FactoredDistribution d = uniform(variables);
  for (auto& row : d.q) {
    std::vector<double> noise(row.size());
    for (auto& e : noise) e = -std::log(1.0 - rng.uniform());
    const double z = std::accumulate(noise.begin(), noise.end(), 0.0);
    for (std::size_t s = 0; s < row.size(); ++s) row[s] = (1.0 - weight) * row[s] + weight * noise[s] / z;
  }
  return d;
}

std::size_t FactoredDistribution::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < variables.size(); ++i)
    if (variables[i]->name() == name) return i;
  fail(Errc::lookup, "factored distribution has no variable '" + name + "'");
}

Factor FactoredDistribution::marginal(std::size_t i) const {
  Factor::Table t = Eigen::Map<const Factor::Table>(q[i].data(), static_cast<Eigen::Index>(q[i].size()));
  return Factor({variables[i]}, t);
}

Factor FactoredDistribution::joint() const {
  Factor out = Factor::ones({});
  for (std::size_t i = 0; i < variables.size(); ++i) out = product(out, marginal(i));
  return out;
}

void FactoredDistribution::validate() const {
  if (q.size() != variables.size()) fail(Errc::argument, "factored distribution needs one row per variable");
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (q[i].size() != variables[i]->cardinality())
      fail(Errc::argument, "row for '" + variables[i]->name() + "' has the wrong length");
    double z = 0.0;
    for (double p : q[i]) {
      if (!(p >= 0.0) || !std::isfinite(p)) fail(Errc::argument, "row for '" + variables[i]->name() + "' has an invalid entry");
      z += p;
    }
    if (std::abs(z - 1.0) > 1e-12) fail(Errc::argument, "row for '" + variables[i]->name() + "' does not sum to one");
  }
}

double entropy(const FactoredDistribution& q) {
  double h = 0.0;
  for (const auto& row : q.q) h += row_entropy(row);
  return h;
}

double elbo(const GraphicalModel& m, const FactoredDistribution& q) {
  q.validate();
  if (q.variables.size() != m.variable_count()) fail(Errc::scope, "q must cover every model variable");
  std::vector<std::vector<double>> rows(m.variable_count());
  for (std::size_t i = 0; i < m.variable_count(); ++i) rows[i] = q[m.variables()[i]->name()];
  return elbo_of(log_factors(m), rows);
}

std::string ElboTrace::to_csv() const {
  std::ostringstream os;
  os << "sweep,elbo\n";
  char buf[40];
  for (std::size_t k = 0; k < sweeps.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g", sweeps[k]);
    os << k << "," << buf << "\n";
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Mean field

namespace {

MeanFieldResult mean_field_run(const GraphicalModel& m, const IndexEvidence& evidence, const MeanFieldOptions& options,
                               const std::vector<LogFactor>& factors, FactoredDistribution q) {
  const std::size_t n = m.variable_count();
  std::vector<std::vector<std::size_t>> touching(n);
  for (std::size_t c = 0; c < factors.size(); ++c)
    for (auto v : factors[c].vars) touching[v].push_back(c);

  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < n; ++i) {
    auto it = evidence.find(m.variables()[i]->name());
    if (it != evidence.end()) {
      std::fill(q.q[i].begin(), q.q[i].end(), 0.0);
      q.q[i][static_cast<std::size_t>(it->second)] = 1.0;
    } else {
      order.push_back(i);
    }
  }
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return m.variables()[a]->name() < m.variables()[b]->name(); });

  MeanFieldResult r;
  for (std::size_t i = 0; i < n; ++i) r.blanket_sizes.push_back(touching[i].size());
  auto& trace = r.trace;
  double current = elbo_of(factors, q.q);
  trace.sweeps.push_back(current);

  for (std::size_t sweep = 0; sweep < options.max_sweeps; ++sweep) {
    for (auto j : order) {
      std::vector<double> score(q.q[j].size(), 0.0);
      for (auto c : touching[j]) {
        const auto& f = factors[c];
        const Factor& t = f.log_table;
        std::size_t pos = 0;
        while (f.vars[pos] != j) ++pos;
        for (std::size_t flat = 0; flat < t.size(); ++flat) {
          const auto states = t.unflatten(flat);
          double w = 1.0;
          for (std::size_t k = 0; k < states.size() && w > 0.0; ++k)
            if (k != pos) w *= q.q[f.vars[k]][static_cast<std::size_t>(states[k])];
          if (w == 0.0) continue;
          auto& s = score[static_cast<std::size_t>(states[pos])];
          s = std::isinf(t[flat]) ? kNegInf : s + w * t[flat];
        }
      }
      const double top = *std::max_element(score.begin(), score.end());
      if (!std::isfinite(top))
        fail(Errc::degenerate_distribution,
             "mean-field update for '" + m.variables()[j]->name() + "' has no state with finite score");
      double z = 0.0;
      for (auto& s : score) z += (s = std::exp(s - top));
      for (auto& s : score) s /= z;
      q.q[j] = std::move(score);

      const double next = elbo_of(factors, q.q);
      if (next < current - 1e-10) ++trace.monotonicity_violations;
      trace.updates.push_back(next);
      current = next;
    }
    const double before = trace.sweeps.back();
    trace.sweeps.push_back(current);
    if (std::isfinite(before) && current - before < options.tolerance) {
      trace.converged = true;
      break;
    }
  }
  r.q = std::move(q);
  return r;
}

}  // namespace

MeanFieldResult mean_field(const GraphicalModel& m, const IndexEvidence& evidence, const MeanFieldOptions& options,
                           RandomSource* rng) {
  check_evidence(m, evidence);
  if (options.restarts > 0 && !rng) fail(Errc::argument, "mean-field restarts need a random source");
  const auto factors = log_factors(m);

  FactoredDistribution init = options.init ? *options.init : FactoredDistribution::uniform(m.variables());
  if (init.variables.size() != m.variable_count()) fail(Errc::scope, "initial q must cover every model variable");
  init.validate();
  FactoredDistribution aligned = FactoredDistribution::uniform(m.variables());
  for (std::size_t i = 0; i < m.variable_count(); ++i) aligned.q[i] = init[m.variables()[i]->name()];

  MeanFieldResult best = mean_field_run(m, evidence, options, factors, aligned);
  for (std::size_t k = 0; k < options.restarts; ++k) {
    auto run = mean_field_run(m, evidence, options, factors, FactoredDistribution::perturbed(m.variables(), *rng));
    if (run.trace.sweeps.back() > best.trace.sweeps.back()) best = std::move(run);
  }

  std::size_t states = 1;
  bool enumerable = true;
  for (const auto& v : m.variables())
    if ((states *= v->cardinality()) > options.exact_gap_cap) enumerable = false;
  if (enumerable) {
    const double z = enumerate_partition(m, evidence, options.exact_gap_cap);
    if (z > 0.0) {
      best.trace.log_partition = std::log(z);
      best.trace.kl_gap = *best.trace.log_partition - best.trace.sweeps.back();
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Loopy belief propagation

LoopyBpResult loopy_bp(const GraphicalModel& m, const IndexEvidence& evidence, const LoopyBpOptions& options) {
  check_evidence(m, evidence);
  if (!(options.damping > 0.0 && options.damping <= 1.0)) fail(Errc::argument, "damping must lie in (0, 1]");
  const std::size_t n = m.variable_count();

  struct Edge {
    std::size_t factor;
    std::size_t pos;
    std::size_t var;
  };
  std::vector<Factor> tables;
  std::vector<std::vector<std::size_t>> scope_vars;
  for (const auto& f : m.factors()) {
    tables.push_back(f.to_linear());
    std::vector<std::size_t> vars;
    for (const auto& v : f.scope()) vars.push_back(m.require_index(v->name()));
    scope_vars.push_back(std::move(vars));
  }
  std::vector<Edge> edges;
  std::vector<std::vector<std::size_t>> factor_edges(tables.size()), var_edges(n);
  for (std::size_t f = 0; f < tables.size(); ++f)
    for (std::size_t k = 0; k < scope_vars[f].size(); ++k) {
      factor_edges[f].push_back(edges.size());
      var_edges[scope_vars[f][k]].push_back(edges.size());
      edges.push_back({f, k, scope_vars[f][k]});
    }

  std::vector<std::vector<double>> indicator(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto card = m.variables()[i]->cardinality();
    auto it = evidence.find(m.variables()[i]->name());
    indicator[i].assign(card, it == evidence.end() ? 1.0 : 0.0);
    if (it != evidence.end()) indicator[i][static_cast<std::size_t>(it->second)] = 1.0;
  }

  std::vector<std::vector<double>> to_factor(edges.size()), to_var(edges.size());
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto card = m.variables()[edges[e].var]->cardinality();
    to_factor[e].assign(card, 1.0 / static_cast<double>(card));
    to_var[e] = to_factor[e];
  }

  auto var_message = [&](std::size_t e) {
    std::vector<double> msg = indicator[edges[e].var];
    for (auto g : var_edges[edges[e].var])
      if (g != e)
        for (std::size_t s = 0; s < msg.size(); ++s) msg[s] *= to_var[g][s];
    normalize_in_place(msg, "variable-to-factor message");
    return msg;
  };
  auto factor_message = [&](std::size_t e) {
    const auto f = edges[e].factor;
    const Factor& t = tables[f];
    std::vector<double> msg(to_var[e].size(), 0.0);
    for (std::size_t flat = 0; flat < t.size(); ++flat) {
      const auto states = t.unflatten(flat);
      double w = t[flat];
      for (auto g : factor_edges[f])
        if (g != e && w != 0.0) w *= to_factor[g][static_cast<std::size_t>(states[edges[g].pos])];
      msg[static_cast<std::size_t>(states[edges[e].pos])] += w;
    }
    normalize_in_place(msg, "factor-to-variable message");
    return msg;
  };
  const double lambda = options.damping;
  auto blend = [&](std::vector<double>& old, const std::vector<double>& proposed) {
    double change = 0.0;
    for (std::size_t s = 0; s < old.size(); ++s) {
      const double v = (1.0 - lambda) * old[s] + lambda * proposed[s];
      change = std::max(change, std::abs(v - old[s]));
      old[s] = v;
    }
    return change;
  };

  LoopyBpResult r;
  r.residual = std::numeric_limits<double>::infinity();
  for (r.iterations = 1; r.iterations <= options.max_iterations; ++r.iterations) {
    double residual = 0.0;
    if (options.schedule == BpSchedule::synchronous) {
      std::vector<std::vector<double>> proposed(edges.size());
      for (std::size_t e = 0; e < edges.size(); ++e) proposed[e] = var_message(e);
      for (std::size_t e = 0; e < edges.size(); ++e) residual = std::max(residual, blend(to_factor[e], proposed[e]));
      for (std::size_t e = 0; e < edges.size(); ++e) proposed[e] = factor_message(e);
      for (std::size_t e = 0; e < edges.size(); ++e) residual = std::max(residual, blend(to_var[e], proposed[e]));
    } else {
      for (std::size_t f = 0; f < tables.size(); ++f) {
        for (auto e : factor_edges[f]) residual = std::max(residual, blend(to_factor[e], var_message(e)));
        for (auto e : factor_edges[f]) residual = std::max(residual, blend(to_var[e], factor_message(e)));
      }
    }
    r.residual = residual;
    if (residual < options.tolerance) {
      r.converged = true;
      break;
    }
  }
  if (!r.converged) r.iterations = options.max_iterations;

  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> b = indicator[i];
    for (auto e : var_edges[i])
      for (std::size_t s = 0; s < b.size(); ++s) b[s] *= to_var[e][s];
    normalize_in_place(b, "variable belief");
    r.marginals.emplace_back(std::vector<VarRef>{m.variables()[i]},
                             Eigen::Map<const Factor::Table>(b.data(), static_cast<Eigen::Index>(b.size())));
  }
  for (std::size_t f = 0; f < tables.size(); ++f) {
    Factor::Table t = tables[f].values();
    for (std::size_t flat = 0; flat < tables[f].size(); ++flat) {
      const auto states = tables[f].unflatten(flat);
      for (auto e : factor_edges[f]) t[static_cast<Eigen::Index>(flat)] *= to_factor[e][static_cast<std::size_t>(states[edges[e].pos])];
    }
    const double z = t.sum();
    if (!(z > 0.0)) fail(Errc::zero_evidence, "factor belief has no mass");
    r.factor_beliefs.emplace_back(tables[f].scope(), t / z);
  }
  return r;
}

}  // namespace pgm
