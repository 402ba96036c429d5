#include "pgm/map.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <limits>
#include <map>
#include <sstream>

namespace pgm {

namespace {

constexpr double neg_inf = -std::numeric_limits<double>::infinity();

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double log_value(const Factor& f, std::size_t flat) {
  return f.domain() == Domain::log ? f[flat] : std::log(f[flat]);
}

/// Unary and pairwise log potentials of a pairwise model, merged per variable and per variable pair.
struct PairwiseTerms {
  std::vector<std::vector<double>> unary;                              // θ_i
  std::map<std::pair<std::size_t, std::size_t>, std::vector<double>> pair;  // θ_ij row-major over (i, j), i < j
  double constant = 0.0;
};

PairwiseTerms collect_terms(const GraphicalModel& m) {
  PairwiseTerms t;
  for (const auto& v : m.variables()) t.unary.emplace_back(v->cardinality(), 0.0);
  for (const auto& f : m.factors()) {
    if (f.arity() == 0) {
      t.constant += log_value(f, 0);
    } else if (f.arity() == 1) {
      auto& u = t.unary[m.require_index(f.scope()[0]->name())];
      for (std::size_t s = 0; s < f.size(); ++s) u[s] += log_value(f, s);
    } else if (f.arity() == 2) {
      std::size_t i = m.require_index(f.scope()[0]->name());
      std::size_t j = m.require_index(f.scope()[1]->name());
      const bool swap = j < i;
      if (swap) std::swap(i, j);
      const std::size_t ci = m.variables()[i]->cardinality(), cj = m.variables()[j]->cardinality();
      auto [it, fresh] = t.pair.try_emplace({i, j}, ci * cj, 0.0);
      for (std::size_t a = 0; a < ci; ++a)
        for (std::size_t b = 0; b < cj; ++b) it->second[a * cj + b] += log_value(f, swap ? b * ci + a : a * cj + b);
    } else {
      fail(Errc::unsupported, "factor over " + std::to_string(f.arity()) + " variables; a pairwise model is required");
    }
  }
  return t;
}

Assignment random_assignment(const GraphicalModel& m, RandomSource& rng) {
  Assignment x(m.variable_count());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<int>(rng.below(m.variables()[i]->cardinality()));
  return x;
}

}  // namespace

// ---------------------------------------------------------------------------
// PairwiseEnergyModel

std::size_t PairwiseEnergyModel::add_node(std::string name, double e0, double e1) {
  names.push_back(std::move(name));
  unary.push_back({e0, e1});
  return names.size() - 1;
}

void PairwiseEnergyModel::add_edge(std::size_t u, std::size_t v, double lambda) {
  if (u >= size() || v >= size() || u == v) fail(Errc::argument, "edge endpoints must be two distinct nodes");
  edges.push_back({u, v, lambda});
}

double PairwiseEnergyModel::energy(const Assignment& x) const {
  if (x.size() != size()) fail(Errc::assignment, "assignment size does not match the energy model");
  double e = 0.0;
  for (std::size_t u = 0; u < size(); ++u) e += unary[u][static_cast<std::size_t>(x[u])];
  for (const auto& edge : edges)
    if (x[edge.u] != x[edge.v]) e += edge.lambda;
  return e;
}

void PairwiseEnergyModel::validate() const {
  for (std::size_t u = 0; u < size(); ++u)
    if (!std::isfinite(unary[u][0]) || !std::isfinite(unary[u][1]))
      fail(Errc::invalid_model, "unary energy of '" + names[u] + "' is not finite");
  for (const auto& e : edges)
    if (!(e.lambda >= 0.0) || !std::isfinite(e.lambda))
      fail(Errc::invalid_model, "edge " + names[e.u] + "-" + names[e.v] + " has weight " + fmt(e.lambda) +
                                    "; weights must be finite and nonnegative");
}

PairwiseEnergyModel normalize_energies(const PairwiseEnergyModel& m) {
  PairwiseEnergyModel out = m;
  for (auto& u : out.unary) {
    const double lo = std::min(u[0], u[1]);
    u[0] -= lo;
    u[1] -= lo;
  }
  return out;
}

PairwiseEnergyModel to_pairwise_energy(const MarkovRandomField& m, double* offset) {
  for (const auto& v : m.variables())
    if (v->cardinality() != 2) fail(Errc::unsupported, "graph cuts need binary variables; '" + v->name() + "' is not");
  const auto terms = collect_terms(m);
  PairwiseEnergyModel out;
  double c = -terms.constant;
  for (std::size_t i = 0; i < m.variable_count(); ++i)
    out.add_node(m.variables()[i]->name(), -terms.unary[i][0], -terms.unary[i][1]);
  for (const auto& [key, theta] : terms.pair) {
    const double e00 = -theta[0], e01 = -theta[1], e10 = -theta[2], e11 = -theta[3];
    if (!std::isfinite(e00) || !std::isfinite(e01) || !std::isfinite(e10) || !std::isfinite(e11))
      fail(Errc::infinite_weight, "pairwise potential between '" + out.names[key.first] + "' and '" +
                                      out.names[key.second] + "' has a zero entry");
    double lambda = (e01 + e10 - e00 - e11) / 2.0;
    if (lambda < 0.0) {
      if (lambda > -1e-12 * (1.0 + std::abs(e00) + std::abs(e11))) {
        lambda = 0.0;
      } else {
        fail(Errc::unsupported, "pairwise energy between '" + out.names[key.first] + "' and '" +
                                    out.names[key.second] + "' is not submodular");
      }
    }
    c += e00;
    out.unary[key.first][1] += e10 - e00 - lambda;
    out.unary[key.second][1] += e01 - e00 - lambda;
    out.add_edge(key.first, key.second, lambda);
  }
  for (std::size_t u = 0; u < out.size(); ++u)
    if (!std::isfinite(out.unary[u][0]) || !std::isfinite(out.unary[u][1]))
      fail(Errc::infinite_weight, "unary potential of '" + out.names[u] + "' has a zero entry");
  if (offset) *offset = c;
  return out;
}

// ---------------------------------------------------------------------------
// Max-flow / min-cut

std::size_t FlowNetwork::add_node(std::string name) {
  names.push_back(std::move(name));
  return names.size() - 1;
}

void FlowNetwork::add_arc(std::size_t from, std::size_t to, double capacity) {
  if (from >= names.size() || to >= names.size()) fail(Errc::argument, "arc endpoint out of range");
  if (!(capacity >= 0.0) || !std::isfinite(capacity)) fail(Errc::invalid_model, "arc capacities must be finite and nonnegative");
  arcs.push_back({from, to, capacity});
}

void FlowNetwork::add_edge(std::size_t a, std::size_t b, double capacity) {
  add_arc(a, b, capacity);
  add_arc(b, a, capacity);
}

std::size_t FlowNetwork::index_of(const std::string& name) const {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) fail(Errc::lookup, "no flow node named '" + name + "'");
  return static_cast<std::size_t>(it - names.begin());
}

CutResult min_cut(const FlowNetwork& g) {
  const std::size_t n = g.names.size();
  if (g.source >= n || g.sink >= n || g.source == g.sink) fail(Errc::argument, "source and sink must be distinct nodes");

  // Residual arcs in pairs: arc 2k is forward, 2k+1 its reverse.
  struct Residual {
    std::size_t to;
    double cap;
  };
  std::vector<Residual> res;
  std::vector<std::vector<std::size_t>> out(n);
  double scale = 0.0;
  for (const auto& a : g.arcs) {
    out[a.from].push_back(res.size());
    res.push_back({a.to, a.capacity});
    out[a.to].push_back(res.size());
    res.push_back({a.from, 0.0});
    scale = std::max(scale, a.capacity);
  }
  const double eps = 1e-12 * std::max(1.0, scale);

  auto bfs = [&](std::vector<std::size_t>& via) {
    std::vector<bool> seen(n, false);
    via.assign(n, SIZE_MAX);
    std::deque<std::size_t> queue{g.source};
    seen[g.source] = true;
    while (!queue.empty()) {
      const auto u = queue.front();
      queue.pop_front();
      for (auto e : out[u])
        if (res[e].cap > eps && !seen[res[e].to]) {
          seen[res[e].to] = true;
          via[res[e].to] = e;
          queue.push_back(res[e].to);
        }
    }
    return seen;
  };

  std::vector<std::size_t> via;
  while (bfs(via)[g.sink]) {
    double push = std::numeric_limits<double>::infinity();
    for (auto v = g.sink; v != g.source; v = res[via[v] ^ 1].to) push = std::min(push, res[via[v]].cap);
    for (auto v = g.sink; v != g.source; v = res[via[v] ^ 1].to) {
      res[via[v]].cap -= push;
      res[via[v] ^ 1].cap += push;
    }
  }

  const auto reach = bfs(via);
  CutResult cut;
  for (std::size_t v = 0; v < n; ++v) (reach[v] ? cut.source_side : cut.sink_side).push_back(v);
  for (const auto& a : g.arcs)
    if (reach[a.from] && !reach[a.to]) cut.cost += a.capacity;
  return cut;
}

EnergyMapResult graphcut_map(const PairwiseEnergyModel& m) {
  m.validate();
  const auto norm = normalize_energies(m);
  FlowNetwork g;
  for (const auto& name : norm.names) g.add_node(name);
  g.source = g.add_node("__source");
  g.sink = g.add_node("__sink");
  for (std::size_t u = 0; u < norm.size(); ++u) {
    if (norm.unary[u][1] > 0.0) g.add_arc(g.source, u, norm.unary[u][1]);
    if (norm.unary[u][0] > 0.0) g.add_arc(u, g.sink, norm.unary[u][0]);
  }
  for (const auto& e : norm.edges)
    if (e.lambda > 0.0) g.add_edge(e.u, e.v, e.lambda);

  const auto cut = min_cut(g);
  EnergyMapResult out;
  out.assignment.assign(m.size(), 1);
  for (auto v : cut.source_side)
    if (v < m.size()) out.assignment[v] = 0;
  out.energy = m.energy(out.assignment);
  out.cut_cost = cut.cost;
  return out;
}

// ---------------------------------------------------------------------------
// ILP export

std::string export_map_ilp(const MarkovRandomField& m) {
  const auto terms = collect_terms(m);
  const auto& vars = m.variables();
  auto mu = [](std::size_t i, std::size_t s) { return "mu_" + std::to_string(i) + "_" + std::to_string(s); };
  auto mu2 = [](std::size_t i, std::size_t j, std::size_t s, std::size_t t) {
    return "mu_" + std::to_string(i) + "_" + std::to_string(j) + "_" + std::to_string(s) + "_" + std::to_string(t);
  };

  std::vector<std::pair<std::string, double>> objective;
  std::vector<std::string> all, fixed;
  for (std::size_t i = 0; i < vars.size(); ++i)
    for (std::size_t s = 0; s < vars[i]->cardinality(); ++s) {
      all.push_back(mu(i, s));
      const double theta = terms.unary[i][s];
      if (std::isfinite(theta)) objective.emplace_back(all.back(), theta);
      else fixed.push_back(all.back());
    }
  for (const auto& [key, theta] : terms.pair) {
    const auto [i, j] = key;
    const std::size_t cj = vars[j]->cardinality();
    for (std::size_t s = 0; s < vars[i]->cardinality(); ++s)
      for (std::size_t t = 0; t < cj; ++t) {
        all.push_back(mu2(i, j, s, t));
        const double v = theta[s * cj + t];
        if (std::isfinite(v)) objective.emplace_back(all.back(), v);
        else fixed.push_back(all.back());
      }
  }

  std::ostringstream os;
  os << "\\ MAP integer program of a pairwise Markov random field\n"
     << "\\ mu_i_s = [x_i = s] and mu_i_j_s_t = [x_i = s, x_j = t]; coefficients are log potentials\n"
     << "\\ LP relaxation: replace Binary by 0 <= mu <= 1 and round the fractional solution\n"
     << "\\ objective offset: " << fmt(terms.constant) << "\n";
  for (std::size_t i = 0; i < vars.size(); ++i) os << "\\ variable " << i << ": " << vars[i]->name() << "\n";

  os << "Maximize\n obj:";
  for (std::size_t k = 0; k < objective.size(); ++k) {
    if (k > 0 && k % 4 == 0) os << "\n     ";
    const double c = objective[k].second;
    os << (std::signbit(c) ? " - " : " + ") << fmt(std::abs(c)) << " " << objective[k].first;
  }
  if (objective.empty()) os << " 0 " << (all.empty() ? "mu_none" : all.front());
  os << "\nSubject To\n";
  for (std::size_t i = 0; i < vars.size(); ++i) {
    os << " norm_" << i << ":";
    for (std::size_t s = 0; s < vars[i]->cardinality(); ++s) os << (s ? " + " : " ") << mu(i, s);
    os << " = 1\n";
  }
  for (const auto& [key, theta] : terms.pair) {
    const auto [i, j] = key;
    const std::size_t ci = vars[i]->cardinality(), cj = vars[j]->cardinality();
    os << " norm_" << i << "_" << j << ":";
    for (std::size_t s = 0; s < ci; ++s)
      for (std::size_t t = 0; t < cj; ++t) os << (s || t ? " + " : " ") << mu2(i, j, s, t);
    os << " = 1\n";
    for (std::size_t s = 0; s < ci; ++s) {
      os << " cons_" << i << "_" << j << "_" << i << "_" << s << ":";
      for (std::size_t t = 0; t < cj; ++t) os << (t ? " + " : " ") << mu2(i, j, s, t);
      os << " - " << mu(i, s) << " = 0\n";
    }
    for (std::size_t t = 0; t < cj; ++t) {
      os << " cons_" << i << "_" << j << "_" << j << "_" << t << ":";
      for (std::size_t s = 0; s < ci; ++s) os << (s ? " + " : " ") << mu2(i, j, s, t);
      os << " - " << mu(j, t) << " = 0\n";
    }
  }
  os << "Bounds\n";
  for (const auto& name : all) {
    if (std::find(fixed.begin(), fixed.end(), name) != fixed.end()) os << " " << name << " = 0\n";
    else os << " 0 <= " << name << " <= 1\n";
  }
  os << "Binary\n";
  for (const auto& name : all) os << " " << name << "\n";
  os << "End\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Dual decomposition

DualResult dual_decomposition(const MarkovRandomField& m, const DualOptions& options) {
  const auto terms = collect_terms(m);
  const auto& vars = m.variables();
  const std::size_t n = vars.size();

  struct Slave {
    std::size_t i, j;
    const std::vector<double>* theta;
  };
  std::vector<Slave> slaves;
  for (const auto& [key, theta] : terms.pair) slaves.push_back({key.first, key.second, &theta});

  DualResult result;
  auto& st = result.state;
  st.delta.resize(slaves.size());
  for (std::size_t f = 0; f < slaves.size(); ++f) {
    st.delta[f][0].assign(vars[slaves[f].i]->cardinality(), 0.0);
    st.delta[f][1].assign(vars[slaves[f].j]->cardinality(), 0.0);
  }
  result.best.log_score = neg_inf;
  result.best_bound = std::numeric_limits<double>::infinity();

  auto primal = [&](const Assignment& x) {
    double v = terms.constant;
    for (std::size_t i = 0; i < n; ++i) v += terms.unary[i][x[i]];
    for (const auto& s : slaves) v += (*s.theta)[x[s.i] * vars[s.j]->cardinality() + x[s.j]];
    return v;
  };

  for (std::size_t k = 0;; ++k) {
    // Node slaves: θ_i + Σ δ_fi.
    std::vector<std::vector<double>> node = terms.unary;
    for (std::size_t f = 0; f < slaves.size(); ++f)
      for (std::size_t s = 0; s < node[slaves[f].i].size(); ++s) {
        node[slaves[f].i][s] += st.delta[f][0][s];
      }
    for (std::size_t f = 0; f < slaves.size(); ++f)
      for (std::size_t s = 0; s < node[slaves[f].j].size(); ++s) node[slaves[f].j][s] += st.delta[f][1][s];

    double bound = terms.constant;
    st.node_argmax.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto best = std::max_element(node[i].begin(), node[i].end());
      st.node_argmax[i] = static_cast<int>(best - node[i].begin());
      bound += *best;
    }
    // Pairwise slaves: θ_f - δ_fi - δ_fj.
    st.factor_argmax.assign(slaves.size(), {0, 0});
    bool agree = true;
    for (std::size_t f = 0; f < slaves.size(); ++f) {
      const auto& s = slaves[f];
      const std::size_t ci = vars[s.i]->cardinality(), cj = vars[s.j]->cardinality();
      double best = neg_inf;
      std::array<int, 2> arg{0, 0};
      for (std::size_t a = 0; a < ci; ++a)
        for (std::size_t b = 0; b < cj; ++b) {
          const double v = (*s.theta)[a * cj + b] - st.delta[f][0][a] - st.delta[f][1][b];
          if (v > best) {
            best = v;
            arg = {static_cast<int>(a), static_cast<int>(b)};
          }
        }
      st.factor_argmax[f] = arg;
      bound += best;
      agree = agree && arg[0] == st.node_argmax[s.i] && arg[1] == st.node_argmax[s.j];
    }

    st.bound = bound;
    st.bound_trace.push_back(bound);
    const double value = primal(st.node_argmax);
    st.primal_trace.push_back(value);
    result.best_bound = std::min(result.best_bound, bound);
    if (value > result.best.log_score) result.best = {st.node_argmax, value};
    st.iterations = k;
    st.agreement = agree;
    if (agree || k >= options.max_iterations || result.best_bound - result.best.log_score <= options.tolerance) break;

    // Subgradient step: dL/dδ_fi(x) = [x = node argmax] - [x = factor argmax].
    const double step = options.step_scale / std::sqrt(static_cast<double>(k + 1));
    for (std::size_t f = 0; f < slaves.size(); ++f)
      for (int side = 0; side < 2; ++side) {
        const std::size_t v = side == 0 ? slaves[f].i : slaves[f].j;
        const int xn = st.node_argmax[v], xf = st.factor_argmax[f][side];
        if (xn == xf) continue;
        st.delta[f][side][xn] -= step;
        st.delta[f][side][xf] += step;
      }
  }
  result.best.log_score = log_joint(m, result.best.assignment);
  result.gap = result.best_bound - result.best.log_score;
  return result;
}

// ---------------------------------------------------------------------------
// Local search and annealing

MapResult local_search_map(const GraphicalModel& m, RandomSource& rng, std::size_t max_sweeps, const Assignment& start) {
  Assignment x = start.empty() ? random_assignment(m, rng) : start;
  if (x.size() != m.variable_count()) fail(Errc::assignment, "start assignment does not cover the model");
  const LocalScorer scorer(m);
  for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
    bool changed = false;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const int card = static_cast<int>(m.variables()[i]->cardinality());
      int best = x[i];
      double best_score = scorer.log_score(i, x, x[i]);
      for (int s = 0; s < card; ++s) {
        const double v = scorer.log_score(i, x, s);
        if (v > best_score) {
          best_score = v;
          best = s;
        }
      }
      if (best != x[i]) {
        x[i] = best;
        changed = true;
      }
    }
    if (!changed) break;
  }
  return {x, log_joint(m, x)};
}

MapResult simulated_annealing_map(const GraphicalModel& m, const AnnealingSchedule& schedule, RandomSource& rng) {
  if (!(schedule.initial_temperature > 0.0) || !(schedule.cooling > 0.0) || schedule.cooling > 1.0)
    fail(Errc::argument, "annealing needs a positive temperature and a cooling factor in (0, 1]");
  Assignment x = random_assignment(m, rng);
  const LocalScorer scorer(m);
  double current = log_joint(m, x);
  MapResult best{x, current};
  double t = schedule.initial_temperature;
  for (std::size_t sweep = 0; sweep < schedule.sweeps; ++sweep, t *= schedule.cooling) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      const auto card = m.variables()[i]->cardinality();
      if (card < 2) continue;
      int proposal = static_cast<int>(rng.below(card - 1));
      if (proposal >= x[i]) ++proposal;
      const double before = scorer.log_score(i, x, x[i]);
      const double after = scorer.log_score(i, x, proposal);
      const double u = rng.uniform();
      const bool accept = std::isinf(before) && before < 0 ? true : after >= before || u < std::exp((after - before) / t);
      if (!accept) continue;
      x[i] = proposal;
      current = std::isfinite(before) && std::isfinite(after) ? current + (after - before) : log_joint(m, x);
      if (current > best.log_score) best = {x, current};
    }
  }
  best.log_score = log_joint(m, best.assignment);
  return best;
}

}  // namespace pgm
