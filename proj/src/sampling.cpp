#include "pgm/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <numeric>
#include <sstream>

namespace pgm {

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

std::size_t hidden_count(const GraphicalModel& m, const IndexEvidence& evidence) {
  return m.variable_count() - evidence.size();
}

std::vector<std::size_t> hidden_indices(const GraphicalModel& m, const IndexEvidence& evidence) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < m.variable_count(); ++i)
    if (!evidence.count(m.variables()[i]->name())) out.push_back(i);
  return out;
}

bool matches_evidence(const GraphicalModel& m, const IndexEvidence& evidence, const Assignment& x) {
  for (const auto& [name, s] : evidence)
    if (x[m.require_index(name)] != s) return false;
  return true;
}

/// Row-major flat index of a full assignment over the model's variables.
std::size_t flat_of(const GraphicalModel& m, const Assignment& x) {
  std::size_t flat = 0;
  for (std::size_t i = 0; i < x.size(); ++i) flat = flat * m.variables()[i]->cardinality() + static_cast<std::size_t>(x[i]);
  return flat;
}

Assignment unflat(const GraphicalModel& m, std::size_t flat) {
  Assignment x(m.variable_count());
  for (std::size_t i = x.size(); i-- > 0;) {
    const auto card = m.variables()[i]->cardinality();
    x[i] = static_cast<int>(flat % card);
    flat /= card;
  }
  return x;
}

std::size_t joint_size(const GraphicalModel& m, std::size_t cap) {
  std::size_t n = 1;
  for (const auto& v : m.variables()) {
    n *= v->cardinality();
    if (n > cap) fail(Errc::too_large, "joint state space exceeds " + std::to_string(cap) + " states");
  }
  return n;
}

/// Per-variable CPD lookup for ancestral sampling.
struct AncestralPlan {
  struct Step {
    std::size_t var;
    std::vector<std::size_t> parents;
    std::size_t n_parent = 1;
    Factor cpd;
  };
  std::vector<Step> steps;

  explicit AncestralPlan(const BayesianNetwork& bn) {
    require_valid(bn);
    for (const auto& name : topological_sort(bn.dag())) {
      Step s;
      s.var = bn.require_index(name);
      s.cpd = bn.cpd(name).to_linear();
      for (std::size_t k = 1; k < s.cpd.arity(); ++k) {
        s.parents.push_back(bn.require_index(s.cpd.scope()[k]->name()));
        s.n_parent *= s.cpd.scope()[k]->cardinality();
      }
      steps.push_back(std::move(s));
    }
  }

  std::size_t parent_config(const Step& s, const Assignment& x) const {
    std::size_t p = 0;
    for (std::size_t k = 0; k < s.parents.size(); ++k)
      p = p * s.cpd.scope()[k + 1]->cardinality() + static_cast<std::size_t>(x[s.parents[k]]);
    return p;
  }

  std::vector<double> column(const Step& s, const Assignment& x) const {
    const std::size_t p = parent_config(s, x);
    const std::size_t card = s.cpd.scope()[0]->cardinality();
    std::vector<double> w(card);
    for (std::size_t c = 0; c < card; ++c) w[c] = s.cpd[c * s.n_parent + p];
    return w;
  }

  Assignment draw(std::size_t n_vars, RandomSource& rng, const IndexEvidence& clamp = {},
                  const std::vector<std::string>* names = nullptr) const {
    Assignment x(n_vars, 0);
    for (const auto& s : steps) {
      if (names) {
        auto it = clamp.find((*names)[s.var]);
        if (it != clamp.end()) {
          x[s.var] = it->second;
          continue;
        }
      }
      const auto w = column(s, x);
      x[s.var] = static_cast<int>(rng.categorical(w));
    }
    return x;
  }
};

SampleBatch empty_batch(const GraphicalModel& m, const RandomSource& rng) {
  SampleBatch b;
  b.variables = m.variables();
  b.seed = rng.seed();
  return b;
}

double mh_log_acceptance(double lp_from, double lp_to, double q_forward, double q_reverse) {
  if (!(q_reverse > 0.0)) fail(Errc::invalid_kernel, "proposal cannot return to the current state (reverse density 0)");
  if (std::isinf(lp_from) && lp_from < 0) return 0.0;
  if (std::isinf(lp_to) && lp_to < 0) return -std::numeric_limits<double>::infinity();
  return std::min(0.0, lp_to - lp_from + std::log(q_reverse) - std::log(q_forward));
}

}  // namespace

// ---------------------------------------------------------------------------
// SampleBatch

std::string SampleBatch::to_csv() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < variables.size(); ++i) os << (i ? "," : "") << csv_field(variables[i]->name());
  if (!weights.empty()) os << (variables.empty() ? "" : ",") << "weight";
  os << "\n";
  char buf[32];
  for (std::size_t r = 0; r < samples.size(); ++r) {
    for (std::size_t i = 0; i < variables.size(); ++i)
      os << (i ? "," : "") << csv_field(variables[i]->state_label(samples[r][i]));
    if (!weights.empty()) {
      std::snprintf(buf, sizeof buf, "%.17g", weights[r]);
      os << (variables.empty() ? "" : ",") << buf;
    }
    os << "\n";
  }
  return os.str();
}

std::vector<double> empirical_marginal(const SampleBatch& batch, const std::string& var) {
  auto it = std::find_if(batch.variables.begin(), batch.variables.end(),
                         [&](const VarRef& v) { return v->name() == var; });
  if (it == batch.variables.end()) fail(Errc::lookup, "batch has no variable '" + var + "'");
  const auto idx = static_cast<std::size_t>(it - batch.variables.begin());
  std::vector<double> out((*it)->cardinality(), 0.0);
  double total = 0.0;
  for (std::size_t r = 0; r < batch.samples.size(); ++r) {
    const double w = batch.weights.empty() ? 1.0 : batch.weights[r];
    out[static_cast<std::size_t>(batch.samples[r][idx])] += w;
    total += w;
  }
  if (total > 0.0)
    for (auto& p : out) p /= total;
  return out;
}

// ---------------------------------------------------------------------------
// Direct samplers

SampleBatch forward_sample(const BayesianNetwork& bn, std::size_t n, RandomSource& rng) {
  const AncestralPlan plan(bn);
  SampleBatch b = empty_batch(bn, rng);
  b.samples.reserve(n);
  for (std::size_t t = 0; t < n; ++t) b.samples.push_back(plan.draw(bn.variable_count(), rng));
  return b;
}

SampleBatch jt_forward_sample(const JunctionTree& jt, std::size_t n, RandomSource& rng) {
  if (!jt.calibrated || jt.semiring != SemiringKind::sum_product)
    fail(Errc::state, "jt_forward_sample needs a sum-product calibrated junction tree");
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < jt.variables.size(); ++i) index[jt.variables[i]->name()] = i;

  // Breadth-first clique order; every clique after the first shares its sepset with an earlier one.
  std::vector<std::size_t> order;
  std::vector<bool> seen(jt.cliques.size(), false);
  for (std::size_t root = 0; root < jt.cliques.size(); ++root) {
    if (seen[root]) continue;
    seen[root] = true;
    std::deque<std::size_t> queue{root};
    while (!queue.empty()) {
      const auto c = queue.front();
      queue.pop_front();
      order.push_back(c);
      for (auto d : jt.neighbors(c))
        if (!seen[d]) {
          seen[d] = true;
          queue.push_back(d);
        }
    }
  }

  struct CliquePlan {
    const Factor* belief;
    std::vector<std::size_t> vars;  // model index per belief scope position
  };
  std::vector<CliquePlan> plans;
  for (auto c : order) {
    CliquePlan p{&jt.beliefs[c], {}};
    for (const auto& v : jt.beliefs[c].scope()) p.vars.push_back(index.at(v->name()));
    plans.push_back(std::move(p));
  }

  SampleBatch b;
  b.variables = jt.variables;
  b.seed = rng.seed();
  b.samples.reserve(n);
  std::vector<double> w;
  for (std::size_t t = 0; t < n; ++t) {
    Assignment x(jt.variables.size(), -1);
    for (const auto& p : plans) {
      const Factor& beta = *p.belief;
      w.assign(beta.size(), 0.0);
      for (std::size_t flat = 0; flat < beta.size(); ++flat) {
        const auto states = beta.unflatten(flat);
        bool ok = true;
        for (std::size_t k = 0; k < states.size() && ok; ++k) ok = x[p.vars[k]] < 0 || x[p.vars[k]] == states[k];
        if (ok) w[flat] = beta[flat];
      }
      const auto states = beta.unflatten(rng.categorical(w));
      for (std::size_t k = 0; k < states.size(); ++k) x[p.vars[k]] = states[k];
    }
    for (auto& s : x)
      if (s < 0) s = 0;
    b.samples.push_back(std::move(x));
  }
  return b;
}

RejectionResult rejection_estimate(const BayesianNetwork& bn, const IndexEvidence& evidence, std::size_t n,
                                   RandomSource& rng) {
  check_evidence(bn, evidence);
  const AncestralPlan plan(bn);
  RejectionResult r;
  r.draws = n;
  for (std::size_t t = 0; t < n; ++t)
    if (matches_evidence(bn, evidence, plan.draw(bn.variable_count(), rng))) ++r.accepted;
  r.estimate = n ? static_cast<double>(r.accepted) / static_cast<double>(n) : 0.0;
  if (r.accepted == 0)
    r.warning = "no sample matched the evidence after " + std::to_string(n) + " draws; estimate is 0";
  return r;
}

// ---------------------------------------------------------------------------
// Importance sampling

Proposal uniform_proposal(const GraphicalModel& m, const IndexEvidence& evidence) {
  check_evidence(m, evidence);
  const auto hidden = hidden_indices(m, evidence);
  Assignment base(m.variable_count(), 0);
  for (const auto& [name, s] : evidence) base[m.require_index(name)] = s;
  double density = 1.0;
  std::vector<std::size_t> cards;
  for (auto i : hidden) {
    cards.push_back(m.variables()[i]->cardinality());
    density /= static_cast<double>(cards.back());
  }
  Proposal q;
  q.sample = [=](RandomSource& rng) {
    Assignment x = base;
    for (std::size_t k = 0; k < hidden.size(); ++k) x[hidden[k]] = static_cast<int>(rng.below(cards[k]));
    return x;
  };
  q.density = [=, &m](const Assignment& x) { return matches_evidence(m, evidence, x) ? density : 0.0; };
  return q;
}

Proposal prior_proposal(const BayesianNetwork& bn, const IndexEvidence& evidence) {
  check_evidence(bn, evidence);
  auto plan = std::make_shared<AncestralPlan>(bn);
  auto names = std::make_shared<std::vector<std::string>>(bn.variable_names());
  const std::size_t n = bn.variable_count();
  Proposal q;
  q.sample = [=](RandomSource& rng) { return plan->draw(n, rng, evidence, names.get()); };
  q.density = [=](const Assignment& x) {
    double d = 1.0;
    for (const auto& s : plan->steps) {
      auto it = evidence.find((*names)[s.var]);
      if (it != evidence.end()) {
        if (x[s.var] != it->second) return 0.0;
        continue;
      }
      d *= plan->column(s, x)[static_cast<std::size_t>(x[s.var])];
    }
    return d;
  };
  return q;
}

Proposal table_proposal(const GraphicalModel& m, const IndexEvidence& evidence, const Factor& q_table) {
  check_evidence(m, evidence);
  const Factor table = q_table.to_linear();
  std::vector<std::size_t> pos;
  for (const auto& v : table.scope()) {
    if (evidence.count(v->name())) fail(Errc::scope, "proposal table must not cover evidence variable '" + v->name() + "'");
    pos.push_back(m.require_index(v->name()));
  }
  if (pos.size() != hidden_count(m, evidence))
    fail(Errc::scope, "proposal table must cover every non-evidence variable");
  const double total = table.values().sum();
  if (!(total > 0.0)) fail(Errc::degenerate_distribution, "proposal table has zero mass");
  Assignment base(m.variable_count(), 0);
  for (const auto& [name, s] : evidence) base[m.require_index(name)] = s;
  std::vector<double> weights(table.values().data(), table.values().data() + table.size());

  Proposal q;
  q.sample = [=](RandomSource& rng) {
    Assignment x = base;
    const auto states = table.unflatten(rng.categorical(weights));
    for (std::size_t k = 0; k < pos.size(); ++k) x[pos[k]] = states[k];
    return x;
  };
  q.density = [=, &m](const Assignment& x) {
    if (!matches_evidence(m, evidence, x)) return 0.0;
    std::vector<int> local;
    for (auto p : pos) local.push_back(x[p]);
    return table.at(local) / total;
  };
  return q;
}

ImportanceResult importance_estimate(const GraphicalModel& m, const IndexEvidence& evidence, const Proposal& q,
                                     std::size_t n, RandomSource& rng, const std::optional<ImportanceQuery>& query,
                                     bool normalized) {
  check_evidence(m, evidence);
  if (n == 0) fail(Errc::argument, "importance sampling needs at least one sample");
  std::optional<std::size_t> qi;
  if (query) {
    qi = m.require_index(query->variable);
    if (query->state < 0 || static_cast<std::size_t>(query->state) >= m.variables()[*qi]->cardinality())
      fail(Errc::evidence, "query state out of range for '" + query->variable + "'");
  }
  ImportanceResult r;
  r.batch = empty_batch(m, rng);
  double sum_w = 0.0, sum_w2 = 0.0, sum_dw = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    Assignment x = q.sample(rng);
    const double p = matches_evidence(m, evidence, x) ? std::exp(log_joint(m, x)) : 0.0;
    const double d = q.density(x);
    double w = 0.0;
    if (p > 0.0) {
      if (!(d > 0.0)) fail(Errc::infinite_weight, "proposal density is zero at a sample with positive target mass");
      w = p / d;
    }
    sum_w += w;
    sum_w2 += w * w;
    if (qi && x[*qi] == query->state) sum_dw += w;
    r.batch.samples.push_back(std::move(x));
    r.batch.weights.push_back(w);
  }
  const double T = static_cast<double>(n);
  r.evidence_estimate = sum_w / T;
  r.effective_sample_size = sum_w2 > 0.0 ? sum_w * sum_w / sum_w2 : 0.0;
  if (!qi) {
    r.estimate = r.evidence_estimate;
  } else if (normalized) {
    if (!(sum_w > 0.0)) fail(Errc::zero_evidence, "every importance weight is zero");
    r.estimate = sum_dw / sum_w;
  } else {
    r.estimate = sum_dw / T;
  }
  return r;
}

// ---------------------------------------------------------------------------
// MCMC

namespace {

std::vector<std::size_t> name_order(const GraphicalModel& m, const IndexEvidence& evidence) {
  auto idx = hidden_indices(m, evidence);
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return m.variables()[a]->name() < m.variables()[b]->name(); });
  return idx;
}

Assignment initial_state(const GraphicalModel& m, const IndexEvidence& evidence, RandomSource& rng) {
  const auto* bn = dynamic_cast<const BayesianNetwork*>(&m);
  std::optional<AncestralPlan> plan;
  if (bn) plan.emplace(*bn);
  Assignment x;
  for (int attempt = 0; attempt < 1000; ++attempt) {
    if (plan) {
      x = plan->draw(m.variable_count(), rng);
    } else {
      x.assign(m.variable_count(), 0);
      for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<int>(rng.below(m.variables()[i]->cardinality()));
    }
    for (const auto& [name, s] : evidence) x[m.require_index(name)] = s;
    if (std::isfinite(log_joint(m, x))) break;
  }
  return x;
}

}  // namespace

SampleBatch gibbs(const GraphicalModel& m, const IndexEvidence& evidence, std::size_t n, RandomSource& rng,
                  const GibbsOptions& options) {
  check_evidence(m, evidence);
  const LocalScorer scorer(m);
  const auto order = name_order(m, evidence);
  Assignment x = options.initial ? *options.initial : initial_state(m, evidence, rng);
  if (x.size() != m.variable_count()) fail(Errc::assignment, "initial Gibbs state does not cover the model");
  for (const auto& [name, s] : evidence) x[m.require_index(name)] = s;

  SampleBatch b = empty_batch(m, rng);
  b.burn_in = options.burn_in.value_or(n / 10);
  b.samples.reserve(n);
  auto update = [&](std::size_t i) {
    const auto p = scorer.conditional(i, x);
    x[i] = static_cast<int>(rng.categorical(p));
  };
  for (std::size_t sweep = 0; sweep < b.burn_in + n; ++sweep) {
    if (options.random_scan) {
      for (std::size_t k = 0; k < order.size(); ++k) update(order[rng.below(order.size())]);
    } else {
      for (auto i : order) update(i);
    }
    if (sweep >= b.burn_in) b.samples.push_back(x);
  }
  return b;
}

MhProposal single_flip_proposal(const GraphicalModel& m, const IndexEvidence& evidence) {
  check_evidence(m, evidence);
  std::vector<std::size_t> movable;
  for (auto i : hidden_indices(m, evidence))
    if (m.variables()[i]->cardinality() > 1) movable.push_back(i);
  if (movable.empty()) fail(Errc::argument, "no variable can be flipped");
  std::vector<std::size_t> cards;
  for (const auto& v : m.variables()) cards.push_back(v->cardinality());
  MhProposal q;
  q.sample = [=](const Assignment& x, RandomSource& rng) {
    Assignment y = x;
    const auto i = movable[rng.below(movable.size())];
    auto s = static_cast<int>(rng.below(cards[i] - 1));
    if (s >= x[i]) ++s;
    y[i] = s;
    return y;
  };
  q.density = [=](const Assignment& to, const Assignment& from) {
    std::size_t diff = 0, where = 0;
    for (std::size_t i = 0; i < to.size(); ++i)
      if (to[i] != from[i]) {
        ++diff;
        where = i;
      }
    if (diff != 1 || std::find(movable.begin(), movable.end(), where) == movable.end()) return 0.0;
    return 1.0 / static_cast<double>(movable.size()) / static_cast<double>(cards[where] - 1);
  };
  return q;
}

MhProposal gibbs_proposal(const GraphicalModel& m, const IndexEvidence& evidence) {
  check_evidence(m, evidence);
  const auto hidden = hidden_indices(m, evidence);
  if (hidden.empty()) fail(Errc::argument, "no variable left to resample");
  auto scorer = std::make_shared<LocalScorer>(m);
  MhProposal q;
  q.sample = [=](const Assignment& x, RandomSource& rng) {
    Assignment y = x;
    const auto i = hidden[rng.below(hidden.size())];
    y[i] = static_cast<int>(rng.categorical(scorer->conditional(i, x)));
    return y;
  };
  q.density = [=](const Assignment& to, const Assignment& from) {
    std::vector<std::size_t> diff;
    for (std::size_t i = 0; i < to.size(); ++i)
      if (to[i] != from[i]) diff.push_back(i);
    const double pick = 1.0 / static_cast<double>(hidden.size());
    if (diff.size() > 1) return 0.0;
    if (diff.size() == 1) {
      if (std::find(hidden.begin(), hidden.end(), diff[0]) == hidden.end()) return 0.0;
      return pick * scorer->conditional(diff[0], from)[static_cast<std::size_t>(to[diff[0]])];
    }
    double stay = 0.0;
    for (auto i : hidden) stay += pick * scorer->conditional(i, from)[static_cast<std::size_t>(from[i])];
    return stay;
  };
  return q;
}

MhProposal independent_proposal(const GraphicalModel& m, const Factor& q_table) {
  const Factor table = q_table.to_linear();
  if (table.arity() != m.variable_count()) fail(Errc::scope, "independent proposal must cover every variable");
  for (std::size_t i = 0; i < table.arity(); ++i)
    if (table.scope()[i]->name() != m.variables()[i]->name())
      fail(Errc::scope, "independent proposal scope must follow the model variable order");
  const double total = table.values().sum();
  if (!(total > 0.0)) fail(Errc::degenerate_distribution, "proposal table has zero mass");
  std::vector<double> weights(table.values().data(), table.values().data() + table.size());
  MhProposal q;
  q.sample = [=](const Assignment&, RandomSource& rng) {
    const auto s = table.unflatten(rng.categorical(weights));
    return Assignment(s.begin(), s.end());
  };
  q.density = [=](const Assignment& to, const Assignment&) { return table.at(to) / total; };
  return q;
}

SampleBatch metropolis_hastings(const GraphicalModel& m, const MhProposal& proposal, std::size_t n, RandomSource& rng,
                                const IndexEvidence& evidence, std::optional<std::size_t> burn_in,
                                std::optional<Assignment> initial) {
  check_evidence(m, evidence);
  Assignment x = initial ? *initial : initial_state(m, evidence, rng);
  if (x.size() != m.variable_count()) fail(Errc::assignment, "initial MH state does not cover the model");
  double lp = log_joint(m, x);
  SampleBatch b = empty_batch(m, rng);
  b.burn_in = burn_in.value_or(n / 10);
  b.samples.reserve(n);
  std::size_t accepted = 0, steps = 0;
  for (std::size_t t = 0; t < b.burn_in + n; ++t) {
    Assignment y = proposal.sample(x, rng);
    const double lq = log_joint(m, y);
    const double a = mh_log_acceptance(lp, lq, proposal.density(y, x), proposal.density(x, y));
    ++steps;
    if (a >= 0.0 || rng.uniform() < std::exp(a)) {
      x = std::move(y);
      lp = lq;
      ++accepted;
    }
    if (t >= b.burn_in) b.samples.push_back(x);
  }
  b.acceptance_rate = steps ? static_cast<double>(accepted) / static_cast<double>(steps) : 1.0;
  return b;
}

Eigen::MatrixXd gibbs_sweep_kernel(const GraphicalModel& m) {
  const std::size_t d = joint_size(m, 4096);
  const LocalScorer scorer(m);
  Eigen::MatrixXd K = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (auto i : name_order(m, {})) {
    Eigen::MatrixXd Ki = Eigen::MatrixXd::Zero(K.rows(), K.cols());
    for (std::size_t j = 0; j < d; ++j) {
      Assignment x = unflat(m, j);
      std::vector<double> p;
      try {
        p = scorer.conditional(i, x);
      } catch (const Error& e) {
        if (e.code() != Errc::trapped_state) throw;
        Ki(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) = 1.0;
        continue;
      }
      for (std::size_t s = 0; s < p.size(); ++s) {
        x[i] = static_cast<int>(s);
        Ki(static_cast<Eigen::Index>(flat_of(m, x)), static_cast<Eigen::Index>(j)) += p[s];
      }
    }
    K = Ki * K;
  }
  return K;
}

Eigen::MatrixXd mh_kernel(const GraphicalModel& m, const MhProposal& proposal) {
  const std::size_t d = joint_size(m, 4096);
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  std::vector<double> lp(d);
  for (std::size_t j = 0; j < d; ++j) lp[j] = log_joint(m, unflat(m, j));
  for (std::size_t j = 0; j < d; ++j) {
    const Assignment x = unflat(m, j);
    double leave = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      if (i == j) continue;
      const Assignment y = unflat(m, i);
      const double qf = proposal.density(y, x);
      if (qf <= 0.0) continue;
      const double a = std::exp(mh_log_acceptance(lp[j], lp[i], qf, proposal.density(x, y)));
      K(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = qf * a;
      leave += qf * a;
    }
    K(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) = 1.0 - leave;
  }
  return K;
}

// ---------------------------------------------------------------------------
// Chain diagnostics

ChainDiagnostics chain_analysis(const Eigen::MatrixXd& T, const std::optional<Eigen::VectorXd>& p0, double tolerance,
                                std::size_t max_iterations) {
  if (T.rows() != T.cols() || T.rows() == 0) fail(Errc::shape, "transition matrix must be square and non-empty");
  const auto d = T.rows();
  if (!T.allFinite() || (T.array() < 0.0).any()) fail(Errc::invalid_model, "transition probabilities must be finite and nonnegative");
  for (Eigen::Index j = 0; j < d; ++j)
    if (std::abs(T.col(j).sum() - 1.0) > 1e-12)
      fail(Errc::invalid_model, "column " + std::to_string(j) + " of the transition matrix does not sum to one");

  ChainDiagnostics out;
  Eigen::VectorXd p = p0 ? *p0 : Eigen::VectorXd::Constant(d, 1.0 / static_cast<double>(d));
  if (p.size() != d || (p.array() < 0.0).any() || std::abs(p.sum() - 1.0) > 1e-9)
    fail(Errc::argument, "initial distribution must be a probability vector of matching size");
  const Eigen::MatrixXd lazy = 0.5 * (Eigen::MatrixXd::Identity(d, d) + T);
  for (out.iterations = 0; out.iterations < max_iterations; ++out.iterations) {
    Eigen::VectorXd next = lazy * p;
    next /= next.sum();
    const double change = (next - p).lpNorm<1>();
    p = std::move(next);
    if (change < tolerance) {
      out.converged = true;
      ++out.iterations;
      break;
    }
  }
  out.stationary = p;

  // reach(i, j): j reachable from i along positive transitions (i -> j when T(j, i) > 0).
  const auto n = static_cast<std::size_t>(d);
  std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) reach[i][j] = T(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) > 0.0;
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      if (reach[i][k])
        for (std::size_t j = 0; j < n; ++j)
          if (reach[k][j]) reach[i][j] = true;
  out.irreducible = true;
  for (std::size_t i = 0; i < n && out.irreducible; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && !reach[i][j]) {
        out.irreducible = false;
        break;
      }

  // Period of a state: gcd of (level(u) + 1 - level(v)) over edges inside its communicating class.
  out.periods.assign(n, 0);
  for (std::size_t s = 0; s < n; ++s) {
    if (!reach[s][s]) continue;
    auto same_class = [&](std::size_t v) { return v == s || (reach[s][v] && reach[v][s]); };
    std::vector<long> level(n, -1);
    level[s] = 0;
    std::deque<std::size_t> queue{s};
    long g = 0;
    while (!queue.empty()) {
      const auto u = queue.front();
      queue.pop_front();
      for (std::size_t v = 0; v < n; ++v) {
        if (!(T(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(u)) > 0.0) || !same_class(v)) continue;
        if (level[v] < 0) {
          level[v] = level[u] + 1;
          queue.push_back(v);
        } else {
          g = std::gcd(g, std::abs(level[u] + 1 - level[v]));
        }
      }
    }
    out.periods[s] = static_cast<std::size_t>(g);
  }
  out.aperiodic = std::all_of(out.periods.begin(), out.periods.end(), [](std::size_t k) { return k == 1; });

  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j)
      out.detailed_balance_residual =
          std::max(out.detailed_balance_residual, std::abs(p[j] * T(i, j) - p[i] * T(j, i)));
  return out;
}

ModeOccupancy mode_occupancy(const SampleBatch& batch, const std::vector<Assignment>& modes, std::size_t blocks,
                             double threshold, const std::vector<double>& expected) {
  if (blocks == 0 || modes.empty()) fail(Errc::argument, "mode occupancy needs at least one block and one mode");
  std::vector<double> share = expected;
  if (share.empty()) share.assign(modes.size(), 1.0);
  if (share.size() != modes.size()) fail(Errc::argument, "expected mode weights must match the modes");
  const double total = std::accumulate(share.begin(), share.end(), 0.0);
  if (!(total > 0.0)) fail(Errc::argument, "expected mode weights must have positive mass");
  for (auto& w : share) w /= total;

  ModeOccupancy out;
  const std::size_t n = batch.samples.size();
  out.block_fractions.assign(blocks, std::vector<double>(modes.size(), 0.0));
  std::vector<std::size_t> block_size(blocks, 0);
  std::optional<std::size_t> last;
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t blk = std::min(blocks - 1, t * blocks / n);
    ++block_size[blk];
    for (std::size_t k = 0; k < modes.size(); ++k)
      if (batch.samples[t] == modes[k]) {
        out.block_fractions[blk][k] += 1.0;
        if (last && *last != k) ++out.switches;
        last = k;
      }
  }
  for (std::size_t blk = 0; blk < blocks; ++blk) {
    auto& f = out.block_fractions[blk];
    const double visits = std::accumulate(f.begin(), f.end(), 0.0);
    if (visits > 0.0)
      for (std::size_t k = 0; k < modes.size(); ++k)
        out.imbalance = std::max(out.imbalance, std::abs(f[k] / visits - share[k]));
    for (auto& v : f) v = block_size[blk] ? v / static_cast<double>(block_size[blk]) : 0.0;
  }
  out.slow_mixing = out.imbalance > threshold;
  return out;
}

}  // namespace pgm
