#include <doctest.h>

#include <deque>
#include <random>

#include "pgm/exact.hpp"
#include "pgm/variational.hpp"
#include "support/oracles.hpp"

using namespace pgm;

namespace {

FactoredDistribution random_q(std::mt19937_64& rng, const std::vector<VarRef>& vars, bool allow_zeros = false) {
  FactoredDistribution q;
  q.variables = vars;
  for (const auto& v : vars) {
    std::vector<double> row(v->cardinality());
    for (auto& p : row) p = allow_zeros && oracle::uniform(rng) < 0.2 ? 0.0 : oracle::uniform(rng, 0.01, 1.0);
    if (std::accumulate(row.begin(), row.end(), 0.0) == 0.0) row[0] = 1.0;
    const double z = std::accumulate(row.begin(), row.end(), 0.0);
    for (auto& p : row) p /= z;
    q.q.push_back(row);
  }
  return q;
}

/// KL(q ∥ p) by direct summation over the brute-force joint.
double brute_kl(const GraphicalModel& m, const FactoredDistribution& q, const IndexEvidence& ev = {}) {
  const auto joint = oracle::brute_joint(m, ev);
  const double z = std::accumulate(joint.begin(), joint.end(), 0.0);
  double kl = 0.0;
  for (std::size_t flat = 0; flat < joint.size(); ++flat) {
    const auto x = oracle::unflatten(m, flat);
    double qx = 1.0;
    for (std::size_t i = 0; i < x.size(); ++i) qx *= q.q[i][static_cast<std::size_t>(x[i])];
    if (qx > 0.0) kl += qx * std::log(qx / (joint[flat] / z));
  }
  return kl;
}

MarkovRandomField frustrated_square() {
  MarkovRandomField m;
  std::vector<VarRef> v;
  for (const char* n : {"S1", "S2", "S3", "S4"}) {
    v.push_back(make_variable(n, {"-", "+"}));
    m.add_variable(v.back());
  }
  const double J[4] = {1.0, 1.0, 1.0, -1.0};
  for (int i = 0; i < 4; ++i) {
    const double a = std::exp(J[i]), b = std::exp(-J[i]);
    m.add_factor(Factor({v[i], v[(i + 1) % 4]}, {a, b, b, a}));
  }
  m.add_factor(Factor({v[0]}, {0.8, 1.2}));
  return m;
}

MarkovRandomField four_cycle(std::mt19937_64& rng) {
  MarkovRandomField m;
  std::vector<VarRef> v;
  for (const char* n : {"A", "B", "C", "D"}) {
    v.push_back(make_variable(n, {"0", "1"}));
    m.add_variable(v.back());
    m.add_factor(oracle::random_factor(rng, {v.back()}, 0.3, 1.0));
  }
  for (int i = 0; i < 4; ++i) m.add_factor(oracle::random_factor(rng, {v[i], v[(i + 1) % 4]}, 0.3, 1.0));
  return m;
}

/// Longest shortest path (in edges) of the bipartite variable/factor graph.
std::size_t factor_graph_diameter(const GraphicalModel& m) {
  const std::size_t n = m.variable_count();
  const auto factors = m.factors();
  std::vector<std::vector<std::size_t>> adj(n + factors.size());
  for (std::size_t f = 0; f < factors.size(); ++f)
    for (const auto& v : factors[f].scope()) {
      adj[n + f].push_back(m.require_index(v->name()));
      adj[m.require_index(v->name())].push_back(n + f);
    }
  std::size_t best = 0;
  for (std::size_t s = 0; s < adj.size(); ++s) {
    std::vector<long> dist(adj.size(), -1);
    dist[s] = 0;
    std::deque<std::size_t> queue{s};
    while (!queue.empty()) {
      const auto u = queue.front();
      queue.pop_front();
      for (auto w : adj[u])
        if (dist[w] < 0) {
          dist[w] = dist[u] + 1;
          best = std::max(best, static_cast<std::size_t>(dist[w]));
          queue.push_back(w);
        }
    }
  }
  return best;
}

template <class F>
Errc error_code(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::internal;
}

}  // namespace

TEST_CASE("KL divergence of identical and point-mass distributions") {
  auto a = make_variable("A", {"0", "1"});
  const Factor p({a}, {0.5, 0.5});
  CHECK(kl_divergence(p, p) == 0.0);
  CHECK(kl_divergence(Factor({a}, {1.0, 0.0}), p) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(std::isinf(kl_divergence(p, Factor({a}, {1.0, 0.0}))));
}

TEST_CASE("KL divergence is nonnegative and ignores scope order") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 200; ++t) {
    auto vars = oracle::random_variables(rng, 3, 3);
    const Factor q = oracle::random_factor(rng, vars, 0.0, 1.0);
    const Factor p = oracle::random_factor(rng, vars, 0.01, 1.0);
    const double kl = kl_divergence(q, p);
    CHECK(kl >= -1e-12);
    CHECK(kl_divergence(q, reorder(p, {vars[2]->name(), vars[0]->name(), vars[1]->name()})) ==
          doctest::Approx(kl).epsilon(1e-12));
  }
}

TEST_CASE("ELBO equals log Z when q is the exact distribution") {
  auto a = make_variable("A", {"0", "1", "2"});
  MarkovRandomField m;
  m.add_variable(a);
  m.add_factor(Factor({a}, {2.0, 3.0, 5.0}));
  FactoredDistribution q = FactoredDistribution::uniform(m.variables());
  q.q[0] = {0.2, 0.3, 0.5};
  CHECK(elbo(m, q) == doctest::Approx(std::log(10.0)).epsilon(1e-14));

  MarkovRandomField flat;
  std::vector<VarRef> v;
  for (const char* n : {"X", "Y", "Z"}) {
    v.push_back(make_variable(n, {"0", "1"}));
    flat.add_variable(v.back());
  }
  flat.add_factor(Factor::constant({v[0], v[1]}, 2.0));
  flat.add_factor(Factor::constant({v[1], v[2]}, 3.0));
  CHECK(elbo(flat, FactoredDistribution::uniform(flat.variables())) ==
        doctest::Approx(std::log(8.0 * 6.0)).epsilon(1e-14));
}

TEST_CASE("ELBO is a lower bound and the gap is KL(q || p)") {
  std::mt19937_64 rng(91);
  for (int t = 0; t < 500; ++t) {
    const int n = oracle::uniform_int(rng, 1, 6);
    const auto m = oracle::random_mrf(rng, n, 2, 0.5, 1);
    const auto q = random_q(rng, m.variables(), t % 5 == 0);
    const double bound = elbo(m, q);
    const double log_z = oracle::brute_log_partition(m);
    CHECK(bound <= log_z + 1e-9);
    CHECK(log_z - bound == doctest::Approx(brute_kl(m, q)).epsilon(1e-9));
  }
}

TEST_CASE("ELBO validates q") {
  const auto m = oracle::voting_mrf();
  auto q = FactoredDistribution::uniform(m.variables());
  q.q[1] = {0.7, 0.7};
  CHECK(error_code([&] { elbo(m, q); }) == Errc::argument);
  auto partial = FactoredDistribution::uniform({m.variables()[0]});
  CHECK(error_code([&] { elbo(m, partial); }) == Errc::scope);
}

TEST_CASE("mean field is exact on independent variables after one sweep") {
  MarkovRandomField m;
  auto a = make_variable("A", {"0", "1"});
  auto b = make_variable("B", {"0", "1", "2"});
  m.add_variable(a);
  m.add_variable(b);
  m.add_factor(Factor({a}, {1.0, 3.0}));
  m.add_factor(Factor({b}, {1.0, 1.0, 2.0}));
  MeanFieldOptions opt;
  opt.max_sweeps = 1;
  const auto r = mean_field(m, {}, opt);
  CHECK(r.q["A"][1] == doctest::Approx(0.75).epsilon(1e-14));
  CHECK(r.q["B"][2] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(r.trace.sweeps.back() == doctest::Approx(std::log(16.0)).epsilon(1e-14));
  REQUIRE(r.trace.kl_gap);
  CHECK(std::abs(*r.trace.kl_gap) < 1e-12);
}

TEST_CASE("mean field on a three-variable chain reports the KL gap") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 20; ++t) {
    MarkovRandomField m;
    auto vars = oracle::random_variables(rng, 3, 3);
    for (const auto& v : vars) m.add_variable(v);
    m.add_factor(oracle::random_factor(rng, {vars[0], vars[1]}));
    m.add_factor(oracle::random_factor(rng, {vars[1], vars[2]}));
    const auto r = mean_field(m);
    const double log_z = oracle::brute_log_partition(m);
    CHECK(r.trace.sweeps.back() <= log_z + 1e-9);
    REQUIRE(r.trace.kl_gap);
    CHECK(*r.trace.kl_gap == doctest::Approx(brute_kl(m, r.q)).epsilon(1e-9));
    CHECK(r.trace.monotonicity_violations == 0);
    CHECK(r.blanket_sizes == std::vector<std::size_t>{1, 2, 1});
  }
}

TEST_CASE("mean field on a frustrated square never lowers the ELBO") {
  const auto m = frustrated_square();
  RandomSource rng(8);
  MeanFieldOptions opt;
  opt.max_sweeps = 50;
  opt.tolerance = 0.0;
  opt.init = FactoredDistribution::perturbed(m.variables(), rng, 0.9);
  const auto r = mean_field(m, {}, opt);
  CHECK(r.trace.sweeps.size() == 51);
  CHECK(r.trace.updates.size() == 200);
  CHECK(r.trace.monotonicity_violations == 0);
  for (std::size_t k = 1; k < r.trace.updates.size(); ++k) CHECK(r.trace.updates[k] >= r.trace.updates[k - 1] - 1e-10);
  CHECK(r.trace.sweeps.back() <= oracle::brute_log_partition(m) + 1e-9);
  CHECK(r.trace.to_csv().rfind("sweep,elbo\n0,", 0) == 0);
}

TEST_CASE("mean-field updates never decrease the ELBO on random models") {
  std::mt19937_64 gen(12);
  RandomSource rng(12);
  for (int t = 0; t < 100; ++t) {
    const auto m = oracle::random_mrf(gen, oracle::uniform_int(gen, 2, 6), 3, 0.5, 1);
    MeanFieldOptions opt;
    opt.init = FactoredDistribution::perturbed(m.variables(), rng, 0.8);
    const auto r = mean_field(m, {}, opt);
    CHECK(r.trace.monotonicity_violations == 0);
    CHECK(r.trace.sweeps.back() <= oracle::brute_log_partition(m) + 1e-9);
  }
}

TEST_CASE("mean field with evidence and restarts") {
  const auto bn = oracle::student_network();
  const IndexEvidence ev{{"GRADE", 0}};
  RandomSource rng(4);
  MeanFieldOptions opt;
  opt.restarts = 3;
  const auto r = mean_field(bn, ev, opt, &rng);
  CHECK(r.q["GRADE"] == std::vector<double>{1.0, 0.0, 0.0});
  const double log_pe = oracle::brute_log_partition(bn, ev);
  CHECK(r.trace.sweeps.back() <= log_pe + 1e-9);
  REQUIRE(r.trace.log_partition);
  CHECK(*r.trace.log_partition == doctest::Approx(log_pe).epsilon(1e-12));
  CHECK(*r.trace.kl_gap == doctest::Approx(brute_kl(bn, r.q, ev)).epsilon(1e-9));
  CHECK(error_code([&] { mean_field(bn, ev, opt); }) == Errc::argument);
}

TEST_CASE("mean field handles zero potentials and reports degenerate updates") {
  MarkovRandomField m;
  auto a = make_variable("A", {"0", "1"});
  auto b = make_variable("B", {"0", "1"});
  m.add_variable(a);
  m.add_variable(b);
  m.add_factor(Factor({a, b}, {1.0, 0.0, 0.0, 1.0}));
  const auto pinned = mean_field(m, {{"B", 1}});
  CHECK(pinned.q["A"] == std::vector<double>{0.0, 1.0});
  CHECK(error_code([&] {
          MarkovRandomField z;
          z.add_variable(a);
          z.add_factor(Factor({a}, {0.0, 0.0}));
          mean_field(z);
        }) == Errc::degenerate_distribution);
}

TEST_CASE("KL directions pick different fully factored optima on a bimodal target") {
  auto a = make_variable("A", {"0", "1"});
  auto b = make_variable("B", {"0", "1"});
  const Factor p({a, b}, {0.45, 0.05, 0.05, 0.45});
  double best_exclusive = 1e300, best_inclusive = 1e300;
  std::pair<double, double> arg_exclusive, arg_inclusive;
  for (int i = 1; i < 100; ++i)
    for (int j = 1; j < 100; ++j) {
      const double u = i / 100.0, v = j / 100.0;
      const Factor q = product(Factor({a}, {1 - u, u}), Factor({b}, {1 - v, v}));
      const double excl = kl_divergence(q, p), incl = kl_divergence(p, q);
      if (excl < best_exclusive) best_exclusive = excl, arg_exclusive = {u, v};
      if (incl < best_inclusive) best_inclusive = incl, arg_inclusive = {u, v};
    }
  CHECK(arg_inclusive == std::pair<double, double>{0.5, 0.5});
  CHECK(arg_exclusive != arg_inclusive);
  CHECK(std::abs(arg_exclusive.first - 0.5) > 0.2);
  CHECK((arg_exclusive.first - 0.5) * (arg_exclusive.second - 0.5) > 0.0);
}

TEST_CASE("loopy BP equals tree BP on trees") {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 50; ++t) {
    const auto m = oracle::random_tree_mrf(rng, oracle::uniform_int(rng, 1, 7), 3);
    const auto exact = tree_bp(m);
    for (auto schedule : {BpSchedule::synchronous, BpSchedule::sequential}) {
      LoopyBpOptions opt;
      opt.schedule = schedule;
      const auto r = loopy_bp(m, {}, opt);
      CHECK(r.converged);
      for (std::size_t i = 0; i < m.variable_count(); ++i)
        CHECK(approx_equal(r.marginals[i], exact.marginals[i], 1e-9));
      for (std::size_t f = 0; f < r.factor_beliefs.size(); ++f)
        CHECK(approx_equal(r.factor_beliefs[f], exact.factor_beliefs[f], 1e-9));
    }
    LoopyBpOptions undamped;
    undamped.damping = 1.0;
    undamped.max_iterations = std::max<std::size_t>(1, factor_graph_diameter(m));
    undamped.tolerance = 0.0;
    const auto fast = loopy_bp(m, {}, undamped);
    for (std::size_t i = 0; i < m.variable_count(); ++i)
      CHECK(approx_equal(fast.marginals[i], exact.marginals[i], 1e-9));
  }
}

TEST_CASE("loopy BP with evidence on a tree matches tree BP") {
  std::mt19937_64 rng(23);
  for (int t = 0; t < 20; ++t) {
    const auto m = oracle::random_tree_mrf(rng, 5, 3);
    const IndexEvidence e{{m.variables()[2]->name(), 1}};
    const auto ref = tree_bp(m, e);
    const auto r = loopy_bp(m, e);
    CHECK(r.converged);
    for (std::size_t i = 0; i < m.variable_count(); ++i) CHECK(approx_equal(r.marginals[i], ref.marginals[i], 1e-9));
  }
}

TEST_CASE("loopy BP on a four-cycle is close to enumeration") {
  std::mt19937_64 rng(29);
  for (int seed = 0; seed < 20; ++seed) {
    const auto m = four_cycle(rng);
    const auto r = loopy_bp(m);
    CHECK(r.converged);
    for (std::size_t i = 0; i < 4; ++i) {
      const auto truth = oracle::brute_marginal(m, m.variables()[i]->name());
      CHECK(std::abs(r.marginals[i][1] - truth[1]) < 0.05);
    }
  }
}

TEST_CASE("loopy BP with uniform potentials is uniform from the start") {
  const auto m = [] {
    MarkovRandomField out;
    std::vector<VarRef> v;
    for (const char* n : {"A", "B", "C"}) {
      v.push_back(make_variable(n, {"0", "1", "2"}));
      out.add_variable(v.back());
    }
    out.add_factor(Factor::ones({v[0], v[1]}));
    out.add_factor(Factor::ones({v[1], v[2]}));
    out.add_factor(Factor::ones({v[2], v[0]}));
    return out;
  }();
  const auto r = loopy_bp(m);
  CHECK(r.converged);
  CHECK(r.iterations == 1);
  CHECK(r.residual == 0.0);
  for (const auto& b : r.marginals)
    for (std::size_t s = 0; s < 3; ++s) CHECK(b[s] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("loopy BP reports non-convergence through the flag") {
  const auto m = frustrated_square();
  LoopyBpOptions opt;
  opt.max_iterations = 2;
  opt.tolerance = 0.0;
  const auto r = loopy_bp(m, {}, opt);
  CHECK_FALSE(r.converged);
  CHECK(r.iterations == 2);
  CHECK(r.residual > 0.0);
  opt.damping = 0.0;
  CHECK(error_code([&] { loopy_bp(m, {}, opt); }) == Errc::argument);
}
