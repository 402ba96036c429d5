#include <doctest.h>

#include <random>

#include "pgm/sampling.hpp"
#include "support/oracles.hpp"

using namespace pgm;

namespace {

BayesianNetwork coin(double heads) {
  BayesianNetwork bn;
  bn.add_variable(make_variable("Coin", {"heads", "tails"}));
  bn.set_cpd("Coin", {}, {{heads, 1.0 - heads}});
  return bn;
}

/// Hidden H (uniform) with observed child E; p(E = e1) = 0.5 * 0.2 + 0.5 * 0.4 = 0.3.
BayesianNetwork hidden_cause() {
  BayesianNetwork bn;
  bn.add_variable(make_variable("H", {"h0", "h1"}));
  bn.add_variable(make_variable("E", {"e0", "e1"}));
  bn.set_cpd("H", {}, {{0.5, 0.5}});
  bn.set_cpd("E", {"H"}, {{0.8, 0.2}, {0.6, 0.4}});
  return bn;
}

MarkovRandomField chain_mrf(std::mt19937_64& rng, int n) {
  MarkovRandomField m;
  auto vars = oracle::random_variables(rng, n, 2);
  for (const auto& v : vars) m.add_variable(v);
  for (int i = 0; i + 1 < n; ++i) m.add_factor(oracle::random_factor(rng, {vars[i], vars[i + 1]}, 0.2, 1.0));
  for (const auto& v : vars) m.add_factor(oracle::random_factor(rng, {v}, 0.2, 1.0));
  return m;
}

/// Two binary variables that agree with weight 1 and disagree with weight eps.
MarkovRandomField two_mode(double eps) {
  MarkovRandomField m;
  auto a = make_variable("A", {"0", "1"});
  auto b = make_variable("B", {"0", "1"});
  m.add_variable(a);
  m.add_variable(b);
  m.add_factor(Factor({a, b}, {1.0, eps, eps, 1.0}));
  return m;
}

std::vector<double> normalized(std::vector<double> p) {
  const double z = std::accumulate(p.begin(), p.end(), 0.0);
  for (auto& v : p) v /= z;
  return p;
}

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
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

TEST_CASE("random source streams are reproducible and split") {
  RandomSource a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) CHECK(a() == b());
  CHECK(a() != c());
  const std::vector<double> w{0.0, 1.0, 0.0};
  for (int i = 0; i < 50; ++i) CHECK(a.categorical(w) == 1);
  CHECK_THROWS_AS(a.categorical(std::vector<double>{0.0, 0.0}), Error);
  CHECK_THROWS_AS(a.categorical(std::vector<double>{-1.0, 2.0}), Error);
}

TEST_CASE("forward sampling a biased coin") {
  RandomSource rng(1);
  const auto batch = forward_sample(coin(0.6), 100000, rng);
  CHECK(batch.size() == 100000);
  CHECK(std::abs(empirical_marginal(batch, "Coin")[0] - 0.6) < 0.005);
}

TEST_CASE("forward sampling with deterministic CPDs hits the single support point") {
  BayesianNetwork bn;
  bn.add_variable(make_variable("A", {"a0", "a1"}));
  bn.add_variable(make_variable("B", {"b0", "b1", "b2"}));
  bn.set_cpd("A", {}, {{0.0, 1.0}});
  bn.set_cpd("B", {"A"}, {{1.0, 0.0, 0.0}, {0.0, 0.0, 1.0}});
  RandomSource rng(3);
  for (const auto& x : forward_sample(bn, 500, rng).samples) CHECK(x == Assignment{1, 2});
}

TEST_CASE("forward sampling the student network") {
  const auto bn = oracle::student_network();
  const double truth = oracle::brute_marginal(bn, "LETTER")[1];
  CHECK(truth == doctest::Approx(0.502336).epsilon(1e-12));
  RandomSource rng(2024);
  const auto batch = forward_sample(bn, 200000, rng);
  CHECK(std::abs(empirical_marginal(batch, "LETTER")[1] - truth) < 0.004);
  const auto csv = batch.to_csv();
  CHECK(csv.rfind("DIFFICULTY,INTELLIGENCE,GRADE,SAT,LETTER\n", 0) == 0);
}

TEST_CASE("junction tree sampling on random trees matches exact marginals") {
  std::mt19937_64 gen(11);
  const auto m = oracle::random_tree_mrf(gen, 5, 3);
  auto jt = build_junction_tree(m);
  RandomSource rng(5);
  CHECK(error_code([&] { jt_forward_sample(jt, 10, rng); }) == Errc::state);
  jt_calibrate(jt);
  const auto batch = jt_forward_sample(jt, 100000, rng);
  for (const auto& v : m.variables())
    CHECK(max_diff(empirical_marginal(batch, v->name()), oracle::brute_marginal(m, v->name())) < 0.01);
}

TEST_CASE("junction tree sampling respects calibration evidence") {
  const auto bn = oracle::student_network();
  const IndexEvidence ev = index_evidence(bn, {{"GRADE", "g2"}, {"SAT", "s1"}});
  auto jt = build_junction_tree(bn);
  jt_calibrate(jt, ev);
  RandomSource rng(9);
  const auto batch = jt_forward_sample(jt, 20000, rng);
  for (const auto& x : batch.samples) {
    CHECK(x[2] == 1);
    CHECK(x[3] == 1);
  }
  const auto truth = oracle::brute_marginal(bn, "INTELLIGENCE", ev);
  CHECK(std::abs(empirical_marginal(batch, "INTELLIGENCE")[1] - truth[1]) < 0.015);
}

TEST_CASE("single clique sampling equals direct sampling of the joint") {
  auto a = make_variable("A", {"0", "1"});
  auto b = make_variable("B", {"0", "1", "2"});
  MarkovRandomField m;
  m.add_variable(a);
  m.add_variable(b);
  m.add_factor(Factor({a, b}, {1.0, 2.0, 3.0, 4.0, 5.0, 6.0}));
  auto jt = build_junction_tree(m);
  jt_calibrate(jt);
  RandomSource rng(17);
  const auto batch = jt_forward_sample(jt, 105000, rng);
  std::vector<double> counts(6, 0.0);
  for (const auto& x : batch.samples) counts[static_cast<std::size_t>(x[0] * 3 + x[1])] += 1.0;
  CHECK(max_diff(normalized(counts), normalized({1, 2, 3, 4, 5, 6})) < 0.01);
}

TEST_CASE("rejection estimates") {
  RandomSource rng(4);
  const auto heads = rejection_estimate(coin(0.6), {{"Coin", 0}}, 100000, rng);
  CHECK(std::abs(heads.estimate - 0.6) < 0.005);
  CHECK(heads.accepted == static_cast<std::size_t>(heads.estimate * 100000 + 0.5));
  CHECK(heads.warning.empty());

  const auto never = rejection_estimate(coin(1.0), {{"Coin", 1}}, 1000, rng);
  CHECK(never.estimate == 0.0);
  CHECK(never.accepted == 0);
  CHECK_FALSE(never.warning.empty());

  const auto bn = oracle::student_network();
  CHECK(oracle::brute_marginal(bn, "SAT")[1] == doctest::Approx(0.275).epsilon(1e-12));
  const auto s1 = rejection_estimate(bn, {{"SAT", 1}}, 100000, rng);
  CHECK(std::abs(s1.estimate - 0.275) < 0.005);
}

TEST_CASE("rejection sampling is unbiased across repetitions") {
  const auto bn = oracle::earthquake_network();
  const IndexEvidence ev{{"Alarm", 1}, {"Earthquake", 0}};
  const auto joint = oracle::brute_joint(bn, ev);
  const double truth = std::accumulate(joint.begin(), joint.end(), 0.0);
  RandomSource rng(77);
  std::vector<double> est;
  for (int r = 0; r < 200; ++r) est.push_back(rejection_estimate(bn, ev, 2000, rng).estimate);
  const double mean = std::accumulate(est.begin(), est.end(), 0.0) / 200.0;
  double var = 0.0;
  for (double e : est) var += (e - mean) * (e - mean);
  const double sd = std::sqrt(var / 199.0);
  CHECK(sd > 0.0);
  CHECK(std::abs(mean - truth) <= 4.0 * sd / std::sqrt(200.0));
}

TEST_CASE("importance sampling with a uniform proposal estimates the evidence probability") {
  const auto bn = hidden_cause();
  const IndexEvidence ev{{"E", 1}};
  RandomSource rng(8);
  const auto r = importance_estimate(bn, ev, uniform_proposal(bn, ev), 100000, rng);
  CHECK(std::abs(r.estimate - 0.3) < 0.01);
  CHECK(r.estimate == r.evidence_estimate);
  CHECK(r.batch.weights.size() == 100000);
}

TEST_CASE("importance sampling from the exact posterior has zero variance") {
  const auto bn = hidden_cause();
  const IndexEvidence ev{{"E", 1}};
  const auto post = oracle::brute_marginal(bn, "H", ev);
  const Factor q({bn.variable("H")}, {post[0], post[1]});
  RandomSource rng(12);
  const auto r = importance_estimate(bn, ev, table_proposal(bn, ev, q), 50, rng);
  for (double w : r.batch.weights) CHECK(w == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(r.estimate == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(r.effective_sample_size == doctest::Approx(50.0));
  const auto one = importance_estimate(bn, ev, table_proposal(bn, ev, q), 1, rng);
  CHECK(one.estimate == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("normalized importance sampling on the student network") {
  const auto bn = oracle::student_network();
  const IndexEvidence ev = index_evidence(bn, {{"LETTER", "l1"}, {"SAT", "s0"}});
  const double truth = oracle::brute_marginal(bn, "INTELLIGENCE", ev)[1];
  RandomSource rng(31);
  const auto r = importance_estimate(bn, ev, prior_proposal(bn, ev), 200000, rng,
                                     ImportanceQuery{"INTELLIGENCE", 1}, true);
  CHECK(std::abs(r.estimate - truth) < 0.01);
  const auto joint = oracle::brute_joint(bn, ev);
  CHECK(std::abs(r.evidence_estimate - std::accumulate(joint.begin(), joint.end(), 0.0)) < 0.01);
}

TEST_CASE("normalized importance sampling with one sample is the indicator of that sample") {
  const auto bn = oracle::student_network();
  const IndexEvidence ev{{"LETTER", 0}};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    RandomSource rng(seed);
    const auto r = importance_estimate(bn, ev, uniform_proposal(bn, ev), 1, rng, ImportanceQuery{"GRADE", 2}, true);
    CHECK(r.estimate == (r.batch.samples[0][2] == 2 ? 1.0 : 0.0));
  }
}

TEST_CASE("importance sampling rejects proposals without support") {
  const auto bn = hidden_cause();
  const IndexEvidence ev{{"E", 1}};
  const Factor q({bn.variable("H")}, {1.0, 0.0});
  auto broken = table_proposal(bn, ev, q);
  broken.density = [](const Assignment&) { return 0.0; };
  RandomSource rng(2);
  CHECK(error_code([&] { importance_estimate(bn, ev, broken, 10, rng); }) == Errc::infinite_weight);
}

TEST_CASE("Gibbs sampling a chain MRF matches junction tree marginals") {
  std::mt19937_64 gen(21);
  const auto m = chain_mrf(gen, 5);
  auto jt = build_junction_tree(m);
  jt_calibrate(jt);
  RandomSource rng(6);
  GibbsOptions opt;
  opt.burn_in = 1000;
  const auto batch = gibbs(m, {}, 100000, rng, opt);
  CHECK(batch.burn_in == 1000);
  for (const auto& v : m.variables()) {
    const Factor q = query(jt, v->name());
    CHECK(max_diff(empirical_marginal(batch, v->name()), {q[0], q[1]}) < 0.02);
  }
}

TEST_CASE("Gibbs sampling the student network") {
  const auto bn = oracle::student_network();
  RandomSource rng(2025);
  const auto batch = gibbs(bn, {}, 200000, rng);
  CHECK(batch.burn_in == 20000);
  CHECK(std::abs(empirical_marginal(batch, "LETTER")[1] - 0.502336) < 0.01);
  const IndexEvidence ev{{"GRADE", 0}};
  const auto cond = gibbs(bn, ev, 50000, rng);
  for (const auto& x : cond.samples) CHECK(x[2] == 0);
  CHECK(max_diff(empirical_marginal(cond, "INTELLIGENCE"), oracle::brute_marginal(bn, "INTELLIGENCE", ev)) < 0.02);
}

TEST_CASE("Gibbs on independent variables reproduces the marginals") {
  MarkovRandomField m;
  auto a = make_variable("A", {"0", "1"});
  auto b = make_variable("B", {"0", "1", "2"});
  m.add_variable(a);
  m.add_variable(b);
  m.add_factor(Factor({a}, {0.25, 0.75}));
  m.add_factor(Factor({b}, {0.2, 0.3, 0.5}));
  RandomSource rng(13);
  GibbsOptions opt;
  opt.random_scan = true;
  const auto batch = gibbs(m, {}, 50000, rng, opt);
  CHECK(max_diff(empirical_marginal(batch, "A"), {0.25, 0.75}) < 0.015);
  CHECK(max_diff(empirical_marginal(batch, "B"), {0.2, 0.3, 0.5}) < 0.015);
}

TEST_CASE("Gibbs reports trapped states") {
  MarkovRandomField m;
  auto a = make_variable("A", {"0", "1"});
  auto b = make_variable("B", {"0", "1"});
  m.add_variable(a);
  m.add_variable(b);
  m.add_factor(Factor({a, b}, {1.0, 0.0, 0.0, 0.0}));
  RandomSource rng(1);
  CHECK(error_code([&] { gibbs(m, {{"B", 1}}, 10, rng); }) == Errc::trapped_state);
}

TEST_CASE("mode occupancy flags a nearly decoupled two-mode chain") {
  const std::vector<Assignment> modes{{0, 0}, {1, 1}};
  RandomSource rng(19);
  const auto sticky = gibbs(two_mode(1e-5), {}, 5000, rng);
  const auto stuck = mode_occupancy(sticky, modes);
  CHECK(stuck.slow_mixing);
  CHECK(stuck.imbalance > 0.45);

  const auto loose = gibbs(two_mode(1.0), {}, 5000, rng);
  const auto mixed = mode_occupancy(loose, modes);
  CHECK_FALSE(mixed.slow_mixing);
  CHECK(mixed.switches > 100);
}

TEST_CASE("Metropolis-Hastings with single flips matches enumeration") {
  std::mt19937_64 gen(5);
  const auto m = oracle::random_mrf(gen, 3, 3, 0.8, 1);
  RandomSource rng(14);
  const auto batch = metropolis_hastings(m, single_flip_proposal(m), 200000, rng);
  CHECK(batch.acceptance_rate > 0.0);
  CHECK(batch.acceptance_rate <= 1.0);
  for (const auto& v : m.variables())
    CHECK(max_diff(empirical_marginal(batch, v->name()), oracle::brute_marginal(m, v->name())) < 0.02);
}

TEST_CASE("Metropolis-Hastings accepts every move when the proposal is the target") {
  std::mt19937_64 gen(6);
  const auto m = oracle::random_mrf(gen, 3, 2, 0.8, 1);
  const auto joint = oracle::brute_joint(m);
  const Factor q(m.variables(), Eigen::Map<const Eigen::ArrayXd>(joint.data(), static_cast<Eigen::Index>(joint.size())));
  RandomSource rng(15);
  CHECK(metropolis_hastings(m, independent_proposal(m, q), 5000, rng).acceptance_rate == 1.0);
  CHECK(metropolis_hastings(m, gibbs_proposal(m), 5000, rng).acceptance_rate == 1.0);
}

TEST_CASE("Metropolis-Hastings rejects kernels that cannot reverse a move") {
  const auto m = two_mode(0.5);
  MhProposal to_zero;
  to_zero.sample = [](const Assignment& x, RandomSource&) { return Assignment(x.size(), 0); };
  to_zero.density = [](const Assignment& to, const Assignment&) {
    return std::all_of(to.begin(), to.end(), [](int s) { return s == 0; }) ? 1.0 : 0.0;
  };
  RandomSource rng(1);
  CHECK(error_code([&] { metropolis_hastings(m, to_zero, 10, rng, {}, 0, Assignment{1, 1}); }) ==
        Errc::invalid_kernel);
}

TEST_CASE("explicit Gibbs sweep kernels leave the joint invariant") {
  std::mt19937_64 gen(40);
  for (int trial = 0; trial < 30; ++trial) {
    const auto m = oracle::random_mrf(gen, 3, 2, 0.7, 1);
    const auto joint = normalized(oracle::brute_joint(m));
    const Eigen::MatrixXd K = gibbs_sweep_kernel(m);
    const Eigen::VectorXd pi = Eigen::Map<const Eigen::VectorXd>(joint.data(), static_cast<Eigen::Index>(joint.size()));
    CHECK((K.colwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
    CHECK((K * pi - pi).cwiseAbs().maxCoeff() <= 1e-10);
    const auto diag = chain_analysis(K);
    CHECK((diag.stationary - pi).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("explicit Metropolis-Hastings kernels satisfy detailed balance") {
  std::mt19937_64 gen(41);
  for (int trial = 0; trial < 30; ++trial) {
    const auto m = oracle::random_mrf(gen, 3, 2, 0.7, 1);
    const auto joint = normalized(oracle::brute_joint(m));
    const Eigen::MatrixXd K = mh_kernel(m, single_flip_proposal(m));
    const auto d = K.rows();
    double residual = 0.0;
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = 0; j < d; ++j)
        residual = std::max(residual, std::abs(joint[j] * K(i, j) - joint[i] * K(j, i)));
    CHECK(residual <= 1e-10);
    const Eigen::VectorXd pi = Eigen::Map<const Eigen::VectorXd>(joint.data(), d);
    CHECK((K * pi - pi).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(chain_analysis(K).detailed_balance_residual <= 1e-9);
  }
}

TEST_CASE("chain analysis of the three-state chain") {
  Eigen::MatrixXd T(3, 3);
  T << 0, 0.5, 1, 1, 0, 0, 0, 0.5, 0;
  const auto d = chain_analysis(T);
  CHECK(d.converged);
  CHECK(d.stationary[0] == doctest::Approx(0.4).epsilon(1e-10));
  CHECK(d.stationary[1] == doctest::Approx(0.4).epsilon(1e-10));
  CHECK(d.stationary[2] == doctest::Approx(0.2).epsilon(1e-10));
  CHECK(d.irreducible);
  CHECK(d.aperiodic);
  CHECK(d.periods == std::vector<std::size_t>{1, 1, 1});
}

TEST_CASE("chain analysis flags reducible and periodic chains") {
  Eigen::MatrixXd R(4, 4);
  R << 0.1, 0.9, 0.0, 0.0,
       0.9, 0.1, 0.5, 0.0,
       0.0, 0.0, 0.0, 0.0,
       0.0, 0.0, 0.5, 1.0;
  CHECK_FALSE(chain_analysis(R).irreducible);

  Eigen::MatrixXd P(2, 2);
  P << 0, 1, 1, 0;
  const auto d = chain_analysis(P);
  CHECK(d.irreducible);
  CHECK_FALSE(d.aperiodic);
  CHECK(d.periods == std::vector<std::size_t>{2, 2});
  CHECK(d.stationary[0] == doctest::Approx(0.5));

  Eigen::MatrixXd bad(2, 2);
  bad << 0.5, 0.5, 0.4, 0.5;
  CHECK(error_code([&] { chain_analysis(bad); }) == Errc::invalid_model);
  CHECK(error_code([&] { chain_analysis(Eigen::MatrixXd::Identity(2, 3)); }) == Errc::shape);
}

TEST_CASE("identical seeds give identical batches") {
  const auto bn = oracle::student_network();
  RandomSource a(99), b(99);
  const auto x = gibbs(bn, {}, 500, a);
  const auto y = gibbs(bn, {}, 500, b);
  CHECK(x.samples == y.samples);
  CHECK(x.to_csv() == y.to_csv());
  CHECK(x.seed == 99);
  RandomSource c(99), d(99);
  CHECK(forward_sample(bn, 300, c).samples == forward_sample(bn, 300, d).samples);
}

TEST_CASE("weighted batches export a weight column") {
  const auto bn = hidden_cause();
  RandomSource rng(3);
  const auto r = importance_estimate(bn, {{"E", 1}}, uniform_proposal(bn, {{"E", 1}}), 3, rng);
  const auto csv = r.batch.to_csv();
  CHECK(csv.rfind("H,E,weight\n", 0) == 0);
  CHECK(csv.find(",e1,") != std::string::npos);
}
