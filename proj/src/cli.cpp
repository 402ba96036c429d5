#include "pgm/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "pgm/exact.hpp"
#include "pgm/io.hpp"
#include "pgm/learning.hpp"
#include "pgm/map.hpp"
#include "pgm/sampling.hpp"
#include "pgm/variational.hpp"

namespace pgm {

namespace {

struct Common {
  std::string model;
  std::string data;
  std::vector<std::string> evidence;
  std::uint64_t seed = 0;
  int precision = 6;
};

/// Effective configuration, echoed before any work is done.
class Config {
 public:
  template <class T>
  void set(const std::string& key, const T& value) {
    std::ostringstream os;
    os << std::boolalpha << value;
    entries_.emplace_back(key, os.str());
  }
  void echo(std::ostream& err) const {
    for (const auto& [k, v] : entries_) err << "config." << k << "=" << v << "\n";
  }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

std::string join(const std::vector<std::string>& items, const char* sep = ",") {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? sep : "") + items[i];
  return out;
}

std::string num(double v, int precision) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

AnyModel load_model(const std::string& path) { return parse_model(read_text_file(path)); }

IndexEvidence parse_evidence(const GraphicalModel& m, const std::vector<std::string>& bindings) {
  Evidence ev;
  for (const auto& b : bindings) {
    const auto eq = b.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == b.size())
      fail(Errc::evidence, "evidence '" + b + "' must look like VARIABLE=state");
    if (!ev.emplace(b.substr(0, eq), b.substr(eq + 1)).second)
      fail(Errc::evidence, "variable '" + b.substr(0, eq) + "' is observed twice");
  }
  return index_evidence(m, ev);
}

const BayesianNetwork& require_bn(const AnyModel& m, const std::string& what) {
  if (!std::holds_alternative<BayesianNetwork>(m)) fail(Errc::unsupported, what + " needs a bayesian_network model");
  return std::get<BayesianNetwork>(m);
}

void emit(std::ostream& out, const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") out << text;
  else write_text_file(path, text);
}

// ---------------------------------------------------------------------------
// query

struct QueryArgs {
  Common c;
  std::vector<std::string> targets;
  std::string engine = "ve";
  std::size_t n = 200000;
  std::optional<std::size_t> burn_in;
  std::size_t max_iterations = 1000;
  double damping = 0.5;
};

std::vector<double> query_marginal(const QueryArgs& a, const GraphicalModel& m, const IndexEvidence& ev,
                                   const std::string& target) {
  const std::size_t idx = m.require_index(target);
  auto values = [](const Factor& f) {
    const Factor lin = f.to_linear();
    return std::vector<double>(lin.values().begin(), lin.values().end());
  };
  if (a.engine == "enum") return values(enumerate_marginal(m, {target}, ev));
  if (a.engine == "ve") return values(variable_elimination(m, {target}, ev).factor);
  if (a.engine == "bp") return values(tree_bp(m, ev).marginals[idx]);
  if (a.engine == "jtree") {
    auto jt = build_junction_tree(m);
    jt_calibrate(jt, ev);
    return values(query(jt, target));
  }
  if (a.engine == "meanfield") return mean_field(m, ev).q[target];
  if (a.engine == "loopy") {
    LoopyBpOptions opts;
    opts.max_iterations = a.max_iterations;
    opts.damping = a.damping;
    return values(loopy_bp(m, ev, opts).marginals[idx]);
  }
  RandomSource rng(a.c.seed);
  if (a.engine == "gibbs") {
    GibbsOptions opts;
    opts.burn_in = a.burn_in;
    return empirical_marginal(gibbs(m, ev, a.n, rng, opts), target);
  }
  return empirical_marginal(metropolis_hastings(m, single_flip_proposal(m, ev), a.n, rng, ev, a.burn_in), target);
}

void run_query(const QueryArgs& a, std::ostream& out, std::ostream& err) {
  Config cfg;
  cfg.set("command", "query");
  cfg.set("model", a.c.model);
  cfg.set("target", join(a.targets));
  cfg.set("evidence", join(a.c.evidence));
  cfg.set("engine", a.engine);
  cfg.set("seed", a.c.seed);
  cfg.set("n", a.n);
  cfg.set("burn_in", a.burn_in ? std::to_string(*a.burn_in) : "n/10");
  cfg.set("max_iterations", a.max_iterations);
  cfg.set("damping", a.damping);
  cfg.echo(err);

  const auto model = load_model(a.c.model);
  const auto& m = as_graphical(model);
  const auto ev = parse_evidence(m, a.c.evidence);
  for (const auto& target : a.targets) {
    const auto p = query_marginal(a, m, ev, target);
    const auto& states = m.variable(target)->states();
    for (std::size_t s = 0; s < states.size(); ++s)
      out << (s ? " " : "") << "p[" << states[s] << "]=" << num(p[s], a.c.precision);
    out << "\n";
  }
}

// ---------------------------------------------------------------------------
// map

struct MapArgs {
  Common c;
  std::string engine = "enum";
  std::size_t max_iterations = 500;
  std::size_t sweeps = 400;
};

void run_map(const MapArgs& a, std::ostream& out, std::ostream& err) {
  Config cfg;
  cfg.set("command", "map");
  cfg.set("model", a.c.model);
  cfg.set("evidence", join(a.c.evidence));
  cfg.set("engine", a.engine);
  cfg.set("seed", a.c.seed);
  cfg.set("max_iterations", a.max_iterations);
  cfg.set("sweeps", a.sweeps);
  cfg.echo(err);

  const auto model = load_model(a.c.model);
  const auto& m = as_graphical(model);
  const auto ev = parse_evidence(m, a.c.evidence);
  const bool needs_free = a.engine == "graphcut" || a.engine == "dualdecomp" || a.engine == "localsearch" ||
                          a.engine == "anneal";
  if (needs_free && !ev.empty()) fail(Errc::unsupported, "the " + a.engine + " engine does not take evidence");

  RandomSource rng(a.c.seed);
  MapResult r;
  if (a.engine == "enum") {
    r = enumerate_map(m, ev);
  } else if (a.engine == "maxprod") {
    r = to_factor_graph(m).is_forest() ? max_product_decode(m, ev) : jt_map(m, ev);
  } else if (a.engine == "graphcut") {
    const auto energy = to_pairwise_energy(as_mrf(m));
    r.assignment = graphcut_map(energy).assignment;
    r.log_score = log_joint(m, r.assignment);
  } else if (a.engine == "dualdecomp") {
    DualOptions opts;
    opts.max_iterations = a.max_iterations;
    const auto d = dual_decomposition(as_mrf(m), opts);
    r = d.best;
    out << "bound=" << num(d.best_bound, a.c.precision) << "\n";
    out << "gap=" << num(d.gap, a.c.precision) << "\n";
    out << "agreement=" << (d.state.agreement ? "true" : "false") << "\n";
  } else if (a.engine == "localsearch") {
    r = local_search_map(m, rng);
  } else {
    AnnealingSchedule schedule;
    schedule.sweeps = a.sweeps;
    r = simulated_annealing_map(m, schedule, rng);
  }
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < m.variable_count(); ++i)
    labels.push_back(m.variables()[i]->state_label(r.assignment[i]));
  out << "assignment=(" << join(labels) << ")\n";
  out << "logp=" << num(r.log_score, a.c.precision) << "\n";
  if (m.is_normalized()) out << "p=" << num(std::exp(r.log_score), a.c.precision) << "\n";
}

// ---------------------------------------------------------------------------
// sample

struct SampleArgs {
  Common c;
  std::size_t n = 1000;
  std::optional<std::size_t> burn_in;
  std::string method = "forward";
  std::string out;
};

void run_sample(const SampleArgs& a, std::ostream& out, std::ostream& err) {
  Config cfg;
  cfg.set("command", "sample");
  cfg.set("model", a.c.model);
  cfg.set("evidence", join(a.c.evidence));
  cfg.set("method", a.method);
  cfg.set("n", a.n);
  cfg.set("burn_in", a.burn_in ? std::to_string(*a.burn_in) : "n/10");
  cfg.set("seed", a.c.seed);
  cfg.set("out", a.out.empty() ? "-" : a.out);
  cfg.echo(err);

  const auto model = load_model(a.c.model);
  const auto& m = as_graphical(model);
  const auto ev = parse_evidence(m, a.c.evidence);
  RandomSource rng(a.c.seed);
  SampleBatch batch;
  if (a.method == "forward") {
    if (!ev.empty()) fail(Errc::unsupported, "forward sampling does not take evidence; use jtree or gibbs");
    batch = forward_sample(require_bn(model, "forward sampling"), a.n, rng);
  } else if (a.method == "jtree") {
    auto jt = build_junction_tree(m);
    jt_calibrate(jt, ev);
    batch = jt_forward_sample(jt, a.n, rng);
  } else if (a.method == "gibbs") {
    GibbsOptions opts;
    opts.burn_in = a.burn_in;
    batch = gibbs(m, ev, a.n, rng, opts);
  } else {
    batch = metropolis_hastings(m, single_flip_proposal(m, ev), a.n, rng, ev, a.burn_in);
  }
  emit(out, a.out, batch.to_csv());
}

// ---------------------------------------------------------------------------
// learn-params

struct LearnParamsArgs {
  Common c;
  std::optional<double> pseudocount;
  std::optional<double> dirichlet;
  std::string out;
};

void run_learn_params(const LearnParamsArgs& a, std::ostream& out, std::ostream& err) {
  const double pseudo = a.dirichlet ? *a.dirichlet : a.pseudocount.value_or(0.0);
  Config cfg;
  cfg.set("command", "learn-params");
  cfg.set("model", a.c.model);
  cfg.set("data", a.c.data);
  cfg.set("prior", a.dirichlet ? "dirichlet" : "pseudocount");
  cfg.set("pseudocount", pseudo);
  cfg.set("out", a.out.empty() ? "-" : a.out);
  cfg.echo(err);

  const auto model = load_model(a.c.model);
  const auto& structure = require_bn(model, "learn-params");
  const auto d = load_dataset(read_text_file(a.c.data), structure.variables());
  // A symmetric Dirichlet(α) prior has posterior mean (count + α) / (N + K·α), the pseudocount estimate.
  const auto fit = mle_bn(structure.dag(), d, pseudo);
  for (const auto& w : fit.warnings) err << "warning: " << w << "\n";
  emit(out, a.out, serialize_model(fit.model));
  if (!a.out.empty() && a.out != "-") {
    out << "rows=" << d.size() << "\n";
    out << "loglik=" << num(log_likelihood(fit.model, d), a.c.precision) << "\n";
  }
}

// ---------------------------------------------------------------------------
// learn-structure

struct LearnStructureArgs {
  Common c;
  std::string method = "hillclimb";
  std::string score = "bic";
  double alpha = 0.05;
  std::string root;
  std::size_t restarts = 0;
  std::size_t max_in_degree = 3;
  std::string dot;
};

Dataset load_data(const Common& c) {
  const auto csv = read_text_file(c.data);
  if (c.model.empty()) return load_dataset(csv);
  return load_dataset(csv, as_graphical(load_model(c.model)).variables());
}

void run_learn_structure(const LearnStructureArgs& a, std::ostream& out, std::ostream& err) {
  Config cfg;
  cfg.set("command", "learn-structure");
  cfg.set("data", a.c.data);
  cfg.set("model", a.c.model.empty() ? "(states from data)" : a.c.model);
  cfg.set("method", a.method);
  cfg.set("score", a.score);
  cfg.set("alpha", a.alpha);
  cfg.set("root", a.root.empty() ? "(first column)" : a.root);
  cfg.set("restarts", a.restarts);
  cfg.set("max_in_degree", a.max_in_degree);
  cfg.set("seed", a.c.seed);
  cfg.echo(err);

  const auto d = load_data(a.c);
  if (d.variables().empty()) fail(Errc::argument, "dataset has no variables");
  std::string dot;
  if (a.method == "chowliu") {
    const auto r = chow_liu(d, a.root.empty() ? d.names().front() : a.root);
    for (const auto& w : r.warnings) err << "warning: " << w << "\n";
    for (const auto& [p, ch] : r.tree.edges()) out << "edge=" << p << "->" << ch << "\n";
    out << "total_mi=" << num(r.total_weight, a.c.precision) << "\n";
    dot = to_dot(r.tree);
  } else if (a.method == "pc") {
    const auto r = pc(data_ci_test(d, a.alpha), d.names());
    for (const auto& [t, h] : r.directed) out << "edge=" << t << "->" << h << "\n";
    for (const auto& [x, y] : r.undirected_edges()) out << "undirected=" << x << "--" << y << "\n";
    for (const auto& c : r.conflicts) err << "warning: " << c << "\n";
    dot = r.to_dot();
  } else {
    HillClimbOptions opts;
    opts.kind = parse_score(a.score);
    opts.restarts = a.restarts;
    opts.max_in_degree = a.max_in_degree;
    RandomSource rng(a.c.seed);
    const auto r = hill_climb(d, opts, &rng);
    for (const auto& [p, ch] : r.graph.edges()) out << "edge=" << p << "->" << ch << "\n";
    out << "score=" << num(r.score, a.c.precision) << "\n";
    dot = to_dot(r.graph);
  }
  if (!a.dot.empty()) emit(out, a.dot, dot);
}

// ---------------------------------------------------------------------------
// jtree, dot, score

struct JtreeArgs {
  Common c;
  std::string heuristic = "min_fill";
  std::string dot;
};

void run_jtree(const JtreeArgs& a, std::ostream& out, std::ostream& err) {
  Config cfg;
  cfg.set("command", "jtree");
  cfg.set("model", a.c.model);
  cfg.set("heuristic", a.heuristic);
  cfg.echo(err);

  const auto model = load_model(a.c.model);
  const auto& m = as_graphical(model);
  const auto jt = build_junction_tree(m, parse_heuristic(a.heuristic));
  std::size_t width = 0;
  out << "cliques=" << jt.cliques.size() << "\n";
  for (std::size_t c = 0; c < jt.cliques.size(); ++c) {
    out << "clique[" << c << "]=" << join(jt.clique_names(c)) << "\n";
    width = std::max(width, jt.cliques[c].size());
  }
  for (std::size_t e = 0; e < jt.edges.size(); ++e) {
    std::vector<std::string> names;
    for (const auto& v : jt.sepsets[e]) names.push_back(v->name());
    out << "sepset[" << jt.edges[e].first << "-" << jt.edges[e].second << "]=" << join(names) << "\n";
  }
  out << "width=" << (width ? width - 1 : 0) << "\n";
  out << "family_preservation=" << (has_family_preservation(jt, m) ? "true" : "false") << "\n";
  out << "running_intersection=" << (has_running_intersection(jt) ? "true" : "false") << "\n";
  if (!a.dot.empty()) emit(out, a.dot, to_dot(jt));
}

struct DotArgs {
  Common c;
  std::string out;
};

void run_dot(const DotArgs& a, std::ostream& out, std::ostream& err) {
  Config cfg;
  cfg.set("command", "dot");
  cfg.set("model", a.c.model);
  cfg.set("out", a.out.empty() ? "-" : a.out);
  cfg.echo(err);
  const auto model = load_model(a.c.model);
  if (const auto* bn = std::get_if<BayesianNetwork>(&model)) emit(out, a.out, to_dot(bn->dag()));
  else emit(out, a.out, to_dot(std::get<MarkovRandomField>(model).skeleton()));
}

struct ScoreArgs {
  Common c;
  std::string score = "bic";
  double bd_prior = 1.0;
};

void run_score(const ScoreArgs& a, std::ostream& out, std::ostream& err) {
  Config cfg;
  cfg.set("command", "score");
  cfg.set("model", a.c.model);
  cfg.set("data", a.c.data);
  cfg.set("score", a.score);
  cfg.set("bd_prior", a.bd_prior);
  cfg.echo(err);
  const auto model = load_model(a.c.model);
  const auto& structure = require_bn(model, "score");
  const auto d = load_dataset(read_text_file(a.c.data), structure.variables());
  const auto kind = parse_score(a.score);
  out << "score=" << num(score(structure.dag(), d, kind, a.bd_prior), a.c.precision) << "\n";
  out << "parameters=" << parameter_count(structure.dag(), d) << "\n";
  out << "rows=" << d.size() << "\n";
}

// ---------------------------------------------------------------------------
// em-gmm

struct GmmArgs {
  Common c;
  std::size_t k = 2;
  std::size_t restarts = 5;
  std::size_t max_iterations = 500;
  double tolerance = 1e-8;
  std::string trace;
};

void run_em_gmm(const GmmArgs& a, std::ostream& out, std::ostream& err) {
  Config cfg;
  cfg.set("command", "em-gmm");
  cfg.set("data", a.c.data);
  cfg.set("k", a.k);
  cfg.set("restarts", a.restarts);
  cfg.set("max_iterations", a.max_iterations);
  cfg.set("tolerance", a.tolerance);
  cfg.set("seed", a.c.seed);
  cfg.echo(err);

  const auto x = load_real_matrix(read_text_file(a.c.data));
  GmmOptions opts;
  opts.components = a.k;
  opts.restarts = a.restarts;
  opts.max_iterations = a.max_iterations;
  opts.tolerance = a.tolerance;
  RandomSource rng(a.c.seed);
  const auto r = em_gmm(x, opts, rng);
  for (const auto& e : r.events) err << "event: " << e << "\n";
  out << "loglik=" << num(r.loglik_trace.back(), a.c.precision) << "\n";
  out << "iterations=" << r.iterations << "\n";
  out << "converged=" << (r.converged ? "true" : "false") << "\n";
  for (std::size_t k = 0; k < r.params.components(); ++k) {
    const auto ks = "[" + std::to_string(k) + "]=";
    out << "weight" << ks << num(r.params.weights[static_cast<Eigen::Index>(k)], a.c.precision) << "\n";
    std::vector<std::string> mean, cov;
    for (const double v : r.params.means[k]) mean.push_back(num(v, a.c.precision));
    for (const double v : r.params.covariances[k].reshaped()) cov.push_back(num(v, a.c.precision));
    out << "mean" << ks << join(mean) << "\n";
    out << "covariance" << ks << join(cov) << "\n";
  }
  if (!a.trace.empty()) {
    std::ostringstream os;
    os << "iteration,loglik\n" << std::setprecision(17);
    for (std::size_t i = 0; i < r.loglik_trace.size(); ++i) os << i << "," << r.loglik_trace[i] << "\n";
    emit(out, a.trace, os.str());
  }
}

void add_common(CLI::App* sub, Common& c, bool model, bool data, bool evidence, bool seed) {
  if (model) sub->add_option("--model", c.model, "model document (JSON)")->required();
  if (data) sub->add_option("--data", c.data, "dataset (CSV)")->required();
  if (evidence) sub->add_option("--evidence,-e", c.evidence, "observation VARIABLE=state (repeatable)");
  if (seed) sub->add_option("--seed", c.seed, "random seed");
  sub->add_option("--precision", c.precision, "significant digits of printed numbers")->check(CLI::Range(1, 17));
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Discrete probabilistic graphical models: inference, sampling and learning", "pgm"};
  app.require_subcommand(1, 1);

  QueryArgs query_args;
  auto* query = app.add_subcommand("query", "marginal or conditional distribution of target variables");
  add_common(query, query_args.c, true, false, true, true);
  query->add_option("--target,-t", query_args.targets, "query variable (repeatable)")->required();
  query->add_option("--engine", query_args.engine, "inference engine")
      ->check(CLI::IsMember({"ve", "bp", "jtree", "gibbs", "mh", "meanfield", "loopy", "enum"}));
  query->add_option("--n", query_args.n, "samples for gibbs and mh");
  query->add_option("--burn-in", query_args.burn_in, "discarded sweeps for gibbs and mh");
  query->add_option("--max-iterations", query_args.max_iterations, "loopy BP iteration limit");
  query->add_option("--damping", query_args.damping, "loopy BP damping in (0, 1]");

  MapArgs map_args;
  auto* map = app.add_subcommand("map", "most probable assignment");
  add_common(map, map_args.c, true, false, true, true);
  map->add_option("--engine", map_args.engine, "MAP engine")
      ->check(CLI::IsMember({"maxprod", "graphcut", "dualdecomp", "localsearch", "anneal", "enum"}));
  map->add_option("--max-iterations", map_args.max_iterations, "dual decomposition iterations");
  map->add_option("--sweeps", map_args.sweeps, "annealing sweeps");

  SampleArgs sample_args;
  auto* sample = app.add_subcommand("sample", "draw samples as CSV");
  add_common(sample, sample_args.c, true, false, true, true);
  sample->add_option("--n", sample_args.n, "number of samples");
  sample->add_option("--burn-in", sample_args.burn_in, "discarded sweeps for gibbs and mh");
  sample->add_option("--method", sample_args.method, "sampler")
      ->check(CLI::IsMember({"forward", "jtree", "gibbs", "mh"}));
  sample->add_option("--out,-o", sample_args.out, "output CSV path (default stdout)");

  LearnParamsArgs lp_args;
  auto* learn_params = app.add_subcommand("learn-params", "fit the CPDs of a Bayesian network structure");
  add_common(learn_params, lp_args.c, true, true, false, false);
  auto* pseudo = learn_params->add_option("--pseudocount", lp_args.pseudocount, "additive smoothing count")
                     ->check(CLI::NonNegativeNumber);
  learn_params->add_option("--dirichlet", lp_args.dirichlet, "symmetric Dirichlet concentration (posterior mean)")
      ->check(CLI::PositiveNumber)
      ->excludes(pseudo);
  learn_params->add_option("--out,-o", lp_args.out, "output model path (default stdout)");

  LearnStructureArgs ls_args;
  auto* learn_structure = app.add_subcommand("learn-structure", "learn a graph from data");
  add_common(learn_structure, ls_args.c, false, true, false, true);
  learn_structure->add_option("--model", ls_args.c.model, "model whose variables declare the state spaces");
  learn_structure->add_option("--method", ls_args.method, "search method")
      ->check(CLI::IsMember({"chowliu", "pc", "hillclimb"}));
  learn_structure->add_option("--score", ls_args.score, "hill-climbing score")
      ->check(CLI::IsMember({"bic", "aic", "loglik", "bd"}));
  learn_structure->add_option("--alpha", ls_args.alpha, "PC significance level")->check(CLI::Range(0.0, 1.0));
  learn_structure->add_option("--root", ls_args.root, "Chow-Liu root");
  learn_structure->add_option("--restarts", ls_args.restarts, "hill-climbing random restarts");
  learn_structure->add_option("--max-in-degree", ls_args.max_in_degree, "hill-climbing parent limit");
  learn_structure->add_option("--dot", ls_args.dot, "write the learned graph as DOT");

  JtreeArgs jt_args;
  auto* jtree = app.add_subcommand("jtree", "build a junction tree");
  add_common(jtree, jt_args.c, true, false, false, false);
  jtree->add_option("--heuristic", jt_args.heuristic, "elimination ordering heuristic")
      ->check(CLI::IsMember({"min_neighbors", "min_weight", "min_fill"}));
  jtree->add_option("--dot", jt_args.dot, "write the tree as DOT ('-' for stdout)");

  DotArgs dot_args;
  auto* dot = app.add_subcommand("dot", "export a model's graph as DOT");
  add_common(dot, dot_args.c, true, false, false, false);
  dot->add_option("--out,-o", dot_args.out, "output path (default stdout)");

  ScoreArgs score_args;
  auto* score_cmd = app.add_subcommand("score", "score a Bayesian network structure against data");
  add_common(score_cmd, score_args.c, true, true, false, false);
  score_cmd->add_option("--score", score_args.score, "score kind")->check(CLI::IsMember({"bic", "aic", "loglik", "bd"}));
  score_cmd->add_option("--bd-prior", score_args.bd_prior, "BD prior count per cell")->check(CLI::PositiveNumber);

  GmmArgs gmm_args;
  auto* em = app.add_subcommand("em-gmm", "fit a Gaussian mixture by EM");
  add_common(em, gmm_args.c, false, true, false, true);
  em->add_option("--k", gmm_args.k, "components")->check(CLI::PositiveNumber);
  em->add_option("--restarts", gmm_args.restarts, "seeded runs; the best is kept");
  em->add_option("--max-iterations", gmm_args.max_iterations, "EM iteration limit");
  em->add_option("--tol", gmm_args.tolerance, "log-likelihood gain threshold");
  em->add_option("--trace", gmm_args.trace, "write the log-likelihood trace as CSV");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n\n" << app.help();
    return exit_usage;
  }

  try {
    if (*query) run_query(query_args, out, err);
    else if (*map) run_map(map_args, out, err);
    else if (*sample) run_sample(sample_args, out, err);
    else if (*learn_params) run_learn_params(lp_args, out, err);
    else if (*learn_structure) run_learn_structure(ls_args, out, err);
    else if (*jtree) run_jtree(jt_args, out, err);
    else if (*dot) run_dot(dot_args, out, err);
    else if (*score_cmd) run_score(score_args, out, err);
    else run_em_gmm(gmm_args, out, err);
  } catch (const Error& e) {
    err << "error [" << errc_name(e.code()) << "]: " << e.what() << "\n";
    return is_validation_error(e.code()) ? exit_validation : exit_inference;
  }
  return exit_ok;
}

}  // namespace pgm
