#pragma once

#include <Eigen/Core>

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pgm/graph.hpp"
#include "pgm/models.hpp"
#include "pgm/random.hpp"
#include "pgm/sampling.hpp"

namespace pgm {

// ---------------------------------------------------------------------------
// Data

/// Complete discrete data: one row per sample, one column per variable.
class Dataset {
 public:
  Dataset() = default;
  /// Throws shape when the column count differs and assignment when a cell is out of range.
  Dataset(std::vector<VarRef> variables, Eigen::MatrixXi rows);
  Dataset(std::vector<VarRef> variables, const std::vector<Assignment>& rows);
  static Dataset from_batch(const SampleBatch& batch);

  const std::vector<VarRef>& variables() const noexcept { return variables_; }
  const Eigen::MatrixXi& rows() const noexcept { return rows_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(rows_.rows()); }
  std::size_t column(const std::string& name) const;
  const VarRef& variable(const std::string& name) const { return variables_[column(name)]; }
  std::vector<std::string> names() const;

 private:
  std::vector<VarRef> variables_;
  Eigen::MatrixXi rows_;
};

/// Joint counts over a scope, row-major with the first scope variable slowest.
struct CountTable {
  std::vector<VarRef> scope;
  std::vector<std::size_t> counts;

  std::size_t total() const;
  Factor as_factor() const;
};

CountTable counts(const Dataset& d, const std::vector<std::string>& scope);

// ---------------------------------------------------------------------------
// Parameter estimation

struct MleResult {
  BayesianNetwork model;
  std::vector<std::string> warnings;  ///< unseen parent configurations filled with uniform rows
};

/// θ(x | pa) = (#(x, pa) + c) / (#(pa) + c·card(x)) with pseudocount c ≥ 0.
MleResult mle_bn(const DirectedGraph& structure, const Dataset& d, double pseudocount = 0.0);

/// Σ_rows log p(row) under a Bayesian network whose variables the dataset covers.
double log_likelihood(const BayesianNetwork& bn, const Dataset& d);

struct DirichletParams {
  std::vector<double> alpha;

  /// Throws argument unless K ≥ 2 and every α is positive and finite.
  void validate() const;
  std::vector<double> mean() const;
};

/// α' = α + counts. Throws shape when the lengths differ.
DirichletParams dirichlet_posterior(const DirichletParams& prior, const std::vector<double>& counts);
DirichletParams dirichlet_posterior(const DirichletParams& prior, const CountTable& counts);
std::vector<double> posterior_mean(const DirichletParams& p);

// ---------------------------------------------------------------------------
// Structure scores

enum class ScoreKind { loglik, aic, bic, bd };
const char* score_name(ScoreKind k);
ScoreKind parse_score(const std::string& name);

/// Free parameters of one family: (card(child) − 1)·Π card(parents).
std::size_t family_parameter_count(const Dataset& d, const std::string& child, const std::vector<std::string>& parents);
/// ∥G∥ summed over every family of the structure.
std::size_t parameter_count(const DirectedGraph& g, const Dataset& d);

/// Decomposable score of one family. bd uses prior count `bd_prior` in every cell.
double family_score(const Dataset& d, const std::string& child, const std::vector<std::string>& parents, ScoreKind kind,
                    double bd_prior = 1.0);
/// Sum of family scores. Throws insufficient data (argument) on an empty dataset.
double score(const DirectedGraph& g, const Dataset& d, ScoreKind kind, double bd_prior = 1.0);

// ---------------------------------------------------------------------------
// Tree and score-based structure search

/// Empirical mutual information in nats.
double mutual_information(const Dataset& d, const std::string& a, const std::string& b);

struct ChowLiuResult {
  DirectedGraph tree;                 ///< oriented away from the root
  EdgeWeights weights;                ///< mutual information of every pair
  double total_weight = 0.0;          ///< Σ MI over tree edges
  BayesianNetwork model;              ///< CPDs fitted by mle_bn
  std::vector<std::string> warnings;  ///< constant variables
};

/// Maximum-weight spanning tree of the complete weighted graph, oriented away from root.
DirectedGraph chow_liu_tree(const std::vector<std::string>& nodes, const EdgeWeights& weights, const std::string& root);
ChowLiuResult chow_liu(const Dataset& d, const std::string& root, double pseudocount = 0.0);

struct HillClimbOptions {
  ScoreKind kind = ScoreKind::bic;
  std::size_t restarts = 0;        ///< extra climbs from random DAGs (needs an rng)
  std::size_t max_in_degree = 3;
  std::size_t max_moves = 10000;
  double bd_prior = 1.0;
};

struct HillClimbResult {
  DirectedGraph graph;
  double score = 0.0;
  std::size_t moves = 0;
};

/// Greedy DAG search over single-edge additions, deletions and reversals, starting from the empty graph.
HillClimbResult hill_climb(const Dataset& d, const HillClimbOptions& options = {}, RandomSource* rng = nullptr);

// ---------------------------------------------------------------------------
// Constraint-based discovery

struct CiResult {
  bool independent = true;
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t dof = 0;
  std::string warning;
};

/// Decides X ⟂ Y | Z.
using CiTest = std::function<CiResult(const std::string& x, const std::string& y, const NodeSet& z)>;

/// G-test over the contingency tables of each Z stratum; df = (cx − 1)(cy − 1)·Π cz.
CiResult ci_test(const Dataset& d, const std::string& x, const std::string& y, const NodeSet& z, double alpha = 0.05);
/// Exact answer from d-separation in a known DAG.
CiResult ci_test(const DirectedGraph& oracle, const std::string& x, const std::string& y, const NodeSet& z);
CiTest data_ci_test(const Dataset& d, double alpha = 0.05);
CiTest oracle_ci_test(const DirectedGraph& g);

/// Partially directed graph: every skeleton edge is either directed or undirected.
struct Cpdag {
  UndirectedGraph skeleton;
  std::set<std::pair<std::string, std::string>> directed;  ///< (tail, head)
  std::map<EdgeKey, NodeSet> sepsets;
  std::vector<std::string> conflicts;
  std::set<EdgeKey> conflicted;  ///< edges the Meek rules must leave undirected

  bool is_directed(const std::string& tail, const std::string& head) const { return directed.count({tail, head}) > 0; }
  bool is_undirected(const std::string& a, const std::string& b) const;
  std::vector<EdgeKey> undirected_edges() const;
  std::string to_dot(const std::string& name = "CPDAG") const;
  friend bool operator==(const Cpdag& a, const Cpdag& b) {
    return a.skeleton == b.skeleton && a.directed == b.directed;
  }
};

/// Closes a partially directed graph under Meek rules 1–4.
void apply_meek_rules(Cpdag& g);
/// Skeleton and v-structures of the DAG, closed under the Meek rules.
Cpdag cpdag_of(const DirectedGraph& g);

/// PC: skeleton by separating sets of growing size (adjacencies frozen per level), v-structures
/// from unshielded triples, then the Meek rules. Conflicting v-structure orientations are recorded
/// and the edge is left undirected.
Cpdag pc(const CiTest& test, const std::vector<std::string>& variables,
         std::optional<std::size_t> max_conditioning = std::nullopt);

// ---------------------------------------------------------------------------
// Undirected and conditional models

/// Log-linear parameters: one θ per factor-table cell, θ = log φ.
using MrfParameters = std::vector<Eigen::VectorXd>;

MrfParameters log_potentials(const MarkovRandomField& m);
MarkovRandomField with_parameters(const MarkovRandomField& structure, const MrfParameters& theta);

struct MrfFitOptions {
  std::size_t max_iterations = 5000;
  double learning_rate = 1.0;
  double l2 = 1e-6;           ///< penalty (l2 / 2)·‖θ‖² on the average log-likelihood
  double tolerance = 1e-6;    ///< stop when the gradient ∞-norm falls below this
};

struct MrfFitResult {
  MarkovRandomField model;
  MrfParameters theta;
  std::vector<double> objective_trace;  ///< penalized average log-likelihood per iteration
  double gradient_norm = 0.0;           ///< ∞-norm of the final penalized gradient
  double moment_mismatch = 0.0;         ///< max |empirical − model| cell frequency
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<std::string> warnings;
};

/// Average log-likelihood of the data, its gradient (empirical − model cell frequencies), and the
/// model moments, from a junction tree calibrated at θ.
struct MrfObjective {
  double value = 0.0;
  MrfParameters gradient;
  MrfParameters model_moments;
  MrfParameters empirical_moments;
};
MrfObjective mrf_log_likelihood(const MarkovRandomField& structure, const Dataset& d, const MrfParameters& theta);

/// Gradient ascent on the penalized average log-likelihood, starting from θ = 0.
MrfFitResult fit_mrf(const MarkovRandomField& structure, const Dataset& d, const MrfFitOptions& options = {});

struct PseudoLikelihood {
  double value = 0.0;  ///< (1/N) Σ_rows Σ_i log p(x_i | x_−i)
  MrfParameters gradient;
};
PseudoLikelihood pseudo_likelihood(const MarkovRandomField& structure, const Dataset& d, const MrfParameters& theta);
/// Gradient ascent on the penalized average pseudo-likelihood from θ = 0.
MrfFitResult fit_pseudo_likelihood(const MarkovRandomField& structure, const Dataset& d,
                                   const MrfFitOptions& options = {});

struct CrfObjective {
  double value = 0.0;  ///< Σ_n [w·F(x, y) − log Z(x)] − (l2 / 2)·‖w‖²
  Eigen::VectorXd gradient;
};
/// Expectations per example from sum-product on the conditioned chain.
CrfObjective crf_objective(const ChainCRF& crf, const std::vector<CrfExample>& data, const Eigen::VectorXd& w,
                           double l2 = 0.0);

struct CrfFitOptions {
  double l2 = 0.01;
  std::size_t steps = 200;
  double learning_rate = 0.1;  ///< step on the per-example average gradient
};

struct CrfFitResult {
  Eigen::VectorXd weights;
  std::vector<double> loss_trace;  ///< negative penalized conditional log-likelihood per step
};

/// Gradient ascent on the L2-penalized conditional log-likelihood; writes the weights back into crf.
CrfFitResult fit_chain_crf(ChainCRF& crf, const std::vector<CrfExample>& data, const CrfFitOptions& options = {});

// ---------------------------------------------------------------------------
// Gaussian mixtures

struct GmmParams {
  Eigen::VectorXd weights;
  std::vector<Eigen::VectorXd> means;
  std::vector<Eigen::MatrixXd> covariances;

  std::size_t components() const noexcept { return means.size(); }
  /// Throws argument unless weights sum to one and every covariance is symmetric positive definite.
  void validate() const;
};

struct GmmOptions {
  std::size_t components = 2;
  std::size_t max_iterations = 500;
  double tolerance = 1e-8;       ///< stop when the log-likelihood gains less than this
  std::size_t restarts = 5;      ///< runs from independent k-means++ seedings; the best is returned
  std::optional<GmmParams> init; ///< replaces the first seeding when set
};

struct GmmResult {
  GmmParams params;
  std::vector<double> loglik_trace;  ///< total log-likelihood before each M-step, then at the end
  Eigen::MatrixXd responsibilities;  ///< N × K, rows sum to one
  std::size_t iterations = 0;
  bool converged = false;
  std::size_t monotonicity_violations = 0;  ///< decreases larger than 1e-8
  std::vector<std::string> events;          ///< component reinitializations
};

/// Log-likelihood Σ_n log Σ_k π_k N(x_n | μ_k, Σ_k) of data rows.
double gmm_log_likelihood(const Eigen::MatrixXd& data, const GmmParams& params);

/// EM with maximum-likelihood (1/N_k) covariances. A component whose covariance has an eigenvalue
/// below 1e-6·trace(S)/d (S the data covariance) is reseeded at a random row and logged.
GmmResult em_gmm(const Eigen::MatrixXd& data, const GmmOptions& options, RandomSource& rng);

}  // namespace pgm
