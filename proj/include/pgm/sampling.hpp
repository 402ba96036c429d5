#pragma once

#include <Eigen/Core>

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pgm/exact.hpp"
#include "pgm/models.hpp"
#include "pgm/random.hpp"

namespace pgm {

struct SampleBatch {
  std::vector<VarRef> variables;
  std::vector<Assignment> samples;
  std::vector<double> weights;  ///< empty for unweighted batches
  std::uint64_t seed = 0;
  std::size_t burn_in = 0;
  std::size_t chain = 0;
  double acceptance_rate = 1.0;

  std::size_t size() const noexcept { return samples.size(); }
  /// Header of variable names (plus "weight" when weighted), one row of state labels per sample.
  std::string to_csv() const;
};

/// Empirical (weighted when the batch is) distribution of one variable.
std::vector<double> empirical_marginal(const SampleBatch& batch, const std::string& var);

// ---------------------------------------------------------------------------
// Direct samplers

/// Ancestral sampling in topological order, one categorical draw per variable.
SampleBatch forward_sample(const BayesianNetwork& bn, std::size_t n, RandomSource& rng);

/// Samples the root clique from its belief, then each clique given its already-sampled sepset.
/// Requires a sum-product calibrated tree; evidence used in calibration is respected.
SampleBatch jt_forward_sample(const JunctionTree& jt, std::size_t n, RandomSource& rng);

struct RejectionResult {
  double estimate = 0.0;  ///< accepted / n
  std::size_t accepted = 0;
  std::size_t draws = 0;
  std::string warning;    ///< set when nothing was accepted
};

/// Fraction of forward samples consistent with the evidence; unbiased for p(evidence).
RejectionResult rejection_estimate(const BayesianNetwork& bn, const IndexEvidence& evidence, std::size_t n,
                                   RandomSource& rng);

// ---------------------------------------------------------------------------
// Importance sampling

/// Distribution over full assignments that keeps evidence variables at their observed states.
struct Proposal {
  std::function<Assignment(RandomSource&)> sample;
  std::function<double(const Assignment&)> density;
};

/// Uniform over the states of every non-evidence variable.
Proposal uniform_proposal(const GraphicalModel& m, const IndexEvidence& evidence);
/// Ancestral sampling with evidence variables clamped (likelihood weighting).
Proposal prior_proposal(const BayesianNetwork& bn, const IndexEvidence& evidence);
/// Joint table over the non-evidence variables (any scope order); need not be normalized.
Proposal table_proposal(const GraphicalModel& m, const IndexEvidence& evidence, const Factor& q);

struct ImportanceQuery {
  std::string variable;
  int state = 0;
};

struct ImportanceResult {
  double estimate = 0.0;          ///< (1/T) Σ w, or Σ δ w / Σ w in normalized mode
  double evidence_estimate = 0.0; ///< (1/T) Σ w from the same samples
  double effective_sample_size = 0.0;
  SampleBatch batch;              ///< weighted samples
};

/// Weights w = p̃(x) / q(x) over assignments drawn from q. Unnormalized mode estimates p(evidence)
/// (Z(evidence) for an MRF); normalized mode estimates p(query | evidence) from the same samples.
/// Throws infinite_weight when q(x) = 0 at a sample with p̃(x) > 0.
ImportanceResult importance_estimate(const GraphicalModel& m, const IndexEvidence& evidence, const Proposal& q,
                                     std::size_t n, RandomSource& rng,
                                     const std::optional<ImportanceQuery>& query = std::nullopt,
                                     bool normalized = false);

// ---------------------------------------------------------------------------
// MCMC

struct GibbsOptions {
  bool random_scan = false;               ///< default is a systematic sweep in variable-name order
  std::optional<std::size_t> burn_in;     ///< sweeps discarded; defaults to n / 10
  std::optional<Assignment> initial;      ///< default: forward sample for a BN, uniform otherwise
};

/// One recorded sample per sweep after burn-in. Each update draws from the exact full conditional.
SampleBatch gibbs(const GraphicalModel& m, const IndexEvidence& evidence, std::size_t n, RandomSource& rng,
                  const GibbsOptions& options = {});

/// Proposal kernel Q(x' | x). Must keep evidence variables fixed.
struct MhProposal {
  std::function<Assignment(const Assignment&, RandomSource&)> sample;
  std::function<double(const Assignment& to, const Assignment& from)> density;
};

/// Picks a non-evidence variable uniformly and moves it to a different state uniformly (symmetric).
MhProposal single_flip_proposal(const GraphicalModel& m, const IndexEvidence& evidence = {});
/// Picks a non-evidence variable uniformly and redraws it from its full conditional.
MhProposal gibbs_proposal(const GraphicalModel& m, const IndexEvidence& evidence = {});
/// Independent proposal from a joint table over all variables in model order.
MhProposal independent_proposal(const GraphicalModel& m, const Factor& q);

/// Accepts with min(1, p̃(x')Q(x|x') / (p̃(x)Q(x'|x))); rejected steps repeat the current state.
/// Throws invalid_kernel when Q(x|x') = 0 for a proposed move.
SampleBatch metropolis_hastings(const GraphicalModel& m, const MhProposal& proposal, std::size_t n,
                                RandomSource& rng, const IndexEvidence& evidence = {},
                                std::optional<std::size_t> burn_in = std::nullopt,
                                std::optional<Assignment> initial = std::nullopt);

/// Column-stochastic kernels over all joint assignments (row-major variable order):
/// K(i, j) = P(next = i | current = j).
Eigen::MatrixXd gibbs_sweep_kernel(const GraphicalModel& m);
Eigen::MatrixXd mh_kernel(const GraphicalModel& m, const MhProposal& proposal);

// ---------------------------------------------------------------------------
// Chain diagnostics

struct ChainDiagnostics {
  Eigen::VectorXd stationary;
  bool converged = false;
  std::size_t iterations = 0;
  bool irreducible = false;
  bool aperiodic = false;
  std::vector<std::size_t> periods;  ///< per state; 0 when no path returns to the state
  double detailed_balance_residual = 0.0;  ///< max |π_j T_ij − π_i T_ji|
};

/// T(i, j) = P(next = i | previous = j); columns must sum to one. Power iteration runs on the
/// lazy chain (I + T) / 2, which has the same stationary distributions but no periodicity.
ChainDiagnostics chain_analysis(const Eigen::MatrixXd& T, const std::optional<Eigen::VectorXd>& p0 = std::nullopt,
                                double tolerance = 1e-12, std::size_t max_iterations = 1000000);

struct ModeOccupancy {
  std::vector<std::vector<double>> block_fractions;  ///< [block][mode], share of the block's samples
  std::size_t switches = 0;                          ///< moves between different modes
  double imbalance = 0.0;  ///< max over blocks and modes of |share among mode visits − expected share|
  bool slow_mixing = false;                          ///< imbalance above the threshold
};

/// Splits the chain into blocks and compares each block's split of mode visits with the expected
/// mode weights (uniform when empty). A chain stuck in one mode scores 1 − its expected share.
ModeOccupancy mode_occupancy(const SampleBatch& batch, const std::vector<Assignment>& modes, std::size_t blocks = 10,
                             double threshold = 0.25, const std::vector<double>& expected = {});

}  // namespace pgm
