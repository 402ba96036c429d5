#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pgm/models.hpp"
#include "pgm/random.hpp"

namespace pgm {

/// Σ q log(q / p) over a shared scope (any variable order), with 0 log 0 = 0.
/// Returns +infinity when q has mass where p has none. Both tables are normalized first.
double kl_divergence(const Factor& q, const Factor& p);

/// Fully factored q(x) = Π_i q_i(x_i) over a model's variables.
struct FactoredDistribution {
  std::vector<VarRef> variables;
  std::vector<std::vector<double>> q;  ///< q[i][s], each row sums to one

  static FactoredDistribution uniform(const std::vector<VarRef>& variables);
  /// Uniform mixed with Dirichlet(1) noise of the given weight, renormalized.
  static FactoredDistribution perturbed(const std::vector<VarRef>& variables, RandomSource& rng, double weight = 0.5);

  std::size_t index_of(const std::string& name) const;
  const std::vector<double>& operator[](const std::string& name) const { return q[index_of(name)]; }
  Factor marginal(std::size_t i) const;
  /// Product table in variable order (enumerable sizes only).
  Factor joint() const;
  /// Throws argument when a row is negative, non-finite or does not sum to one within 1e-12.
  void validate() const;
};

double entropy(const FactoredDistribution& q);

/// E_q[Σ_c log φ_c] + H(q), each expectation taken over one factor's scope only.
/// Equals log Z − KL(q ∥ p); −infinity when q puts mass on a zero of some factor.
double elbo(const GraphicalModel& m, const FactoredDistribution& q);

struct ElboTrace {
  std::vector<double> sweeps;   ///< ELBO after each full coordinate sweep (entry 0 is the initial value)
  std::vector<double> updates;  ///< ELBO after every single-coordinate update
  bool converged = false;
  std::size_t monotonicity_violations = 0;  ///< updates that lowered the ELBO by more than 1e-10
  std::optional<double> log_partition;      ///< exact log Z(evidence) when the model was enumerable
  std::optional<double> kl_gap;             ///< log Z − final ELBO = KL(q ∥ p)

  /// Columns sweep,elbo.
  std::string to_csv() const;
};

struct MeanFieldOptions {
  std::size_t max_sweeps = 200;
  double tolerance = 1e-10;                   ///< stop when a sweep gains less than this
  std::optional<FactoredDistribution> init;   ///< default: uniform
  std::size_t restarts = 0;                   ///< extra runs from perturbed starts (needs an rng)
  std::size_t exact_gap_cap = std::size_t(1) << 16;  ///< enumerate log Z up to this many states
};

struct MeanFieldResult {
  FactoredDistribution q;
  ElboTrace trace;
  std::vector<std::size_t> blanket_sizes;  ///< factors touching each variable (the cost of its update)
};

/// Coordinate ascent in variable-name order: log q_j(x_j) ← Σ_{c ∋ j} E_{q−j}[log φ_c] + const.
/// Evidence variables stay at point masses. Throws degenerate_distribution when an update
/// leaves no state with finite score. The returned run is the best over all restarts.
MeanFieldResult mean_field(const GraphicalModel& m, const IndexEvidence& evidence = {},
                           const MeanFieldOptions& options = {}, RandomSource* rng = nullptr);

enum class BpSchedule { synchronous, sequential };

struct LoopyBpOptions {
  std::size_t max_iterations = 1000;
  double damping = 0.5;       ///< new = (1 − λ)·old + λ·proposed; λ = 1 means no damping
  double tolerance = 1e-12;   ///< converged when the largest message change falls below this
  BpSchedule schedule = BpSchedule::synchronous;
};

struct LoopyBpResult {
  std::vector<Factor> marginals;       ///< one per variable, model order, normalized
  std::vector<Factor> factor_beliefs;  ///< one per factor, normalized
  bool converged = false;
  double residual = 0.0;               ///< largest message change in the last iteration
  std::size_t iterations = 0;
};

/// Sum-product on the factor graph with uniform initial messages. One iteration updates every
/// variable-to-factor message and then every factor-to-variable message. Throws zero_evidence
/// when evidence leaves a message with no mass.
LoopyBpResult loopy_bp(const GraphicalModel& m, const IndexEvidence& evidence = {}, const LoopyBpOptions& options = {});

}  // namespace pgm
