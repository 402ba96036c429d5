#pragma once

#include <array>
#include <string>
#include <vector>

#include "pgm/models.hpp"
#include "pgm/random.hpp"

namespace pgm {

// ---------------------------------------------------------------------------
// Binary pairwise energies and graph cuts

/// E(x) = Σ_u E_u(x_u) + Σ_(u,v) λ_uv [x_u != x_v] over binary variables.
struct PairwiseEnergyModel {
  struct Edge {
    std::size_t u = 0;
    std::size_t v = 0;
    double lambda = 0.0;
  };

  std::vector<std::string> names;
  std::vector<std::array<double, 2>> unary;
  std::vector<Edge> edges;

  std::size_t add_node(std::string name, double e0, double e1);
  void add_edge(std::size_t u, std::size_t v, double lambda);
  std::size_t size() const noexcept { return names.size(); }
  double energy(const Assignment& x) const;
  /// Throws invalid_model on a negative λ or a non-finite unary entry.
  void validate() const;
};

/// Subtracts min E_u from each unary table so one state of every node has energy zero.
PairwiseEnergyModel normalize_energies(const PairwiseEnergyModel& m);

/// Exact rewrite of a binary pairwise MRF as unary energies plus Potts terms.
/// A pairwise energy E(a, b) decomposes as c + α·a + β·b + λ[a != b] with
/// λ = (E01 + E10 - E00 - E11) / 2; λ < 0 (non-submodular) throws unsupported.
/// Returns the dropped constant through `offset` when given.
PairwiseEnergyModel to_pairwise_energy(const MarkovRandomField& m, double* offset = nullptr);

struct FlowNetwork {
  struct Arc {
    std::size_t from = 0;
    std::size_t to = 0;
    double capacity = 0.0;
  };

  std::vector<std::string> names;
  std::size_t source = 0;
  std::size_t sink = 0;
  std::vector<Arc> arcs;

  std::size_t add_node(std::string name);
  void add_arc(std::size_t from, std::size_t to, double capacity);
  /// Two arcs of equal capacity.
  void add_edge(std::size_t a, std::size_t b, double capacity);
  std::size_t index_of(const std::string& name) const;
};

struct CutResult {
  double cost = 0.0;
  std::vector<std::size_t> source_side;  ///< sorted node indices
  std::vector<std::size_t> sink_side;
};

/// Max-flow by shortest augmenting paths; the source side is residual reachability from the source.
CutResult min_cut(const FlowNetwork& g);

struct EnergyMapResult {
  Assignment assignment;
  double energy = 0.0;    ///< energy of the assignment under the input model
  double cut_cost = 0.0;  ///< equals the energy of the normalized model
};

/// Source side is label 0, sink side label 1. Energies are normalized first.
EnergyMapResult graphcut_map(const PairwiseEnergyModel& m);

// ---------------------------------------------------------------------------
// Integer program export

/// LP-format text for the MAP integer program of a pairwise MRF.
/// Variables mu_i_s and mu_i_j_s_t use model variable indices (i < j) and state indices.
/// Entries whose potential is zero are fixed to 0 in the Bounds section.
std::string export_map_ilp(const MarkovRandomField& m);

// ---------------------------------------------------------------------------
// Dual decomposition

struct DualOptions {
  std::size_t max_iterations = 500;
  double step_scale = 1.0;  ///< c in the step size c / sqrt(k)
  double tolerance = 1e-9;
};

struct DualState {
  /// delta[f][k] is the multiplier table of pairwise slave f towards its k-th scope variable.
  std::vector<std::array<std::vector<double>, 2>> delta;
  double bound = 0.0;                         ///< L(delta) at the last evaluation
  std::vector<double> bound_trace;            ///< L(delta_k) for k = 0, 1, ...
  std::vector<double> primal_trace;           ///< log score of the decoded node argmaxes at step k
  Assignment node_argmax;                     ///< per-variable local maximizers
  std::vector<std::array<int, 2>> factor_argmax;
  bool agreement = false;
  std::size_t iterations = 0;
};

struct DualResult {
  DualState state;
  MapResult best;          ///< best decoded assignment seen
  double best_bound = 0.0; ///< smallest L(delta) seen
  double gap = 0.0;        ///< best_bound - best.log_score
};

/// Subgradient descent on the Lagrangian of a pairwise MRF (one slave per node and per pairwise factor).
/// Unary factors fold into the node terms; empty-scope factors add a constant.
DualResult dual_decomposition(const MarkovRandomField& m, const DualOptions& options = {});

// ---------------------------------------------------------------------------
// Local search and annealing

/// Coordinate ascent from a random start: each variable moves to its best state when that strictly
/// improves log_joint, until a full sweep changes nothing.
MapResult local_search_map(const GraphicalModel& m, RandomSource& rng, std::size_t max_sweeps = 1000,
                           const Assignment& start = {});

struct AnnealingSchedule {
  double initial_temperature = 10.0;
  double cooling = 0.95;     ///< geometric factor applied after each sweep
  std::size_t sweeps = 400;
};

/// Single-site Metropolis moves at temperature t_k with p_t ∝ exp(log p̃ / t). Returns the best state seen.
MapResult simulated_annealing_map(const GraphicalModel& m, const AnnealingSchedule& schedule, RandomSource& rng);

}  // namespace pgm
