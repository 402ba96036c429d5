#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pgm/factor.hpp"
#include "pgm/graph.hpp"
#include "pgm/models.hpp"

namespace pgm {

// ---------------------------------------------------------------------------
// Elimination orderings

enum class OrderingHeuristic { given, min_neighbors, min_weight, min_fill };

const char* heuristic_name(OrderingHeuristic h);
OrderingHeuristic parse_heuristic(const std::string& name);

struct EliminationOrdering {
  std::vector<std::string> order;
  OrderingHeuristic heuristic = OrderingHeuristic::given;
  /// Largest elimination clique size minus one (0 for an empty ordering).
  std::size_t induced_width = 0;
};

/// Greedy ordering over the interaction graph of every variable not in `keep`; ties go to the smaller name.
EliminationOrdering choose_ordering(const GraphicalModel& m, OrderingHeuristic heuristic,
                                    const std::vector<std::string>& keep = {});

/// Wraps a caller-supplied order and measures its induced width on m's interaction graph.
EliminationOrdering given_ordering(const GraphicalModel& m, const std::vector<std::string>& order);

// ---------------------------------------------------------------------------
// Variable elimination

struct EliminationResult {
  /// Over the query variables in query order. Sums to one for sum_product, peaks at one for max_product,
  /// has minimum zero for min_sum (energies) and is a 0/1 table for or_and.
  Factor factor;
  /// Unnormalized result = factor * exp(log_normalizer). For sum_product this is log p(evidence)
  /// on a Bayesian network (log Z(evidence) on an MRF); for max_product and min_sum it is the log
  /// of the best unnormalized joint value.
  double log_normalizer = 0.0;
  /// Largest scope formed by a product during elimination.
  std::size_t max_scope = 0;
  EliminationOrdering ordering;
};

EliminationResult variable_elimination(const GraphicalModel& m, const std::vector<std::string>& query,
                                       const IndexEvidence& evidence = {},
                                       const Semiring<double>& semiring = Semiring<double>::sum_product(),
                                       const std::optional<EliminationOrdering>& ordering = std::nullopt);

// ---------------------------------------------------------------------------
// Belief propagation on tree-structured factor graphs

/// Messages keyed by (source node, target node). Nodes 0..n-1 are variables (model order),
/// nodes n.. are factors (model factor order).
struct MessageStore {
  std::map<std::pair<std::size_t, std::size_t>, Factor> messages;
  std::size_t passes = 0;
};

struct TreeBpResult {
  std::vector<Factor> marginals;       ///< one per variable, normalized (max-normalized for max_product)
  std::vector<Factor> factor_beliefs;  ///< one per factor, normalized over the factor scope
  MessageStore store;
  /// log Z(evidence) for sum_product, log of the best joint value for max_product.
  double log_partition = 0.0;
};

/// Two-phase schedule from the first variable of each connected component.
/// Throws not_a_tree when the factor graph has a cycle.
TreeBpResult tree_bp(const GraphicalModel& m, const IndexEvidence& evidence = {},
                     const Semiring<double>& semiring = Semiring<double>::sum_product());

/// Max-product decode with back-pointers on a tree-structured model. Ties go to the lowest state index.
MapResult max_product_decode(const GraphicalModel& m, const IndexEvidence& evidence = {});

// ---------------------------------------------------------------------------
// Junction tree

struct JunctionTree {
  std::vector<VarRef> variables;                  ///< the model's variables
  std::vector<std::vector<VarRef>> cliques;       ///< each in model variable order
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  std::vector<std::vector<VarRef>> sepsets;       ///< per edge
  std::vector<std::vector<std::size_t>> assigned;  ///< model factor indices per clique
  std::vector<Factor> potentials;                 ///< product of assigned factors over the full clique

  // Calibration state.
  bool calibrated = false;
  SemiringKind semiring = SemiringKind::sum_product;
  IndexEvidence evidence;
  std::map<std::pair<std::size_t, std::size_t>, Factor> messages;  ///< normalized
  std::vector<Factor> beliefs;                    ///< normalized
  std::vector<double> log_scale;                  ///< log of the unnormalized belief mass per clique
  std::size_t passes = 0;

  std::vector<std::size_t> neighbors(std::size_t c) const;
  std::vector<std::string> clique_names(std::size_t c) const;
};

JunctionTree build_junction_tree(const GraphicalModel& m, OrderingHeuristic heuristic = OrderingHeuristic::min_fill);

bool has_family_preservation(const JunctionTree& jt, const GraphicalModel& m);
bool has_running_intersection(const JunctionTree& jt);
bool is_tree(const JunctionTree& jt);

/// Shafer-Shenoy two-phase message passing (sum_product or max_product).
void jt_calibrate(JunctionTree& jt, const IndexEvidence& evidence = {},
                  const Semiring<double>& semiring = Semiring<double>::sum_product());

/// Normalized marginal read from the smallest clique containing var.
Factor query(const JunctionTree& jt, const std::string& var);
/// Normalized joint of variables sharing one clique, in the given order.
Factor query_joint(const JunctionTree& jt, const std::vector<std::string>& vars);
double log_partition(const JunctionTree& jt);

/// Decodes a max-product calibrated tree from clique 0 outward.
Assignment jt_decode(const JunctionTree& jt);
MapResult jt_map(const GraphicalModel& m, const IndexEvidence& evidence = {});

/// Cliques as ellipses, sepsets as boxes on the tree edges.
std::string to_dot(const JunctionTree& jt, const std::string& name = "JT");

}  // namespace pgm
