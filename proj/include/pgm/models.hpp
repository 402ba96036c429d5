#pragma once

#include <Eigen/Core>

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pgm/factor.hpp"
#include "pgm/graph.hpp"

namespace pgm {

/// Full assignment as state indices, aligned with GraphicalModel::variables().
using Assignment = std::vector<int>;

struct Violation {
  std::string subject;  ///< variable or factor the rule applies to
  std::string rule;     ///< short rule tag, e.g. "normalization", "acyclicity"
  std::string message;
};

/// Variables plus a factor list whose product is the (possibly unnormalized) joint.
class GraphicalModel {
 public:
  virtual ~GraphicalModel() = default;

  /// Adds a variable; its name must be new.
  virtual void add_variable(VarRef v);

  const std::vector<VarRef>& variables() const noexcept { return variables_; }
  std::size_t variable_count() const noexcept { return variables_.size(); }
  std::optional<std::size_t> index_of(const std::string& name) const;
  /// Throws Errc::lookup for unknown names.
  std::size_t require_index(const std::string& name) const;
  const VarRef& variable(const std::string& name) const { return variables_[require_index(name)]; }
  std::vector<std::string> variable_names() const;

  virtual std::vector<Factor> factors() const = 0;
  virtual std::vector<Violation> validate() const = 0;
  virtual bool is_normalized() const { return false; }

 protected:
  /// Scope variables must be model variables with identical definitions.
  void check_scope(const Factor& f) const;

 private:
  std::vector<VarRef> variables_;
  std::map<std::string, std::size_t> index_;
};

/// Directed model: one CPD per variable with scope (child, parents...).
class BayesianNetwork : public GraphicalModel {
 public:
  void add_variable(VarRef v) override;

  /// CPD factor whose first scope variable is the child. Parent edges follow the rest of the scope.
  void set_cpd(Factor cpd);
  /// Rows listed per parent configuration (first parent slowest), each row over the child's states.
  void set_cpd(const std::string& child, const std::vector<std::string>& parents,
               const std::vector<std::vector<double>>& rows);

  bool has_cpd(const std::string& child) const { return cpds_.count(child) > 0; }
  const Factor& cpd(const std::string& child) const;
  const DirectedGraph& dag() const noexcept { return dag_; }
  std::vector<std::string> parents(const std::string& child) const;

  /// CPDs in variable order (variables without a CPD are skipped).
  std::vector<Factor> factors() const override;
  std::vector<Violation> validate() const override;
  bool is_normalized() const override { return true; }

 private:
  DirectedGraph dag_;
  std::map<std::string, Factor> cpds_;
};

/// Undirected model: an arbitrary list of nonnegative factors.
class MarkovRandomField : public GraphicalModel {
 public:
  void add_factor(Factor f);
  std::vector<Factor> factors() const override { return factors_; }
  const std::vector<Factor>& factor_list() const noexcept { return factors_; }
  std::vector<Violation> validate() const override;
  /// Every factor scope becomes a clique.
  UndirectedGraph skeleton() const;
  bool is_pairwise() const;

 private:
  std::vector<Factor> factors_;
};

/// Throws Errc::invalid_model listing every violation when the list is non-empty.
void require_valid(const GraphicalModel& m);

/// Undirected graph used for elimination: moralized DAG or MRF skeleton, i.e. scopes made cliques.
UndirectedGraph interaction_graph(const GraphicalModel& m);

MarkovRandomField bn_to_mrf(const BayesianNetwork& bn);

/// Copy of any model as an MRF over the same variables and factors.
MarkovRandomField as_mrf(const GraphicalModel& m);

/// Bipartite variable/factor graph.
struct FactorGraph {
  std::vector<std::string> variables;
  std::vector<std::vector<std::string>> factor_scopes;  ///< factor node i is adjacent to these variables
  std::vector<std::pair<std::size_t, std::string>> edges() const;
  /// Acyclic (a forest) as a bipartite graph.
  bool is_forest() const;
  bool is_connected() const;
};

FactorGraph to_factor_graph(const GraphicalModel& m);

IndexEvidence index_evidence(const GraphicalModel& m, const Evidence& evidence);

/// Validates names and state indices.
void check_evidence(const GraphicalModel& m, const IndexEvidence& evidence);

/// Sum of log factor values at the assignment; -inf on a zero entry.
double log_joint(const GraphicalModel& m, const Assignment& x);
double log_joint(const GraphicalModel& m, const IndexEvidence& x);

/// Assignment rendered as variable -> state label.
Evidence assignment_labels(const GraphicalModel& m, const Assignment& x);

/// Factors touching each variable, for evaluations that only need a variable's Markov blanket.
class LocalScorer {
 public:
  explicit LocalScorer(const GraphicalModel& m);

  /// Σ log φ over the factors containing variable i, with x[i] replaced by `state`.
  double log_score(std::size_t i, const Assignment& x, int state) const;
  std::vector<double> log_scores(std::size_t i, const Assignment& x) const;
  /// Normalized full conditional p(x_i | x_-i). Throws trapped_state when every state has zero mass.
  std::vector<double> conditional(std::size_t i, const Assignment& x) const;

 private:
  const GraphicalModel* model_;
  std::vector<Factor> factors_;
  std::vector<std::vector<std::size_t>> touching_;
  std::vector<std::vector<std::size_t>> scope_index_;
};

// ---------------------------------------------------------------------------
// Brute-force oracle

inline constexpr std::size_t default_enumeration_cap = std::size_t(1) << 22;

/// Unnormalized joint over all variables (variable order), evidence-inconsistent entries zeroed.
Factor enumerate_joint(const GraphicalModel& m, const IndexEvidence& evidence = {},
                       std::size_t cap = default_enumeration_cap);

/// Normalized p(query | evidence). Throws zero_evidence when p(evidence) = 0.
Factor enumerate_marginal(const GraphicalModel& m, const std::vector<std::string>& query,
                          const IndexEvidence& evidence = {}, std::size_t cap = default_enumeration_cap);

/// Sum of the unnormalized joint over evidence-consistent assignments.
double enumerate_partition(const GraphicalModel& m, const IndexEvidence& evidence = {},
                           std::size_t cap = default_enumeration_cap);

struct MapResult {
  Assignment assignment;
  double log_score = 0.0;  ///< log of the unnormalized joint at the assignment
};

/// Lexicographically first maximizer (variable order, lowest state first) up to a 1e-12 relative tolerance.
MapResult enumerate_map(const GraphicalModel& m, const IndexEvidence& evidence = {},
                        std::size_t cap = default_enumeration_cap);

/// Calls visit(assignment) for every joint assignment in row-major variable order.
void for_each_assignment(const std::vector<VarRef>& vars, const std::function<void(const Assignment&)>& visit);

// ---------------------------------------------------------------------------
// Linear-chain CRF

/// Observation sequence: one real feature vector per position.
using CrfObservation = std::vector<Eigen::VectorXd>;

struct CrfExample {
  CrfObservation x;
  std::vector<int> y;
};

/// Chain of label variables Y_1..Y_T sharing one label set, with weighted feature functions.
class ChainCRF {
 public:
  using NodeFeature = std::function<double(const CrfObservation& x, std::size_t t, int y)>;
  using EdgeFeature = std::function<double(const CrfObservation& x, std::size_t t, int y_prev, int y)>;

  explicit ChainCRF(std::vector<std::string> labels);

  std::size_t add_node_feature(std::string name, NodeFeature f);
  std::size_t add_edge_feature(std::string name, EdgeFeature f);

  /// x_t[d]·[y=k] for every (d, k) plus [y_prev=a, y=b] for every label pair.
  void add_indicator_features(std::size_t observation_dim);

  const std::vector<std::string>& labels() const noexcept { return labels_; }
  std::size_t label_count() const noexcept { return labels_.size(); }
  std::size_t feature_count() const noexcept { return names_.size(); }
  const std::vector<std::string>& feature_names() const noexcept { return names_; }

  const Eigen::VectorXd& weights() const noexcept { return weights_; }
  void set_weights(Eigen::VectorXd w);

  /// Total feature vector F(x, y) = Σ_t f(x, t, ...). Throws Errc::feature on a non-finite value.
  Eigen::VectorXd feature_sum(const CrfObservation& x, const std::vector<int>& y) const;

  /// Conditional model p(y | x) as a chain MRF over Y_1..Y_T with log-linear factors.
  MarkovRandomField condition(const CrfObservation& x) const;
  MarkovRandomField condition(const CrfObservation& x, const Eigen::VectorXd& weights) const;

  /// Node features evaluated at (x, t, y); edge features at (x, t, y_prev, y). Zero for the other kind.
  Eigen::VectorXd node_features(const CrfObservation& x, std::size_t t, int y) const;
  Eigen::VectorXd edge_features(const CrfObservation& x, std::size_t t, int y_prev, int y) const;

 private:
  std::vector<std::string> labels_;
  std::vector<std::string> names_;
  std::vector<std::pair<std::size_t, NodeFeature>> node_;
  std::vector<std::pair<std::size_t, EdgeFeature>> edge_;
  Eigen::VectorXd weights_;
};

}  // namespace pgm
