#pragma once

#include <Eigen/Core>

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pgm/error.hpp"
#include "pgm/semiring.hpp"
#include "pgm/variable.hpp"

namespace pgm {

enum class Domain { linear, log };

/// Dense table over an ordered scope of discrete variables.
///
/// Layout is row-major over the scope: the first scope variable varies slowest,
/// the last one fastest. A factor with an empty scope holds a single value.
/// Linear-domain tables are nonnegative; log-domain tables hold log values
/// (-inf for structural zeros).
template <typename Scalar>
class BasicFactor {
 public:
  using Table = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  /// Scalar factor with value 1 (linear) over the empty scope.
  BasicFactor();
  BasicFactor(std::vector<VarRef> scope, Table values, Domain domain = Domain::linear);
  BasicFactor(std::vector<VarRef> scope, std::initializer_list<Scalar> values, Domain domain = Domain::linear);

  static BasicFactor constant(std::vector<VarRef> scope, Scalar value, Domain domain = Domain::linear);
  static BasicFactor ones(std::vector<VarRef> scope) { return constant(std::move(scope), Scalar(1)); }

  const std::vector<VarRef>& scope() const noexcept { return scope_; }
  const Table& values() const noexcept { return values_; }
  Domain domain() const noexcept { return domain_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(values_.size()); }
  std::size_t arity() const noexcept { return scope_.size(); }

  std::vector<std::size_t> cardinalities() const;
  std::vector<std::size_t> strides() const;
  std::vector<std::string> scope_names() const;
  std::optional<std::size_t> position(const std::string& name) const;
  bool contains(const std::string& name) const { return position(name).has_value(); }

  /// Flat index of a full assignment given in scope order.
  std::size_t flat_index(std::span<const int> states) const;
  std::vector<int> unflatten(std::size_t flat) const;

  Scalar operator[](std::size_t flat) const { return values_[static_cast<Eigen::Index>(flat)]; }
  Scalar at(std::span<const int> states) const { return (*this)[flat_index(states)]; }
  Scalar at(std::initializer_list<int> states) const {
    return at(std::span<const int>(states.begin(), states.size()));
  }

  BasicFactor to_log() const;
  BasicFactor to_linear() const;

 private:
  std::vector<VarRef> scope_;
  Table values_;
  Domain domain_ = Domain::linear;
};

using Factor = BasicFactor<double>;

/// Entrywise product over the union scope (f's order, then g's unseen variables).
/// Multiplies in the linear domain, adds in the log domain.
template <typename Scalar>
BasicFactor<Scalar> product(const BasicFactor<Scalar>& f, const BasicFactor<Scalar>& g);

/// Union-scope combination with an explicit semiring "x" (e.g. + for min_sum energies).
template <typename Scalar>
BasicFactor<Scalar> combine(const BasicFactor<Scalar>& f, const BasicFactor<Scalar>& g,
                            const Semiring<Scalar>& semiring);

/// Aggregates `vars` out of `f` with the semiring "+" (sum, max, min or or).
/// Log-domain factors aggregate with log-sum-exp for sum_product and max for max_product.
template <typename Scalar>
BasicFactor<Scalar> eliminate(const BasicFactor<Scalar>& f, const std::vector<std::string>& vars,
                              const Semiring<Scalar>& semiring = Semiring<Scalar>::sum_product());

/// Keeps only `keep` (in f's order), aggregating everything else.
template <typename Scalar>
BasicFactor<Scalar> marginalize_to(const BasicFactor<Scalar>& f, const std::vector<std::string>& keep,
                                   const Semiring<Scalar>& semiring = Semiring<Scalar>::sum_product());

/// Slice consistent with the evidence; evidence variables leave the scope.
/// Evidence on variables outside the scope is ignored.
template <typename Scalar>
BasicFactor<Scalar> reduce(const BasicFactor<Scalar>& f, const IndexEvidence& evidence);

template <typename Scalar>
BasicFactor<Scalar> reduce(const BasicFactor<Scalar>& f, const Evidence& evidence);

/// Zeroes (or sets to -inf in the log domain) entries inconsistent with the evidence, keeping the scope.
template <typename Scalar>
BasicFactor<Scalar> mask(const BasicFactor<Scalar>& f, const IndexEvidence& evidence);

/// Returns the factor scaled to sum to one and the original sum (local partition value).
template <typename Scalar>
std::pair<BasicFactor<Scalar>, Scalar> normalize(const BasicFactor<Scalar>& f);

/// Entrywise f / g with g broadcast over f's scope; 0/0 is 0.
template <typename Scalar>
BasicFactor<Scalar> divide(const BasicFactor<Scalar>& f, const BasicFactor<Scalar>& g);

/// Same table, scope permuted into `order` (which must name exactly f's scope).
template <typename Scalar>
BasicFactor<Scalar> reorder(const BasicFactor<Scalar>& f, const std::vector<std::string>& order);

/// Entrywise comparison after aligning g's scope to f's order.
template <typename Scalar>
bool approx_equal(const BasicFactor<Scalar>& f, const BasicFactor<Scalar>& g, Scalar tol);

/// Lowest flat index attaining the maximum.
template <typename Scalar>
std::size_t argmax_index(const BasicFactor<Scalar>& f);

}  // namespace pgm
