#pragma once

#include <algorithm>
#include <limits>
#include <string_view>

namespace pgm {

enum class SemiringKind { sum_product, max_product, min_sum, or_and };

/// Commutative semiring used by elimination and message passing.
/// `aggregate` plays the role of "+", `combine` the role of "x".
/// min_sum works on energies (negative log potentials); or_and on 0/1 tables.
template <typename Scalar>
struct Semiring {
  SemiringKind kind = SemiringKind::sum_product;

  Scalar combine(Scalar a, Scalar b) const noexcept {
    switch (kind) {
      case SemiringKind::min_sum: return a + b;
      case SemiringKind::or_and: return (a != Scalar(0) && b != Scalar(0)) ? Scalar(1) : Scalar(0);
      default: return a * b;
    }
  }

  Scalar aggregate(Scalar a, Scalar b) const noexcept {
    switch (kind) {
      case SemiringKind::sum_product: return a + b;
      case SemiringKind::max_product: return std::max(a, b);
      case SemiringKind::min_sum: return std::min(a, b);
      case SemiringKind::or_and: return (a != Scalar(0) || b != Scalar(0)) ? Scalar(1) : Scalar(0);
    }
    return a + b;
  }

  Scalar combine_identity() const noexcept {
    return kind == SemiringKind::min_sum ? Scalar(0) : Scalar(1);
  }

  Scalar aggregate_identity() const noexcept {
    return kind == SemiringKind::min_sum ? std::numeric_limits<Scalar>::infinity() : Scalar(0);
  }

  static Semiring sum_product() { return {SemiringKind::sum_product}; }
  static Semiring max_product() { return {SemiringKind::max_product}; }
  static Semiring min_sum() { return {SemiringKind::min_sum}; }
  static Semiring or_and() { return {SemiringKind::or_and}; }
};

constexpr std::string_view semiring_name(SemiringKind kind) {
  switch (kind) {
    case SemiringKind::sum_product: return "sum_product";
    case SemiringKind::max_product: return "max_product";
    case SemiringKind::min_sum: return "min_sum";
    case SemiringKind::or_and: return "or_and";
  }
  return "?";
}

}  // namespace pgm
