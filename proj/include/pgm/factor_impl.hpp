#pragma once

// Template definitions for BasicFactor. `double` is instantiated in the library;
// include this header to use another scalar type.

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "pgm/factor.hpp"

namespace pgm {

namespace detail {

inline void check_scope(const std::vector<VarRef>& scope) {
  std::set<std::string> seen;
  for (const auto& v : scope) {
    if (!v) fail(Errc::scope, "null variable in factor scope");
    if (!seen.insert(v->name()).second) fail(Errc::scope, "duplicate variable '" + v->name() + "' in factor scope");
  }
}

inline std::size_t table_size(const std::vector<VarRef>& scope) {
  std::size_t n = 1;
  for (const auto& v : scope) n *= v->cardinality();
  return n;
}

inline std::vector<std::size_t> row_major_strides(const std::vector<VarRef>& scope) {
  std::vector<std::size_t> s(scope.size(), 1);
  for (std::size_t k = scope.size(); k-- > 1;) s[k - 1] = s[k] * scope[k]->cardinality();
  return s;
}

inline std::optional<std::size_t> find_in_scope(const std::vector<VarRef>& scope, const std::string& name) {
  for (std::size_t k = 0; k < scope.size(); ++k)
    if (scope[k]->name() == name) return k;
  return std::nullopt;
}

/// Walks a row-major index space over `cards`, tracking one offset per mapped stride vector.
class Odometer {
 public:
  Odometer(std::vector<std::size_t> cards, std::vector<std::vector<std::size_t>> strides)
      : cards_(std::move(cards)), strides_(std::move(strides)), state_(cards_.size(), 0),
        offsets_(strides_.size(), 0) {}

  std::size_t offset(std::size_t which) const { return offsets_[which]; }

  void next() {
    for (std::size_t k = cards_.size(); k-- > 0;) {
      if (++state_[k] < cards_[k]) {
        for (std::size_t w = 0; w < strides_.size(); ++w) offsets_[w] += strides_[w][k];
        return;
      }
      for (std::size_t w = 0; w < strides_.size(); ++w) offsets_[w] -= strides_[w][k] * (cards_[k] - 1);
      state_[k] = 0;
    }
  }

 private:
  std::vector<std::size_t> cards_;
  std::vector<std::vector<std::size_t>> strides_;
  std::vector<std::size_t> state_;
  std::vector<std::size_t> offsets_;
};

/// Strides of `sub` mapped onto the positions of `full` (0 where absent).
inline std::vector<std::size_t> mapped_strides(const std::vector<VarRef>& full, const std::vector<VarRef>& sub) {
  auto sub_strides = row_major_strides(sub);
  std::vector<std::size_t> out(full.size(), 0);
  for (std::size_t k = 0; k < full.size(); ++k)
    if (auto p = find_in_scope(sub, full[k]->name())) out[k] = sub_strides[*p];
  return out;
}

inline std::vector<std::size_t> cards_of(const std::vector<VarRef>& scope) {
  std::vector<std::size_t> c;
  c.reserve(scope.size());
  for (const auto& v : scope) c.push_back(v->cardinality());
  return c;
}

inline std::vector<VarRef> union_scope(const std::vector<VarRef>& a, const std::vector<VarRef>& b) {
  std::vector<VarRef> out = a;
  for (const auto& v : b) {
    if (auto p = find_in_scope(a, v->name())) {
      if (!a[*p]->same_definition(*v))
        fail(Errc::incompatible_variable, "variable '" + v->name() + "' has conflicting state definitions");
    } else {
      out.push_back(v);
    }
  }
  return out;
}

}  // namespace detail

template <typename Scalar>
BasicFactor<Scalar>::BasicFactor() : values_(Table::Ones(1)) {}

template <typename Scalar>
BasicFactor<Scalar>::BasicFactor(std::vector<VarRef> scope, Table values, Domain domain)
    : scope_(std::move(scope)), values_(std::move(values)), domain_(domain) {
  detail::check_scope(scope_);
  const auto n = detail::table_size(scope_);
  if (static_cast<std::size_t>(values_.size()) != n)
    fail(Errc::shape, "factor table has " + std::to_string(values_.size()) + " entries, scope requires " +
                          std::to_string(n));
  if (domain_ == Domain::linear) {
    for (Eigen::Index i = 0; i < values_.size(); ++i)
      if (!(values_[i] >= Scalar(0))) fail(Errc::invalid_model, "linear-domain factor entry is negative or NaN");
  } else {
    for (Eigen::Index i = 0; i < values_.size(); ++i)
      if (std::isnan(values_[i]) || values_[i] == std::numeric_limits<Scalar>::infinity())
        fail(Errc::invalid_model, "log-domain factor entry is NaN or +inf");
  }
}

template <typename Scalar>
BasicFactor<Scalar>::BasicFactor(std::vector<VarRef> scope, std::initializer_list<Scalar> values, Domain domain)
    : BasicFactor(std::move(scope), Eigen::Map<const Table>(values.begin(), static_cast<Eigen::Index>(values.size())),
                  domain) {}

template <typename Scalar>
BasicFactor<Scalar> BasicFactor<Scalar>::constant(std::vector<VarRef> scope, Scalar value, Domain domain) {
  const auto n = static_cast<Eigen::Index>(detail::table_size(scope));
  return BasicFactor(std::move(scope), Table::Constant(n, value), domain);
}

template <typename Scalar>
std::vector<std::size_t> BasicFactor<Scalar>::cardinalities() const {
  return detail::cards_of(scope_);
}

template <typename Scalar>
std::vector<std::size_t> BasicFactor<Scalar>::strides() const {
  return detail::row_major_strides(scope_);
}

template <typename Scalar>
std::vector<std::string> BasicFactor<Scalar>::scope_names() const {
  std::vector<std::string> out;
  out.reserve(scope_.size());
  for (const auto& v : scope_) out.push_back(v->name());
  return out;
}

template <typename Scalar>
std::optional<std::size_t> BasicFactor<Scalar>::position(const std::string& name) const {
  return detail::find_in_scope(scope_, name);
}

template <typename Scalar>
std::size_t BasicFactor<Scalar>::flat_index(std::span<const int> states) const {
  if (states.size() != scope_.size()) fail(Errc::assignment, "assignment length does not match factor scope");
  std::size_t idx = 0;
  for (std::size_t k = 0; k < scope_.size(); ++k) {
    const auto card = scope_[k]->cardinality();
    if (states[k] < 0 || static_cast<std::size_t>(states[k]) >= card)
      fail(Errc::assignment, "state index out of range for '" + scope_[k]->name() + "'");
    idx = idx * card + static_cast<std::size_t>(states[k]);
  }
  return idx;
}

template <typename Scalar>
std::vector<int> BasicFactor<Scalar>::unflatten(std::size_t flat) const {
  std::vector<int> states(scope_.size(), 0);
  for (std::size_t k = scope_.size(); k-- > 0;) {
    const auto card = scope_[k]->cardinality();
    states[k] = static_cast<int>(flat % card);
    flat /= card;
  }
  return states;
}

template <typename Scalar>
BasicFactor<Scalar> BasicFactor<Scalar>::to_log() const {
  if (domain_ == Domain::log) return *this;
  return BasicFactor(scope_, values_.log(), Domain::log);
}

template <typename Scalar>
BasicFactor<Scalar> BasicFactor<Scalar>::to_linear() const {
  if (domain_ == Domain::linear) return *this;
  return BasicFactor(scope_, values_.unaryExpr([](Scalar v) { using std::exp; return exp(v); }), Domain::linear);
}

template <typename Scalar>
BasicFactor<Scalar> combine(const BasicFactor<Scalar>& f, const BasicFactor<Scalar>& g,
                            const Semiring<Scalar>& semiring) {
  if (f.domain() != g.domain()) fail(Errc::argument, "factor product requires matching domains");
  auto scope = detail::union_scope(f.scope(), g.scope());
  const auto n = detail::table_size(scope);
  typename BasicFactor<Scalar>::Table out(static_cast<Eigen::Index>(n));
  detail::Odometer odo(detail::cards_of(scope),
                       {detail::mapped_strides(scope, f.scope()), detail::mapped_strides(scope, g.scope())});
  const auto& fv = f.values();
  const auto& gv = g.values();
  for (std::size_t i = 0; i < n; ++i, odo.next()) {
    const Scalar a = fv[static_cast<Eigen::Index>(odo.offset(0))];
    const Scalar b = gv[static_cast<Eigen::Index>(odo.offset(1))];
    out[static_cast<Eigen::Index>(i)] = semiring.combine(a, b);
  }
  return BasicFactor<Scalar>(std::move(scope), std::move(out), f.domain());
}

template <typename Scalar>
BasicFactor<Scalar> product(const BasicFactor<Scalar>& f, const BasicFactor<Scalar>& g) {
  // In the log domain "x" is "+", which is exactly the min_sum combine.
  return combine(f, g, f.domain() == Domain::log ? Semiring<Scalar>::min_sum() : Semiring<Scalar>::sum_product());
}

template <typename Scalar>
BasicFactor<Scalar> eliminate(const BasicFactor<Scalar>& f, const std::vector<std::string>& vars,
                              const Semiring<Scalar>& semiring) {
  std::vector<VarRef> kept;
  for (const auto& name : vars)
    if (!f.contains(name)) fail(Errc::scope, "cannot eliminate '" + name + "': not in factor scope");
  for (const auto& v : f.scope())
    if (std::find(vars.begin(), vars.end(), v->name()) == vars.end()) kept.push_back(v);

  const auto n_out = detail::table_size(kept);
  detail::Odometer odo(f.cardinalities(), {detail::mapped_strides(f.scope(), kept)});
  const auto& fv = f.values();
  using Table = typename BasicFactor<Scalar>::Table;

  const bool log_sum = f.domain() == Domain::log && semiring.kind == SemiringKind::sum_product;
  if (log_sum) {
    const Scalar ninf = -std::numeric_limits<Scalar>::infinity();
    Table mx = Table::Constant(static_cast<Eigen::Index>(n_out), ninf);
    for (std::size_t i = 0; i < f.size(); ++i, odo.next()) {
      auto o = static_cast<Eigen::Index>(odo.offset(0));
      mx[o] = std::max(mx[o], fv[static_cast<Eigen::Index>(i)]);
    }
    Table acc = Table::Zero(static_cast<Eigen::Index>(n_out));
    detail::Odometer odo2(f.cardinalities(), {detail::mapped_strides(f.scope(), kept)});
    for (std::size_t i = 0; i < f.size(); ++i, odo2.next()) {
      auto o = static_cast<Eigen::Index>(odo2.offset(0));
      if (mx[o] != ninf) acc[o] += std::exp(fv[static_cast<Eigen::Index>(i)] - mx[o]);
    }
    Table out(static_cast<Eigen::Index>(n_out));
    for (Eigen::Index o = 0; o < out.size(); ++o) out[o] = mx[o] == ninf ? ninf : mx[o] + std::log(acc[o]);
    return BasicFactor<Scalar>(std::move(kept), std::move(out), Domain::log);
  }

  Semiring<Scalar> agg = semiring;
  if (f.domain() == Domain::log && semiring.kind == SemiringKind::max_product) agg = Semiring<Scalar>::max_product();
  Scalar init = agg.aggregate_identity();
  if (f.domain() == Domain::log && agg.kind == SemiringKind::max_product) init = -std::numeric_limits<Scalar>::infinity();
  Table out = Table::Constant(static_cast<Eigen::Index>(n_out), init);
  for (std::size_t i = 0; i < f.size(); ++i, odo.next()) {
    auto o = static_cast<Eigen::Index>(odo.offset(0));
    out[o] = agg.aggregate(out[o], fv[static_cast<Eigen::Index>(i)]);
  }
  return BasicFactor<Scalar>(std::move(kept), std::move(out), f.domain());
}

template <typename Scalar>
BasicFactor<Scalar> marginalize_to(const BasicFactor<Scalar>& f, const std::vector<std::string>& keep,
                                   const Semiring<Scalar>& semiring) {
  std::vector<std::string> drop;
  for (const auto& v : f.scope())
    if (std::find(keep.begin(), keep.end(), v->name()) == keep.end()) drop.push_back(v->name());
  for (const auto& k : keep)
    if (!f.contains(k)) fail(Errc::scope, "cannot keep '" + k + "': not in factor scope");
  return eliminate(f, drop, semiring);
}

template <typename Scalar>
BasicFactor<Scalar> reduce(const BasicFactor<Scalar>& f, const IndexEvidence& evidence) {
  std::vector<VarRef> kept;
  std::size_t base = 0;
  const auto strides = f.strides();
  std::vector<std::size_t> kept_strides;
  for (std::size_t k = 0; k < f.arity(); ++k) {
    const auto& v = f.scope()[k];
    auto it = evidence.find(v->name());
    if (it == evidence.end()) {
      kept.push_back(v);
      kept_strides.push_back(strides[k]);
    } else {
      if (it->second < 0 || static_cast<std::size_t>(it->second) >= v->cardinality())
        fail(Errc::evidence, "evidence state index out of range for '" + v->name() + "'");
      base += strides[k] * static_cast<std::size_t>(it->second);
    }
  }
  if (kept.size() == f.arity()) return f;
  const auto n = detail::table_size(kept);
  typename BasicFactor<Scalar>::Table out(static_cast<Eigen::Index>(n));
  // kept_strides index into f; walk kept space row-major.
  std::vector<std::size_t> cards = detail::cards_of(kept);
  detail::Odometer odo(cards, {kept_strides});
  for (std::size_t i = 0; i < n; ++i, odo.next())
    out[static_cast<Eigen::Index>(i)] = f.values()[static_cast<Eigen::Index>(base + odo.offset(0))];
  return BasicFactor<Scalar>(std::move(kept), std::move(out), f.domain());
}

template <typename Scalar>
BasicFactor<Scalar> reduce(const BasicFactor<Scalar>& f, const Evidence& evidence) {
  IndexEvidence idx;
  for (const auto& v : f.scope()) {
    auto it = evidence.find(v->name());
    if (it == evidence.end()) continue;
    auto s = v->find_state(it->second);
    if (!s) fail(Errc::evidence, "unknown state '" + it->second + "' for variable '" + v->name() + "'");
    idx[v->name()] = *s;
  }
  return reduce(f, idx);
}

template <typename Scalar>
BasicFactor<Scalar> mask(const BasicFactor<Scalar>& f, const IndexEvidence& evidence) {
  std::vector<std::pair<std::size_t, int>> checks;
  for (std::size_t k = 0; k < f.arity(); ++k) {
    auto it = evidence.find(f.scope()[k]->name());
    if (it != evidence.end()) checks.emplace_back(k, it->second);
  }
  if (checks.empty()) return f;
  auto out = f.values();
  const Scalar zero = f.domain() == Domain::log ? -std::numeric_limits<Scalar>::infinity() : Scalar(0);
  for (std::size_t i = 0; i < f.size(); ++i) {
    auto st = f.unflatten(i);
    for (auto [k, s] : checks)
      if (st[k] != s) {
        out[static_cast<Eigen::Index>(i)] = zero;
        break;
      }
  }
  return BasicFactor<Scalar>(f.scope(), std::move(out), f.domain());
}

template <typename Scalar>
std::pair<BasicFactor<Scalar>, Scalar> normalize(const BasicFactor<Scalar>& f) {
  if (f.domain() != Domain::linear) fail(Errc::argument, "normalize requires a linear-domain factor");
  const Scalar z = f.values().sum();
  if (!(z > Scalar(0))) fail(Errc::degenerate_distribution, "cannot normalize an all-zero factor");
  return {BasicFactor<Scalar>(f.scope(), f.values() / z, Domain::linear), z};
}

template <typename Scalar>
BasicFactor<Scalar> divide(const BasicFactor<Scalar>& f, const BasicFactor<Scalar>& g) {
  if (f.domain() != Domain::linear || g.domain() != Domain::linear)
    fail(Errc::argument, "divide requires linear-domain factors");
  for (const auto& v : g.scope()) {
    auto p = f.position(v->name());
    if (!p) fail(Errc::scope, "divisor scope variable '" + v->name() + "' not in numerator scope");
    if (!f.scope()[*p]->same_definition(*v))
      fail(Errc::incompatible_variable, "variable '" + v->name() + "' has conflicting state definitions");
  }
  typename BasicFactor<Scalar>::Table out(static_cast<Eigen::Index>(f.size()));
  detail::Odometer odo(f.cardinalities(), {detail::mapped_strides(f.scope(), g.scope())});
  for (std::size_t i = 0; i < f.size(); ++i, odo.next()) {
    const Scalar a = f[i];
    const Scalar b = g[odo.offset(0)];
    if (b == Scalar(0)) {
      if (a != Scalar(0)) fail(Errc::division_by_zero, "nonzero entry divided by zero");
      out[static_cast<Eigen::Index>(i)] = Scalar(0);
    } else {
      out[static_cast<Eigen::Index>(i)] = a / b;
    }
  }
  return BasicFactor<Scalar>(f.scope(), std::move(out), Domain::linear);
}

template <typename Scalar>
BasicFactor<Scalar> reorder(const BasicFactor<Scalar>& f, const std::vector<std::string>& order) {
  if (order.size() != f.arity()) fail(Errc::scope, "reorder needs exactly the factor's scope");
  std::vector<VarRef> scope;
  for (const auto& name : order) {
    auto p = f.position(name);
    if (!p) fail(Errc::scope, "reorder: '" + name + "' not in scope");
    scope.push_back(f.scope()[*p]);
  }
  typename BasicFactor<Scalar>::Table out(static_cast<Eigen::Index>(f.size()));
  detail::Odometer odo(detail::cards_of(scope), {detail::mapped_strides(scope, f.scope())});
  for (std::size_t i = 0; i < f.size(); ++i, odo.next()) out[static_cast<Eigen::Index>(i)] = f[odo.offset(0)];
  return BasicFactor<Scalar>(std::move(scope), std::move(out), f.domain());
}

template <typename Scalar>
bool approx_equal(const BasicFactor<Scalar>& f, const BasicFactor<Scalar>& g, Scalar tol) {
  if (f.arity() != g.arity() || f.domain() != g.domain()) return false;
  for (const auto& v : f.scope())
    if (!g.contains(v->name())) return false;
  auto h = reorder(g, f.scope_names());
  for (std::size_t i = 0; i < f.size(); ++i) {
    const Scalar a = f[i], b = h[i];
    if (a == b) continue;
    if (!(std::abs(a - b) <= tol)) return false;
  }
  return true;
}

template <typename Scalar>
std::size_t argmax_index(const BasicFactor<Scalar>& f) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < f.size(); ++i)
    if (f[i] > f[best]) best = i;
  return best;
}

}  // namespace pgm
