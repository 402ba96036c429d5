#pragma once

#include <stdexcept>
#include <string>

namespace pgm {

enum class Errc {
  // validation-class failures (bad input, bad arguments)
  scope,
  incompatible_variable,
  evidence,
  assignment,
  argument,
  lookup,
  ordering,
  not_a_dag,
  shape,
  schema,
  invalid_model,
  unsupported,
  io,
  // inference-class failures (input was well formed but the computation has no answer)
  degenerate_distribution,
  division_by_zero,
  zero_evidence,
  too_large,
  not_a_tree,
  trapped_state,
  infinite_weight,
  invalid_kernel,
  state,
  feature,
  internal,
};

const char* errc_name(Errc code) noexcept;

/// True for errors caused by malformed input rather than by a failed computation.
bool is_validation_error(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace pgm
