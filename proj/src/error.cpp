#include "pgm/error.hpp"

namespace pgm {

const char* errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::scope: return "scope";
    case Errc::incompatible_variable: return "incompatible-variable";
    case Errc::evidence: return "evidence";
    case Errc::assignment: return "assignment";
    case Errc::argument: return "argument";
    case Errc::lookup: return "lookup";
    case Errc::ordering: return "ordering";
    case Errc::not_a_dag: return "not-a-dag";
    case Errc::shape: return "shape";
    case Errc::schema: return "schema";
    case Errc::invalid_model: return "invalid-model";
    case Errc::unsupported: return "unsupported";
    case Errc::io: return "io";
    case Errc::degenerate_distribution: return "degenerate-distribution";
    case Errc::division_by_zero: return "division-by-zero";
    case Errc::zero_evidence: return "zero-evidence";
    case Errc::too_large: return "too-large";
    case Errc::not_a_tree: return "not-a-tree";
    case Errc::trapped_state: return "trapped-state";
    case Errc::infinite_weight: return "infinite-weight";
    case Errc::invalid_kernel: return "invalid-kernel";
    case Errc::state: return "state";
    case Errc::feature: return "feature";
    case Errc::internal: return "internal";
  }
  return "unknown";
}

bool is_validation_error(Errc code) noexcept {
  return static_cast<int>(code) <= static_cast<int>(Errc::io);
}

}  // namespace pgm
