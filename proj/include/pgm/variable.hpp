#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace pgm {

/// A discrete random variable with an ordered, labelled state space.
class Variable {
 public:
  Variable(std::string name, std::vector<std::string> states);

  const std::string& name() const noexcept { return name_; }
  const std::vector<std::string>& states() const noexcept { return states_; }
  std::size_t cardinality() const noexcept { return states_.size(); }

  std::optional<int> find_state(const std::string& label) const;
  /// Throws Errc::evidence for an unknown label.
  int state_index(const std::string& label) const;
  const std::string& state_label(int index) const { return states_.at(static_cast<std::size_t>(index)); }

  /// Same name and same ordered states.
  bool same_definition(const Variable& other) const noexcept {
    return name_ == other.name_ && states_ == other.states_;
  }

 private:
  std::string name_;
  std::vector<std::string> states_;
};

using VarRef = std::shared_ptr<const Variable>;

VarRef make_variable(std::string name, std::vector<std::string> states);

/// Variable with states "0".."card-1"; handy for synthetic models.
VarRef make_variable(std::string name, std::size_t cardinality);

/// Evidence / partial assignment keyed by variable name, valued by state label.
using Evidence = std::map<std::string, std::string>;

/// Partial assignment keyed by variable name, valued by state index.
using IndexEvidence = std::map<std::string, int>;

}  // namespace pgm
