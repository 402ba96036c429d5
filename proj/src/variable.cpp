#include "pgm/variable.hpp"

#include <set>

#include "pgm/error.hpp"

namespace pgm {

Variable::Variable(std::string name, std::vector<std::string> states)
    : name_(std::move(name)), states_(std::move(states)) {
  if (name_.empty()) fail(Errc::invalid_model, "variable name must not be empty");
  if (states_.empty()) fail(Errc::invalid_model, "variable '" + name_ + "' needs at least one state");
  std::set<std::string> seen;
  for (const auto& s : states_)
    if (!seen.insert(s).second) fail(Errc::invalid_model, "variable '" + name_ + "' repeats state '" + s + "'");
}

std::optional<int> Variable::find_state(const std::string& label) const {
  for (std::size_t i = 0; i < states_.size(); ++i)
    if (states_[i] == label) return static_cast<int>(i);
  return std::nullopt;
}

int Variable::state_index(const std::string& label) const {
  if (auto s = find_state(label)) return *s;
  fail(Errc::evidence, "unknown state '" + label + "' for variable '" + name_ + "'");
}

VarRef make_variable(std::string name, std::vector<std::string> states) {
  return std::make_shared<const Variable>(std::move(name), std::move(states));
}

VarRef make_variable(std::string name, std::size_t cardinality) {
  std::vector<std::string> states;
  states.reserve(cardinality);
  for (std::size_t i = 0; i < cardinality; ++i) states.push_back(std::to_string(i));
  return make_variable(std::move(name), std::move(states));
}

}  // namespace pgm
