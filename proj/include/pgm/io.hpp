#pragma once

#include <Eigen/Core>

#include <string>
#include <variant>
#include <vector>

#include "pgm/graph.hpp"
#include "pgm/learning.hpp"
#include "pgm/models.hpp"

namespace pgm {

inline constexpr int model_format_version = 1;

/// A parsed model document holds exactly one of the two serializable model kinds.
using AnyModel = std::variant<BayesianNetwork, MarkovRandomField>;

const GraphicalModel& as_graphical(const AnyModel& m);
const char* model_type_name(const AnyModel& m);

/// Canonical JSON: keys sorted, two-space indent, every number written with 17 significant
/// digits, tables in linear domain with the first scope variable slowest (the child first for a cpd).
std::string serialize_model(const BayesianNetwork& bn);
std::string serialize_model(const MarkovRandomField& m);
std::string serialize_model(const AnyModel& m);

/// Parses and validates a model document. Schema problems throw schema with a JSON path and the
/// violated rule; a well-formed document describing an invalid model throws invalid_model.
AnyModel parse_model(const std::string& text);

/// CSV with a header of variable names and one row of state labels per sample. Columns may come
/// in any order and cover any subset of the schema; a trailing "weight" column is ignored.
/// Unknown headers throw schema; a bad cell throws assignment naming its row and column (1-based).
Dataset load_dataset(const std::string& csv, const std::vector<VarRef>& schema);
/// Same, with each variable's states taken as the sorted distinct labels of its column.
Dataset load_dataset(const std::string& csv);
std::string dataset_to_csv(const Dataset& d);

/// Numeric CSV, one row per observation. A first row that does not parse as numbers is a header.
Eigen::MatrixXd load_real_matrix(const std::string& csv);

/// JSON {"transition": [[...], ...]} with T(i, j) = P(next = i | previous = j).
Eigen::MatrixXd parse_transition_matrix(const std::string& text);

/// JSON {"nodes": [...], "weights": {"A-B": w, ...}}.
struct WeightedGraphDocument {
  std::vector<std::string> nodes;
  EdgeWeights weights;
};
WeightedGraphDocument parse_weighted_graph(const std::string& text);

/// Throws io when the file cannot be opened.
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

/// Formats with 17 significant digits, the canonical number format of model documents.
std::string format_number(double v);

}  // namespace pgm
