#include "pgm/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace pgm {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Shared helpers

std::string format_number(double v) {
  if (!std::isfinite(v)) fail(Errc::argument, "cannot format a non-finite number");
  if (v == 0.0) return "0";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io, "cannot open '" + path + "' for reading");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::io, "cannot open '" + path + "' for writing");
  out << text;
  if (!out) fail(Errc::io, "failed writing '" + path + "'");
}

const GraphicalModel& as_graphical(const AnyModel& m) {
  return std::visit([](const auto& x) -> const GraphicalModel& { return x; }, m);
}

const char* model_type_name(const AnyModel& m) {
  return std::holds_alternative<BayesianNetwork>(m) ? "bayesian_network" : "markov_random_field";
}

namespace {

// ---------------------------------------------------------------------------
// Canonical writer

std::string quoted(const std::string& s) { return json(s).dump(); }

std::string string_list(const std::vector<std::string>& items) {
  std::string out = "[";
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? ", " : "") + quoted(items[i]);
  return out + "]";
}

std::string number_list(const Factor& f) {
  const Factor lin = f.to_linear();
  std::string out = "[";
  for (std::size_t i = 0; i < lin.size(); ++i) out += (i ? ", " : "") + format_number(lin[i]);
  return out + "]";
}

struct FactorEntry {
  const Factor* factor;
  bool cpd;
};

std::string write_document(const char* type, const std::vector<VarRef>& variables, const std::vector<FactorEntry>& factors) {
  std::ostringstream os;
  os << "{\n  \"factors\": [";
  for (std::size_t i = 0; i < factors.size(); ++i) {
    const Factor& f = *factors[i].factor;
    os << (i ? ",\n" : "\n") << "    {\n";
    if (factors[i].cpd) os << "      \"child\": " << quoted(f.scope().front()->name()) << ",\n";
    os << "      \"domain\": \"linear\",\n"
       << "      \"kind\": " << (factors[i].cpd ? "\"cpd\"" : "\"potential\"") << ",\n"
       << "      \"scope\": " << string_list(f.scope_names()) << ",\n"
       << "      \"table\": " << number_list(f) << "\n    }";
  }
  os << (factors.empty() ? "]" : "\n  ]") << ",\n";
  os << "  \"format_version\": " << model_format_version << ",\n";
  os << "  \"model_type\": " << quoted(type) << ",\n";
  os << "  \"variables\": [";
  for (std::size_t i = 0; i < variables.size(); ++i)
    os << (i ? ",\n" : "\n") << "    {\"name\": " << quoted(variables[i]->name())
       << ", \"states\": " << string_list(variables[i]->states()) << "}";
  os << (variables.empty() ? "]" : "\n  ]") << "\n}\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Schema checks

[[noreturn]] void schema_error(const std::string& path, const std::string& rule) {
  fail(Errc::schema, path + ": " + rule);
}

void allowed_keys(const json& obj, const std::string& path, std::initializer_list<const char*> keys) {
  for (const auto& [k, _] : obj.items())
    if (std::find_if(keys.begin(), keys.end(), [&](const char* a) { return k == a; }) == keys.end())
      schema_error(path + "." + k, "unknown key");
}

const json& member(const json& obj, const std::string& path, const char* key) {
  if (!obj.contains(key)) schema_error(path + "." + key, "required key is missing");
  return obj.at(key);
}

std::string string_at(const json& v, const std::string& path) {
  if (!v.is_string()) schema_error(path, "must be a string");
  return v.get<std::string>();
}

const json& array_at(const json& v, const std::string& path) {
  if (!v.is_array()) schema_error(path, "must be an array");
  return v;
}

std::vector<std::string> string_array(const json& v, const std::string& path) {
  std::vector<std::string> out;
  const auto& arr = array_at(v, path);
  for (std::size_t i = 0; i < arr.size(); ++i) out.push_back(string_at(arr[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

}  // namespace

std::string serialize_model(const BayesianNetwork& bn) {
  std::vector<Factor> cpds;
  for (const auto& v : bn.variables()) cpds.push_back(bn.cpd(v->name()));
  std::vector<FactorEntry> entries;
  for (const auto& f : cpds) entries.push_back({&f, true});
  return write_document("bayesian_network", bn.variables(), entries);
}

std::string serialize_model(const MarkovRandomField& m) {
  std::vector<FactorEntry> entries;
  for (const auto& f : m.factor_list()) entries.push_back({&f, false});
  return write_document("markov_random_field", m.variables(), entries);
}

std::string serialize_model(const AnyModel& m) {
  return std::visit([](const auto& x) { return serialize_model(x); }, m);
}

AnyModel parse_model(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    schema_error("$", std::string("not valid JSON (") + e.what() + ")");
  }
  if (!doc.is_object()) schema_error("$", "document must be an object");
  allowed_keys(doc, "$", {"factors", "format_version", "model_type", "variables"});

  const auto& version = member(doc, "$", "format_version");
  if (!version.is_number_integer() || version.get<int>() != model_format_version)
    schema_error("$.format_version", "must be " + std::to_string(model_format_version));
  const auto type = string_at(member(doc, "$", "model_type"), "$.model_type");
  if (type != "bayesian_network" && type != "markov_random_field")
    schema_error("$.model_type", "must be bayesian_network or markov_random_field");
  const bool directed = type == "bayesian_network";

  std::vector<VarRef> variables;
  std::map<std::string, VarRef> by_name;
  const auto& vars = array_at(member(doc, "$", "variables"), "$.variables");
  for (std::size_t i = 0; i < vars.size(); ++i) {
    const std::string path = "$.variables[" + std::to_string(i) + "]";
    if (!vars[i].is_object()) schema_error(path, "must be an object");
    allowed_keys(vars[i], path, {"name", "states"});
    const auto name = string_at(member(vars[i], path, "name"), path + ".name");
    if (name.empty()) schema_error(path + ".name", "must not be empty");
    if (by_name.count(name)) schema_error(path + ".name", "duplicate variable '" + name + "'");
    const auto states = string_array(member(vars[i], path, "states"), path + ".states");
    if (states.empty()) schema_error(path + ".states", "needs at least one state");
    if (std::set<std::string>(states.begin(), states.end()).size() != states.size())
      schema_error(path + ".states", "state labels must be distinct");
    variables.push_back(make_variable(name, states));
    by_name[name] = variables.back();
  }

  std::vector<std::pair<Factor, bool>> factors;
  const auto& facs = array_at(member(doc, "$", "factors"), "$.factors");
  for (std::size_t i = 0; i < facs.size(); ++i) {
    const std::string path = "$.factors[" + std::to_string(i) + "]";
    if (!facs[i].is_object()) schema_error(path, "must be an object");
    allowed_keys(facs[i], path, {"child", "domain", "kind", "scope", "table"});
    const auto kind = string_at(member(facs[i], path, "kind"), path + ".kind");
    if (kind != "cpd" && kind != "potential") schema_error(path + ".kind", "must be cpd or potential");
    if (directed != (kind == "cpd"))
      schema_error(path + ".kind", directed ? "a bayesian_network holds cpd factors only"
                                            : "a markov_random_field holds potential factors only");
    std::string domain = "linear";
    if (facs[i].contains("domain")) domain = string_at(facs[i].at("domain"), path + ".domain");
    if (domain != "linear" && domain != "log") schema_error(path + ".domain", "must be linear or log");

    const auto names = string_array(member(facs[i], path, "scope"), path + ".scope");
    std::vector<VarRef> scope;
    std::size_t size = 1;
    for (std::size_t k = 0; k < names.size(); ++k) {
      auto it = by_name.find(names[k]);
      if (it == by_name.end())
        schema_error(path + ".scope[" + std::to_string(k) + "]", "unknown variable '" + names[k] + "'");
      if (std::count(names.begin(), names.end(), names[k]) > 1)
        schema_error(path + ".scope", "variable '" + names[k] + "' appears twice");
      scope.push_back(it->second);
      size *= it->second->cardinality();
    }
    std::string label = "factor " + std::to_string(i);
    if (kind == "cpd") {
      const auto child = string_at(member(facs[i], path, "child"), path + ".child");
      if (names.empty() || names.front() != child)
        schema_error(path + ".child", "the child must be the first scope variable");
      label += " (cpd of '" + child + "')";
    } else if (facs[i].contains("child")) {
      schema_error(path + ".child", "only cpd factors name a child");
    }

    const auto& table = array_at(member(facs[i], path, "table"), path + ".table");
    if (table.size() != size)
      schema_error(path + ".table", label + " has " + std::to_string(table.size()) + " entries but its scope needs " +
                                        std::to_string(size));
    Factor::Table values(static_cast<Eigen::Index>(size));
    for (std::size_t k = 0; k < size; ++k) {
      const std::string cell = path + ".table[" + std::to_string(k) + "]";
      double v;
      if (domain == "log" && table[k].is_null()) {
        v = -std::numeric_limits<double>::infinity();
      } else {
        if (!table[k].is_number()) schema_error(cell, "must be a number");
        v = table[k].get<double>();
      }
      if (domain == "linear" && !(v >= 0.0 && std::isfinite(v)))
        schema_error(cell, "linear entries must be finite and nonnegative");
      if (domain == "log" && (std::isnan(v) || v == std::numeric_limits<double>::infinity()))
        schema_error(cell, "log entries must be below +infinity (null means -infinity)");
      values[static_cast<Eigen::Index>(k)] = v;
    }
    Factor f(scope, std::move(values), domain == "log" ? Domain::log : Domain::linear);
    factors.emplace_back(f.to_linear(), kind == "cpd");
  }

  if (directed) {
    BayesianNetwork bn;
    for (const auto& v : variables) bn.add_variable(v);
    std::set<std::string> seen;
    for (std::size_t i = 0; i < factors.size(); ++i) {
      const auto child = factors[i].first.scope().front()->name();
      if (!seen.insert(child).second)
        schema_error("$.factors[" + std::to_string(i) + "]", "second cpd for '" + child + "'");
      bn.set_cpd(factors[i].first);
    }
    require_valid(bn);
    return bn;
  }
  MarkovRandomField m;
  for (const auto& v : variables) m.add_variable(v);
  for (auto& [f, _] : factors) m.add_factor(std::move(f));
  require_valid(m);
  return m;
}

// ---------------------------------------------------------------------------
// Datasets

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::vector<std::vector<std::string>> csv_rows(const std::string& csv) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream is(csv);
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    rows.push_back(split_csv_line(line));
  }
  return rows;
}

}  // namespace

Dataset load_dataset(const std::string& csv, const std::vector<VarRef>& schema) {
  const auto rows = csv_rows(csv);
  if (rows.empty()) fail(Errc::schema, "dataset has no header line");
  const auto& header = rows.front();
  std::vector<VarRef> columns;
  std::vector<std::size_t> keep;
  std::set<std::string> seen;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == "weight" && c + 1 == header.size()) continue;
    auto it = std::find_if(schema.begin(), schema.end(), [&](const VarRef& v) { return v->name() == header[c]; });
    if (it == schema.end()) fail(Errc::schema, "column " + std::to_string(c + 1) + ": unknown variable '" + header[c] + "'");
    if (!seen.insert(header[c]).second) fail(Errc::schema, "column '" + header[c] + "' appears twice");
    columns.push_back(*it);
    keep.push_back(c);
  }
  Eigen::MatrixXi data(static_cast<Eigen::Index>(rows.size() - 1), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != header.size())
      fail(Errc::shape, "row " + std::to_string(r) + " has " + std::to_string(rows[r].size()) + " cells, expected " +
                            std::to_string(header.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) {
      const auto& label = rows[r][keep[k]];
      const auto state = columns[k]->find_state(label);
      if (!state)
        fail(Errc::assignment, "row " + std::to_string(r) + ", column " + std::to_string(keep[k] + 1) + " ('" +
                                   columns[k]->name() + "'): unknown state '" + label + "'");
      data(static_cast<Eigen::Index>(r - 1), static_cast<Eigen::Index>(k)) = *state;
    }
  }
  return Dataset(columns, std::move(data));
}

Dataset load_dataset(const std::string& csv) {
  const auto rows = csv_rows(csv);
  if (rows.empty()) fail(Errc::schema, "dataset has no header line");
  std::vector<VarRef> schema;
  for (std::size_t c = 0; c < rows.front().size(); ++c) {
    if (rows.front()[c] == "weight" && c + 1 == rows.front().size()) continue;
    std::set<std::string> labels;
    for (std::size_t r = 1; r < rows.size(); ++r)
      if (c < rows[r].size()) labels.insert(rows[r][c]);
    if (labels.empty()) fail(Errc::schema, "column '" + rows.front()[c] + "' has no values to infer states from");
    schema.push_back(make_variable(rows.front()[c], {labels.begin(), labels.end()}));
  }
  return load_dataset(csv, schema);
}

std::string dataset_to_csv(const Dataset& d) {
  std::ostringstream os;
  const auto& vars = d.variables();
  for (std::size_t c = 0; c < vars.size(); ++c) os << (c ? "," : "") << vars[c]->name();
  os << '\n';
  for (Eigen::Index r = 0; r < d.rows().rows(); ++r) {
    for (std::size_t c = 0; c < vars.size(); ++c)
      os << (c ? "," : "") << vars[c]->state_label(d.rows()(r, static_cast<Eigen::Index>(c)));
    os << '\n';
  }
  return os.str();
}

Eigen::MatrixXd load_real_matrix(const std::string& csv) {
  auto rows = csv_rows(csv);
  auto parse = [](const std::string& s, double& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size() && std::isfinite(out);
  };
  if (!rows.empty()) {
    double dummy;
    if (std::none_of(rows.front().begin(), rows.front().end(), [&](const std::string& s) { return parse(s, dummy); }))
      rows.erase(rows.begin());
  }
  if (rows.empty()) fail(Errc::schema, "numeric data has no rows");
  const std::size_t width = rows.front().size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != width) fail(Errc::shape, "row " + std::to_string(r + 1) + " has the wrong number of cells");
    for (std::size_t c = 0; c < width; ++c)
      if (!parse(rows[r][c], m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c))))
        fail(Errc::schema, "row " + std::to_string(r + 1) + ", column " + std::to_string(c + 1) + ": '" + rows[r][c] +
                               "' is not a finite number");
  }
  return m;
}

// ---------------------------------------------------------------------------
// Small fixture documents

namespace {

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    schema_error("$", std::string("not valid JSON (") + e.what() + ")");
  }
}

}  // namespace

Eigen::MatrixXd parse_transition_matrix(const std::string& text) {
  const json doc = parse_json(text);
  if (!doc.is_object()) schema_error("$", "document must be an object");
  const auto& rows = array_at(member(doc, "$", "transition"), "$.transition");
  if (rows.empty()) schema_error("$.transition", "needs at least one row");
  Eigen::MatrixXd t(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::string path = "$.transition[" + std::to_string(i) + "]";
    const auto& row = array_at(rows[i], path);
    if (static_cast<Eigen::Index>(row.size()) != t.cols()) schema_error(path, "rows must have equal length");
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (!row[j].is_number()) schema_error(path + "[" + std::to_string(j) + "]", "must be a number");
      t(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j].get<double>();
    }
  }
  return t;
}

WeightedGraphDocument parse_weighted_graph(const std::string& text) {
  const json doc = parse_json(text);
  if (!doc.is_object()) schema_error("$", "document must be an object");
  WeightedGraphDocument out;
  out.nodes = string_array(member(doc, "$", "nodes"), "$.nodes");
  const auto& weights = member(doc, "$", "weights");
  if (!weights.is_object()) schema_error("$.weights", "must be an object");
  for (const auto& [key, value] : weights.items()) {
    const auto dash = key.find('-');
    if (dash == std::string::npos) schema_error("$.weights." + key, "keys must look like A-B");
    if (!value.is_number()) schema_error("$.weights." + key, "must be a number");
    out.weights[edge_key(key.substr(0, dash), key.substr(dash + 1))] = value.get<double>();
  }
  return out;
}

}  // namespace pgm
