#include <doctest.h>

#include <filesystem>
#include <random>
#include <sstream>

#include "pgm/cli.hpp"
#include "pgm/exact.hpp"
#include "pgm/io.hpp"
#include "support/oracles.hpp"

using namespace pgm;
namespace fs = std::filesystem;

namespace {

const fs::path fixtures = PGM_FIXTURES;

Errc error_code(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::internal;
}

std::string error_text(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

std::string model_path(const std::string& name) { return (fixtures / "models" / (name + ".json")).string(); }

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

/// Scratch directory unique to this test binary.
fs::path scratch() {
  const auto dir = fs::temp_directory_path() / "pgm_test_io";
  fs::create_directories(dir);
  return dir;
}

/// Parses "p[s0]=0.1 p[s1]=0.9" into the listed values.
std::vector<double> probabilities(const std::string& line) {
  std::vector<double> out;
  std::istringstream is(line);
  std::string tok;
  while (is >> tok) out.push_back(std::stod(tok.substr(tok.find('=') + 1)));
  return out;
}

std::string value_of(const std::string& text, const std::string& key) {
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line))
    if (line.rfind(key + "=", 0) == 0) return line.substr(key.size() + 1);
  return {};
}

}  // namespace

TEST_SUITE("model documents") {
  TEST_CASE("every fixture round-trips byte for byte") {
    std::size_t files = 0;
    for (const auto& entry : fs::directory_iterator(fixtures / "models")) {
      const auto text = read_text_file(entry.path().string());
      INFO(entry.path().filename().string());
      CHECK(serialize_model(parse_model(text)) == text);
      ++files;
    }
    CHECK(files == 20);
  }

  TEST_CASE("student document carries the figure's tables") {
    const auto doc = parse_model(read_text_file(model_path("student")));
    REQUIRE(std::holds_alternative<BayesianNetwork>(doc));
    const auto& bn = std::get<BayesianNetwork>(doc);
    const auto truth = oracle::student_network();
    for (const auto& v : truth.variable_names()) {
      CHECK(bn.cpd(v).scope_names() == truth.cpd(v).scope_names());
      CHECK((bn.cpd(v).values() == truth.cpd(v).values()).all());
    }
    CHECK(serialize_model(truth) == read_text_file(model_path("student")));
  }

  TEST_CASE("serialization is canonical") {
    // Keys out of order, extra whitespace and a log-domain table describe the same model.
    const std::string messy = R"({"variables":[{"states":["heads","tails"],"name":"Coin"}],
      "model_type":"bayesian_network", "format_version":1,
      "factors":[{"table":[-0.5108256237659907,-0.916290731874155],"scope":["Coin"],"kind":"cpd","domain":"log","child":"Coin"}]})";
    const auto canonical = serialize_model(parse_model(messy));
    CHECK(canonical == serialize_model(parse_model(canonical)));
    const auto coin = std::get<BayesianNetwork>(parse_model(canonical));
    CHECK(coin.cpd("Coin")[0] == doctest::Approx(0.6).epsilon(1e-15));

    MarkovRandomField m;
    auto a = make_variable("A", 2);
    m.add_variable(a);
    m.add_factor(Factor({a}, {0.25, 0.75}));
    m.add_factor(Factor({a}, {std::log(0.25), std::log(0.75)}, Domain::log));
    const auto text = serialize_model(m);
    CHECK(text.find("\"log\"") == std::string::npos);
    CHECK(serialize_model(parse_model(text)) == text);
  }

  TEST_CASE("log tables may use null for minus infinity") {
    const std::string doc = R"({"factors":[{"domain":"log","kind":"potential","scope":["A"],"table":[null,0]}],
      "format_version":1,"model_type":"markov_random_field","variables":[{"name":"A","states":["a","b"]}]})";
    const auto m = std::get<MarkovRandomField>(parse_model(doc));
    CHECK(m.factor_list()[0][0] == 0.0);
    CHECK(m.factor_list()[0][1] == 1.0);
  }

  TEST_CASE("schema violations name the path and the rule") {
    const std::string vars = R"("variables":[{"name":"A","states":["a0","a1"]},{"name":"B","states":["b0","b1","b2"]}])";
    auto doc = [&](const std::string& factor, const std::string& type = "markov_random_field") {
      return "{\"factors\":[" + factor + "],\"format_version\":1,\"model_type\":\"" + type + "\"," + vars + "}";
    };
    const auto length = error_text([&] {
      parse_model(doc(R"({"kind":"potential","scope":["A","B"],"table":[1,1,1,1,1]})"));
    });
    CHECK(length.find("$.factors[0].table") != std::string::npos);
    CHECK(length.find("factor 0") != std::string::npos);
    CHECK(length.find("5 entries") != std::string::npos);

    CHECK(error_code([&] { parse_model(doc(R"({"kind":"potential","scope":["A","B"],"table":[1,1,1,1,1]})")); }) ==
          Errc::schema);
    CHECK(error_text([&] { parse_model(doc(R"({"kind":"potential","scope":["C"],"table":[1]})")); })
              .find("unknown variable 'C'") != std::string::npos);
    CHECK(error_text([&] { parse_model(doc(R"({"kind":"potential","scope":["A"],"table":[1,1],"extra":1})")); })
              .find("$.factors[0].extra: unknown key") != std::string::npos);
    CHECK(error_text([&] { parse_model(doc(R"({"kind":"potential","scope":["A"]})")); })
              .find("$.factors[0].table: required key is missing") != std::string::npos);
    CHECK(error_code([&] { parse_model(doc(R"({"kind":"potential","scope":["A"],"table":[-1,1]})")); }) ==
          Errc::schema);
    CHECK(error_code([&] { parse_model(doc(R"({"kind":"cpd","child":"B","scope":["A"],"table":[1,0]})",
                                            "bayesian_network")); }) == Errc::schema);
    CHECK(error_code([&] { parse_model(doc(R"({"kind":"cpd","child":"A","scope":["A"],"table":[1,0]})")); }) ==
          Errc::schema);
    CHECK(error_code([] { parse_model("{not json"); }) == Errc::schema);
    CHECK(error_code([] { parse_model(R"({"factors":[],"format_version":2,"model_type":"bayesian_network","variables":[]})"); }) ==
          Errc::schema);
    CHECK(error_code([] { parse_model(R"({"factors":[],"format_version":1,"model_type":"x","variables":[]})"); }) ==
          Errc::schema);
  }

  TEST_CASE("well-formed documents of invalid models are rejected") {
    const std::string unnormalized = R"({"factors":[{"child":"A","kind":"cpd","scope":["A"],"table":[0.5,0.6]}],
      "format_version":1,"model_type":"bayesian_network","variables":[{"name":"A","states":["a0","a1"]}]})";
    CHECK(error_code([&] { parse_model(unnormalized); }) == Errc::invalid_model);
  }
}

TEST_SUITE("datasets") {
  TEST_CASE("three rows over two binary variables") {
    const auto d = load_dataset(read_text_file((fixtures / "data" / "two_binary.csv").string()),
                                {make_variable("A", {"0", "1"}), make_variable("B", {"0", "1"})});
    CHECK(d.size() == 3);
    CHECK(counts(d, {"A", "B"}).counts == std::vector<std::size_t>{1, 1, 0, 1});
    CHECK(load_dataset("B,A\n1,0\n0,1\n").rows()(0, 0) == 1);
  }

  TEST_CASE("forward samples reload with identical counts") {
    RandomSource rng(12);
    const auto bn = oracle::student_network();
    const auto batch = forward_sample(bn, 500, rng);
    const auto d = load_dataset(batch.to_csv(), bn.variables());
    const auto direct = Dataset::from_batch(batch);
    for (const auto& v : bn.variable_names()) CHECK(counts(d, {v}).counts == counts(direct, {v}).counts);
    CHECK(counts(d, bn.variable_names()).counts == counts(direct, bn.variable_names()).counts);
    CHECK(dataset_to_csv(d) == batch.to_csv());
  }

  TEST_CASE("bad cells are reported by row and column") {
    const auto csv = read_text_file((fixtures / "data" / "bad_state.csv").string());
    const std::vector<VarRef> schema{make_variable("Rain", {"no", "yes"}), make_variable("Wet", {"no", "yes"})};
    CHECK(error_code([&] { load_dataset(csv, schema); }) == Errc::assignment);
    const auto msg = error_text([&] { load_dataset(csv, schema); });
    CHECK(msg.find("row 2, column 1") != std::string::npos);
    CHECK(msg.find("'maybe'") != std::string::npos);
    CHECK(error_code([&] { load_dataset("Rain,Snow\nno,no\n", schema); }) == Errc::schema);
    CHECK(error_code([&] { load_dataset("Rain,Wet\nno\n", schema); }) == Errc::shape);
  }

  TEST_CASE("states inferred from data are sorted labels") {
    const auto d = load_dataset("X,Y\nb,1\na,0\nc,1\n");
    CHECK(d.variable("X")->states() == std::vector<std::string>{"a", "b", "c"});
    CHECK(d.rows()(0, 0) == 1);
  }

  TEST_CASE("numeric matrices with an optional header") {
    const auto m = load_real_matrix("x,y\n1,2.5\n-3,4e-1\n");
    REQUIRE(m.rows() == 2);
    CHECK(m(1, 1) == doctest::Approx(0.4));
    CHECK(load_real_matrix("1,2\n3,4\n").rows() == 2);
    CHECK(error_code([] { load_real_matrix("1,2\n3,oops\n"); }) == Errc::schema);
  }
}

TEST_SUITE("auxiliary fixtures and DOT") {
  TEST_CASE("chains and weights load") {
    const auto t = parse_transition_matrix(read_text_file((fixtures / "markov_chain.json").string()));
    CHECK(t.rows() == 3);
    CHECK(t(0, 2) == 1.0);
    const auto w = parse_weighted_graph(read_text_file((fixtures / "chow_liu_weights.json").string()));
    CHECK(w.nodes.size() == 4);
    CHECK(w.weights.at(edge_key("D", "A")) == 0.17);
  }

  TEST_CASE("DOT export is deterministic") {
    const auto dot = to_dot(oracle::earthquake_network().dag());
    std::size_t arrows = 0, pos = 0;
    while ((pos = dot.find(" -> ", pos)) != std::string::npos) ++arrows, ++pos;
    CHECK(arrows == 2);
    CHECK(std::count(dot.begin(), dot.end(), ';') == 5);
    CHECK(to_dot(DirectedGraph{}) == "digraph \"G\" {\n}\n");

    const auto out = (scratch() / "eq.dot").string();
    write_text_file(out, dot);
    CHECK(read_text_file(out) == to_dot(oracle::earthquake_network().dag()));
    CHECK(error_code([] { write_text_file("/nonexistent-dir/x.dot", "x"); }) == Errc::io);
    CHECK(error_code([] { read_text_file("/nonexistent-dir/x.json"); }) == Errc::io);
  }
}

TEST_SUITE("command line") {
  TEST_CASE("student letter marginal and MAP") {
    const auto q = cli({"query", "--model", model_path("student"), "--target", "LETTER"});
    CHECK(q.code == exit_ok);
    CHECK(q.out == "p[l0]=0.497664 p[l1]=0.502336\n");
    CHECK(q.err.find("config.engine=ve\n") != std::string::npos);
    CHECK(q.err.find("config.seed=0\n") != std::string::npos);

    const auto m = cli({"map", "--model", model_path("student"), "--engine", "enum"});
    CHECK(m.code == exit_ok);
    CHECK(value_of(m.out, "assignment") == "(d1,i0,g3,s0,l0)");
    CHECK(value_of(m.out, "p") == "0.184338");
    CHECK(std::stod(value_of(m.out, "logp")) == doctest::Approx(std::log(0.184338)).epsilon(1e-5));
    CHECK(value_of(cli({"map", "--model", model_path("student"), "--engine", "maxprod"}).out, "assignment") ==
          "(d1,i0,g3,s0,l0)");
  }

  TEST_CASE("enumeration agrees with every exact engine on every fixture") {
    for (const auto& entry : fs::directory_iterator(fixtures / "models")) {
      const auto path = entry.path().string();
      const auto model = parse_model(read_text_file(path));
      const auto& m = as_graphical(model);
      const bool tree = to_factor_graph(m).is_forest();
      for (const auto& v : m.variable_names()) {
        const auto base = std::vector<std::string>{"query", "--model", path, "--target", v, "--precision", "17"};
        auto with = [&](const std::string& engine) {
          auto args = base;
          args.insert(args.end(), {"--engine", engine});
          return cli(args);
        };
        const auto reference = with("enum");
        REQUIRE(reference.code == exit_ok);
        const auto expected = probabilities(reference.out);
        for (const char* engine : {"ve", "jtree", "bp"}) {
          const auto r = with(engine);
          INFO(path, " ", v, " ", engine);
          if (std::string(engine) == "bp" && !tree) {
            CHECK(r.code == exit_inference);
            continue;
          }
          REQUIRE(r.code == exit_ok);
          const auto got = probabilities(r.out);
          REQUIRE(got.size() == expected.size());
          for (std::size_t s = 0; s < got.size(); ++s) CHECK(std::abs(got[s] - expected[s]) <= 1e-9);
        }
      }
    }
  }

  TEST_CASE("conditional query with evidence") {
    const auto r = cli({"query", "--model", model_path("hidden_cause"), "--target", "H", "-e", "E=e1"});
    CHECK(r.code == exit_ok);
    const auto p = probabilities(r.out);
    CHECK(p[1] == doctest::Approx(0.4 * 0.5 / 0.3).epsilon(1e-6));
  }

  TEST_CASE("approximate engines land near the exact marginal") {
    for (const char* engine : {"gibbs", "mh", "loopy"}) {
      const auto r = cli({"query", "--model", model_path("student"), "--target", "LETTER", "--engine", engine,
                          "--seed", "7"});
      REQUIRE(r.code == exit_ok);
      CHECK(std::abs(probabilities(r.out)[0] - 0.497664) < 0.01);
    }
  }

  TEST_CASE("seeded commands are byte-identical across runs") {
    const std::vector<std::string> args{"sample", "--model", model_path("student"), "--n", "5", "--seed", "42"};
    const auto a = cli(args), b = cli(args);
    CHECK(a.code == exit_ok);
    CHECK(a.out == b.out);
    CHECK(a.err == b.err);
    CHECK(a.out.rfind("DIFFICULTY,INTELLIGENCE,GRADE,SAT,LETTER\n", 0) == 0);
    CHECK(std::count(a.out.begin(), a.out.end(), '\n') == 6);
    auto other = args;
    other.back() = "43";
    CHECK(cli(std::vector<std::string>{"sample", "--model", model_path("student"), "--n", "50", "--seed", "43"}).out !=
          cli(std::vector<std::string>{"sample", "--model", model_path("student"), "--n", "50", "--seed", "42"}).out);
    for (const char* method : {"jtree", "gibbs", "mh"}) {
      const std::vector<std::string> m{"sample", "--model", model_path("voting"), "--n", "20", "--seed", "3",
                                       "--method", method};
      CHECK(cli(m).out == cli(m).out);
    }
    const std::vector<std::string> anneal{"map", "--model", model_path("random_mrf_0"), "--engine", "anneal", "--seed",
                                          "9"};
    CHECK(cli(anneal).out == cli(anneal).out);
  }

  TEST_CASE("exit codes") {
    CHECK(cli({}).code == exit_usage);
    CHECK(cli({"frobnicate"}).code == exit_usage);
    CHECK(cli({"query", "--model", model_path("student"), "--target", "LETTER", "--bogus"}).code == exit_usage);
    CHECK(cli({"query", "--model", model_path("student"), "--target", "LETTER", "--engine", "magic"}).code ==
          exit_usage);
    CHECK(cli({"query", "--model", model_path("student")}).code == exit_usage);
    CHECK(cli({"query", "--model", model_path("student"), "--target", "NOPE"}).code == exit_validation);
    CHECK(cli({"query", "--model", "/nonexistent.json", "--target", "A"}).code == exit_validation);
    CHECK(cli({"query", "--model", model_path("student"), "--target", "LETTER", "-e", "GRADE=g9"}).code ==
          exit_validation);

    const auto certain = (scratch() / "certain.json").string();
    write_text_file(certain, R"({"factors":[{"child":"C","kind":"cpd","scope":["C"],"table":[1,0]},
      {"child":"D","kind":"cpd","scope":["D","C"],"table":[0.5,0.5,0.5,0.5]}],
      "format_version":1,"model_type":"bayesian_network","variables":[{"name":"C","states":["h","t"]},
      {"name":"D","states":["d0","d1"]}]})");
    const auto zero = cli({"query", "--model", certain, "--target", "D", "-e", "C=t"});
    CHECK(zero.code == exit_inference);
    CHECK(zero.err.find("error [") != std::string::npos);
    CHECK(cli({"query", "--model", model_path("voting"), "--target", "A", "--engine", "bp"}).code == exit_inference);
    CHECK(cli({"--help"}).code == exit_ok);
  }

  TEST_CASE("learning commands") {
    const auto dir = scratch();
    const auto coin_csv = (dir / "coin.csv").string();
    write_text_file(coin_csv, "Coin\nheads\nheads\ntails\nheads\ntails\nheads\nheads\ntails\nheads\ntails\n");
    const auto learned = cli({"learn-params", "--model", model_path("coin"), "--data", coin_csv});
    REQUIRE(learned.code == exit_ok);
    CHECK(std::get<BayesianNetwork>(parse_model(learned.out)).cpd("Coin")[0] == doctest::Approx(0.6).epsilon(1e-15));
    const auto smoothed = cli({"learn-params", "--model", model_path("coin"), "--data", coin_csv, "--dirichlet", "1"});
    CHECK(std::get<BayesianNetwork>(parse_model(smoothed.out)).cpd("Coin")[0] == doctest::Approx(7.0 / 12.0));
    CHECK(cli({"learn-params", "--model", model_path("coin"), "--data", coin_csv, "--dirichlet", "1", "--pseudocount",
               "1"})
              .code == exit_usage);

    const auto chain_csv = (dir / "chain.csv").string();
    REQUIRE(cli({"sample", "--model", model_path("chain3"), "--n", "5000", "--seed", "1", "--out", chain_csv}).code ==
            exit_ok);
    const auto tree = cli({"learn-structure", "--data", chain_csv, "--method", "chowliu", "--root", "A"});
    CHECK(tree.out.find("edge=A->B\nedge=B->C\n") == 0);
    const auto climb = cli({"learn-structure", "--data", chain_csv, "--method", "hillclimb", "--model",
                            model_path("chain3"), "--dot", (dir / "hc.dot").string()});
    CHECK(climb.code == exit_ok);
    CHECK(!value_of(climb.out, "score").empty());
    CHECK(read_text_file((dir / "hc.dot").string()).rfind("digraph", 0) == 0);
    CHECK(cli({"learn-structure", "--data", chain_csv, "--method", "pc"}).code == exit_ok);

    const auto s = cli({"score", "--model", model_path("chain3"), "--data", chain_csv, "--score", "loglik"});
    CHECK(value_of(s.out, "parameters") == "5");
    CHECK(value_of(s.out, "rows") == "5000");
  }

  TEST_CASE("junction tree, DOT and mixture commands") {
    const auto jt = cli({"jtree", "--model", model_path("voting"), "--dot", "-"});
    CHECK(jt.code == exit_ok);
    CHECK(value_of(jt.out, "cliques") == "2");
    CHECK(value_of(jt.out, "width") == "2");
    CHECK(value_of(jt.out, "family_preservation") == "true");
    CHECK(value_of(jt.out, "running_intersection") == "true");
    CHECK(jt.out.find("shape=box") != std::string::npos);

    const auto dot = cli({"dot", "--model", model_path("earthquake")});
    CHECK(dot.out == to_dot(oracle::earthquake_network().dag()));

    std::mt19937_64 rng(3);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::ostringstream csv;
    csv << "x\n";
    for (int i = 0; i < 400; ++i) csv << (i % 2 ? 5.0 : -5.0) + noise(rng) << "\n";
    const auto data = (scratch() / "gmm.csv").string();
    write_text_file(data, csv.str());
    const std::vector<std::string> args{"em-gmm", "--data", data, "--k", "2", "--seed", "4"};
    const auto em = cli(args);
    CHECK(em.code == exit_ok);
    CHECK(std::abs(std::stod(value_of(em.out, "weight[0]")) - 0.5) < 0.05);
    CHECK(std::abs(std::abs(std::stod(value_of(em.out, "mean[0]"))) - 5.0) < 0.2);
    CHECK(cli(args).out == em.out);
  }
}
