#include <doctest.h>

#include <functional>
#include <random>

#include "pgm/graph.hpp"
#include "support/oracles.hpp"

using namespace pgm;

namespace {

using Edges = std::vector<std::pair<std::string, std::string>>;

std::vector<std::string> letters(int n) {
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) out.push_back(std::string(1, static_cast<char>('A' + i)));
  return out;
}

DirectedGraph random_dag(std::mt19937_64& rng, int n, double p) {
  auto names = letters(n);
  auto order = names;
  std::shuffle(order.begin(), order.end(), rng);
  DirectedGraph g(names);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (oracle::uniform(rng) < p) g.add_edge(order[i], order[j]);
  return g;
}

UndirectedGraph random_graph(std::mt19937_64& rng, int n, double p) {
  UndirectedGraph g(letters(n));
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (oracle::uniform(rng) < p) g.add_edge(letters(n)[i], letters(n)[j]);
  return g;
}

// Descendants by plain DFS over the edge list.
NodeSet descendants_of(const DirectedGraph& g, const std::string& v) {
  NodeSet out;
  std::function<void(const std::string&)> go = [&](const std::string& u) {
    for (const auto& [a, b] : g.edges())
      if (a == u && out.insert(b).second) go(b);
  };
  go(v);
  return out;
}

// d-separation by enumerating every simple undirected path and applying the active-node rules.
bool d_separated_by_paths(const DirectedGraph& g, const NodeSet& X, const NodeSet& Y, const NodeSet& Z) {
  auto sk = skeleton(g);
  bool active_found = false;
  std::vector<std::string> path;
  NodeSet on_path;
  std::function<void(const std::string&)> extend = [&](const std::string& u) {
    if (active_found) return;
    if (Y.count(u) && path.size() > 1) {
      bool active = true;
      for (std::size_t k = 1; k + 1 < path.size() && active; ++k) {
        const auto &a = path[k - 1], &m = path[k], &b = path[k + 1];
        const bool collider = g.has_edge(a, m) && g.has_edge(b, m);
        if (collider) {
          bool desc_obs = Z.count(m) > 0;
          for (const auto& d : descendants_of(g, m)) desc_obs = desc_obs || Z.count(d) > 0;
          active = desc_obs;
        } else {
          active = Z.count(m) == 0;
        }
      }
      if (active) active_found = true;
      return;
    }
    for (const auto& w : sk.neighbors(u)) {
      if (on_path.count(w)) continue;
      path.push_back(w);
      on_path.insert(w);
      extend(w);
      on_path.erase(w);
      path.pop_back();
    }
  };
  for (const auto& x : X) {
    path = {x};
    on_path = {x};
    extend(x);
  }
  return !active_found;
}

// Every simple cycle longer than three has a chord.
bool chordal_by_cycles(const UndirectedGraph& g) {
  bool ok = true;
  std::vector<std::string> path;
  std::function<void(const std::string&, const std::string&)> go = [&](const std::string& start, const std::string& u) {
    for (const auto& w : g.neighbors(u)) {
      if (!ok) return;
      if (w == start && path.size() > 3) {
        bool chord = false;
        for (std::size_t i = 0; i < path.size() && !chord; ++i)
          for (std::size_t j = i + 2; j < path.size() && !chord; ++j) {
            if (i == 0 && j == path.size() - 1) continue;
            chord = g.has_edge(path[i], path[j]);
          }
        if (!chord) ok = false;
        continue;
      }
      if (w <= start || std::find(path.begin(), path.end(), w) != path.end()) continue;
      path.push_back(w);
      go(start, w);
      path.pop_back();
    }
  };
  for (const auto& v : g.nodes()) {
    path = {v};
    go(v, v);
  }
  return ok;
}

std::vector<NodeSet> maximal_cliques_by_subsets(const UndirectedGraph& g) {
  const auto& nodes = g.nodes();
  const int n = static_cast<int>(nodes.size());
  std::vector<NodeSet> cliques;
  for (int mask = 1; mask < (1 << n); ++mask) {
    NodeSet s;
    for (int i = 0; i < n; ++i)
      if (mask >> i & 1) s.insert(nodes[i]);
    if (!g.is_clique(s)) continue;
    bool maximal = true;
    for (int i = 0; i < n && maximal; ++i) {
      if (mask >> i & 1) continue;
      auto t = s;
      t.insert(nodes[i]);
      if (g.is_clique(t)) maximal = false;
    }
    if (maximal) cliques.push_back(s);
  }
  std::sort(cliques.begin(), cliques.end());
  return cliques;
}

double best_spanning_weight(const UndirectedGraph& g, const EdgeWeights& w) {
  auto edges = g.edges();
  const int n = static_cast<int>(g.nodes().size());
  const int m = static_cast<int>(edges.size());
  double best = -1e300;
  for (int mask = 0; mask < (1 << m); ++mask) {
    if (__builtin_popcount(mask) != n - 1) continue;
    UndirectedGraph t(g.nodes());
    double total = 0.0;
    for (int e = 0; e < m; ++e)
      if (mask >> e & 1) {
        t.add_edge(edges[e].first, edges[e].second);
        total += w.at(edges[e]);
      }
    if (t.connected()) best = std::max(best, total);
  }
  return best;
}

}  // namespace

// ---------------------------------------------------------------------------
// topological_sort

TEST_CASE("topological order of the node-roles graph") {
  DirectedGraph g({"U", "V", "W", "X"}, {{"U", "V"}, {"U", "W"}, {"W", "X"}});
  CHECK(topological_sort(g) == std::vector<std::string>{"U", "V", "W", "X"});
}

TEST_CASE("edgeless graph sorts by name; cycles are rejected") {
  DirectedGraph g({"c", "a", "b"});
  CHECK(topological_sort(g) == std::vector<std::string>{"a", "b", "c"});
  DirectedGraph cyc({"a", "b", "c"}, {{"a", "b"}, {"b", "c"}, {"c", "a"}});
  try {
    topological_sort(cyc);
    FAIL("expected not-a-dag");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::not_a_dag);
    CHECK(std::string(e.what()).find("->") != std::string::npos);
  }
}

TEST_CASE("random DAG orderings violate no edge") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    auto g = random_dag(rng, oracle::uniform_int(rng, 1, 8), 0.4);
    auto order = topological_sort(g);
    std::map<std::string, std::size_t> pos;
    for (std::size_t i = 0; i < order.size(); ++i) pos[order[i]] = i;
    REQUIRE(order.size() == g.nodes().size());
    for (const auto& [a, b] : g.edges()) CHECK(pos[a] < pos[b]);
  }
}

// ---------------------------------------------------------------------------
// moralize

TEST_CASE("moralization figure") {
  DirectedGraph g({"A", "B", "C", "D", "E", "F", "G"},
                  {{"A", "D"}, {"B", "D"}, {"C", "D"}, {"D", "G"}, {"E", "G"}, {"E", "F"}});
  auto m = moralize(g);
  for (auto [a, b] : Edges{{"A", "B"}, {"A", "C"}, {"B", "C"}, {"D", "E"}}) CHECK(m.has_edge(a, b));
  CHECK(m.edge_count() == 6 + 4);
  CHECK_FALSE(m.has_edge("F", "G"));
}

TEST_CASE("a chain moralizes to its skeleton") {
  DirectedGraph g({"a", "b", "c"}, {{"a", "b"}, {"b", "c"}});
  CHECK(moralize(g) == skeleton(g));
}

TEST_CASE("random DAGs: parents form cliques and the skeleton is kept") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    auto g = random_dag(rng, 7, 0.4);
    auto m = moralize(g);
    for (const auto& v : g.nodes()) CHECK(m.is_clique(g.parents(v)));
    for (const auto& [a, b] : g.edges()) CHECK(m.has_edge(a, b));
  }
}

// ---------------------------------------------------------------------------
// triangulate / cliques

TEST_CASE("chordalizing the five-cycle adds the figure's chords") {
  UndirectedGraph g({"A", "B", "C", "D", "E"}, {{"A", "B"}, {"A", "C"}, {"B", "D"}, {"C", "E"}, {"D", "E"}});
  CHECK_FALSE(chordal_by_cycles(g));
  auto t = triangulate(g, {"B", "E", "A", "C", "D"});
  CHECK(t.chordal.edge_count() == 7);
  CHECK(t.chordal.has_edge("A", "D"));
  CHECK(t.chordal.has_edge("C", "D"));
  CHECK(chordal_by_cycles(t.chordal));
  CHECK(is_chordal(t.chordal));
  CHECK(t.elim_cliques.front() == NodeSet{"A", "B", "D"});
}

TEST_CASE("a triangle is already chordal") {
  UndirectedGraph g({"a", "b", "c"}, {{"a", "b"}, {"b", "c"}, {"a", "c"}});
  CHECK(triangulate(g, {"a", "b", "c"}).chordal == g);
}

TEST_CASE("triangulation rejects non-permutations") {
  UndirectedGraph g({"a", "b"}, {{"a", "b"}});
  try {
    triangulate(g, {"a", "a"});
    FAIL("expected ordering error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::ordering);
  }
}

TEST_CASE("random graphs triangulate to chordal graphs, idempotently") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 60; ++trial) {
    auto g = random_graph(rng, oracle::uniform_int(rng, 3, 7), 0.45);
    auto order = g.nodes();
    std::shuffle(order.begin(), order.end(), rng);
    auto t = triangulate(g, order);
    CHECK(chordal_by_cycles(t.chordal));
    CHECK(is_chordal(t.chordal));
    CHECK(is_chordal(g) == chordal_by_cycles(g));
    for (const auto& [a, b] : g.edges()) CHECK(t.chordal.has_edge(a, b));
    CHECK(triangulate(t.chordal, order).chordal == t.chordal);

    auto cliques = max_cliques(t.chordal, t.elim_cliques);
    CHECK(cliques.size() <= g.nodes().size());
    std::sort(cliques.begin(), cliques.end());
    CHECK(cliques == maximal_cliques_by_subsets(t.chordal));
  }
}

TEST_CASE("maximal cliques of the cliques figure") {
  UndirectedGraph g({"A", "B", "C", "D", "E", "F"}, {{"A", "B"}, {"A", "C"}, {"A", "F"}, {"B", "C"}, {"C", "D"},
                                                     {"D", "E"}, {"C", "E"}, {"E", "F"}});
  std::vector<NodeSet> expected{{"A", "B", "C"}, {"A", "F"}, {"C", "D", "E"}, {"E", "F"}};
  CHECK(enumerate_maximal_cliques(g) == expected);
  CHECK(maximal_cliques_by_subsets(g) == expected);
}

TEST_CASE("complete graph has one maximal clique") {
  UndirectedGraph g(letters(4));
  for (auto a : letters(4))
    for (auto b : letters(4))
      if (a < b) g.add_edge(a, b);
  auto t = triangulate(g, letters(4));
  auto c = max_cliques(t.chordal, t.elim_cliques);
  REQUIRE(c.size() == 1);
  CHECK(c[0].size() == 4);
}

// ---------------------------------------------------------------------------
// d-separation

TEST_CASE("earthquake v-structure") {
  DirectedGraph g({"Burglary", "Earthquake", "Alarm"}, {{"Burglary", "Alarm"}, {"Earthquake", "Alarm"}});
  CHECK(d_separated(g, {"Burglary"}, {"Earthquake"}, {}));
  CHECK_FALSE(d_separated(g, {"Burglary"}, {"Earthquake"}, {"Alarm"}));
}

TEST_CASE("fork, chain and collider primitives") {
  DirectedGraph fork({"X", "Y", "Z"}, {{"Z", "X"}, {"Z", "Y"}});
  CHECK(d_separated(fork, {"X"}, {"Y"}, {"Z"}));
  CHECK_FALSE(d_separated(fork, {"X"}, {"Y"}, {}));
  DirectedGraph chain({"X", "Y", "Z"}, {{"X", "Z"}, {"Z", "Y"}});
  CHECK(d_separated(chain, {"X"}, {"Y"}, {"Z"}));
  DirectedGraph collider({"X", "Y", "Z", "W"}, {{"X", "Z"}, {"Y", "Z"}, {"Z", "W"}});
  CHECK_FALSE(d_separated(collider, {"X"}, {"Y"}, {"W"}));
}

TEST_CASE("confounder figure: X and Y separated given {C, D, G}") {
  DirectedGraph g({"A", "B", "C", "D", "E", "F", "G", "H", "I", "J", "X", "Y"},
                  {{"X", "G"}, {"G", "H"}, {"H", "Y"}, {"X", "A"}, {"Y", "A"}, {"I", "X"}, {"I", "B"}, {"J", "Y"},
                   {"J", "B"}, {"C", "X"}, {"C", "Y"}, {"E", "X"}, {"F", "Y"}, {"D", "E"}, {"D", "F"}});
  CHECK(d_separated_by_paths(g, {"X"}, {"Y"}, {"C", "D", "G"}));
  CHECK(d_separated(g, {"X"}, {"Y"}, {"C", "D", "G"}));
  CHECK_FALSE(d_separated(g, {"X"}, {"Y"}, {"C", "D"}));
  CHECK_FALSE(d_separated(g, {"X"}, {"Y"}, {"C", "D", "G", "B"}));
}

TEST_CASE("overlapping query sets are rejected") {
  DirectedGraph g({"a", "b"}, {{"a", "b"}});
  try {
    d_separated(g, {"a"}, {"a"}, {});
    FAIL("expected argument error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::argument);
  }
}

TEST_CASE("reachability agrees with path enumeration and is symmetric") {
  std::mt19937_64 rng(4);
  int checked = 0;
  for (int trial = 0; trial < 150; ++trial) {
    auto g = random_dag(rng, oracle::uniform_int(rng, 3, 7), 0.35);
    auto nodes = g.nodes();
    std::shuffle(nodes.begin(), nodes.end(), rng);
    NodeSet X{nodes[0]}, Y{nodes[1]}, Z;
    for (std::size_t k = 2; k < nodes.size(); ++k)
      if (oracle::uniform(rng) < 0.4) Z.insert(nodes[k]);
    const bool fast = d_separated(g, X, Y, Z);
    CHECK(fast == d_separated_by_paths(g, X, Y, Z));
    CHECK(fast == d_separated(g, Y, X, Z));
    ++checked;
  }
  CHECK(checked == 150);
}

TEST_CASE("d-separation implies independence in random parameterizations") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    auto bn = oracle::random_bn(rng, oracle::uniform_int(rng, 3, 6), 2, 3, 0.45);
    const auto joint = oracle::brute_joint(bn);
    const auto names = bn.variable_names();
    const int n = static_cast<int>(names.size());
    for (int xi = 0; xi < n; ++xi)
      for (int yi = xi + 1; yi < n; ++yi) {
        for (int zmask = 0; zmask < (1 << n); ++zmask) {
          if ((zmask >> xi & 1) || (zmask >> yi & 1)) continue;
          NodeSet Z;
          for (int k = 0; k < n; ++k)
            if (zmask >> k & 1) Z.insert(names[k]);
          if (!d_separated(bn.dag(), {names[xi]}, {names[yi]}, Z)) continue;
          // p(x,y,z) p(z) == p(x,z) p(y,z) for every configuration.
          std::map<std::vector<int>, double> pxyz, pxz, pyz, pz;
          for (std::size_t f = 0; f < joint.size(); ++f) {
            auto x = oracle::unflatten(bn, f);
            std::vector<int> zc;
            for (int k = 0; k < n; ++k)
              if (zmask >> k & 1) zc.push_back(x[k]);
            auto key = [&](std::initializer_list<int> head) {
              std::vector<int> out(head);
              out.insert(out.end(), zc.begin(), zc.end());
              return out;
            };
            pxyz[key({x[xi], x[yi]})] += joint[f];
            pxz[key({x[xi]})] += joint[f];
            pyz[key({x[yi]})] += joint[f];
            pz[zc] += joint[f];
          }
          for (const auto& [k, v] : pxyz) {
            std::vector<int> zc(k.begin() + 2, k.end());
            std::vector<int> kx{k[0]}, ky{k[1]};
            kx.insert(kx.end(), zc.begin(), zc.end());
            ky.insert(ky.end(), zc.begin(), zc.end());
            CHECK(std::abs(v * pz[zc] - pxz[kx] * pyz[ky]) <= 1e-9);
          }
        }
      }
  }
}

// ---------------------------------------------------------------------------
// Markov blankets

TEST_CASE("Markov blanket figure, directed and undirected") {
  DirectedGraph g({"A", "B", "C", "D", "E", "F", "G"},
                  {{"A", "C"}, {"C", "E"}, {"C", "F"}, {"B", "D"}, {"D", "F"}, {"D", "G"}});
  CHECK(markov_blanket(g, "C") == NodeSet{"A", "D", "E", "F"});
  CHECK(markov_blanket(skeleton(g), "C") == NodeSet{"A", "E", "F"});
  DirectedGraph lone({"Z"});
  CHECK(markov_blanket(lone, "Z").empty());
  try {
    markov_blanket(g, "nope");
    FAIL("expected lookup error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::lookup);
  }
}

// ---------------------------------------------------------------------------
// Spanning trees

TEST_CASE("Chow-Liu figure weights give the figure tree") {
  UndirectedGraph g({"A", "B", "C", "D"});
  EdgeWeights w{{{"A", "B"}, 0.07}, {{"A", "C"}, 0.32}, {{"B", "C"}, 0.32},
                {{"B", "D"}, 0.32}, {{"C", "D"}, 0.02}, {{"A", "D"}, 0.17}};
  for (const auto& [k, v] : w) g.add_edge(k.first, k.second);
  auto t = max_weight_spanning_tree(g, w);
  CHECK(t.tree.edges() == Edges{{"A", "C"}, {"B", "C"}, {"B", "D"}});
  CHECK_FALSE(t.disconnected);
  auto directed = orient_tree(t.tree, "A");
  CHECK(directed.edges() == Edges{{"A", "C"}, {"B", "D"}, {"C", "B"}});
}

TEST_CASE("a tree is its own spanning tree; disconnected inputs are flagged") {
  UndirectedGraph t({"a", "b", "c"}, {{"a", "b"}, {"b", "c"}});
  EdgeWeights w{{{"a", "b"}, 1.0}, {{"b", "c"}, 2.0}};
  CHECK(max_weight_spanning_tree(t, w).tree == t);
  UndirectedGraph split({"a", "b", "c", "d"}, {{"a", "b"}, {"c", "d"}});
  auto f = max_weight_spanning_tree(split, {});
  CHECK(f.disconnected);
  CHECK(f.tree.edge_count() == 2);
}

TEST_CASE("random weighted graphs: Kruskal matches spanning-tree enumeration") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = oracle::uniform_int(rng, 2, 6);
    UndirectedGraph g(letters(n));
    EdgeWeights w;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (j == i + 1 || oracle::uniform(rng) < 0.6) {
          g.add_edge(letters(n)[i], letters(n)[j]);
          w[edge_key(letters(n)[i], letters(n)[j])] = std::round(oracle::uniform(rng, 0, 10) * 4) / 4;
        }
    auto t = max_weight_spanning_tree(g, w);
    CHECK(t.tree.edge_count() == static_cast<std::size_t>(n - 1));
    CHECK(t.tree.connected());
    CHECK(t.total_weight == doctest::Approx(best_spanning_weight(g, w)));
  }
}

// ---------------------------------------------------------------------------
// Markov equivalence

TEST_CASE("Markov equivalence of primitive structures") {
  DirectedGraph xy({"X", "Y"}, {{"X", "Y"}}), yx({"X", "Y"}, {{"Y", "X"}});
  CHECK(mec_equivalent(xy, yx));
  DirectedGraph fork({"X", "Y", "Z"}, {{"Z", "X"}, {"Z", "Y"}});
  DirectedGraph chain({"X", "Y", "Z"}, {{"X", "Z"}, {"Z", "Y"}});
  DirectedGraph collider({"X", "Y", "Z"}, {{"X", "Z"}, {"Y", "Z"}});
  CHECK(mec_equivalent(fork, chain));
  CHECK_FALSE(mec_equivalent(fork, collider));
  CHECK_FALSE(mec_equivalent(chain, collider));
  CHECK(mec_equivalent(collider, collider));
  auto sig = mec_signature(collider);
  REQUIRE(sig.v_structures.size() == 1);
  CHECK(*sig.v_structures.begin() == std::make_tuple(std::string("X"), std::string("Z"), std::string("Y")));
}

TEST_CASE("DOT export is deterministic") {
  DirectedGraph g({"Burglary", "Earthquake", "Alarm"}, {{"Burglary", "Alarm"}, {"Earthquake", "Alarm"}});
  auto dot = to_dot(g);
  CHECK(dot == to_dot(g));
  CHECK(dot.find("\"Burglary\" -> \"Alarm\"") != std::string::npos);
  CHECK(to_dot(DirectedGraph{}) == "digraph \"G\" {\n}\n");
}
