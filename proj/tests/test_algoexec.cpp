#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <limits>
#include <numeric>
#include <optional>
#include <set>
#include <vector>

#include "crules/algoexec.hpp"
#include "crules/graphgen.hpp"
#include "crules/pipeline.hpp"

using namespace crules;

namespace {

// Path a-b-c with self-loops, as the traversal corpus prepares it.
Graph path3() {
  Graph g;
  g.node_count = 3;
  g.edges = {{0, 1}, {1, 2}};
  return add_self_loops(std::move(g));
}

Graph triangle_with_priorities(int pa, int pb, int pc) {
  Graph g;
  g.node_count = 3;
  g.edges = {{0, 1}, {1, 2}, {0, 2}};
  g.priorities = std::vector<int>{pa, pb, pc};
  return add_self_loops(std::move(g));
}

// Triangle with edge order ab, bc, ca and the given weights.
Graph weighted_triangle(int wab, int wbc, int wca) {
  Graph g;
  g.node_count = 3;
  g.edges = {{0, 1}, {1, 2}, {0, 2}};
  g.weights = std::vector<int>{wab, wbc, wca};
  return g;
}

// Independent minimum-spanning-tree weight: Prim's algorithm over an
// adjacency search, sharing no code with the library's edge-sorting executor.
long long prim_mst_weight(const Graph& g) {
  const int n = g.node_count;
  std::vector<char> in_tree(static_cast<std::size_t>(n), 0);
  std::vector<long long> best(static_cast<std::size_t>(n), std::numeric_limits<long long>::max());
  best[0] = 0;
  long long total = 0;
  for (int it = 0; it < n; ++it) {
    int pick = -1;
    for (int v = 0; v < n; ++v)
      if (!in_tree[static_cast<std::size_t>(v)] &&
          (pick < 0 || best[static_cast<std::size_t>(v)] < best[static_cast<std::size_t>(pick)]))
        pick = v;
    REQUIRE(best[static_cast<std::size_t>(pick)] != std::numeric_limits<long long>::max());
    in_tree[static_cast<std::size_t>(pick)] = 1;
    total += best[static_cast<std::size_t>(pick)];
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
      const auto [u, v] = g.edges[e];
      const long long w = (*g.weights)[e];
      if (u == pick && !in_tree[static_cast<std::size_t>(v)])
        best[static_cast<std::size_t>(v)] = std::min(best[static_cast<std::size_t>(v)], w);
      if (v == pick && !in_tree[static_cast<std::size_t>(u)])
        best[static_cast<std::size_t>(u)] = std::min(best[static_cast<std::size_t>(u)], w);
    }
  }
  return total;
}

DnfFormula formula_of(int width, std::vector<std::vector<Literal>> terms) {
  std::vector<Term> ts;
  for (auto& lits : terms) ts.push_back(make_term(std::move(lits)));
  return make_formula(width, std::move(ts));
}

// The reachability rule pair: label 1 on either concept, label 0 on neither.
std::vector<DnfFormula> bfs_truth_rules() {
  return {formula_of(2, {{{0, false}, {1, false}}}),
          formula_of(2, {{{0, true}}, {{1, true}}})};
}

TerminationRule bfs_truth_termination() { return {{0, 1}, {0, 1}}; }

std::vector<DnfFormula> kruskal_truth_rules() {
  return {formula_of(3, {{{1, true}, {2, false}}, {{0, false}, {2, false}}}),
          formula_of(3, {{{0, true}, {1, true}, {2, true}}, {{0, true}, {1, false}, {2, false}}})};
}

}  // namespace

TEST_CASE("traversal concepts on a path with one visited node") {
  const Graph g = path3();
  const auto adj = adjacency(g);
  const BfsState s = bfs_initial(g, 0);
  const auto m = annotate_concepts(g, adj, s);
  REQUIRE(m.size() == 3);
  CHECK(m[0] == std::vector<char>{1, 1});  // self-loop: own visited neighbour
  CHECK(m[1] == std::vector<char>{0, 1});
  CHECK(m[2] == std::vector<char>{0, 0});
}

TEST_CASE("traversal steps expand the frontier and stop at the fixpoint") {
  const Graph g = path3();
  const auto adj = adjacency(g);
  const BfsState s0 = bfs_initial(g, 0);

  const auto [rec1, s1] = bfs_step(g, adj, s0, 1);
  CHECK(rec1.outputs == std::vector<int>{1, 1, 0});
  CHECK(rec1.continue_flag);
  CHECK(rec1.post_concepts[2] == std::vector<char>{0, 1});

  const auto [rec2, s2] = bfs_step(g, adj, s1, 2);
  CHECK(rec2.outputs == std::vector<int>{1, 1, 1});
  CHECK_FALSE(rec2.continue_flag);

  // Fully visited: outputs unchanged, still no continue.
  const auto [rec3, s3] = bfs_step(g, adj, s2, 3);
  CHECK(rec3.outputs == std::vector<int>{1, 1, 1});
  CHECK_FALSE(rec3.continue_flag);
  CHECK(s3.visited == s2.visited);
}

TEST_CASE("an isolated node is its own priority maximum and takes color 1") {
  Graph g;
  g.node_count = 1;
  g.priorities = std::vector<int>{17};
  g = add_self_loops(std::move(g));
  const auto adj = adjacency(g);
  const auto m = annotate_concepts(g, adj, coloring_initial(g));
  CHECK(m[0] == std::vector<char>{0, 1, 0, 0, 0, 0, 0});
  const auto [rec, next] = coloring_step(g, adj, coloring_initial(g), 1);
  CHECK(rec.outputs == std::vector<int>{1});
  CHECK_FALSE(rec.continue_flag);
}

TEST_CASE("triangle coloring follows descending priority, one node per step") {
  const Graph g = triangle_with_priorities(3, 2, 1);
  const Trace trace = run_trace(AlgorithmId::Coloring, g);
  REQUIRE(trace.steps.size() == 3);
  CHECK(trace.steps[0].outputs == std::vector<int>{1, 0, 0});
  CHECK(trace.steps[1].outputs == std::vector<int>{1, 2, 0});
  CHECK(trace.steps[2].outputs == std::vector<int>{1, 2, 3});
  CHECK(trace.steps[0].continue_flag);
  CHECK(trace.steps[1].continue_flag);
  CHECK_FALSE(trace.steps[2].continue_flag);

  // Step 2 pre-concepts for b: uncolored, now the priority max, sees color 1.
  CHECK(trace.steps[1].concepts[1] == std::vector<char>{0, 1, 1, 0, 0, 0, 0});
  // Retention: a keeps color 1 in every later step.
  CHECK(trace.steps[2].outputs[0] == 1);
}

TEST_CASE("colored nodes never change color") {
  const Graph g = triangle_with_priorities(1, 2, 3);
  const auto adj = adjacency(g);
  ColoringState s = coloring_initial(g);
  s.colors = {2, 0, 0};  // pretend a was colored 2 earlier
  const auto [rec, next] = coloring_step(g, adj, s, 1);
  CHECK(rec.outputs[0] == 2);
  CHECK(next.colors[0] == 2);
}

TEST_CASE("a priority node facing five seen colors raises unsatisfiable-coloring") {
  // Star center adjacent to five nodes pre-colored 1..5, center has top priority.
  Graph g;
  g.node_count = 6;
  for (int leaf = 1; leaf <= 5; ++leaf) g.edges.emplace_back(0, leaf);
  g.priorities = std::vector<int>{200, 10, 20, 30, 40, 50};
  g = add_self_loops(std::move(g));
  const auto adj = adjacency(g);
  ColoringState s = coloring_initial(g);
  s.colors = {0, 1, 2, 3, 4, 5};
  CHECK_THROWS_AS(coloring_step(g, adj, s, 1), Error);
}

TEST_CASE("spanning-tree concepts at the first step of a weighted triangle") {
  const Graph g = weighted_triangle(1, 2, 3);
  const auto ranks = edge_ranks(g);
  CHECK(ranks == std::vector<int>{1, 2, 3});
  KruskalState s = kruskal_initial(g);
  const auto m = annotate_concepts(g, ranks, s);
  CHECK(m[0] == std::vector<char>{1, 0, 0});
  CHECK(m[1] == std::vector<char>{0, 0, 0});
  CHECK(m[2] == std::vector<char>{0, 0, 0});
}

TEST_CASE("spanning-tree run on the weighted triangle") {
  const Graph g = weighted_triangle(1, 2, 3);
  const Trace trace = run_trace(AlgorithmId::Kruskal, g);
  REQUIRE(trace.steps.size() == 3);  // exactly |E| steps
  CHECK(trace.steps[0].outputs == std::vector<int>{1, 0, 0});
  CHECK(trace.steps[1].outputs == std::vector<int>{1, 1, 0});
  CHECK(trace.steps[2].outputs == std::vector<int>{1, 1, 0});
  CHECK(trace.steps[0].continue_flag);
  CHECK(trace.steps[1].continue_flag);
  CHECK_FALSE(trace.steps[2].continue_flag);

  // Step 3 examines ca with its endpoints already connected.
  CHECK(trace.steps[2].concepts[2] == std::vector<char>{1, 1, 0});
  // An edge already in the tree keeps its membership concept.
  CHECK(trace.steps[2].concepts[0] == std::vector<char>{1, 1, 1});
  CHECK(trace.steps[2].outputs[0] == 1);

  long long weight = 0;
  for (std::size_t e = 0; e < g.edges.size(); ++e)
    if (trace.steps.back().outputs[e]) weight += (*g.weights)[e];
  CHECK(weight == 3);
}

TEST_CASE("traversal terminates within diameter bounds and grows monotonically") {
  for (std::uint64_t seed : {1, 2, 3}) {
    const Graph g = generate_prepared(AlgorithmId::Bfs, GraphCategory::ErdosRenyi, 20, seed);
    const Trace trace = run_trace(AlgorithmId::Bfs, g, 0);
    REQUIRE(!trace.steps.empty());
    for (std::size_t s = 0; s + 1 < trace.steps.size(); ++s) {
      CHECK(trace.steps[s].continue_flag);
      for (int i = 0; i < g.node_count; ++i)
        if (trace.steps[s].outputs[static_cast<std::size_t>(i)] == 1)
          CHECK(trace.steps[s + 1].outputs[static_cast<std::size_t>(i)] == 1);
    }
    CHECK_FALSE(trace.steps.back().continue_flag);
    CHECK(static_cast<int>(trace.steps.size()) <= g.node_count);
  }
}

TEST_CASE("corpus colorings are proper, complete, and within five colors") {
  for (std::uint64_t seed : {1, 2, 3}) {
    const Graph g = generate_prepared(AlgorithmId::Coloring, GraphCategory::FixedDegree5, 20, seed);
    const Trace trace = run_trace(AlgorithmId::Coloring, g);
    const auto& final_colors = trace.steps.back().outputs;
    for (int c : final_colors) {
      CHECK(c >= 1);
      CHECK(c <= 5);
    }
    for (const auto& [u, v] : g.edges)
      if (u != v)
        CHECK(final_colors[static_cast<std::size_t>(u)] != final_colors[static_cast<std::size_t>(v)]);
    for (std::size_t s = 0; s + 1 < trace.steps.size(); ++s) CHECK(trace.steps[s].continue_flag);
    CHECK_FALSE(trace.steps.back().continue_flag);
  }
}

TEST_CASE("spanning-tree executor matches an independent Prim oracle") {
  for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
    const Graph g = generate_prepared(AlgorithmId::Kruskal, GraphCategory::ErdosRenyi, 12, seed);
    const Trace trace = run_trace(AlgorithmId::Kruskal, g);
    CHECK(trace.steps.size() == g.edges.size());
    long long weight = 0;
    int tree_edges = 0;
    for (std::size_t e = 0; e < g.edges.size(); ++e)
      if (trace.steps.back().outputs[e]) {
        weight += (*g.weights)[e];
        ++tree_edges;
      }
    CHECK(tree_edges == g.node_count - 1);
    CHECK(weight == prim_mst_weight(g));
  }
}

TEST_CASE("step caps surface as errors carrying the partial trace") {
  const Graph g = path3();
  try {
    run_trace(AlgorithmId::Bfs, g, 0, 1);
    FAIL("expected the cap to trip");
  } catch (const TraceCapError& e) {
    CHECK(e.code() == "step-cap-exceeded");
    CHECK(e.partial().steps.size() == 1);
  }
  CHECK_THROWS_AS(run_trace(AlgorithmId::Bfs, g, 99), Error);      // bad source
  Graph unlooped;
  unlooped.node_count = 2;
  unlooped.edges = {{0, 1}};
  CHECK_THROWS_AS(run_trace(AlgorithmId::Bfs, unlooped, 0), Error);  // loops required
}

TEST_CASE("rule replay reproduces the classical traversal exactly") {
  for (std::uint64_t seed : {1, 2}) {
    for (auto cat : {GraphCategory::Tree, GraphCategory::Community4}) {
      const Graph g = generate_prepared(AlgorithmId::Bfs, cat, 20, seed);
      const Trace truth = run_trace(AlgorithmId::Bfs, g, 3);
      const Trace pred = execute_with_rules(g, AlgorithmId::Bfs, bfs_truth_rules(),
                                            bfs_truth_termination(), 3);
      const auto cmp = compare_traces(pred, truth);
      INFO(cmp.divergence.dump());
      CHECK(cmp.equal);
    }
  }
}

TEST_CASE("rule replay reproduces the classical spanning tree exactly") {
  for (std::uint64_t seed : {1, 2, 3}) {
    const Graph g = generate_prepared(AlgorithmId::Kruskal, GraphCategory::Grid2D, 8, seed);
    const Trace truth = run_trace(AlgorithmId::Kruskal, g);
    const Trace pred =
        execute_with_rules(g, AlgorithmId::Kruskal, kruskal_truth_rules(), std::nullopt);
    const auto cmp = compare_traces(pred, truth);
    INFO(cmp.divergence.dump());
    CHECK(cmp.equal);
  }
}

TEST_CASE("an uncovered concept vector aborts replay with an ambiguous-rule error") {
  const Graph g = path3();
  // Drop the not-visited rule: label 0 becomes FALSE, so node c matches nothing.
  std::vector<DnfFormula> rules = bfs_truth_rules();
  rules[0] = DnfFormula{2, {}};
  try {
    execute_with_rules(g, AlgorithmId::Bfs, rules, bfs_truth_termination(), 0);
    FAIL("expected an ambiguous-rule error");
  } catch (const Error& e) {
    CHECK(e.code() == "ambiguous-rule");
    CHECK(e.details().at("step").get<int>() == 1);
  }
}
