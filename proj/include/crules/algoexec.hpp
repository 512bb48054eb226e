#pragma once

#include <algorithm>
#include <numeric>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "crules/dsu.hpp"
#include "crules/error.hpp"
#include "crules/graph.hpp"
#include "crules/logic.hpp"
#include "crules/schema.hpp"
#include "crules/termination.hpp"
#include "crules/trace.hpp"

namespace crules {

// --------------------------------------------------------------------------
// States
// --------------------------------------------------------------------------

struct BfsState {
  std::vector<char> visited;
};

inline BfsState bfs_initial(const Graph& g, int source) {
  if (source < 0 || source >= g.node_count)
    throw invalid_argument_error("source node out of range", {{"source", source}});
  BfsState s;
  s.visited.assign(static_cast<std::size_t>(g.node_count), 0);
  s.visited[static_cast<std::size_t>(source)] = 1;
  return s;
}

struct ColoringState {
  std::vector<int> colors;  // 0 = uncolored, otherwise 1..5
};

inline ColoringState coloring_initial(const Graph& g) {
  return {std::vector<int>(static_cast<std::size_t>(g.node_count), 0)};
}

struct KruskalState {
  std::vector<char> in_mst;  // per edge, parallel to g.edges
  Dsu dsu;
  int processed = 0;  // edges of sorted rank <= processed have been handled
};

// 1-based rank of every edge in ascending weight order; weights are distinct
// so the order is total.
inline std::vector<int> edge_ranks(const Graph& g) {
  if (!g.weights) throw invalid_argument_error("edge ranks need weights");
  std::vector<int> order(g.edges.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return (*g.weights)[static_cast<std::size_t>(a)] < (*g.weights)[static_cast<std::size_t>(b)];
  });
  std::vector<int> rank(g.edges.size());
  for (std::size_t pos = 0; pos < order.size(); ++pos)
    rank[static_cast<std::size_t>(order[pos])] = static_cast<int>(pos) + 1;
  return rank;
}

inline KruskalState kruskal_initial(const Graph& g) {
  return {std::vector<char>(g.edges.size(), 0), Dsu(g.node_count), 0};
}

// --------------------------------------------------------------------------
// Concept annotation
// --------------------------------------------------------------------------

// The self-loop makes a visited node its own visited neighbour.
inline ConceptMatrix annotate_concepts(const Graph& g, const std::vector<std::vector<int>>& adj,
                                       const BfsState& s) {
  ConceptMatrix m(static_cast<std::size_t>(g.node_count), std::vector<char>(2, 0));
  for (int i = 0; i < g.node_count; ++i) {
    m[static_cast<std::size_t>(i)][0] = s.visited[static_cast<std::size_t>(i)];
    for (int j : adj[static_cast<std::size_t>(i)])
      if (s.visited[static_cast<std::size_t>(j)]) {
        m[static_cast<std::size_t>(i)][1] = 1;
        break;
      }
  }
  return m;
}

// Self-loops contribute neither a seen color nor a priority rival; the
// priority test is over the uncolored neighbours plus the node itself.
inline ConceptMatrix annotate_concepts(const Graph& g, const std::vector<std::vector<int>>& adj,
                                       const ColoringState& s) {
  if (!g.priorities) throw invalid_argument_error("coloring concepts need priorities");
  ConceptMatrix m(static_cast<std::size_t>(g.node_count), std::vector<char>(7, 0));
  for (int i = 0; i < g.node_count; ++i) {
    auto& row = m[static_cast<std::size_t>(i)];
    const int color = s.colors[static_cast<std::size_t>(i)];
    row[0] = color != 0;
    if (color == 0) {
      bool is_max = true;
      for (int j : adj[static_cast<std::size_t>(i)]) {
        if (j == i || s.colors[static_cast<std::size_t>(j)] != 0) continue;
        if ((*g.priorities)[static_cast<std::size_t>(j)] > (*g.priorities)[static_cast<std::size_t>(i)]) {
          is_max = false;
          break;
        }
      }
      row[1] = is_max;
    }
    for (int j : adj[static_cast<std::size_t>(i)]) {
      if (j == i) continue;
      const int cj = s.colors[static_cast<std::size_t>(j)];
      if (cj >= 1 && cj <= 5) row[static_cast<std::size_t>(1 + cj)] = 1;
    }
  }
  return m;
}

// lighterEdgesVisited counts the edge being processed this step; the set and
// membership concepts reflect the pre-step state.
inline ConceptMatrix annotate_concepts(const Graph& g, const std::vector<int>& ranks,
                                       KruskalState& s) {
  ConceptMatrix m(g.edges.size(), std::vector<char>(3, 0));
  const int t = s.processed + 1;
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    m[e][0] = ranks[e] <= t;
    m[e][1] = s.dsu.same(g.edges[e].first, g.edges[e].second);
    m[e][2] = s.in_mst[e];
  }
  return m;
}

// --------------------------------------------------------------------------
// Ground-truth steps
// --------------------------------------------------------------------------

inline std::pair<StepRecord, BfsState> bfs_step(const Graph& g,
                                                const std::vector<std::vector<int>>& adj,
                                                const BfsState& state, int t) {
  StepRecord rec;
  rec.t = t;
  rec.concepts = annotate_concepts(g, adj, state);
  BfsState next = state;
  rec.outputs.resize(static_cast<std::size_t>(g.node_count));
  for (int i = 0; i < g.node_count; ++i) {
    const auto& row = rec.concepts[static_cast<std::size_t>(i)];
    const int y = (row[0] || row[1]) ? 1 : 0;
    rec.outputs[static_cast<std::size_t>(i)] = y;
    next.visited[static_cast<std::size_t>(i)] = static_cast<char>(y);
  }
  rec.post_concepts = annotate_concepts(g, adj, next);
  rec.continue_flag = std::any_of(rec.post_concepts.begin(), rec.post_concepts.end(),
                                  [](const std::vector<char>& row) { return !row[0] && row[1]; });
  return {std::move(rec), std::move(next)};
}

inline std::pair<StepRecord, ColoringState> coloring_step(const Graph& g,
                                                          const std::vector<std::vector<int>>& adj,
                                                          const ColoringState& state, int t) {
  StepRecord rec;
  rec.t = t;
  rec.concepts = annotate_concepts(g, adj, state);
  ColoringState next = state;
  rec.outputs.resize(static_cast<std::size_t>(g.node_count));
  for (int i = 0; i < g.node_count; ++i) {
    const auto& row = rec.concepts[static_cast<std::size_t>(i)];
    int color = state.colors[static_cast<std::size_t>(i)];
    if (color == 0 && row[1]) {
      color = 0;
      for (int c = 1; c <= 5; ++c)
        if (!row[static_cast<std::size_t>(1 + c)]) {
          color = c;
          break;
        }
      if (color == 0)
        throw Error("unsatisfiable-coloring",
                    "a priority node sees all five colors and cannot be colored",
                    {{"node", i}, {"step", t}});
      next.colors[static_cast<std::size_t>(i)] = color;
    }
    rec.outputs[static_cast<std::size_t>(i)] = next.colors[static_cast<std::size_t>(i)];
  }
  rec.post_concepts = annotate_concepts(g, adj, next);
  rec.continue_flag = std::any_of(rec.post_concepts.begin(), rec.post_concepts.end(),
                                  [](const std::vector<char>& row) { return !row[0]; });
  return {std::move(rec), std::move(next)};
}

inline std::pair<StepRecord, KruskalState> kruskal_step(const Graph& g,
                                                        const std::vector<int>& ranks,
                                                        const KruskalState& state, int t) {
  if (t > static_cast<int>(g.edges.size()))
    throw invalid_argument_error("stepping past the edge count", {{"t", t}});
  StepRecord rec;
  rec.t = t;
  KruskalState next = state;
  rec.concepts = annotate_concepts(g, ranks, next);  // pre-union DSU queries
  int current = -1;
  for (std::size_t e = 0; e < g.edges.size(); ++e)
    if (ranks[e] == t) current = static_cast<int>(e);
  if (current < 0) throw invalid_argument_error("missing rank-t edge", {{"t", t}});
  const auto [u, v] = g.edges[static_cast<std::size_t>(current)];
  if (!next.dsu.same(u, v)) {
    next.in_mst[static_cast<std::size_t>(current)] = 1;
    next.dsu.merge(u, v);
  }
  next.processed = t;
  rec.outputs.resize(g.edges.size());
  for (std::size_t e = 0; e < g.edges.size(); ++e)
    rec.outputs[e] = next.in_mst[e];
  rec.post_concepts = annotate_concepts(g, ranks, next);
  rec.continue_flag = t < static_cast<int>(g.edges.size());
  return {std::move(rec), std::move(next)};
}

// --------------------------------------------------------------------------
// Full runs
// --------------------------------------------------------------------------

// Thrown when the step cap trips; carries what was produced so far.
class TraceCapError : public Error {
public:
  TraceCapError(Trace partial, int cap)
      : Error("step-cap-exceeded", "the run exceeded its step cap", {{"cap", cap}}),
        partial_(std::move(partial)) {}
  const Trace& partial() const { return partial_; }

private:
  Trace partial_;
};

inline int default_step_cap(const Graph& g) {
  return 2 * g.node_count + static_cast<int>(g.edges.size()) + 8;
}

inline Trace run_trace(AlgorithmId algorithm, const Graph& g, std::optional<int> source = {},
                       std::optional<int> step_cap = {}) {
  const int cap = step_cap.value_or(default_step_cap(g));
  Trace trace;
  trace.algorithm = algorithm;
  trace.graph = g;
  switch (algorithm) {
    case AlgorithmId::Bfs: {
      if (!source) throw invalid_argument_error("a source node is required");
      if (!g.has_self_loops) throw invalid_argument_error("the traversal corpus needs self-loops");
      trace.source = *source;
      const auto adj = adjacency(g);
      BfsState state = bfs_initial(g, *source);
      for (int t = 1;; ++t) {
        if (t > cap) throw TraceCapError(std::move(trace), cap);
        auto [rec, next] = bfs_step(g, adj, state, t);
        state = std::move(next);
        const bool go_on = rec.continue_flag;
        trace.steps.push_back(std::move(rec));
        if (!go_on) break;
      }
      return trace;
    }
    case AlgorithmId::Coloring: {
      if (!g.has_self_loops || !g.priorities)
        throw invalid_argument_error("the coloring corpus needs self-loops and priorities");
      const auto adj = adjacency(g);
      ColoringState state = coloring_initial(g);
      for (int t = 1;; ++t) {
        if (t > cap) throw TraceCapError(std::move(trace), cap);
        auto [rec, next] = coloring_step(g, adj, state, t);
        state = std::move(next);
        const bool go_on = rec.continue_flag;
        trace.steps.push_back(std::move(rec));
        if (!go_on) break;
      }
      return trace;
    }
    case AlgorithmId::Kruskal: {
      if (!g.weights) throw invalid_argument_error("the spanning-tree corpus needs weights");
      const auto ranks = edge_ranks(g);
      KruskalState state = kruskal_initial(g);
      for (int t = 1; t <= static_cast<int>(g.edges.size()); ++t) {
        auto [rec, next] = kruskal_step(g, ranks, state, t);
        state = std::move(next);
        trace.steps.push_back(std::move(rec));
      }
      return trace;
    }
  }
  throw invalid_argument_error("unknown algorithm");
}

// --------------------------------------------------------------------------
// Rule-based replay
// --------------------------------------------------------------------------

namespace detail {

inline int label_from_rules(const std::vector<DnfFormula>& label_rules,
                            const std::vector<char>& row, int t, int unit) {
  int chosen = -1;
  int matches = 0;
  for (std::size_t l = 0; l < label_rules.size(); ++l)
    if (eval_dnf(label_rules[l], row)) {
      ++matches;
      if (chosen < 0) chosen = static_cast<int>(l);
    }
  if (matches != 1) {
    nlohmann::json bits = nlohmann::json::array();
    for (char b : row) bits.push_back(static_cast<int>(b));
    throw Error("ambiguous-rule", "rule set does not pick exactly one label for a unit",
                {{"step", t}, {"unit", unit}, {"matches", matches}, {"concepts", std::move(bits)}});
  }
  return chosen;
}

inline std::set<std::vector<char>> distinct_rows(const ConceptMatrix& m) {
  return {m.begin(), m.end()};
}

}  // namespace detail

// Replays the algorithm with the state transition dictated by rule-chosen
// labels instead of the classical update, so a faithful rule set reproduces
// run_trace unit-for-unit.
inline Trace execute_with_rules(const Graph& g, AlgorithmId algorithm,
                                const std::vector<DnfFormula>& label_rules,
                                const std::optional<TerminationRule>& term_rule,
                                std::optional<int> source = {}, std::optional<int> step_cap = {}) {
  const auto schema = ConceptSchema::for_algorithm(algorithm);
  if (static_cast<int>(label_rules.size()) != schema.label_count)
    throw invalid_argument_error("rule set must cover every label",
                                 {{"labels", schema.label_count}, {"rules", label_rules.size()}});
  const int cap = step_cap.value_or(default_step_cap(g));
  Trace trace;
  trace.algorithm = algorithm;
  trace.graph = g;
  switch (algorithm) {
    case AlgorithmId::Bfs: {
      if (!source) throw invalid_argument_error("a source node is required");
      if (!term_rule) throw invalid_argument_error("a termination rule is required");
      trace.source = *source;
      const auto adj = adjacency(g);
      BfsState state = bfs_initial(g, *source);
      for (int t = 1;; ++t) {
        if (t > cap) throw TraceCapError(std::move(trace), cap);
        StepRecord rec;
        rec.t = t;
        rec.concepts = annotate_concepts(g, adj, state);
        BfsState next = state;
        rec.outputs.resize(static_cast<std::size_t>(g.node_count));
        for (int i = 0; i < g.node_count; ++i) {
          const int label =
              detail::label_from_rules(label_rules, rec.concepts[static_cast<std::size_t>(i)], t, i);
          rec.outputs[static_cast<std::size_t>(i)] = label;
          next.visited[static_cast<std::size_t>(i)] = label == 1;
        }
        rec.post_concepts = annotate_concepts(g, adj, next);
        rec.continue_flag = eval_rule(*term_rule, detail::distinct_rows(rec.post_concepts));
        state = std::move(next);
        const bool go_on = rec.continue_flag;
        trace.steps.push_back(std::move(rec));
        if (!go_on) return trace;
      }
    }
    case AlgorithmId::Coloring: {
      if (!term_rule) throw invalid_argument_error("a termination rule is required");
      const auto adj = adjacency(g);
      ColoringState state = coloring_initial(g);
      for (int t = 1;; ++t) {
        if (t > cap) throw TraceCapError(std::move(trace), cap);
        StepRecord rec;
        rec.t = t;
        rec.concepts = annotate_concepts(g, adj, state);
        ColoringState next = state;
        rec.outputs.resize(static_cast<std::size_t>(g.node_count));
        for (int i = 0; i < g.node_count; ++i) {
          const int label =
              detail::label_from_rules(label_rules, rec.concepts[static_cast<std::size_t>(i)], t, i);
          rec.outputs[static_cast<std::size_t>(i)] = label;
          next.colors[static_cast<std::size_t>(i)] = label;
        }
        rec.post_concepts = annotate_concepts(g, adj, next);
        rec.continue_flag = eval_rule(*term_rule, detail::distinct_rows(rec.post_concepts));
        state = std::move(next);
        const bool go_on = rec.continue_flag;
        trace.steps.push_back(std::move(rec));
        if (!go_on) return trace;
      }
    }
    case AlgorithmId::Kruskal: {
      const auto ranks = edge_ranks(g);
      std::vector<int> by_rank(g.edges.size());
      for (std::size_t e = 0; e < g.edges.size(); ++e)
        by_rank[static_cast<std::size_t>(ranks[e] - 1)] = static_cast<int>(e);
      KruskalState state = kruskal_initial(g);
      for (int t = 1; t <= static_cast<int>(g.edges.size()); ++t) {
        StepRecord rec;
        rec.t = t;
        rec.concepts = annotate_concepts(g, ranks, state);
        KruskalState next = state;
        rec.outputs.resize(g.edges.size());
        for (std::size_t e = 0; e < g.edges.size(); ++e)
          rec.outputs[e] =
              detail::label_from_rules(label_rules, rec.concepts[e], t, static_cast<int>(e));
        // newly selected edges join the forest in weight order
        for (int e_idx : by_rank) {
          const bool was = state.in_mst[static_cast<std::size_t>(e_idx)] != 0;
          const bool now = rec.outputs[static_cast<std::size_t>(e_idx)] == 1;
          next.in_mst[static_cast<std::size_t>(e_idx)] = now;
          if (now && !was)
            next.dsu.merge(g.edges[static_cast<std::size_t>(e_idx)].first,
                           g.edges[static_cast<std::size_t>(e_idx)].second);
        }
        next.processed = t;
        rec.post_concepts = annotate_concepts(g, ranks, next);
        rec.continue_flag = t < static_cast<int>(g.edges.size());
        state = std::move(next);
        trace.steps.push_back(std::move(rec));
      }
      return trace;
    }
  }
  throw invalid_argument_error("unknown algorithm");
}

}  // namespace crules
