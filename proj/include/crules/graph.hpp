#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "crules/error.hpp"

namespace crules {

enum class GraphCategory {
  Ladder,
  Grid2D,
  Tree,
  ErdosRenyi,
  BarabasiAlbert,
  Community4,
  Caveman4,
  FixedDegree5,
};

inline const std::vector<std::pair<GraphCategory, std::string>>& category_names() {
  static const std::vector<std::pair<GraphCategory, std::string>> names = {
      {GraphCategory::Ladder, "ladder"},
      {GraphCategory::Grid2D, "grid2d"},
      {GraphCategory::Tree, "tree"},
      {GraphCategory::ErdosRenyi, "erdos_renyi"},
      {GraphCategory::BarabasiAlbert, "barabasi_albert"},
      {GraphCategory::Community4, "community4"},
      {GraphCategory::Caveman4, "caveman4"},
      {GraphCategory::FixedDegree5, "fixed_degree5"},
  };
  return names;
}

inline std::string to_string(GraphCategory c) {
  for (const auto& [cat, name] : category_names())
    if (cat == c) return name;
  throw invalid_argument_error("unknown graph category value");
}

inline GraphCategory category_from_string(const std::string& s) {
  for (const auto& [cat, name] : category_names())
    if (name == s) return cat;
  throw invalid_argument_error("unknown graph category name", {{"category", s}});
}

// Undirected graph. Edges are stored as ordered pairs (u <= v except where a
// generator's construction order matters; self-loops are (i, i) and appear
// only when has_self_loops is set). Priorities are per node, weights per edge
// (parallel to `edges`).
struct Graph {
  int node_count = 0;
  std::vector<std::pair<int, int>> edges;
  std::optional<std::vector<int>> priorities;
  std::optional<std::vector<int>> weights;
  bool has_self_loops = false;
  GraphCategory category = GraphCategory::Tree;
  std::uint64_t seed = 0;

  int edge_count() const { return static_cast<int>(edges.size()); }
};

// Neighbor lists. A self-loop contributes node i to its own list exactly once.
inline std::vector<std::vector<int>> adjacency(const Graph& g) {
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(g.node_count));
  for (const auto& [u, v] : g.edges) {
    adj[static_cast<std::size_t>(u)].push_back(v);
    if (u != v) adj[static_cast<std::size_t>(v)].push_back(u);
  }
  for (auto& list : adj) std::sort(list.begin(), list.end());
  return adj;
}

// Connectivity ignoring self-loops; the empty graph counts as connected.
inline bool is_connected(const Graph& g) {
  if (g.node_count <= 1) return true;
  std::vector<char> seen(static_cast<std::size_t>(g.node_count), 0);
  std::vector<int> stack = {0};
  seen[0] = 1;
  const auto adj = adjacency(g);
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    for (int v : adj[static_cast<std::size_t>(u)]) {
      if (!seen[static_cast<std::size_t>(v)]) {
        seen[static_cast<std::size_t>(v)] = 1;
        stack.push_back(v);
      }
    }
  }
  return std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; });
}

// Structural invariants: indices in range, no duplicate undirected edges,
// self-loop presence consistent with the flag, weight/priority shapes, and
// (when present) adjacent-priority distinctness plus global weight
// distinctness.
inline void validate_graph(const Graph& g) {
  if (g.node_count < 0) throw invalid_argument_error("negative node count");
  std::set<std::pair<int, int>> seen;
  bool loop_seen = false;
  for (const auto& [u, v] : g.edges) {
    if (u < 0 || v < 0 || u >= g.node_count || v >= g.node_count)
      throw invalid_argument_error("edge endpoint out of range", {{"u", u}, {"v", v}});
    if (u == v) loop_seen = true;
    const auto key = std::minmax(u, v);
    if (!seen.insert({key.first, key.second}).second)
      throw invalid_argument_error("duplicate edge", {{"u", u}, {"v", v}});
  }
  if (loop_seen && !g.has_self_loops)
    throw invalid_argument_error("self-loop present but flag unset");
  if (g.has_self_loops) {
    for (int i = 0; i < g.node_count; ++i)
      if (!seen.count({i, i})) throw invalid_argument_error("self-loop flag set but a node lacks its loop", {{"node", i}});
  }
  if (g.priorities) {
    if (static_cast<int>(g.priorities->size()) != g.node_count)
      throw invalid_argument_error("priority vector size mismatch");
    for (int p : *g.priorities)
      if (p < 0 || p > 255) throw invalid_argument_error("priority out of range", {{"priority", p}});
    for (const auto& [u, v] : g.edges)
      if (u != v && (*g.priorities)[static_cast<std::size_t>(u)] == (*g.priorities)[static_cast<std::size_t>(v)])
        throw invalid_argument_error("adjacent nodes share a priority", {{"u", u}, {"v", v}});
  }
  if (g.weights) {
    if (g.weights->size() != g.edges.size())
      throw invalid_argument_error("weight vector size mismatch");
    std::set<int> distinct;
    for (int w : *g.weights) {
      if (w < 1 || w >= (1 << 16)) throw invalid_argument_error("weight out of range", {{"weight", w}});
      if (!distinct.insert(w).second) throw invalid_argument_error("duplicate edge weight", {{"weight", w}});
    }
  }
}

inline nlohmann::json to_json(const Graph& g) {
  nlohmann::json j{
      {"category", to_string(g.category)},
      {"nodes", g.node_count},
      {"edges", nlohmann::json::array()},
      {"priorities", nullptr},
      {"weights", nullptr},
      {"self_loops", g.has_self_loops},
      {"seed", g.seed},
  };
  for (const auto& [u, v] : g.edges) j["edges"].push_back({u, v});
  if (g.priorities) j["priorities"] = *g.priorities;
  if (g.weights) j["weights"] = *g.weights;
  return j;
}

inline Graph graph_from_json(const nlohmann::json& j) {
  Graph g;
  try {
    g.category = category_from_string(j.at("category").get<std::string>());
    g.node_count = j.at("nodes").get<int>();
    for (const auto& e : j.at("edges")) g.edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
    if (!j.at("priorities").is_null()) g.priorities = j.at("priorities").get<std::vector<int>>();
    if (!j.at("weights").is_null()) g.weights = j.at("weights").get<std::vector<int>>();
    g.has_self_loops = j.at("self_loops").get<bool>();
    g.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed-graph-json", e.what());
  }
  validate_graph(g);
  return g;
}

}  // namespace crules
