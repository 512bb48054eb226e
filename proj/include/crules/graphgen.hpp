#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

#include "crules/algoexec.hpp"
#include "crules/error.hpp"
#include "crules/graph.hpp"
#include "crules/rng.hpp"
#include "crules/schema.hpp"

namespace crules {

namespace detail {

inline std::vector<std::pair<int, int>> ladder_edges(int n) {
  if (n < 2 || n % 2 != 0)
    throw Error("invalid-size", "ladder graphs need an even node count >= 2", {{"n", n}});
  const int k = n / 2;
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < k; ++i) edges.emplace_back(i, i + k);          // rungs
  for (int i = 0; i + 1 < k; ++i) edges.emplace_back(i, i + 1);      // first rail
  for (int i = 0; i + 1 < k; ++i) edges.emplace_back(k + i, k + i + 1);  // second rail
  return edges;
}

// Near-square grid: rows = floor(sqrt(n)), cols = ceil(n/rows); surplus cells
// are dropped from the end of the last row, so node ids are row-major.
inline std::vector<std::pair<int, int>> grid2d_edges(int n) {
  const int rows = static_cast<int>(std::floor(std::sqrt(static_cast<double>(n))));
  const int cols = (n + rows - 1) / rows;
  std::vector<std::pair<int, int>> edges;
  for (int id = 0; id < n; ++id) {
    const int r = id / cols;
    const int c = id % cols;
    if (c + 1 < cols && id + 1 < n && (id + 1) / cols == r) edges.emplace_back(id, id + 1);
    if (r + 1 < rows && id + cols < n) edges.emplace_back(id, id + cols);
  }
  return edges;
}

// Uniform labelled tree decoded from a random sequence of n-2 labels.
inline std::vector<std::pair<int, int>> tree_edges(int n, Rng& rng) {
  std::vector<std::pair<int, int>> edges;
  if (n == 2) {
    edges.emplace_back(0, 1);
    return edges;
  }
  std::vector<int> seq(static_cast<std::size_t>(n - 2));
  for (auto& s : seq) s = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
  std::vector<int> degree(static_cast<std::size_t>(n), 1);
  for (int s : seq) ++degree[static_cast<std::size_t>(s)];
  std::set<int> leaves;
  for (int i = 0; i < n; ++i)
    if (degree[static_cast<std::size_t>(i)] == 1) leaves.insert(i);
  for (int s : seq) {
    const int leaf = *leaves.begin();
    leaves.erase(leaves.begin());
    edges.emplace_back(std::min(leaf, s), std::max(leaf, s));
    if (--degree[static_cast<std::size_t>(s)] == 1) leaves.insert(s);
  }
  const int a = *leaves.begin();
  const int b = *std::next(leaves.begin());
  edges.emplace_back(std::min(a, b), std::max(a, b));
  return edges;
}

inline double erdos_renyi_probability(int n) {
  return std::min(std::log2(static_cast<double>(n)) / static_cast<double>(n), 0.5);
}

inline std::vector<std::pair<int, int>> erdos_renyi_edges(int n, double p, Rng& rng) {
  std::vector<std::pair<int, int>> edges;
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v)
      if (rng.bernoulli(p)) edges.emplace_back(u, v);
  return edges;
}

// Preferential attachment; each incoming node attaches to m distinct existing
// nodes, m drawn once per graph from {4, 5}. The first incoming node links to
// all m founders.
inline std::vector<std::pair<int, int>> barabasi_albert_edges(int n, Rng& rng) {
  const int m = 4 + static_cast<int>(rng.below(2));
  if (n <= m)
    throw Error("invalid-size", "barabasi-albert needs more nodes than the attachment count",
                {{"n", n}, {"m", m}});
  std::vector<std::pair<int, int>> edges;
  std::vector<int> repeated;  // node id appears once per incident edge
  for (int i = m; i < n; ++i) {
    std::vector<int> targets;
    if (i == m) {
      for (int t = 0; t < m; ++t) targets.push_back(t);
    } else {
      std::set<int> chosen;
      while (static_cast<int>(chosen.size()) < m) {
        const auto pick = repeated[static_cast<std::size_t>(rng.below(repeated.size()))];
        chosen.insert(pick);
      }
      targets.assign(chosen.begin(), chosen.end());
    }
    for (int t : targets) {
      edges.emplace_back(std::min(t, i), std::max(t, i));
      repeated.push_back(t);
      repeated.push_back(i);
    }
  }
  return edges;
}

// Four near-equal groups; returns the group id per node.
inline std::vector<int> four_groups(int n) {
  std::vector<int> group(static_cast<std::size_t>(n));
  const int base = n / 4;
  const int extra = n % 4;
  int id = 0;
  for (int gidx = 0; gidx < 4; ++gidx) {
    const int size = base + (gidx < extra ? 1 : 0);
    for (int k = 0; k < size; ++k) group[static_cast<std::size_t>(id++)] = gidx;
  }
  return group;
}

inline std::vector<std::pair<int, int>> community4_edges(int n, Rng& rng) {
  const auto group = four_groups(n);
  std::vector<std::pair<int, int>> edges;
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v) {
      const double p = group[static_cast<std::size_t>(u)] == group[static_cast<std::size_t>(v)] ? 0.7 : 0.01;
      if (rng.bernoulli(p)) edges.emplace_back(u, v);
    }
  return edges;
}

inline std::vector<std::pair<int, int>> caveman4_edges(int n, Rng& rng) {
  const auto group = four_groups(n);
  std::vector<std::pair<int, int>> edges;
  std::set<std::pair<int, int>> present;
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v)
      if (group[static_cast<std::size_t>(u)] == group[static_cast<std::size_t>(v)]) {
        if (!rng.bernoulli(0.7)) {  // intra-clique edge survives removal
          edges.emplace_back(u, v);
          present.insert({u, v});
        }
      }
  const int shortcuts = static_cast<int>(std::lround(0.025 * n));
  int placed = 0;
  int attempts = 0;
  while (placed < shortcuts) {
    if (++attempts > 1000 * (shortcuts + 1))
      throw Error("generation-failed", "could not place caveman shortcut edges", {{"n", n}});
    const int u = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    const int v = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    if (u == v || group[static_cast<std::size_t>(u)] == group[static_cast<std::size_t>(v)]) continue;
    const auto key = std::minmax(u, v);
    if (present.count({key.first, key.second})) continue;
    present.insert({key.first, key.second});
    edges.emplace_back(key.first, key.second);
    ++placed;
  }
  return edges;
}

// Exact uniform sampling over simple 5-regular graphs: pair up 5 stubs per
// node and reject the whole pairing on any self-loop or duplicate edge.
// Acceptance rate is roughly e^-6, hence the generous attempt bound.
inline std::vector<std::pair<int, int>> fixed_degree5_edges(int n, Rng& rng) {
  if (n < 6 || (n * 5) % 2 != 0)
    throw Error("invalid-size", "5-regular graphs need n >= 6 and 5n even", {{"n", n}});
  std::vector<int> stubs(static_cast<std::size_t>(n) * 5);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < 5; ++k) stubs[static_cast<std::size_t>(i * 5 + k)] = i;
  for (int attempt = 0; attempt < 20000; ++attempt) {
    rng.shuffle(stubs);
    std::set<std::pair<int, int>> seen;
    std::vector<std::pair<int, int>> edges;
    bool ok = true;
    for (std::size_t i = 0; i < stubs.size(); i += 2) {
      const int u = stubs[i];
      const int v = stubs[i + 1];
      if (u == v) {
        ok = false;
        break;
      }
      const auto key = std::minmax(u, v);
      if (!seen.insert({key.first, key.second}).second) {
        ok = false;
        break;
      }
      edges.emplace_back(key.first, key.second);
    }
    if (ok) {
      std::sort(edges.begin(), edges.end());
      return edges;
    }
  }
  throw Error("generation-failed", "no simple 5-regular pairing found within the attempt bound",
              {{"n", n}});
}

}  // namespace detail

inline Graph generate_graph(GraphCategory category, int n, std::uint64_t seed) {
  if (n < 2) throw Error("invalid-size", "graphs need at least two nodes", {{"n", n}});
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(category), static_cast<std::uint64_t>(n)));
  Graph g;
  g.node_count = n;
  g.category = category;
  g.seed = seed;
  switch (category) {
    case GraphCategory::Ladder: g.edges = detail::ladder_edges(n); break;
    case GraphCategory::Grid2D: g.edges = detail::grid2d_edges(n); break;
    case GraphCategory::Tree: g.edges = detail::tree_edges(n, rng); break;
    case GraphCategory::ErdosRenyi:
      g.edges = detail::erdos_renyi_edges(n, detail::erdos_renyi_probability(n), rng);
      break;
    case GraphCategory::BarabasiAlbert: g.edges = detail::barabasi_albert_edges(n, rng); break;
    case GraphCategory::Community4: g.edges = detail::community4_edges(n, rng); break;
    case GraphCategory::Caveman4: g.edges = detail::caveman4_edges(n, rng); break;
    case GraphCategory::FixedDegree5: g.edges = detail::fixed_degree5_edges(n, rng); break;
  }
  return g;
}

// Uniform [0, 255] per node, then bounded local repair until no edge joins
// equal priorities: each round resamples the higher endpoint of every
// conflicting edge.
inline Graph assign_priorities(Graph g, std::uint64_t seed) {
  if (g.priorities) throw invalid_argument_error("graph already has priorities");
  Rng rng(derive_seed(seed, 0xbeef01));
  std::vector<int> prio(static_cast<std::size_t>(g.node_count));
  for (auto& p : prio) p = static_cast<int>(rng.below(256));
  for (int round = 0; round < 1000; ++round) {
    bool conflict = false;
    for (const auto& [u, v] : g.edges) {
      if (u != v && prio[static_cast<std::size_t>(u)] == prio[static_cast<std::size_t>(v)]) {
        prio[static_cast<std::size_t>(std::max(u, v))] = static_cast<int>(rng.below(256));
        conflict = true;
      }
    }
    if (!conflict) {
      g.priorities = std::move(prio);
      return g;
    }
  }
  throw Error("generation-failed", "no conflict-free priority assignment found within 1000 rounds");
}

// Distinct integer weights in [1, 2^16), sampled without replacement.
inline Graph assign_weights(Graph g, std::uint64_t seed) {
  if (g.weights) throw invalid_argument_error("graph already has weights");
  Rng rng(derive_seed(seed, 0xbeef02));
  const auto raw = rng.sample_distinct((1u << 16) - 1, g.edges.size());
  std::vector<int> weights;
  weights.reserve(raw.size());
  for (long long r : raw) weights.push_back(static_cast<int>(r) + 1);
  g.weights = std::move(weights);
  return g;
}

inline Graph add_self_loops(Graph g) {
  if (g.has_self_loops) throw invalid_argument_error("self-loops already added");
  if (g.weights) throw invalid_argument_error("weighted graphs never carry self-loops");
  for (int i = 0; i < g.node_count; ++i) g.edges.emplace_back(i, i);
  g.has_self_loops = true;
  return g;
}

inline const std::vector<GraphCategory>& categories_for(AlgorithmId algorithm) {
  static const std::vector<GraphCategory> bfs = {
      GraphCategory::Ladder,     GraphCategory::Grid2D,         GraphCategory::Tree,
      GraphCategory::ErdosRenyi, GraphCategory::BarabasiAlbert, GraphCategory::Community4,
      GraphCategory::Caveman4};
  static const std::vector<GraphCategory> coloring = {GraphCategory::FixedDegree5};
  static const std::vector<GraphCategory> kruskal = {
      GraphCategory::Ladder, GraphCategory::Grid2D, GraphCategory::ErdosRenyi,
      GraphCategory::BarabasiAlbert};
  switch (algorithm) {
    case AlgorithmId::Bfs: return bfs;
    case AlgorithmId::Coloring: return coloring;
    case AlgorithmId::Kruskal: return kruskal;
  }
  throw invalid_argument_error("unknown algorithm");
}

// Category graph plus the per-algorithm preparation: self-loops for the
// traversal/coloring corpora, priorities for coloring, distinct weights and a
// connectivity guarantee (bounded regeneration) for the spanning-tree corpus.
inline Graph generate_prepared(AlgorithmId algorithm, GraphCategory category, int n,
                               std::uint64_t seed) {
  switch (algorithm) {
    case AlgorithmId::Bfs:
      return add_self_loops(generate_graph(category, n, seed));
    case AlgorithmId::Coloring: {
      const Graph base = generate_graph(category, n, seed);
      // An unlucky priority order can trap the five-color run (a node whose
      // five neighbours grab five distinct colors before it). Like the
      // spanning-tree connectivity retry below, corpus preparation resamples
      // the priorities until the run completes; executing an arbitrary
      // user-supplied graph still surfaces the error.
      for (int attempt = 0; attempt < 100; ++attempt) {
        Graph g = assign_priorities(base, derive_seed(seed, 101, static_cast<std::uint64_t>(attempt)));
        g = add_self_loops(std::move(g));
        try {
          run_trace(AlgorithmId::Coloring, g, std::nullopt);
          return g;
        } catch (const Error& e) {
          if (e.code() != "unsatisfiable-coloring") throw;
        }
      }
      throw Error("generation-failed",
                  "no five-colorable priority order within 100 attempts",
                  {{"category", to_string(category)}, {"n", n}});
    }
    case AlgorithmId::Kruskal: {
      for (int attempt = 0; attempt < 100; ++attempt) {
        Graph g = generate_graph(category, n, derive_seed(seed, 7, static_cast<std::uint64_t>(attempt)));
        g.seed = seed;
        if (!is_connected(g)) continue;
        return assign_weights(std::move(g), derive_seed(seed, 11));
      }
      throw Error("generation-failed", "no connected graph within 100 regeneration attempts",
                  {{"category", to_string(category)}, {"n", n}});
    }
  }
  throw invalid_argument_error("unknown algorithm");
}

struct SplitCounts {
  int train = 0;
  int validation = 0;
  int test = 0;
};

inline SplitCounts default_counts(AlgorithmId algorithm) {
  switch (algorithm) {
    case AlgorithmId::Bfs: return {100, 10, 10};
    case AlgorithmId::Coloring: return {800, 80, 80};
    case AlgorithmId::Kruskal: return {500, 50, 50};
  }
  throw invalid_argument_error("unknown algorithm");
}

inline int default_size(AlgorithmId algorithm) {
  return algorithm == AlgorithmId::Kruskal ? 8 : 20;
}

struct DatasetSplit {
  std::vector<Graph> train;
  std::vector<Graph> validation;
  std::vector<Graph> test;
};

// Counts are per category; the 10:1:1 ratio of the defaults is preserved
// within every category by construction.
inline DatasetSplit make_dataset(AlgorithmId algorithm, int n, SplitCounts counts,
                                 std::uint64_t seed) {
  if (counts.train <= 0 || counts.validation <= 0 || counts.test <= 0)
    throw invalid_argument_error("split counts must be positive");
  DatasetSplit out;
  const auto& cats = categories_for(algorithm);
  const auto fill = [&](std::vector<Graph>& dst, int count, std::uint64_t split_tag) {
    for (std::size_t c = 0; c < cats.size(); ++c)
      for (int i = 0; i < count; ++i)
        dst.push_back(generate_prepared(algorithm, cats[c], n,
                                        derive_seed(seed, split_tag, c, static_cast<std::uint64_t>(i))));
  };
  fill(out.train, counts.train, 1);
  fill(out.validation, counts.validation, 2);
  fill(out.test, counts.test, 3);
  return out;
}

// Held-out set at an arbitrary size (for generalisation runs), disjoint seed
// stream from make_dataset splits.
inline std::vector<Graph> generalization_set(AlgorithmId algorithm, int n, int per_category,
                                             std::uint64_t seed) {
  std::vector<Graph> out;
  const auto& cats = categories_for(algorithm);
  for (std::size_t c = 0; c < cats.size(); ++c)
    for (int i = 0; i < per_category; ++i)
      out.push_back(generate_prepared(algorithm, cats[c], n,
                                      derive_seed(seed, 4, c * 1000 + static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(i))));
  return out;
}

}  // namespace crules
