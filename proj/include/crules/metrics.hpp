#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "crules/decoder.hpp"
#include "crules/error.hpp"
#include "crules/schema.hpp"
#include "crules/trace.hpp"

namespace crules {

// Scores for one predicted-vs-truth trace pair. Aggregation over graphs and
// size buckets happens in MetricsReport.
struct PairScores {
  double mean_step = 0.0;       // mean over steps of per-unit output accuracy
  double last_step = 0.0;       // per-unit output accuracy at the final common step
  double term = 0.0;            // per-step continue-flag accuracy (length gaps count wrong)
  std::optional<double> concepts_mean;  // same construction over concept bits
  std::optional<double> concepts_last;
  bool truncated = false;  // the traces disagreed on step count
};

namespace detail {

inline double row_accuracy(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) throw invalid_argument_error("output rows differ in unit count");
  if (a.empty()) return 1.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] == b[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(a.size());
}

inline double matrix_accuracy(const ConceptMatrix& a, const ConceptMatrix& b) {
  if (a.size() != b.size()) throw invalid_argument_error("concept matrices differ in unit count");
  std::size_t hits = 0, total = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].size() != b[i].size()) throw invalid_argument_error("concept rows differ in width");
    for (std::size_t j = 0; j < a[i].size(); ++j) {
      ++total;
      if ((a[i][j] != 0) == (b[i][j] != 0)) ++hits;
    }
  }
  return total ? static_cast<double>(hits) / static_cast<double>(total) : 1.0;
}

}  // namespace detail

// Scores the overlapping steps; a step-count mismatch marks the pair
// truncated and charges the missing tail against termination accuracy.
inline PairScores compute_pair_scores(const Trace& pred, const Trace& truth,
                                      bool score_concepts = false) {
  if (pred.algorithm != truth.algorithm)
    throw invalid_argument_error("traces come from different algorithms");
  if (pred.steps.empty() || truth.steps.empty())
    throw invalid_argument_error("cannot score an empty trace");
  PairScores out;
  const std::size_t common = std::min(pred.steps.size(), truth.steps.size());
  const std::size_t longest = std::max(pred.steps.size(), truth.steps.size());
  out.truncated = pred.steps.size() != truth.steps.size();
  double mean_acc = 0.0;
  double concept_acc = 0.0;
  std::size_t term_hits = 0;
  for (std::size_t s = 0; s < common; ++s) {
    mean_acc += detail::row_accuracy(pred.steps[s].outputs, truth.steps[s].outputs);
    if (score_concepts)
      concept_acc += detail::matrix_accuracy(pred.steps[s].concepts, truth.steps[s].concepts);
    if (pred.steps[s].continue_flag == truth.steps[s].continue_flag) ++term_hits;
  }
  out.mean_step = mean_acc / static_cast<double>(common);
  out.last_step =
      detail::row_accuracy(pred.steps[common - 1].outputs, truth.steps[common - 1].outputs);
  out.term = static_cast<double>(term_hits) / static_cast<double>(longest);
  if (score_concepts) {
    out.concepts_mean = concept_acc / static_cast<double>(common);
    out.concepts_last =
        detail::matrix_accuracy(pred.steps[common - 1].concepts, truth.steps[common - 1].concepts);
  }
  return out;
}

struct Aggregate {
  double mean = 0.0;
  double stddev = 0.0;  // population standard deviation
  int n = 0;
};

// metric name -> graph size -> aggregate. Values accumulate raw and are
// reduced on demand.
class MetricsReport {
public:
  void add(const std::string& metric, int size, double value) {
    values_[metric][size].push_back(value);
  }

  Aggregate aggregate(const std::string& metric, int size) const {
    const auto m = values_.find(metric);
    if (m == values_.end()) return {};
    const auto s = m->second.find(size);
    if (s == m->second.end()) return {};
    const auto& v = s->second;
    Aggregate a;
    a.n = static_cast<int>(v.size());
    for (double x : v) a.mean += x;
    a.mean /= static_cast<double>(a.n);
    for (double x : v) a.stddev += (x - a.mean) * (x - a.mean);
    a.stddev = std::sqrt(a.stddev / static_cast<double>(a.n));
    return a;
  }

  nlohmann::json to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [metric, by_size] : values_) {
      nlohmann::json sizes = nlohmann::json::object();
      for (const auto& [size, v] : by_size) {
        const auto a = aggregate(metric, size);
        sizes[std::to_string(size)] = {{"mean", a.mean}, {"std", a.stddev}, {"n", a.n}};
      }
      j[metric] = std::move(sizes);
    }
    return j;
  }

  const std::map<std::string, std::map<int, std::vector<double>>>& raw() const { return values_; }

private:
  std::map<std::string, std::map<int, std::vector<double>>> values_;
};

// --------------------------------------------------------------------------
// Decision tree (binary features, Gini impurity)
// --------------------------------------------------------------------------

struct DecisionTree {
  struct Node {
    int split = -1;     // concept index; -1 for leaves
    int no = -1;        // child when the concept is 0
    int yes = -1;       // child when the concept is 1
    int label = -1;     // leaf label (majority, smaller index on ties)
    int count = 0;      // training rows that reached the node
    double purity = 0;  // majority fraction at the node
  };
  std::vector<Node> nodes;  // nodes[0] is the root
  int width = 0;
};

namespace detail {

inline double gini(const std::vector<int>& counts, int total) {
  if (total == 0) return 0.0;
  double g = 1.0;
  for (int c : counts) {
    const double p = static_cast<double>(c) / static_cast<double>(total);
    g -= p * p;
  }
  return g;
}

struct TreeBuilder {
  const LabeledConceptSet& data;
  DecisionTree& tree;
  std::optional<int> max_depth;

  int build(std::vector<std::size_t> rows, std::vector<char> used, int depth) {
    std::vector<int> counts(static_cast<std::size_t>(data.label_count), 0);
    for (std::size_t r : rows) ++counts[static_cast<std::size_t>(data.labels[r])];
    const int total = static_cast<int>(rows.size());
    int majority = 0;
    for (int l = 1; l < data.label_count; ++l)
      if (counts[static_cast<std::size_t>(l)] > counts[static_cast<std::size_t>(majority)])
        majority = l;
    DecisionTree::Node node;
    node.count = total;
    node.label = majority;
    node.purity = total ? static_cast<double>(counts[static_cast<std::size_t>(majority)]) /
                              static_cast<double>(total)
                        : 1.0;
    const bool pure = node.purity >= 1.0;
    const bool depth_stop = max_depth && depth >= *max_depth;
    int best_feature = -1;
    double best_gain = -1.0;
    if (!pure && !depth_stop) {
      const double base = gini(counts, total);
      for (int f = 0; f < data.width; ++f) {
        if (used[static_cast<std::size_t>(f)]) continue;
        std::vector<int> on_counts(static_cast<std::size_t>(data.label_count), 0);
        int on_total = 0;
        for (std::size_t r : rows)
          if (data.concepts[r][static_cast<std::size_t>(f)]) {
            ++on_counts[static_cast<std::size_t>(data.labels[r])];
            ++on_total;
          }
        if (on_total == 0 || on_total == total) continue;  // constant here: unusable
        std::vector<int> off_counts(static_cast<std::size_t>(data.label_count), 0);
        for (int l = 0; l < data.label_count; ++l)
          off_counts[static_cast<std::size_t>(l)] =
              counts[static_cast<std::size_t>(l)] - on_counts[static_cast<std::size_t>(l)];
        const int off_total = total - on_total;
        const double weighted =
            (static_cast<double>(on_total) * gini(on_counts, on_total) +
             static_cast<double>(off_total) * gini(off_counts, off_total)) /
            static_cast<double>(total);
        const double gain = base - weighted;
        if (gain > best_gain + 1e-12) {  // strict improvement; ties keep the smaller index
          best_gain = gain;
          best_feature = f;
        }
      }
    }
    const int index = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back(node);
    if (best_feature < 0) return index;  // leaf: pure, depth-capped, or no usable feature
    std::vector<std::size_t> on_rows, off_rows;
    for (std::size_t r : rows)
      (data.concepts[r][static_cast<std::size_t>(best_feature)] ? on_rows : off_rows).push_back(r);
    rows.clear();
    rows.shrink_to_fit();
    used[static_cast<std::size_t>(best_feature)] = 1;
    tree.nodes[static_cast<std::size_t>(index)].split = best_feature;
    const int no_child = build(std::move(off_rows), used, depth + 1);
    tree.nodes[static_cast<std::size_t>(index)].no = no_child;
    const int yes_child = build(std::move(on_rows), used, depth + 1);
    tree.nodes[static_cast<std::size_t>(index)].yes = yes_child;
    return index;
  }
};

}  // namespace detail

inline DecisionTree fit_decision_tree(const LabeledConceptSet& data,
                                      std::optional<int> max_depth = std::nullopt) {
  if (data.size() == 0) throw invalid_argument_error("cannot fit a tree on no rows");
  DecisionTree tree;
  tree.width = data.width;
  std::vector<std::size_t> rows(data.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  detail::TreeBuilder builder{data, tree, max_depth};
  builder.build(std::move(rows), std::vector<char>(static_cast<std::size_t>(data.width), 0), 0);
  return tree;
}

inline int tree_predict(const DecisionTree& tree, const std::vector<char>& concepts) {
  if (static_cast<int>(concepts.size()) != tree.width)
    throw invalid_argument_error("concept row width does not match the tree",
                                 {{"tree_width", tree.width}, {"row_width", concepts.size()}});
  int at = 0;
  while (tree.nodes[static_cast<std::size_t>(at)].split >= 0) {
    const auto& n = tree.nodes[static_cast<std::size_t>(at)];
    at = concepts[static_cast<std::size_t>(n.split)] ? n.yes : n.no;
  }
  return tree.nodes[static_cast<std::size_t>(at)].label;
}

inline bool all_leaves_pure(const DecisionTree& tree) {
  return std::all_of(tree.nodes.begin(), tree.nodes.end(), [](const DecisionTree::Node& n) {
    return n.split >= 0 || n.purity >= 1.0;
  });
}

inline std::set<int> split_features(const DecisionTree& tree) {
  std::set<int> out;
  for (const auto& n : tree.nodes)
    if (n.split >= 0) out.insert(n.split);
  return out;
}

inline std::string tree_to_text(const DecisionTree& tree, const ConceptSchema& schema) {
  std::string out;
  const auto walk = [&](auto&& self, int at, int depth, const std::string& edge) -> void {
    const auto& n = tree.nodes[static_cast<std::size_t>(at)];
    out.append(static_cast<std::size_t>(depth) * 2, ' ');
    if (!edge.empty()) out += edge + " ";
    if (n.split < 0) {
      out += "label " + std::to_string(n.label) + " (n=" + std::to_string(n.count) +
             ", purity=" + std::to_string(n.purity) + ")\n";
      return;
    }
    out += "split " + schema.concept_names[static_cast<std::size_t>(n.split)] +
           " (n=" + std::to_string(n.count) + ")\n";
    self(self, n.no, depth + 1, "0 ->");
    self(self, n.yes, depth + 1, "1 ->");
  };
  walk(walk, 0, 0, "");
  return out;
}

inline std::string tree_to_dot(const DecisionTree& tree, const ConceptSchema& schema) {
  std::string out = "digraph decision_tree {\n  node [shape=box];\n";
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    const auto& n = tree.nodes[i];
    if (n.split >= 0) {
      out += "  n" + std::to_string(i) + " [label=\"" +
             schema.concept_names[static_cast<std::size_t>(n.split)] + "?\"];\n";
      out += "  n" + std::to_string(i) + " -> n" + std::to_string(n.no) + " [label=\"0\"];\n";
      out += "  n" + std::to_string(i) + " -> n" + std::to_string(n.yes) + " [label=\"1\"];\n";
    } else {
      out += "  n" + std::to_string(i) + " [label=\"label " + std::to_string(n.label) + "\\nn=" +
             std::to_string(n.count) + "\"];\n";
    }
  }
  out += "}\n";
  return out;
}

}  // namespace crules
