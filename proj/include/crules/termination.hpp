#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "crules/error.hpp"
#include "crules/schema.hpp"
#include "crules/trace.hpp"

namespace crules {

// The distinct post-update concept vectors of one step, with the ground truth
// "keep iterating" flag of that step.
struct TerminationSample {
  std::set<std::vector<char>> unique_concepts;
  bool continue_flag = false;
};

// "Continue iff some unit's concepts match `values` on `indices`."
struct TerminationRule {
  std::vector<int> indices;   // sorted
  std::vector<char> values;   // parallel to indices
  friend bool operator==(const TerminationRule&, const TerminationRule&) = default;
};

inline std::vector<TerminationSample> collect_termination_samples(const std::vector<Trace>& traces) {
  std::vector<TerminationSample> out;
  for (const Trace& trace : traces) {
    if (trace.algorithm == AlgorithmId::Kruskal)
      throw Error("no-termination-concept",
                  "the spanning-tree algorithm runs a fixed number of steps; termination rules "
                  "are not learned for it");
    for (const StepRecord& step : trace.steps) {
      TerminationSample s;
      for (const auto& row : step.post_concepts) s.unique_concepts.insert(row);
      s.continue_flag = step.continue_flag;
      out.push_back(std::move(s));
    }
  }
  return out;
}

inline bool rule_matches(const TerminationRule& rule, const std::vector<char>& row) {
  for (std::size_t i = 0; i < rule.indices.size(); ++i) {
    const int idx = rule.indices[i];
    if (idx < 0 || idx >= static_cast<int>(row.size()))
      throw invalid_argument_error("termination rule index outside the concept row",
                                   {{"index", idx}, {"row_width", row.size()}});
    if ((row[static_cast<std::size_t>(idx)] != 0) != (rule.values[i] != 0)) return false;
  }
  return true;
}

// True iff some vector in the step's set matches the assignment on every
// indexed concept; an empty index set matches any vector vacuously.
inline bool eval_rule(const TerminationRule& rule, const std::set<std::vector<char>>& step_concepts) {
  return std::any_of(step_concepts.begin(), step_concepts.end(),
                     [&](const std::vector<char>& row) { return rule_matches(rule, row); });
}

struct EnumerationResult {
  std::optional<TerminationRule> rule;
  // Count of (indices, assignment) pairs of the winning size that satisfy the
  // biconditional; > 1 means the fixed ordering broke a tie.
  int solutions_at_size = 0;
};

namespace detail {

inline bool rule_fits(const TerminationRule& rule, const std::vector<TerminationSample>& samples) {
  for (const TerminationSample& s : samples)
    if (eval_rule(rule, s.unique_concepts) != s.continue_flag) return false;
  return true;
}

// Subsets of candidate positions in increasing size, lexicographic within a
// size; assignments in lexicographic order with the first index most
// significant and false before true.
template <class Fn>
inline void for_each_candidate(const std::vector<int>& candidates, int size, Fn&& fn) {
  const int n = static_cast<int>(candidates.size());
  std::vector<int> pick(static_cast<std::size_t>(size));
  const auto walk = [&](auto&& self, int start, int depth) -> bool {
    if (depth == size) {
      std::vector<int> indices;
      indices.reserve(pick.size());
      for (int p : pick) indices.push_back(candidates[static_cast<std::size_t>(p)]);
      const std::uint32_t total = 1u << size;
      for (std::uint32_t a = 0; a < total; ++a) {
        std::vector<char> values(static_cast<std::size_t>(size));
        for (int j = 0; j < size; ++j)
          values[static_cast<std::size_t>(j)] = (a >> (size - 1 - j)) & 1u;
        if (fn(TerminationRule{indices, values})) return true;
      }
      return false;
    }
    for (int p = start; p < n; ++p) {
      pick[static_cast<std::size_t>(depth)] = p;
      if (self(self, p + 1, depth + 1)) return true;
    }
    return false;
  };
  walk(walk, 0, 0);
}

}  // namespace detail

// First rule in the fixed candidate order satisfying "continue iff a matching
// vector exists" on every sample. `candidates` restricts the searched concept
// indices (defaults to the full row width).
inline EnumerationResult enumerate_rule(const std::vector<TerminationSample>& samples,
                                        std::optional<std::vector<int>> candidates = std::nullopt) {
  if (samples.empty()) throw invalid_argument_error("no termination samples");
  bool any_true = false, any_false = false;
  std::size_t width = 0;
  for (const TerminationSample& s : samples) {
    if (s.unique_concepts.empty()) throw invalid_argument_error("a sample has no concept vectors");
    width = s.unique_concepts.begin()->size();
    (s.continue_flag ? any_true : any_false) = true;
  }
  if (!any_true || !any_false)
    throw Error("degenerate-data",
                "all samples share one continue flag; any or no rule would fit vacuously",
                {{"all_continue", any_true}});
  std::vector<int> cand;
  if (candidates) {
    cand = *candidates;
    std::sort(cand.begin(), cand.end());
  } else {
    for (std::size_t i = 0; i < width; ++i) cand.push_back(static_cast<int>(i));
  }
  EnumerationResult result;
  for (int size = 1; size <= static_cast<int>(cand.size()); ++size) {
    detail::for_each_candidate(cand, size, [&](const TerminationRule& rule) {
      if (!detail::rule_fits(rule, samples)) return false;
      if (!result.rule) result.rule = rule;
      ++result.solutions_at_size;
      return false;  // keep scanning this size to count ties
    });
    if (result.rule) break;
  }
  if (result.rule) {
    // soundness re-check of the returned rule (construction guarantees it,
    // asserted anyway so a future refactor cannot silently break it)
    if (!detail::rule_fits(*result.rule, samples))
      throw Error("internal-error", "enumerated rule fails its own samples");
  }
  return result;
}

inline std::string format_rule(const TerminationRule& rule, const ConceptSchema& schema) {
  std::string s = "continue ⟺ ∃u. ";
  for (std::size_t i = 0; i < rule.indices.size(); ++i) {
    if (i) s += " ∧ ";
    if (!rule.values[i]) s += "¬";
    s += schema.concept_names[static_cast<std::size_t>(rule.indices[i])] + "(u)";
  }
  return s;
}

inline nlohmann::json to_json(const TerminationRule& rule, AlgorithmId algorithm) {
  nlohmann::json assignment = nlohmann::json::object();
  for (std::size_t i = 0; i < rule.indices.size(); ++i)
    assignment[std::to_string(rule.indices[i])] = rule.values[i] ? 1 : 0;
  return nlohmann::json{{"indices", rule.indices},
                        {"assignment", std::move(assignment)},
                        {"schema", to_string(algorithm)}};
}

inline TerminationRule rule_from_json(const nlohmann::json& j) {
  TerminationRule rule;
  try {
    rule.indices = j.at("indices").get<std::vector<int>>();
    const auto& assignment = j.at("assignment");
    for (int idx : rule.indices)
      rule.values.push_back(assignment.at(std::to_string(idx)).get<int>() ? 1 : 0);
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed-rule-json", e.what());
  }
  return rule;
}

}  // namespace crules
