#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "crules/error.hpp"
#include "crules/graph.hpp"
#include "crules/schema.hpp"

namespace crules {

// One 0/1 concept vector per unit (row) — node rows for traversal/coloring,
// edge rows for the spanning-tree algorithm.
using ConceptMatrix = std::vector<std::vector<char>>;

struct StepRecord {
  int t = 0;  // 1-based step index
  ConceptMatrix concepts;       // observed before the update
  ConceptMatrix post_concepts;  // recomputed on the updated state
  std::vector<int> outputs;     // per-unit label after the update
  bool continue_flag = false;
};

struct Trace {
  AlgorithmId algorithm = AlgorithmId::Bfs;
  Graph graph;
  std::optional<int> source;  // traversal only
  std::vector<StepRecord> steps;
};

namespace detail {

inline nlohmann::json matrix_to_json(const ConceptMatrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : m) {
    nlohmann::json r = nlohmann::json::array();
    for (char bit : row) r.push_back(static_cast<int>(bit));
    rows.push_back(std::move(r));
  }
  return rows;
}

inline ConceptMatrix matrix_from_json(const nlohmann::json& j) {
  ConceptMatrix m;
  for (const auto& row : j) {
    std::vector<char> r;
    for (const auto& bit : row) {
      const int b = bit.get<int>();
      if (b != 0 && b != 1) throw Error("malformed-trace-json", "concept bits must be 0 or 1");
      r.push_back(static_cast<char>(b));
    }
    m.push_back(std::move(r));
  }
  return m;
}

}  // namespace detail

inline nlohmann::json to_json(const Trace& trace) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : trace.steps) {
    steps.push_back(nlohmann::json{{"t", s.t},
                                   {"concepts", detail::matrix_to_json(s.concepts)},
                                   {"post_concepts", detail::matrix_to_json(s.post_concepts)},
                                   {"outputs", s.outputs},
                                   {"continue", s.continue_flag ? 1 : 0}});
  }
  nlohmann::json j{{"algorithm", to_string(trace.algorithm)},
                   {"graph", to_json(trace.graph)},
                   {"source", nullptr},
                   {"steps", std::move(steps)}};
  if (trace.source) j["source"] = *trace.source;
  return j;
}

inline Trace trace_from_json(const nlohmann::json& j) {
  Trace t;
  try {
    t.algorithm = algorithm_from_string(j.at("algorithm").get<std::string>());
    t.graph = graph_from_json(j.at("graph"));
    if (!j.at("source").is_null()) t.source = j.at("source").get<int>();
    for (const auto& s : j.at("steps")) {
      StepRecord rec;
      rec.t = s.at("t").get<int>();
      rec.concepts = detail::matrix_from_json(s.at("concepts"));
      rec.post_concepts = detail::matrix_from_json(s.at("post_concepts"));
      rec.outputs = s.at("outputs").get<std::vector<int>>();
      rec.continue_flag = s.at("continue").get<int>() != 0;
      t.steps.push_back(std::move(rec));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed-trace-json", e.what());
  }
  return t;
}

}  // namespace crules
