#pragma once

#include <string>
#include <vector>

#include "crules/error.hpp"

namespace crules {

enum class AlgorithmId { Bfs, Coloring, Kruskal };

inline std::string to_string(AlgorithmId a) {
  switch (a) {
    case AlgorithmId::Bfs: return "bfs";
    case AlgorithmId::Coloring: return "coloring";
    case AlgorithmId::Kruskal: return "kruskal";
  }
  throw invalid_argument_error("unknown algorithm value");
}

inline AlgorithmId algorithm_from_string(const std::string& s) {
  if (s == "bfs") return AlgorithmId::Bfs;
  if (s == "coloring") return AlgorithmId::Coloring;
  if (s == "kruskal") return AlgorithmId::Kruskal;
  throw invalid_argument_error("unknown algorithm name", {{"algorithm", s}});
}

// Names and shapes of the boolean concept vector attached to every unit
// (node or edge) at every step, plus the label space of the per-step output.
struct ConceptSchema {
  AlgorithmId algorithm;
  std::vector<std::string> concept_names;
  int label_count = 0;       // outputs live in [0, label_count)
  std::string unit_symbol;   // symbol used when rendering literals, e.g. "n"

  int width() const { return static_cast<int>(concept_names.size()); }

  static ConceptSchema for_algorithm(AlgorithmId a) {
    switch (a) {
      case AlgorithmId::Bfs:
        return {a, {"hasBeenVisited", "hasVisitedNeighbours"}, 2, "n"};
      case AlgorithmId::Coloring:
        return {a,
                {"isColored", "hasPriority", "color1Seen", "color2Seen", "color3Seen",
                 "color4Seen", "color5Seen"},
                6,
                "n"};
      case AlgorithmId::Kruskal:
        return {a, {"lighterEdgesVisited", "nodesInSameSet", "edgeInMst"}, 2, "e"};
    }
    throw invalid_argument_error("unknown algorithm value");
  }
};

}  // namespace crules
