#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "crules/decoder.hpp"
#include "crules/error.hpp"
#include "crules/logic.hpp"
#include "crules/schema.hpp"
#include "crules/termination.hpp"

namespace crules {

struct LabelRuleExtraction {
  std::vector<DnfFormula> formulas;          // indexed by label
  std::vector<ClassFormulaResult> details;   // per-label conflict reports
  std::vector<int> relevant;                 // concepts the rules may mention
  bool dont_care = false;
};

// Per-label DNF rules from a labeled concept set: aggregate each label's
// realised combinations over the relevant concepts, then minimise. With
// dont_care unset, combinations never realised count as false; with it set,
// they are free and rules come out shorter but less guarded.
inline LabelRuleExtraction extract_label_rules(const LabeledConceptSet& data,
                                               std::vector<int> relevant, bool dont_care = false,
                                               const LogicConfig& cfg = {}) {
  if (data.size() == 0) throw invalid_argument_error("no rows to extract rules from");
  std::vector<std::vector<double>> samples;
  samples.reserve(data.size());
  for (const auto& row : data.concepts) {
    std::vector<double> real(row.size());
    for (std::size_t j = 0; j < row.size(); ++j) real[j] = row[j] ? 1.0 : 0.0;
    samples.push_back(std::move(real));
  }
  std::sort(relevant.begin(), relevant.end());
  LabelRuleExtraction out;
  out.relevant = relevant;
  out.dont_care = dont_care;
  for (int label = 0; label < data.label_count; ++label) {
    auto detail = class_formula_detailed(samples, data.labels, label, relevant, cfg);
    if (dont_care) {
      // The off-set is everything any other label realises, projected the
      // same way; unseen combinations stay free.
      std::set<Term> off_terms;
      for (std::size_t i = 0; i < samples.size(); ++i)
        if (data.labels[i] != label)
          off_terms.insert(project_term(term_from_sample(samples[i], cfg), relevant));
      const DnfFormula off =
          make_formula(data.width, std::vector<Term>(off_terms.begin(), off_terms.end()));
      out.formulas.push_back(minimize_with_dontcares(detail.formula, off));
    } else {
      out.formulas.push_back(simplify(detail.formula));
    }
    out.details.push_back(std::move(detail));
  }
  return out;
}

// The rules file: one formula per label plus the optional termination rule.
struct RuleSet {
  AlgorithmId algorithm = AlgorithmId::Bfs;
  std::vector<DnfFormula> label_formulas;  // indexed by label
  std::optional<TerminationRule> termination;
};

inline nlohmann::json to_json(const RuleSet& rules) {
  const auto schema = ConceptSchema::for_algorithm(rules.algorithm);
  nlohmann::json labels = nlohmann::json::array();
  for (std::size_t l = 0; l < rules.label_formulas.size(); ++l)
    labels.push_back(nlohmann::json{{"label", l},
                                    {"formula", to_json(rules.label_formulas[l])},
                                    {"text", format_formula(rules.label_formulas[l], schema)}});
  nlohmann::json j{{"algorithm", to_string(rules.algorithm)},
                   {"concepts", schema.concept_names},
                   {"labels", std::move(labels)},
                   {"termination", nullptr}};
  if (rules.termination) {
    j["termination"] = to_json(*rules.termination, rules.algorithm);
    j["termination"]["text"] = format_rule(*rules.termination, schema);
  }
  return j;
}

inline RuleSet ruleset_from_json(const nlohmann::json& j) {
  RuleSet rules;
  try {
    rules.algorithm = algorithm_from_string(j.at("algorithm").get<std::string>());
    const auto schema = ConceptSchema::for_algorithm(rules.algorithm);
    rules.label_formulas.assign(static_cast<std::size_t>(schema.label_count),
                                DnfFormula{schema.width(), {}});
    for (const auto& entry : j.at("labels")) {
      const int label = entry.at("label").get<int>();
      if (label < 0 || label >= schema.label_count)
        throw Error("malformed-rules-json", "label outside the schema range");
      rules.label_formulas[static_cast<std::size_t>(label)] = formula_from_json(entry.at("formula"));
    }
    if (!j.at("termination").is_null()) rules.termination = rule_from_json(j.at("termination"));
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed-rules-json", e.what());
  }
  return rules;
}

}  // namespace crules
