#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "crules/algoexec.hpp"
#include "crules/decoder.hpp"
#include "crules/extract.hpp"
#include "crules/graphgen.hpp"
#include "crules/metrics.hpp"
#include "crules/termination.hpp"

namespace crules {

// --------------------------------------------------------------------------
// Tracing corpora
// --------------------------------------------------------------------------

// Deterministic per (seed, index); only traversal runs need a source.
inline int derive_source(const Graph& g, std::uint64_t seed, std::uint64_t index) {
  return static_cast<int>(derive_seed(seed, 0x50u, index) % static_cast<std::uint64_t>(g.node_count));
}

inline std::vector<Trace> trace_graphs(AlgorithmId algorithm, const std::vector<Graph>& graphs,
                                       std::uint64_t seed) {
  std::vector<Trace> traces;
  traces.reserve(graphs.size());
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    std::optional<int> source;
    if (algorithm == AlgorithmId::Bfs) source = derive_source(graphs[i], seed, i);
    traces.push_back(run_trace(algorithm, graphs[i], source));
  }
  return traces;
}

// --------------------------------------------------------------------------
// Trace comparison
// --------------------------------------------------------------------------

struct TraceComparison {
  bool equal = true;
  nlohmann::json divergence;  // null when equal; else step/unit/field detail
};

inline TraceComparison compare_traces(const Trace& pred, const Trace& truth) {
  TraceComparison out;
  out.divergence = nullptr;
  const auto diverge = [&](int step, const std::string& field, const nlohmann::json& detail) {
    out.equal = false;
    out.divergence = nlohmann::json{{"step", step}, {"field", field}, {"detail", detail}};
  };
  const std::size_t common = std::min(pred.steps.size(), truth.steps.size());
  for (std::size_t s = 0; s < common; ++s) {
    const auto& p = pred.steps[s];
    const auto& t = truth.steps[s];
    if (p.outputs != t.outputs) {
      for (std::size_t u = 0; u < std::min(p.outputs.size(), t.outputs.size()); ++u)
        if (p.outputs[u] != t.outputs[u]) {
          diverge(t.t, "outputs",
                  {{"unit", u}, {"expected", t.outputs[u]}, {"actual", p.outputs[u]}});
          return out;
        }
      diverge(t.t, "outputs", {{"expected_units", t.outputs.size()}, {"actual_units", p.outputs.size()}});
      return out;
    }
    if (p.concepts != t.concepts) {
      diverge(t.t, "concepts", nlohmann::json::object());
      return out;
    }
    if (p.post_concepts != t.post_concepts) {
      diverge(t.t, "post_concepts", nlohmann::json::object());
      return out;
    }
    if (p.continue_flag != t.continue_flag) {
      diverge(t.t, "continue",
              {{"expected", t.continue_flag}, {"actual", p.continue_flag}});
      return out;
    }
  }
  if (pred.steps.size() != truth.steps.size())
    diverge(static_cast<int>(common) + 1, "length",
            {{"expected_steps", truth.steps.size()}, {"actual_steps", pred.steps.size()}});
  return out;
}

// --------------------------------------------------------------------------
// Rule building
// --------------------------------------------------------------------------

struct RuleBuildConfig {
  bool dont_care = false;
  LogicConfig logic;
  // When set, rules may only mention these concepts (e.g. the unpruned
  // columns of a trained decoder); otherwise the full schema is used.
  std::optional<std::vector<int>> relevant;
};

inline RuleSet build_ruleset(const std::vector<Trace>& traces, const RuleBuildConfig& cfg = {}) {
  if (traces.empty()) throw invalid_argument_error("no traces to extract rules from");
  const AlgorithmId algorithm = traces.front().algorithm;
  const auto schema = ConceptSchema::for_algorithm(algorithm);
  const auto data = collect_labeled_set(traces);
  std::vector<int> relevant;
  if (cfg.relevant) {
    relevant = *cfg.relevant;
  } else {
    for (int j = 0; j < schema.width(); ++j) relevant.push_back(j);
  }
  const auto extraction = extract_label_rules(data, relevant, cfg.dont_care, cfg.logic);
  RuleSet rules;
  rules.algorithm = algorithm;
  rules.label_formulas = extraction.formulas;
  if (algorithm != AlgorithmId::Kruskal) {
    const auto samples = collect_termination_samples(traces);
    const auto enumerated = enumerate_rule(samples);
    if (!enumerated.rule)
      throw Error("no-termination-rule", "no existential rule fits the corpus");
    rules.termination = enumerated.rule;
  }
  return rules;
}

// --------------------------------------------------------------------------
// Evaluation
// --------------------------------------------------------------------------

// First formula whose term set accepts the row, in label order; -1 when none
// accepts. `ambiguous` counts rows matching several formulas.
inline int first_matching_label(const std::vector<DnfFormula>& formulas,
                                const std::vector<char>& row, long long& ambiguous) {
  int chosen = -1;
  int matches = 0;
  for (std::size_t l = 0; l < formulas.size(); ++l)
    if (eval_dnf(formulas[l], row)) {
      ++matches;
      if (chosen < 0) chosen = static_cast<int>(l);
    }
  if (matches > 1) ++ambiguous;
  return chosen;
}

// Teacher-forced formula evaluation: every step of the truth trace is scored
// independently, with labels chosen by the formulas from (optionally
// corrupted) step concepts and termination decided by the rule on the step's
// post concepts.
inline PairScores eval_formula_on_trace(const RuleSet& rules, const Trace& truth, double noise,
                                        std::uint64_t noise_seed, long long& ambiguous) {
  Trace pred;
  pred.algorithm = truth.algorithm;
  pred.graph = truth.graph;
  pred.source = truth.source;
  for (std::size_t s = 0; s < truth.steps.size(); ++s) {
    const auto& t = truth.steps[s];
    StepRecord rec;
    rec.t = t.t;
    rec.concepts = noise > 0.0
                       ? corrupt_concepts(t.concepts, noise, derive_seed(noise_seed, s, 0))
                       : t.concepts;
    rec.post_concepts = noise > 0.0
                            ? corrupt_concepts(t.post_concepts, noise, derive_seed(noise_seed, s, 1))
                            : t.post_concepts;
    rec.outputs.resize(rec.concepts.size());
    for (std::size_t u = 0; u < rec.concepts.size(); ++u)
      rec.outputs[u] = first_matching_label(rules.label_formulas, rec.concepts[u], ambiguous);
    if (rules.termination) {
      std::set<std::vector<char>> rows(rec.post_concepts.begin(), rec.post_concepts.end());
      rec.continue_flag = eval_rule(*rules.termination, rows);
    } else {
      rec.continue_flag = t.continue_flag;
    }
    pred.steps.push_back(std::move(rec));
  }
  return compute_pair_scores(pred, truth, noise > 0.0);
}

// Per-step decoder predictions on (optionally corrupted) concepts.
inline PairScores eval_decoder_on_trace(const DecoderModel& model,
                                        const std::optional<TerminationRule>& term_rule,
                                        const Trace& truth, double noise,
                                        std::uint64_t noise_seed) {
  Trace pred;
  pred.algorithm = truth.algorithm;
  pred.graph = truth.graph;
  pred.source = truth.source;
  for (std::size_t s = 0; s < truth.steps.size(); ++s) {
    const auto& t = truth.steps[s];
    StepRecord rec;
    rec.t = t.t;
    rec.concepts = noise > 0.0
                       ? corrupt_concepts(t.concepts, noise, derive_seed(noise_seed, s, 0))
                       : t.concepts;
    rec.post_concepts = noise > 0.0
                            ? corrupt_concepts(t.post_concepts, noise, derive_seed(noise_seed, s, 1))
                            : t.post_concepts;
    rec.outputs.resize(rec.concepts.size());
    for (std::size_t u = 0; u < rec.concepts.size(); ++u)
      rec.outputs[u] = predict_label(model, rec.concepts[u]);
    if (term_rule) {
      std::set<std::vector<char>> rows(rec.post_concepts.begin(), rec.post_concepts.end());
      rec.continue_flag = eval_rule(*term_rule, rows);
    } else {
      rec.continue_flag = t.continue_flag;
    }
    pred.steps.push_back(std::move(rec));
  }
  return compute_pair_scores(pred, truth, noise > 0.0);
}

inline void add_pair_to_report(MetricsReport& report, const std::string& prefix, int size,
                               const PairScores& scores) {
  report.add(prefix + "mean_step_acc", size, scores.mean_step);
  report.add(prefix + "last_step_acc", size, scores.last_step);
  report.add(prefix + "term_acc", size, scores.term);
  if (scores.concepts_mean) report.add("concepts_mean_step_acc", size, *scores.concepts_mean);
  if (scores.concepts_last) report.add("concepts_last_step_acc", size, *scores.concepts_last);
}

struct ReplayOutcome {
  bool all_equal = true;
  int graphs_scored = 0;
  nlohmann::json first_divergence;  // null when everything matched
};

// Full-loop verification: re-executes the algorithm from the rules alone and
// demands unit-for-unit equality with the classical run on held-out graphs.
inline ReplayOutcome eval_rule_replay(const RuleSet& rules, const std::vector<int>& sizes,
                                      int graphs_per_size, std::uint64_t seed,
                                      MetricsReport& report) {
  ReplayOutcome outcome;
  outcome.first_divergence = nullptr;
  const auto& cats = categories_for(rules.algorithm);
  for (int size : sizes) {
    const int per_cat =
        (graphs_per_size + static_cast<int>(cats.size()) - 1) / static_cast<int>(cats.size());
    auto graphs = generalization_set(rules.algorithm, size, per_cat, seed);
    if (static_cast<int>(graphs.size()) > graphs_per_size)
      graphs.resize(static_cast<std::size_t>(graphs_per_size));
    for (std::size_t i = 0; i < graphs.size(); ++i) {
      std::optional<int> source;
      if (rules.algorithm == AlgorithmId::Bfs)
        source = derive_source(graphs[i], seed, i + 7000u * static_cast<std::uint64_t>(size));
      const Trace truth = run_trace(rules.algorithm, graphs[i], source);
      const Trace pred =
          execute_with_rules(graphs[i], rules.algorithm, rules.label_formulas, rules.termination,
                             source);
      const auto cmp = compare_traces(pred, truth);
      if (!cmp.equal && outcome.all_equal) {
        outcome.all_equal = false;
        outcome.first_divergence = cmp.divergence;
        outcome.first_divergence["size"] = size;
        outcome.first_divergence["graph_index"] = i;
      }
      add_pair_to_report(report, "formula_", size, compute_pair_scores(pred, truth));
      ++outcome.graphs_scored;
    }
  }
  return outcome;
}

// --------------------------------------------------------------------------
// End-to-end reproduction pipeline
// --------------------------------------------------------------------------

struct ReproConfig {
  AlgorithmId algorithm = AlgorithmId::Bfs;
  std::uint64_t seed = 0;
  bool dont_care = false;
  LogicConfig logic;
  // training corpus
  int train_size = 20;
  SplitCounts counts{10, 1, 1};
  // decoder relevance restriction (coloring pipeline)
  bool use_decoder = false;
  TrainConfig decoder_cfg;
  // replay verification
  std::vector<int> eval_sizes = {20, 50, 100};
  int eval_graphs_per_size = 30;
};

inline ReproConfig default_repro_config(AlgorithmId algorithm, std::uint64_t seed) {
  ReproConfig cfg;
  cfg.algorithm = algorithm;
  cfg.seed = seed;
  switch (algorithm) {
    case AlgorithmId::Bfs:
      cfg.train_size = 20;
      cfg.counts = {10, 1, 1};
      cfg.use_decoder = false;
      break;
    case AlgorithmId::Coloring:
      cfg.train_size = 20;
      cfg.counts = {80, 8, 8};
      cfg.use_decoder = true;
      cfg.decoder_cfg.lambda_l1 = 1e-3;
      cfg.decoder_cfg.epochs = 400;
      cfg.decoder_cfg.prune_epoch = 200;
      cfg.decoder_cfg.seed = seed;
      break;
    case AlgorithmId::Kruskal:
      cfg.train_size = 8;
      cfg.counts = {50, 5, 5};
      cfg.use_decoder = false;
      break;
  }
  return cfg;
}

struct ReproOutcome {
  RuleSet rules;
  std::optional<DecoderModel> decoder;
  MetricsReport report;
  ReplayOutcome replay;
  bool verified = false;
};

inline ReproOutcome repro_run(const ReproConfig& cfg) {
  ReproOutcome out;
  const auto dataset = make_dataset(cfg.algorithm, cfg.train_size, cfg.counts, cfg.seed);
  const auto traces = trace_graphs(cfg.algorithm, dataset.train, derive_seed(cfg.seed, 21));
  RuleBuildConfig build;
  build.dont_care = cfg.dont_care;
  build.logic = cfg.logic;
  if (cfg.use_decoder) {
    const auto data = collect_labeled_set(traces);
    TrainConfig tc = cfg.decoder_cfg;
    const auto model = train_decoder(data, tc);
    build.relevant = relevant_concepts(model);
    out.decoder = model;
  }
  out.rules = build_ruleset(traces, build);
  out.replay = eval_rule_replay(out.rules, cfg.eval_sizes, cfg.eval_graphs_per_size,
                                derive_seed(cfg.seed, 33), out.report);
  out.verified = out.replay.all_equal;
  return out;
}

}  // namespace crules
