// Command-line front end: dataset generation, tracing, decoder training,
// rule extraction, rule-based replay, evaluation, and one-shot reproduction
// pipelines. Every run writes a manifest; every error is reported as JSON on
// stderr. Exit codes: 0 success, 1 verification failure, 2 usage error.

#include <chrono>
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "crules/io.hpp"
#include "crules/pipeline.hpp"

#ifndef CRULES_VERSION
#define CRULES_VERSION "0.1.0"
#endif

namespace {

using nlohmann::json;
using namespace crules;

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

void write_manifest(const std::string& out_dir, const std::string& command, const json& config,
                    std::uint64_t seed, const std::vector<std::string>& artifacts,
                    const Timer& timer) {
  json manifest{{"command", command},
                {"config", config},
                {"seed", seed},
                {"version", CRULES_VERSION},
                {"wall_time_seconds", timer.seconds()},
                {"artifacts", artifacts}};
  write_json_file(out_dir + "/manifest.json", manifest);
}

SplitCounts parse_counts(const std::string& text, AlgorithmId algorithm) {
  if (text.empty()) return default_counts(algorithm);
  SplitCounts counts{};
  char sep1 = 0, sep2 = 0;
  std::istringstream in(text);
  if (!(in >> counts.train >> sep1 >> counts.validation >> sep2 >> counts.test) || sep1 != ':' ||
      sep2 != ':' || !(in >> std::ws).eof())
    throw invalid_argument_error("--counts must look like a:b:c", {{"counts", text}});
  return counts;
}

bool parse_on_off(const std::string& text, const std::string& flag) {
  if (text == "on") return true;
  if (text == "off") return false;
  throw invalid_argument_error("--" + flag + " must be 'on' or 'off'", {{flag, text}});
}

std::vector<Trace> load_traces(const std::string& path) {
  std::vector<Trace> traces;
  for (const auto& line : read_jsonl_file(path)) traces.push_back(trace_from_json(line));
  if (traces.empty()) throw invalid_argument_error("trace file is empty", {{"path", path}});
  return traces;
}

RuleSet load_ruleset(const std::string& rules_path, const std::string& term_path) {
  RuleSet rules = ruleset_from_json(read_json_file(rules_path));
  if (!term_path.empty()) {
    auto doc = read_json_file(term_path);
    rules.termination = rule_from_json(doc);
  }
  return rules;
}

// ---------------------------------------------------------------- gen ------

int cmd_gen(AlgorithmId algorithm, int size, const std::string& counts_text, std::uint64_t seed,
            const std::string& out_dir) {
  Timer timer;
  const SplitCounts counts = parse_counts(counts_text, algorithm);
  const auto dataset = make_dataset(algorithm, size, counts, seed);
  const auto dump_split = [&](const std::string& name, const std::vector<Graph>& graphs) {
    std::vector<json> lines;
    lines.reserve(graphs.size());
    for (const auto& g : graphs) lines.push_back(to_json(g));
    write_jsonl_file(out_dir + "/" + name + ".jsonl", lines);
  };
  dump_split("train", dataset.train);
  dump_split("validation", dataset.validation);
  dump_split("test", dataset.test);
  json config{{"algorithm", to_string(algorithm)},
              {"size", size},
              {"counts", {{"train", counts.train},
                          {"validation", counts.validation},
                          {"test", counts.test}}}};
  write_manifest(out_dir, "gen", config, seed,
                 {"train.jsonl", "validation.jsonl", "test.jsonl"}, timer);
  std::cout << json{{"train", dataset.train.size()},
                    {"validation", dataset.validation.size()},
                    {"test", dataset.test.size()}}
                   .dump()
            << "\n";
  return 0;
}

// -------------------------------------------------------------- trace ------

int cmd_trace(AlgorithmId algorithm, int size, const std::string& counts_text, std::uint64_t seed,
              const std::string& split, const std::string& out_dir) {
  Timer timer;
  const SplitCounts counts = parse_counts(counts_text, algorithm);
  const auto dataset = make_dataset(algorithm, size, counts, seed);
  const std::vector<Graph>* graphs = nullptr;
  if (split == "train")
    graphs = &dataset.train;
  else if (split == "validation")
    graphs = &dataset.validation;
  else if (split == "test")
    graphs = &dataset.test;
  else
    throw invalid_argument_error("--split must be train, validation, or test",
                                 {{"split", split}});
  const auto traces = trace_graphs(algorithm, *graphs, derive_seed(seed, 21));
  std::vector<json> lines;
  lines.reserve(traces.size());
  for (const auto& t : traces) lines.push_back(to_json(t));
  write_jsonl_file(out_dir + "/traces.jsonl", lines);
  json config{{"algorithm", to_string(algorithm)},
              {"size", size},
              {"counts", {{"train", counts.train},
                          {"validation", counts.validation},
                          {"test", counts.test}}},
              {"split", split}};
  write_manifest(out_dir, "trace", config, seed, {"traces.jsonl"}, timer);
  std::cout << json{{"traces", traces.size()}}.dump() << "\n";
  return 0;
}

// -------------------------------------------------------------- train ------

int cmd_train(const std::string& traces_path, const TrainConfig& cfg, const std::string& out_dir) {
  Timer timer;
  const auto traces = load_traces(traces_path);
  const auto data = collect_labeled_set(traces);
  const auto result = train_decoder_with_history(data, cfg);
  write_json_file(out_dir + "/model.json", to_json(result.model));
  write_json_file(out_dir + "/losses.json", json(result.epoch_losses));
  json config{{"traces", traces_path},
              {"learning_rate", cfg.learning_rate},
              {"batch_size", cfg.batch_size},
              {"epochs", cfg.epochs},
              {"lambda_l1", cfg.lambda_l1},
              {"prune_epoch", cfg.prune_epoch ? json(*cfg.prune_epoch) : json(nullptr)},
              {"hidden", cfg.hidden},
              {"linear", cfg.linear}};
  write_manifest(out_dir, "train", config, cfg.seed, {"model.json", "losses.json"}, timer);
  const auto relevant = relevant_concepts(result.model);
  std::cout << json{{"final_loss", result.epoch_losses.back()},
                    {"relevant_concepts", relevant}}
                   .dump()
            << "\n";
  return 0;
}

// ------------------------------------------------------------ extract ------

int cmd_extract(const std::string& traces_path, const std::string& model_path, double threshold,
                const std::string& dont_care_text, std::uint64_t seed,
                const std::string& out_dir) {
  Timer timer;
  const bool dont_care = parse_on_off(dont_care_text, "dont-care");
  const auto traces = load_traces(traces_path);
  const auto schema = ConceptSchema::for_algorithm(traces.front().algorithm);
  std::vector<int> relevant;
  if (!model_path.empty()) {
    const auto model = model_from_json(read_json_file(model_path));
    if (model.algorithm != traces.front().algorithm)
      throw invalid_argument_error("model and traces disagree on the algorithm");
    relevant = relevant_concepts(model);
  } else {
    for (int j = 0; j < schema.width(); ++j) relevant.push_back(j);
  }
  const auto data = collect_labeled_set(traces);
  LogicConfig logic;
  logic.threshold = threshold;
  const auto extraction = extract_label_rules(data, relevant, dont_care, logic);
  RuleSet rules;
  rules.algorithm = traces.front().algorithm;
  rules.label_formulas = extraction.formulas;
  write_json_file(out_dir + "/rules.json", to_json(rules));
  json config{{"traces", traces_path},
              {"model", model_path.empty() ? json(nullptr) : json(model_path)},
              {"threshold", threshold},
              {"dont_care", dont_care}};
  write_manifest(out_dir, "extract", config, seed, {"rules.json"}, timer);
  json printed = json::array();
  for (std::size_t l = 0; l < extraction.formulas.size(); ++l)
    printed.push_back({{"label", l}, {"text", format_formula(extraction.formulas[l], schema)}});
  std::cout << printed.dump() << "\n";
  return 0;
}

// ---------------------------------------------------------- term-rule ------

int cmd_term_rule(const std::string& traces_path, std::uint64_t seed, const std::string& out_dir) {
  Timer timer;
  const auto traces = load_traces(traces_path);
  const auto schema = ConceptSchema::for_algorithm(traces.front().algorithm);
  const auto samples = collect_termination_samples(traces);
  const auto result = enumerate_rule(samples);
  if (!result.rule) throw Error("no-termination-rule", "no existential rule fits the corpus");
  json doc = to_json(*result.rule, schema.algorithm);
  doc["text"] = format_rule(*result.rule, schema);
  doc["solutions_at_size"] = result.solutions_at_size;
  write_json_file(out_dir + "/termination.json", doc);
  write_manifest(out_dir, "term-rule", {{"traces", traces_path}}, seed, {"termination.json"},
                 timer);
  std::cout << json{{"text", format_rule(*result.rule, schema)},
                    {"solutions_at_size", result.solutions_at_size}}
                   .dump()
            << "\n";
  return 0;
}

// ---------------------------------------------------------- exec-rules -----

int cmd_exec_rules(const std::string& rules_path, const std::string& term_path, int size,
                   int count, std::uint64_t seed, const std::string& out_dir) {
  Timer timer;
  const RuleSet rules = load_ruleset(rules_path, term_path);
  MetricsReport report;
  const auto outcome = eval_rule_replay(rules, {size}, count, seed, report);
  json doc{{"algorithm", to_string(rules.algorithm)},
           {"size", size},
           {"graphs", outcome.graphs_scored},
           {"all_equal", outcome.all_equal},
           {"first_divergence", outcome.first_divergence},
           {"metrics", report.to_json()}};
  write_json_file(out_dir + "/replay.json", doc);
  json config{{"rules", rules_path},
              {"term_rule", term_path.empty() ? json(nullptr) : json(term_path)},
              {"size", size},
              {"count", count}};
  write_manifest(out_dir, "exec-rules", config, seed, {"replay.json"}, timer);
  std::cout << json{{"all_equal", outcome.all_equal},
                    {"graphs", outcome.graphs_scored},
                    {"first_divergence", outcome.first_divergence}}
                   .dump()
            << "\n";
  return outcome.all_equal ? 0 : 1;
}

// --------------------------------------------------------------- eval ------

int cmd_eval(const std::string& mode, const std::string& traces_path,
             const std::string& rules_path, const std::string& term_path,
             const std::string& model_path, double noise, std::uint64_t seed,
             const std::string& out_dir) {
  Timer timer;
  const auto traces = load_traces(traces_path);
  MetricsReport report;
  long long ambiguous = 0;
  if (mode == "formula") {
    if (rules_path.empty()) throw invalid_argument_error("--rules is required in formula mode");
    const RuleSet rules = load_ruleset(rules_path, term_path);
    for (std::size_t i = 0; i < traces.size(); ++i) {
      const auto scores = eval_formula_on_trace(rules, traces[i], noise,
                                                derive_seed(seed, 0xe0a1, i), ambiguous);
      add_pair_to_report(report, "formula_", traces[i].graph.node_count, scores);
    }
  } else if (mode == "decoder") {
    if (model_path.empty()) throw invalid_argument_error("--model is required in decoder mode");
    const auto model = model_from_json(read_json_file(model_path));
    std::optional<TerminationRule> term_rule;
    if (!term_path.empty()) term_rule = rule_from_json(read_json_file(term_path));
    for (std::size_t i = 0; i < traces.size(); ++i) {
      const auto scores = eval_decoder_on_trace(model, term_rule, traces[i], noise,
                                                derive_seed(seed, 0xe0a1, i));
      add_pair_to_report(report, "", traces[i].graph.node_count, scores);
    }
  } else if (mode == "replay") {
    if (rules_path.empty()) throw invalid_argument_error("--rules is required in replay mode");
    const RuleSet rules = load_ruleset(rules_path, term_path);
    for (const auto& truth : traces) {
      const Trace pred = execute_with_rules(truth.graph, truth.algorithm, rules.label_formulas,
                                            rules.termination, truth.source);
      add_pair_to_report(report, "formula_", truth.graph.node_count,
                         compute_pair_scores(pred, truth));
    }
  } else {
    throw invalid_argument_error("--mode must be formula, decoder, or replay", {{"mode", mode}});
  }
  json doc{{"mode", mode},
           {"noise", noise},
           {"traces", traces.size()},
           {"ambiguous_rows", ambiguous},
           {"metrics", report.to_json()}};
  write_json_file(out_dir + "/report.json", doc);
  json config{{"mode", mode},
              {"traces", traces_path},
              {"rules", rules_path.empty() ? json(nullptr) : json(rules_path)},
              {"term_rule", term_path.empty() ? json(nullptr) : json(term_path)},
              {"model", model_path.empty() ? json(nullptr) : json(model_path)},
              {"noise", noise}};
  write_manifest(out_dir, "eval", config, seed, {"report.json"}, timer);
  std::cout << report.to_json().dump() << "\n";
  return 0;
}

// --------------------------------------------------------------- tree ------

int cmd_tree(const std::string& traces_path, int max_depth, std::uint64_t seed,
             const std::string& out_dir) {
  Timer timer;
  const auto traces = load_traces(traces_path);
  const auto schema = ConceptSchema::for_algorithm(traces.front().algorithm);
  const auto data = collect_labeled_set(traces);
  std::optional<int> depth;
  if (max_depth > 0) depth = max_depth;
  const auto tree = fit_decision_tree(data, depth);
  atomic_write_file(out_dir + "/tree.txt", tree_to_text(tree, schema));
  atomic_write_file(out_dir + "/tree.dot", tree_to_dot(tree, schema));
  json config{{"traces", traces_path},
              {"max_depth", max_depth > 0 ? json(max_depth) : json(nullptr)}};
  write_manifest(out_dir, "tree", config, seed, {"tree.txt", "tree.dot"}, timer);
  std::cout << json{{"nodes", tree.nodes.size()},
                    {"pure", all_leaves_pure(tree)},
                    {"split_features", split_features(tree)}}
                   .dump()
            << "\n";
  return 0;
}

// -------------------------------------------------------------- repro ------

int cmd_repro(AlgorithmId algorithm, std::uint64_t seed, const std::string& dont_care_text,
              double threshold, const TrainConfig& decoder_overrides, bool decoder_flags_used,
              const std::string& out_dir) {
  Timer timer;
  ReproConfig cfg = default_repro_config(algorithm, seed);
  cfg.dont_care = parse_on_off(dont_care_text, "dont-care");
  cfg.logic.threshold = threshold;
  if (decoder_flags_used && cfg.use_decoder) cfg.decoder_cfg = decoder_overrides;
  const auto outcome = repro_run(cfg);
  const auto schema = ConceptSchema::for_algorithm(algorithm);

  write_json_file(out_dir + "/rules.json", to_json(outcome.rules));
  if (outcome.decoder) write_json_file(out_dir + "/model.json", to_json(*outcome.decoder));
  json report{{"algorithm", to_string(algorithm)},
              {"verified", outcome.verified},
              {"graphs_scored", outcome.replay.graphs_scored},
              {"first_divergence", outcome.replay.first_divergence},
              {"metrics", outcome.report.to_json()}};
  write_json_file(out_dir + "/report.json", report);

  json config{{"algorithm", to_string(algorithm)},
              {"dont_care", cfg.dont_care},
              {"threshold", threshold},
              {"train_size", cfg.train_size},
              {"counts", {{"train", cfg.counts.train},
                          {"validation", cfg.counts.validation},
                          {"test", cfg.counts.test}}},
              {"eval_sizes", cfg.eval_sizes},
              {"eval_graphs_per_size", cfg.eval_graphs_per_size},
              {"use_decoder", cfg.use_decoder}};
  if (cfg.use_decoder)
    config["decoder"] = {{"learning_rate", cfg.decoder_cfg.learning_rate},
                         {"batch_size", cfg.decoder_cfg.batch_size},
                         {"epochs", cfg.decoder_cfg.epochs},
                         {"lambda_l1", cfg.decoder_cfg.lambda_l1},
                         {"prune_epoch", cfg.decoder_cfg.prune_epoch
                                             ? json(*cfg.decoder_cfg.prune_epoch)
                                             : json(nullptr)},
                         {"hidden", cfg.decoder_cfg.hidden},
                         {"linear", cfg.decoder_cfg.linear}};
  std::vector<std::string> artifacts{"rules.json", "report.json"};
  if (outcome.decoder) artifacts.push_back("model.json");
  write_manifest(out_dir, "repro", config, seed, artifacts, timer);

  json labels = json::array();
  for (std::size_t l = 0; l < outcome.rules.label_formulas.size(); ++l)
    labels.push_back(
        {{"label", l}, {"text", format_formula(outcome.rules.label_formulas[l], schema)}});
  json summary{{"labels", labels}, {"verified", outcome.verified}};
  if (outcome.rules.termination)
    summary["termination"] = format_rule(*outcome.rules.termination, schema);
  std::cout << summary.dump(2) << "\n";
  return outcome.verified ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Concept-trace rule recovery toolkit"};
  app.require_subcommand(1);

  std::string algorithm_text = "bfs";
  int size = 0;
  std::string counts_text;
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  std::string split = "train";
  std::string traces_path, rules_path, term_path, model_path;
  std::string dont_care_text = "off";
  std::string mode = "formula";
  double noise = 0.0;
  double threshold = 0.5;
  int count = 30;
  int max_depth = 0;
  TrainConfig train_cfg;
  int prune_epoch = -1;

  const auto add_algorithm = [&](CLI::App* cmd) {
    cmd->add_option("--algorithm", algorithm_text, "bfs, coloring, or kruskal")->required();
  };
  const auto add_seed = [&](CLI::App* cmd) {
    cmd->add_option("--seed", seed, "deterministic run seed")->required();
  };
  const auto add_out = [&](CLI::App* cmd) {
    cmd->add_option("--out", out_dir, "output directory (default: out)");
  };

  auto* gen = app.add_subcommand("gen", "generate a seeded graph dataset");
  add_algorithm(gen);
  gen->add_option("--size", size, "nodes per graph (default: per algorithm)");
  gen->add_option("--counts", counts_text, "per-category train:validation:test counts");
  add_seed(gen);
  add_out(gen);

  auto* trace = app.add_subcommand("trace", "run an algorithm over a dataset split");
  add_algorithm(trace);
  trace->add_option("--size", size, "nodes per graph (default: per algorithm)");
  trace->add_option("--counts", counts_text, "per-category train:validation:test counts");
  trace->add_option("--split", split, "train, validation, or test (default: train)");
  add_seed(trace);
  add_out(trace);

  auto* train = app.add_subcommand("train", "train a concept-to-label decoder");
  train->add_option("--traces", traces_path, "trace JSONL file")->required();
  train->add_option("--epochs", train_cfg.epochs, "training epochs");
  train->add_option("--lr", train_cfg.learning_rate, "learning rate");
  train->add_option("--batch", train_cfg.batch_size, "minibatch size");
  train->add_option("--lambda-l1", train_cfg.lambda_l1, "L1 penalty on first-layer rows");
  train->add_option("--prune-epoch", prune_epoch, "epoch at which weak concepts are pruned");
  train->add_option("--hidden", train_cfg.hidden, "hidden width");
  train->add_flag("--linear", train_cfg.linear, "single-layer decoder");
  add_seed(train);
  add_out(train);

  auto* extract = app.add_subcommand("extract", "extract per-label DNF rules from traces");
  extract->add_option("--traces", traces_path, "trace JSONL file")->required();
  extract->add_option("--model", model_path, "decoder model restricting relevant concepts");
  extract->add_option("--threshold", threshold, "binarisation threshold (default 0.5)");
  extract->add_option("--dont-care", dont_care_text,
                      "treat unseen concept rows as free: on or off (default off)");
  add_seed(extract);
  add_out(extract);

  auto* term = app.add_subcommand("term-rule", "enumerate the existential termination rule");
  term->add_option("--traces", traces_path, "trace JSONL file")->required();
  add_seed(term);
  add_out(term);

  auto* exec = app.add_subcommand("exec-rules", "replay an algorithm from rules and verify");
  exec->add_option("--rules", rules_path, "rule set JSON file")->required();
  exec->add_option("--term-rule", term_path, "termination rule JSON file");
  exec->add_option("--size", size, "nodes per generated graph")->required();
  exec->add_option("--count", count, "graphs to verify (default 30)");
  add_seed(exec);
  add_out(exec);

  auto* eval = app.add_subcommand("eval", "score predictions against ground-truth traces");
  eval->add_option("--mode", mode, "formula, decoder, or replay (default formula)");
  eval->add_option("--traces", traces_path, "ground-truth trace JSONL file")->required();
  eval->add_option("--rules", rules_path, "rule set JSON file (formula/replay modes)");
  eval->add_option("--term-rule", term_path, "termination rule JSON file");
  eval->add_option("--model", model_path, "decoder model JSON file (decoder mode)");
  eval->add_option("--noise", noise, "concept flip probability (default 0)");
  add_seed(eval);
  add_out(eval);

  auto* tree = app.add_subcommand("tree", "fit a decision tree on concept rows");
  tree->add_option("--traces", traces_path, "trace JSONL file")->required();
  tree->add_option("--max-depth", max_depth, "depth cap (default: unlimited)");
  add_seed(tree);
  add_out(tree);

  auto* repro = app.add_subcommand("repro", "full pipeline: trace, extract, verify, report");
  add_algorithm(repro);
  repro->add_option("--dont-care", dont_care_text,
                    "treat unseen concept rows as free: on or off (default off)");
  repro->add_option("--threshold", threshold, "binarisation threshold (default 0.5)");
  repro->add_option("--epochs", train_cfg.epochs, "decoder epochs (coloring only)");
  repro->add_option("--lr", train_cfg.learning_rate, "decoder learning rate (coloring only)");
  repro->add_option("--batch", train_cfg.batch_size, "decoder batch size (coloring only)");
  repro->add_option("--lambda-l1", train_cfg.lambda_l1, "decoder L1 penalty (coloring only)");
  repro->add_option("--prune-epoch", prune_epoch, "decoder prune epoch (coloring only)");
  add_seed(repro);
  add_out(repro);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << json{{"error", "usage"}, {"message", e.what()}}.dump() << "\n";
    return 2;
  }

  try {
    if (*gen || *trace || *repro) {
      AlgorithmId algorithm = algorithm_from_string(algorithm_text);
      if (size == 0) size = default_size(algorithm);
      if (*gen) return cmd_gen(algorithm, size, counts_text, seed, out_dir);
      if (*trace) return cmd_trace(algorithm, size, counts_text, seed, split, out_dir);
      TrainConfig overrides = train_cfg;
      overrides.seed = seed;
      const bool decoder_flags_used =
          repro->count("--epochs") || repro->count("--lr") || repro->count("--batch") ||
          repro->count("--lambda-l1") || repro->count("--prune-epoch");
      if (prune_epoch >= 0)
        overrides.prune_epoch = prune_epoch;
      else if (decoder_flags_used)
        overrides.prune_epoch = overrides.epochs / 2;
      return cmd_repro(algorithm, seed, dont_care_text, threshold, overrides, decoder_flags_used,
                       out_dir);
    }
    if (*train) {
      train_cfg.seed = seed;
      if (prune_epoch >= 0) train_cfg.prune_epoch = prune_epoch;
      return cmd_train(traces_path, train_cfg, out_dir);
    }
    if (*extract)
      return cmd_extract(traces_path, model_path, threshold, dont_care_text, seed, out_dir);
    if (*term) return cmd_term_rule(traces_path, seed, out_dir);
    if (*exec) return cmd_exec_rules(rules_path, term_path, size, count, seed, out_dir);
    if (*eval)
      return cmd_eval(mode, traces_path, rules_path, term_path, model_path, noise, seed, out_dir);
    if (*tree) return cmd_tree(traces_path, max_depth, seed, out_dir);
  } catch (const Error& e) {
    std::cerr << e.to_json().dump() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", "internal"}, {"message", e.what()}}.dump() << "\n";
    return 2;
  }
  return 2;
}
