// Serialization round-trips, file helpers, trace comparison, and the
// end-to-end reproduction pipeline at desk scale.
#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <crules/algoexec.hpp>
#include <crules/decoder.hpp>
#include <crules/extract.hpp>
#include <crules/graphgen.hpp>
#include <crules/io.hpp>
#include <crules/pipeline.hpp>

using namespace crules;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("crules_tests_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<Trace> bfs_traces_for_rules() {
  std::vector<Graph> graphs;
  for (std::uint64_t seed : {1, 2})
    graphs.push_back(generate_prepared(AlgorithmId::Bfs, GraphCategory::Tree, 12, seed));
  return trace_graphs(AlgorithmId::Bfs, graphs, 7);
}

}  // namespace

TEST_CASE("graph JSON round-trips for every annotation kind") {
  const Graph bfs_g = generate_prepared(AlgorithmId::Bfs, GraphCategory::Community4, 16, 3);
  const Graph col_g = generate_prepared(AlgorithmId::Coloring, GraphCategory::FixedDegree5, 12, 3);
  const Graph mst_g = generate_prepared(AlgorithmId::Kruskal, GraphCategory::Grid2D, 8, 3);

  for (const Graph& g : {bfs_g, col_g, mst_g}) {
    const auto j = to_json(g);
    const Graph back = graph_from_json(j);
    CHECK(to_json(back).dump() == j.dump());
    CHECK(back.node_count == g.node_count);
    CHECK(back.edges == g.edges);
    CHECK(back.priorities == g.priorities);
    CHECK(back.weights == g.weights);
    CHECK(back.has_self_loops == g.has_self_loops);
    CHECK(back.seed == g.seed);
  }

  const auto jb = to_json(bfs_g);
  CHECK(jb.at("category").get<std::string>() == "community4");
  CHECK(jb.at("self_loops").get<bool>());
  CHECK(jb.at("priorities").is_null());
  CHECK(jb.at("weights").is_null());
  CHECK(to_json(col_g).at("priorities").is_array());
  CHECK(to_json(mst_g).at("weights").is_array());
}

TEST_CASE("graph JSON rejects malformed input") {
  auto j = to_json(generate_graph(GraphCategory::Tree, 6, 1));
  j.erase("edges");
  CHECK_THROWS_AS(graph_from_json(j), Error);
  auto j2 = to_json(generate_graph(GraphCategory::Tree, 6, 1));
  j2["category"] = "moebius";
  CHECK_THROWS_AS(graph_from_json(j2), Error);
}

TEST_CASE("trace JSON round-trips and validates bits") {
  const Graph g = generate_prepared(AlgorithmId::Bfs, GraphCategory::Tree, 12, 1);
  const Trace trace = run_trace(AlgorithmId::Bfs, g, derive_source(g, 7, 0));
  const auto j = to_json(trace);
  CHECK(j.at("algorithm").get<std::string>() == "bfs");
  CHECK(j.at("source").is_number_integer());
  REQUIRE(!j.at("steps").empty());
  const auto& s0 = j.at("steps").at(0);
  CHECK(s0.at("t").get<int>() == 1);
  CHECK((s0.at("continue").get<int>() == 0 || s0.at("continue").get<int>() == 1));

  const Trace back = trace_from_json(j);
  CHECK(to_json(back).dump() == j.dump());
  const auto cmp = compare_traces(back, trace);
  CHECK(cmp.equal);
  CHECK(cmp.divergence.is_null());

  // A coloring trace has no source.
  const Graph cg = generate_prepared(AlgorithmId::Coloring, GraphCategory::FixedDegree5, 12, 1);
  const Trace ct = run_trace(AlgorithmId::Coloring, cg, std::nullopt);
  const auto cj = to_json(ct);
  CHECK(cj.at("source").is_null());
  CHECK(to_json(trace_from_json(cj)).dump() == cj.dump());

  auto bad = j;
  bad["steps"][0]["concepts"][0][0] = 2;
  try {
    trace_from_json(bad);
    FAIL("expected malformed-trace-json");
  } catch (const Error& e) {
    CHECK(e.code() == "malformed-trace-json");
  }
}

TEST_CASE("decoder model JSON round-trips and checks shapes") {
  LabeledConceptSet data;
  data.algorithm = AlgorithmId::Bfs;
  data.width = 2;
  data.label_count = 2;
  data.concepts = {{0, 0}, {0, 1}, {1, 0}, {1, 1}};
  data.labels = {0, 1, 1, 1};

  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.batch_size = 4;
  cfg.seed = 3;
  cfg.hidden = 3;
  const DecoderModel model = train_decoder(data, cfg);

  const auto j = to_json(model);
  CHECK(j.at("schema").get<std::string>() == "bfs");
  CHECK(j.at("W1").size() == 2);
  CHECK(j.at("W2").is_array());
  const DecoderModel back = model_from_json(j);
  CHECK(to_json(back).dump() == j.dump());
  for (const auto& row : data.concepts)
    CHECK(predict_label(back, row) == predict_label(model, row));

  // Linear models serialize W2/b2 as null and come back linear.
  TrainConfig lin = cfg;
  lin.linear = true;
  const DecoderModel lmodel = train_decoder(data, lin);
  const auto lj = to_json(lmodel);
  CHECK(lj.at("W2").is_null());
  const DecoderModel lback = model_from_json(lj);
  CHECK(lback.linear);
  CHECK(to_json(lback).dump() == lj.dump());

  auto bad = j;
  bad["W1"].erase(1);  // row count no longer matches the schema width
  try {
    model_from_json(bad);
    FAIL("expected malformed-model-json");
  } catch (const Error& e) {
    CHECK(e.code() == "malformed-model-json");
  }
}

TEST_CASE("rule set JSON round-trips with termination and without") {
  const RuleSet rules = build_ruleset(bfs_traces_for_rules());
  REQUIRE(rules.label_formulas.size() == 2);
  REQUIRE(rules.termination.has_value());

  const auto j = to_json(rules);
  CHECK(j.at("algorithm").get<std::string>() == "bfs");
  CHECK(j.at("concepts") == nlohmann::json({"hasBeenVisited", "hasVisitedNeighbours"}));
  REQUIRE(j.at("labels").size() == 2);
  CHECK(j.at("labels").at(0).at("label").get<int>() == 0);
  CHECK(j.at("labels").at(0).at("text").is_string());
  CHECK(j.at("termination").at("text").is_string());
  const RuleSet back = ruleset_from_json(j);
  CHECK(to_json(back).dump() == j.dump());

  std::vector<Graph> kgraphs;
  for (std::uint64_t seed : {1, 2, 3})
    kgraphs.push_back(generate_prepared(AlgorithmId::Kruskal, GraphCategory::Grid2D, 8, seed));
  const RuleSet krules = build_ruleset(trace_graphs(AlgorithmId::Kruskal, kgraphs, 7));
  CHECK(!krules.termination.has_value());
  const auto kj = to_json(krules);
  CHECK(kj.at("termination").is_null());
  const RuleSet kback = ruleset_from_json(kj);
  CHECK(!kback.termination.has_value());
  CHECK(to_json(kback).dump() == kj.dump());

  auto bad = j;
  bad["labels"][0]["label"] = 9;
  try {
    ruleset_from_json(bad);
    FAIL("expected malformed-rules-json");
  } catch (const Error& e) {
    CHECK(e.code() == "malformed-rules-json");
  }
}

TEST_CASE("build_ruleset rejects empty and contradictory corpora") {
  CHECK_THROWS_AS(build_ruleset({}), Error);

  // Two one-step traces with identical stop-state concepts but opposite
  // continue flags leave no existential rule consistent with the corpus.
  StepRecord go;
  go.t = 1;
  go.concepts = {{1, 1}};
  go.post_concepts = {{1, 1}};
  go.outputs = {1};
  go.continue_flag = true;
  StepRecord stop = go;
  stop.continue_flag = false;
  Trace a;
  a.algorithm = AlgorithmId::Bfs;
  a.graph = generate_prepared(AlgorithmId::Bfs, GraphCategory::Tree, 4, 1);
  a.source = 0;
  a.steps = {go, stop};
  try {
    build_ruleset({a});
    FAIL("expected no-termination-rule");
  } catch (const Error& e) {
    CHECK(e.code() == "no-termination-rule");
  }
}

TEST_CASE("atomic JSON file helpers write durable, parseable files") {
  const fs::path dir = fresh_dir("io");

  atomic_write_file(dir / "plain.txt", "payload\n");
  CHECK(slurp(dir / "plain.txt") == "payload\n");
  CHECK(!fs::exists(dir / "plain.txt.tmp"));

  // Overwrite goes through the same rename path.
  atomic_write_file(dir / "plain.txt", "second\n");
  CHECK(slurp(dir / "plain.txt") == "second\n");

  // Parent directories are created on demand.
  atomic_write_file(dir / "nested" / "deep" / "x.txt", "ok");
  CHECK(slurp(dir / "nested" / "deep" / "x.txt") == "ok");

  const nlohmann::json j{{"alpha", 1}, {"beta", {1, 2, 3}}};
  write_json_file(dir / "doc.json", j);
  const std::string text = slurp(dir / "doc.json");
  CHECK(text == j.dump(2) + "\n");
  CHECK(read_json_file(dir / "doc.json") == j);

  try {
    read_json_file(dir / "missing.json");
    FAIL("expected io-error");
  } catch (const Error& e) {
    CHECK(e.code() == "io-error");
  }

  atomic_write_file(dir / "garbage.json", "{not json");
  try {
    read_json_file(dir / "garbage.json");
    FAIL("expected malformed-json");
  } catch (const Error& e) {
    CHECK(e.code() == "malformed-json");
    CHECK(e.details().at("path").get<std::string>() == (dir / "garbage.json").string());
  }
}

TEST_CASE("JSONL files round-trip, skip blank lines, and report bad lines") {
  const fs::path dir = fresh_dir("jsonl");

  const std::vector<nlohmann::json> records = {
      {{"id", 0}}, {{"id", 1}}, {{"id", 2}}};
  write_jsonl_file(dir / "rows.jsonl", records);
  const std::string text = slurp(dir / "rows.jsonl");
  CHECK(std::count(text.begin(), text.end(), '\n') == 3);
  CHECK(read_jsonl_file(dir / "rows.jsonl") == records);

  atomic_write_file(dir / "gaps.jsonl", "{\"id\":0}\n\n\n{\"id\":1}\n\n");
  const auto parsed = read_jsonl_file(dir / "gaps.jsonl");
  REQUIRE(parsed.size() == 2);
  CHECK(parsed[1].at("id").get<int>() == 1);

  atomic_write_file(dir / "bad.jsonl", "{\"id\":0}\n{oops\n");
  try {
    read_jsonl_file(dir / "bad.jsonl");
    FAIL("expected malformed-json");
  } catch (const Error& e) {
    CHECK(e.code() == "malformed-json");
    CHECK(e.details().at("line").get<int>() == 2);
  }
}

TEST_CASE("compare_traces pinpoints the first divergence") {
  const Graph g = generate_prepared(AlgorithmId::Bfs, GraphCategory::Tree, 12, 5);
  const Trace truth = run_trace(AlgorithmId::Bfs, g, 0);
  REQUIRE(truth.steps.size() >= 2);

  Trace wrong_output = truth;
  wrong_output.steps[1].outputs[3] = 1 - wrong_output.steps[1].outputs[3];
  auto cmp = compare_traces(wrong_output, truth);
  CHECK(!cmp.equal);
  CHECK(cmp.divergence.at("step").get<int>() == truth.steps[1].t);
  CHECK(cmp.divergence.at("field").get<std::string>() == "outputs");
  CHECK(cmp.divergence.at("detail").at("unit").get<int>() == 3);

  Trace wrong_flag = truth;
  wrong_flag.steps.back().continue_flag = true;
  cmp = compare_traces(wrong_flag, truth);
  CHECK(!cmp.equal);
  CHECK(cmp.divergence.at("field").get<std::string>() == "continue");

  Trace wrong_concepts = truth;
  wrong_concepts.steps[0].post_concepts[0][0] =
      1 - wrong_concepts.steps[0].post_concepts[0][0];
  cmp = compare_traces(wrong_concepts, truth);
  CHECK(!cmp.equal);
  CHECK(cmp.divergence.at("field").get<std::string>() == "post_concepts");

  Trace truncated = truth;
  truncated.steps.pop_back();
  cmp = compare_traces(truncated, truth);
  CHECK(!cmp.equal);
  CHECK(cmp.divergence.at("field").get<std::string>() == "length");
  CHECK(cmp.divergence.at("step").get<int>() ==
        static_cast<int>(truncated.steps.size()) + 1);
}

TEST_CASE("trace_graphs derives sources deterministically") {
  std::vector<Graph> graphs;
  for (std::uint64_t seed : {1, 2, 3})
    graphs.push_back(generate_prepared(AlgorithmId::Bfs, GraphCategory::ErdosRenyi, 12, seed));

  const auto a = trace_graphs(AlgorithmId::Bfs, graphs, 7);
  const auto b = trace_graphs(AlgorithmId::Bfs, graphs, 7);
  REQUIRE(a.size() == 3);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(to_json(a[i]).dump() == to_json(b[i]).dump());
    REQUIRE(a[i].source.has_value());
    CHECK(*a[i].source >= 0);
    CHECK(*a[i].source < graphs[i].node_count);
    CHECK(*a[i].source == derive_source(graphs[i], 7, i));
  }

  const auto coloring_graph =
      generate_prepared(AlgorithmId::Coloring, GraphCategory::FixedDegree5, 12, 1);
  const auto c = trace_graphs(AlgorithmId::Coloring, {coloring_graph}, 7);
  CHECK(!c.front().source.has_value());
}

TEST_CASE("desk-scale reproduction runs verify and are bit-for-bit repeatable") {
  ReproConfig cfg;
  cfg.algorithm = AlgorithmId::Bfs;
  cfg.seed = 99;
  cfg.train_size = 12;
  cfg.counts = {2, 1, 1};
  cfg.eval_sizes = {12};
  cfg.eval_graphs_per_size = 4;

  const ReproOutcome first = repro_run(cfg);
  const ReproOutcome second = repro_run(cfg);

  CHECK(first.verified);
  CHECK(first.replay.all_equal);
  CHECK(first.replay.graphs_scored == 4);
  CHECK(!first.decoder.has_value());
  CHECK(to_json(first.rules).dump() == to_json(second.rules).dump());
  CHECK(first.report.to_json().dump() == second.report.to_json().dump());

  // The recovered transition rules are the known closed forms.
  const auto schema = ConceptSchema::for_algorithm(AlgorithmId::Bfs);
  CHECK(format_formula(first.rules.label_formulas[0], schema) ==
        "¬hasBeenVisited(n) ∧ ¬hasVisitedNeighbours(n)");
  CHECK(format_formula(first.rules.label_formulas[1], schema) == "hasVisitedNeighbours(n)");

  // Replay metrics for an exact reproduction sit at 1 everywhere.
  const auto rj = first.report.to_json();
  CHECK(rj.at("formula_mean_step_acc").at("12").at("mean").get<double>() ==
        Catch::Approx(1.0));
  CHECK(rj.at("formula_last_step_acc").at("12").at("mean").get<double>() ==
        Catch::Approx(1.0));
  CHECK(rj.at("formula_term_acc").at("12").at("mean").get<double>() == Catch::Approx(1.0));
}
