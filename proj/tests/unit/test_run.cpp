// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <nlohmann/json.hpp>

#include "abo/config.hpp"
#include "abo/run.hpp"
#include "fixtures.hpp"

using namespace abo;
using nlohmann::json;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no Error thrown");
  return ErrorCode::Io;
}

json small_run(const fx::TempDir& dir, std::int64_t budget) {
  return {{"output_dir", (dir / "run").string()},
          {"objective", {{"direction", "maximize"}, {"budget", budget}}},
          {"oracle", {{"name", "motif-match"}, {"params", {{"target", "KLAKLAKKLAKLAK"}}}}},
          {"init", {{"count", 20}}}};
}

}  // namespace

TEST_CASE("default configuration") {
  auto cfg = config_from_tree(json::object(), ".");
  CHECK(cfg.loop.context.context_size == 20);
  CHECK(cfg.loop.context.top_k == 8);
  CHECK(cfg.loop.max_fails == 3);
  CHECK(cfg.loop.seeds == 2);
  CHECK(cfg.loop.registry_capacity == 20);
  CHECK(cfg.domain.seed_threshold == 0.75);
  CHECK(cfg.init.count == 100);
  CHECK(cfg.objective.budget == 20000);
  CHECK(cfg.loop.temperature[2] == 0.8);
  auto mol = config_from_tree({{"domain", {{"kind", "smiles"}}}}, ".");
  CHECK(mol.domain.seed_threshold == 0.5);
}

TEST_CASE("overrides and strict keys") {
  auto cfg = config_from_tree(json::object(), ".", {{"loop.max_fails", "5"}, {"objective.description", "be short"}});
  CHECK(cfg.loop.max_fails == 5);
  CHECK(cfg.objective.description == "be short");
  auto pf = config_from_tree(json::object(), ".", {{"objective.portfolio.size", "4"}});
  REQUIRE(pf.objective.portfolio.has_value());
  CHECK(pf.objective.portfolio->size == 4);
  CHECK(pf.objective.portfolio->beta == 0.75);

  CHECK(code_of([] { config_from_tree({{"loop", {{"max_fail", 3}}}}, "."); }) == ErrorCode::InvalidConfig);
  CHECK(code_of([] { config_from_tree(json::object(), ".", {{"loop.nope", "1"}}); }) == ErrorCode::InvalidConfig);
  CHECK(code_of([] { config_from_tree({{"loop", {{"max_fails", "three"}}}}, "."); }) == ErrorCode::InvalidConfig);
  CHECK(code_of([] { config_from_tree({{"objective", {{"budget", 0}}}}, "."); }) == ErrorCode::InvalidConfig);
  CHECK(code_of([] { config_from_tree({{"objective", {{"portfolio", {{"sise", 3}}}}}}, "."); }) ==
        ErrorCode::InvalidConfig);
  CHECK(code_of([] {
          config_from_tree({{"backends", {{"default", {{"kind", "http"}, {"api_key", "sk-123"}}}}}}, ".");
          make_backend(config_from_tree({{"backends", {{"default", {{"kind", "http"}, {"api_key", "sk-123"}}}}}}, "."));
        }) == ErrorCode::InvalidConfig);
  CHECK(parse_override_args({"--a.b=1"}) == std::vector<std::pair<std::string, std::string>>{{"a.b", "1"}});
  CHECK(code_of([] { parse_override_args({"a.b=1"}); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("relative paths resolve against the config file") {
  fx::TempDir dir;
  fx::write_file(dir / "sub" / "init.txt", "KLAKLAK\nGGGGGG\n");
  fx::write_file(dir / "sub" / "cfg.json", R"({"init": {"source": "file", "path": "init.txt", "count": 2}})");
  auto cfg = load_config(dir / "sub" / "cfg.json");
  CHECK(cfg.init.path == dir / "sub" / "init.txt");
  fx::write_file(dir / "bad.json", "{");
  CHECK(code_of([&] { load_config(dir / "bad.json"); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("run directory artifacts, resume and exports") {
  fx::TempDir dir;
  auto cfg = config_from_tree(small_run(dir, 200), dir.path());
  auto out = run_experiment(cfg);
  CHECK(out.stop == StopReason::BudgetExhausted);
  CHECK(out.evals_used == 200);
  const auto run = dir / "run";
  for (const char* f : {"events.jsonl", "history.jsonl", "checkpoint.json", "summary.json", "checkpoints/round_0000.json"})
    CHECK_MESSAGE(std::filesystem::exists(run / f), f);
  auto events = read_events(run / "events.jsonl");
  CHECK(history_from_events(events).size() == 200);
  auto summary = json::parse(fx::read_file(run / "summary.json"));
  CHECK(summary["stop"] == "budget_exhausted");
  CHECK(summary["tokens"]["per_role"]["worker"]["calls"].get<int>() > 0);

  // A fresh run refuses to overwrite; resuming a finished run is a no-op.
  CHECK(code_of([&] { run_experiment(cfg); }) == ErrorCode::InvalidConfig);
  CHECK(resume_experiment(run).already_finished);

  auto csv = curve_csv(read_checkpoint(run).history, cfg.objective, cfg.domain.distance);
  CHECK(csv.rfind("eval_index,best_so_far\n1,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 201);
  CHECK(token_report_for(run)["total"]["calls"].get<int>() > 0);
  CHECK(code_of([&] { portfolio_report(run); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("corrupt or truncated logs are detected on resume") {
  fx::TempDir dir;
  auto tree = small_run(dir, 150);
  tree["debug"] = {{"interrupt_after_calls", 3}};
  auto out = run_experiment(config_from_tree(tree, dir.path()));
  REQUIRE(out.interrupted);
  const auto run = dir / "run";
  const auto text = fx::read_file(run / "events.jsonl");
  SUBCASE("event log shorter than the checkpoint") {
    fx::write_file(run / "events.jsonl", text.substr(0, text.find('\n') + 1));
    CHECK(code_of([&] { resume_experiment(run); }) == ErrorCode::CorruptCheckpoint);
  }
  SUBCASE("garbage checkpoint") {
    fx::write_file(run / "checkpoint.json", "{\"round\": 1}");
    CHECK(code_of([&] { resume_experiment(run); }) == ErrorCode::CorruptCheckpoint);
  }
  SUBCASE("intact run resumes to completion") {
    auto res = resume_experiment(run);
    CHECK_FALSE(res.interrupted);
    CHECK(res.evals_used == 150);
  }
}

TEST_CASE("portfolio runs export their portfolio") {
  fx::TempDir dir;
  auto tree = small_run(dir, 150);
  tree["objective"]["portfolio"] = {{"size", 3}, {"beta", 0.5}};
  run_experiment(config_from_tree(tree, dir.path()));
  auto rep = portfolio_report(dir / "run");
  CHECK(rep["size"] == 3);
  CHECK(rep["members"].size() == 3);
  auto c = curve_csv(read_checkpoint(dir / "run").history, config_from_tree(tree, dir.path()).objective,
                     make_distance("normalized_edit"));
  CHECK(c.rfind("eval_index,best_so_far,portfolio_agg,portfolio_size,portfolio_complete\n", 0) == 0);
}
