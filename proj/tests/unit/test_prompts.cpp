// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <fstream>

#include <nlohmann/json.hpp>

#include "abo/prompts.hpp"
#include "fixtures.hpp"

using namespace abo;

namespace {
TaskRegistry registry() { return TaskRegistry({{"SIMILAR", "a"}, {"EXPLORE", "b"}, {"SHUFFLE", "c"}}); }
}  // namespace

TEST_CASE("template rendering") {
  CHECK(template_placeholders("{a} and {b} and {a}") == std::vector<std::string>{"a", "b"});
  CHECK(render_template("x={x}; y={y}", {{"x", "1"}, {"y", "{x}"}}) == "x=1; y={x}");
  try {
    render_template("{missing}", {});
    FAIL("expected MissingPlaceholder");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingPlaceholder);
  }
  // JSON examples inside templates are not placeholders.
  CHECK(render_template("{\n  \"candidates\": [\"A\"]\n} {v}", {{"v", "ok"}}) == "{\n  \"candidates\": [\"A\"]\n} ok");
}

TEST_CASE("shipped prompt packs load and render") {
  for (const char* kind : {"peptide", "molecule", "generic"}) {
    CAPTURE(kind);
    auto p = fx::pack(kind);
    CHECK(p.default_tasks.size() == 3);
    ObjectiveSpec obj;
    auto ex = build_explorer_prompt("1.000: AAA\n", "1.000", p, obj);
    CHECK(ex.find("1.000: AAA") != std::string::npos);
    CHECK(ex.find("{C_global}") == std::string::npos);
    auto pl = build_planner_prompt("1.000: AAA\n", "No performance data yet.", "SIMILAR: a", p, obj);
    CHECK(pl.find("No performance data yet.") != std::string::npos);
    TaskEntry t{"SIMILAR", "TASK: keep it close", 0, 0, true};
    auto w = build_worker_prompts(t, canonicalize("KLAKLAK", DomainKind::Peptide), p);
    CHECK(w.system.find("TASK: keep it close") != std::string::npos);
    CHECK(w.user.find("KLAKLAK") != std::string::npos);
  }
}

TEST_CASE("task awareness is appended only when described") {
  auto p = fx::pack("peptide");
  ObjectiveSpec obj;
  const auto plain = build_explorer_prompt("1.000: AAA\n", "1.000", p, obj);
  obj.description = "Minimize hemolysis while keeping MIC low.";
  const auto ta = build_explorer_prompt("1.000: AAA\n", "1.000", p, obj);
  CHECK(plain.find("hemolysis") == std::string::npos);
  CHECK(ta.find("Minimize hemolysis while keeping MIC low.") != std::string::npos);
  CHECK(ta.size() > plain.size());
}

TEST_CASE("candidate parsing") {
  auto ok = parse_candidates("text {\"candidates\": [\"A\", \"B\"]} tail");
  REQUIRE(ok.ok());
  CHECK(*ok == std::vector<std::string>{"A", "B"});
  auto last = parse_candidates("{\"candidates\": [\"A\"]}\n{\"candidates\": [\"Z\"]}");
  CHECK(*last == std::vector<std::string>{"Z"});
  auto bad = parse_candidates("nothing here {oops}");
  REQUIRE_FALSE(bad.ok());
  CHECK(bad.error().code == ErrorCode::NoCandidatesFound);
}

TEST_CASE("planner reply parsing") {
  auto r = registry();
  auto plan = parse_planner_reply(
      "Thinking...\n```json\n{\"NEW_IDEA\": \"TASK: do x\", \"SIMILAR\": \"USE_EXISTING\", \"GHOST\": \"USE_EXISTING\", "
      "\"EXPLORE\": \"TASK: overwrite default\"}\n```",
      r);
  REQUIRE(plan.ok());
  REQUIRE(plan->directives.size() == 3);
  CHECK(plan->directives[0].name == "NEW_IDEA");
  CHECK(plan->directives[0].action == PlannerDirective::Action::Create);
  CHECK(plan->directives[1].name == "SIMILAR");
  CHECK(plan->directives[1].action == PlannerDirective::Action::UseExisting);
  CHECK(plan->directives[2].name == "EXPLORE_V2");
  CHECK(plan->warnings.size() == 1);
  CHECK(plan->warnings[0].find("GHOST") != std::string::npos);

  auto none = parse_planner_reply("{\"tasks\": [1, 2]}", r);
  REQUIRE_FALSE(none.ok());
  CHECK(none.error().code == ErrorCode::NoPlanFound);
}
