// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <random>
#include <set>

#include "abo/context.hpp"
#include "abo/registry.hpp"
#include "fixtures.hpp"
#include "reference.hpp"

using namespace abo;

namespace {

History scored(std::size_t n, std::mt19937_64& rng) {
  History h;
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (std::size_t i = 0; i < n; ++i) h.append(canonicalize("s" + std::to_string(i), DomainKind::Generic), u(rng), Origin::init());
  return h;
}

std::vector<std::size_t> ranks(const GlobalContext& c) {
  std::vector<std::size_t> out;
  for (const auto& e : c.entries) out.push_back(e.rank);
  return out;
}

std::vector<DefaultTask> defaults() { return {{"SIMILAR", "a"}, {"EXPLORE", "b"}, {"SHUFFLE", "c"}}; }

}  // namespace

TEST_CASE("coverage sampling matches stride arithmetic") {
  std::mt19937_64 rng(3);
  ContextSpec spec;
  Engine e(1);
  SUBCASE("worked example: 100 records, offset 0") {
    auto h = scored(100, rng);
    CHECK(coverage_stride(100, spec) == 7);
    auto c = coverage_sample(h, spec, Direction::Maximize, e, 0);
    CHECK(ranks(c) == ref::coverage_ranks(100, 20, 8, 0));
    CHECK(ranks(c)[8] == 9);
    CHECK(ranks(c)[9] == 16);
    CHECK(ranks(c)[10] == 23);
  }
  SUBCASE("every size and offset") {
    for (std::size_t n : {1u, 5u, 20u, 21u, 25u, 33u, 100u, 257u, 500u}) {
      auto h = scored(n, rng);
      const auto stride = coverage_stride(n, spec);
      for (std::size_t off = 0; off < std::max<std::size_t>(stride, 1); ++off) {
        auto c = coverage_sample(h, spec, Direction::Minimize, e, stride ? std::optional(off) : std::nullopt);
        REQUIRE(ranks(c) == ref::coverage_ranks(n, 20, 8, stride ? off : 0));
      }
    }
  }
  SUBCASE("entries are sorted best first and carry the right records") {
    auto h = scored(60, rng);
    auto c = coverage_sample(h, spec, Direction::Maximize, e);
    const auto order = rank_order(h, Direction::Maximize);
    for (const auto& en : c.entries) CHECK(en.record.eval_index == h.records()[order[en.rank - 1]].eval_index);
    for (std::size_t i = 1; i < c.entries.size(); ++i) CHECK(c.entries[i - 1].record.score >= c.entries[i].record.score);
  }
  SUBCASE("offset out of range") {
    auto h = scored(100, rng);
    CHECK_THROWS(coverage_sample(h, spec, Direction::Maximize, e, 7));
  }
  CHECK_THROWS_AS(coverage_sample(History{}, spec, Direction::Maximize, e), Error);
}

TEST_CASE("context rendering") {
  auto h = fx::history({{"AAA", 0.5}, {"BBB", 0.00012}});
  Engine e(0);
  auto text = render_context(coverage_sample(h, ContextSpec{}, Direction::Maximize, e));
  CHECK(text == "0.5000: AAA\n1.200e-04: BBB");
  ContextSpec bad{5, 8};
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("registry outcomes, stats and summary") {
  TaskRegistry r(defaults(), 5);
  CHECK(render_performance_stats(r) == "No performance data yet.");
  r.record_outcome("EXPLORE", true);
  r.record_outcome("EXPLORE", false);
  r.record_outcome("EXPLORE", false);
  r.record_outcome("SIMILAR", true);
  CHECK_THROWS_AS(r.record_outcome("NOPE", true), Error);
  CHECK(render_performance_stats(r) == "EXPLORE: 1/3 (33%)\nSIMILAR: 1/1 (100%)\nSHUFFLE: 0/0 (0%)");
  CHECK(rate_percent(1, 8) == 13);  // 12.5 rounds up
  CHECK(rate_percent(0, 0) == 0);

  auto add = r.add_task("flip segment", std::string(150, 'x') + "\nsecond line");
  CHECK(add.name == "FLIP_SEGMENT");
  const auto summary = render_task_summary(r);
  CHECK(summary.find("FLIP_SEGMENT: " + std::string(100, 'x') + "...") != std::string::npos);
  CHECK(summary.find("second line") == std::string::npos);
}

TEST_CASE("registry add, replace, rename and evict") {
  TaskRegistry r(defaults(), 5);
  CHECK(r.add_task("SIMILAR", "mine").name == "SIMILAR_V2");
  auto a = r.add_task("A", "t1");
  CHECK_FALSE(a.replaced);
  CHECK(r.size() == 5);
  auto again = r.add_task("A", "t2");
  CHECK(again.replaced);
  CHECK(r.find("A")->text == "t2");
  CHECK(r.size() == 5);

  // Full: the non-default with the lowest rate goes; ties by more attempts,
  // then the smaller name.
  r.record_outcome("A", true);
  r.record_outcome("SIMILAR_V2", false);
  auto b = r.add_task("B", "t");
  REQUIRE(b.evicted.has_value());
  CHECK(*b.evicted == "SIMILAR_V2");
  CHECK(r.size() == 5);
  CHECK(r.contains("SIMILAR"));

  // Equal rates (0%): more attempts evicted first.
  r.record_outcome("B", false);
  r.record_outcome("B", false);
  r.record_outcome("A", false);
  r.record_outcome("A", false);
  r.record_outcome("A", false);  // A = 1/4, B = 0/2
  CHECK(*r.add_task("C", "t").evicted == "B");
  // C (0/0) vs A (1/4): C has the lower rate.
  CHECK(*r.add_task("D", "t").evicted == "C");
  // D (0/0) and A: D again; with two 0/0 entries the smaller name goes.
  r.record_outcome("A", false);
  TaskRegistry r2(defaults(), 5);
  r2.add_task("ZED", "t");
  r2.add_task("ALPHA", "t");
  CHECK(*r2.add_task("NEW", "t").evicted == "ALPHA");
  for (const auto& e : r.entries())
    if (e.is_default) CHECK(r.is_default_name(e.name));
}

TEST_CASE("registry serialization round-trips") {
  TaskRegistry r(defaults(), 6);
  r.add_task("X", "text");
  r.record_outcome("X", true);
  r.record_outcome("SHUFFLE", false);
  auto back = TaskRegistry::from_json(r.to_json(), 6);
  CHECK(back == r);
  CHECK(normalize_task_name("  swap-pairs!  ") == "SWAP_PAIRS");
}
