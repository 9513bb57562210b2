// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <random>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "abo/oracle.hpp"
#include "abo/process.hpp"
#include "fixtures.hpp"
#include "reference.hpp"

using namespace abo;

namespace {

std::vector<Candidate> peps(const std::vector<std::string>& xs) {
  std::vector<Candidate> out;
  for (const auto& x : xs) out.push_back(canonicalize(x, DomainKind::Peptide));
  return out;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no Error thrown");
  return ErrorCode::Io;
}

DomainSpec peptide() { return make_domain(DomainKind::Peptide, {}); }

}  // namespace

TEST_CASE("motif match equals normalized LCS") {
  std::mt19937_64 rng(4);
  const std::string target = "KLAKLAKKLAKLAK";
  MotifMatchOracle o(target);
  for (int i = 0; i < 300; ++i) {
    auto s = fx::random_string(rng, "KLAGW", 5, 25);
    const double want = static_cast<double>(ref::lcs(s, target)) / static_cast<double>(std::max(s.size(), target.size()));
    REQUIRE(o.evaluate(peps({s}))[0] == doctest::Approx(want).epsilon(1e-12));
  }
  CHECK(lcs_similarity("", "") == 1.0);
}

TEST_CASE("hidden weights oracle is additive and seeded") {
  HiddenWeightsOracle a(std::string(kAminoAcids), 3), b(std::string(kAminoAcids), 3), c(std::string(kAminoAcids), 4);
  auto s = a.evaluate(peps({"KLAKL"}))[0];
  CHECK(s == doctest::Approx(2 * a.weight('K') + 2 * a.weight('L') + a.weight('A')));
  CHECK(s == b.evaluate(peps({"KLAKL"}))[0]);
  CHECK(s != c.evaluate(peps({"KLAKL"}))[0]);
  for (char ch : kAminoAcids) CHECK((a.weight(ch) >= -1.0 && a.weight(ch) <= 1.0));
  HiddenWeightsOracle noisy(std::string(kAminoAcids), 3, 0.5);
  CHECK(noisy.evaluate(peps({"KLAKL"}))[0] == noisy.evaluate(peps({"KLAKL"}))[0]);
}

TEST_CASE("plateau oracle is flat outside its gates") {
  PlateauOracle o("KLAKLAKKLAKLAK", 0.01, 7);
  std::mt19937_64 rng(8);
  int open = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    auto s = fx::random_string(rng, kAminoAcids, 8, 12);
    const double v = o.evaluate(peps({s}))[0];
    if (o.gate_open(s)) {
      ++open;
      CHECK(v > 0.0);
    } else {
      REQUIRE(v == 0.0);
    }
  }
  const double frac = static_cast<double>(open) / n;
  CHECK(frac > 0.003);
  CHECK(frac < 0.03);
}

TEST_CASE("line process and subprocess oracle") {
  auto r = run_line_process("awk '{ print length($0) }'", {"AAA", "KLAKLAK"}, std::chrono::milliseconds(5000));
  CHECK(r.exit_status == 0);
  CHECK(r.lines == std::vector<std::string>{"3", "7"});

  SubprocessOracle ok("awk '{ print length($0) * 0.5 }'", std::chrono::milliseconds(5000));
  auto s = ok.evaluate(peps({"AAAAA", "KLAKLAK"}));
  CHECK(s == std::vector<double>{2.5, 3.5});

  SubprocessOracle short_out("head -n 1 | awk '{ print 1 }'", std::chrono::milliseconds(5000));
  CHECK(code_of([&] { short_out.evaluate(peps({"AAAAA", "CCCCC"})); }) == ErrorCode::OracleFailure);
  SubprocessOracle fails("cat >/dev/null; exit 3", std::chrono::milliseconds(5000));
  CHECK(code_of([&] { fails.evaluate(peps({"AAAAA"})); }) == ErrorCode::OracleFailure);
  SubprocessOracle garbage("awk '{ print \"abc\" }'", std::chrono::milliseconds(5000));
  CHECK(code_of([&] { garbage.evaluate(peps({"AAAAA"})); }) == ErrorCode::OracleFailure);
  SubprocessOracle slow("sleep 5", std::chrono::milliseconds(200));
  CHECK(code_of([&] { slow.evaluate(peps({"AAAAA"})); }) == ErrorCode::Timeout);

  CHECK(parse_score_line(" 1.5e-3 ") == doctest::Approx(0.0015));
  CHECK(code_of([] { parse_score_line("nan"); }) == ErrorCode::OracleFailure);
  CHECK(code_of([] { parse_score_line("1.0x"); }) == ErrorCode::OracleFailure);
}

TEST_CASE("http oracle") {
  httplib::Server srv;
  srv.Post("/score", [](const httplib::Request& rq, httplib::Response& rs) {
    auto j = nlohmann::json::parse(rq.body);
    rs.set_content(nlohmann::json{{"score", static_cast<double>(j["candidate"].get<std::string>().size())}}.dump(),
                   "application/json");
  });
  srv.Post("/broken", [](const httplib::Request&, httplib::Response& rs) { rs.set_content("{}", "application/json"); });
  const int port = srv.bind_to_any_port("127.0.0.1");
  std::thread th([&] { srv.listen_after_bind(); });
  srv.wait_until_ready();
  const auto base = "http://127.0.0.1:" + std::to_string(port);
  HttpOracle o(base + "/score", std::chrono::milliseconds(5000));
  CHECK(o.evaluate(peps({"AAAAA", "KLAKLAK"})) == std::vector<double>{5.0, 7.0});
  HttpOracle b(base + "/broken", std::chrono::milliseconds(5000));
  CHECK(code_of([&] { b.evaluate(peps({"AAAAA"})); }) == ErrorCode::OracleFailure);
  srv.stop();
  th.join();
}

TEST_CASE("harness counts calls and memoizes") {
  auto inner = std::make_shared<MotifMatchOracle>("KLAK");
  OracleHarness h(inner, true);
  h.evaluate(peps({"KLAKK", "GGGGG"}));
  h.evaluate(peps({"KLAKK", "AAAAA"}));
  CHECK(h.calls() == 3);
  CHECK(h.cache_hits() == 1);

  class Bad final : public Oracle {
   public:
    std::vector<double> evaluate(const std::vector<Candidate>& b) override {
      return std::vector<double>(b.size(), std::nan(""));
    }
    std::string name() const override { return "bad"; }
  };
  OracleHarness bad(std::make_shared<Bad>());
  CHECK(code_of([&] { bad.evaluate(peps({"AAAAA"})); }) == ErrorCode::OracleFailure);
}

TEST_CASE("initial data from a file") {
  fx::TempDir dir;
  fx::write_file(dir / "init.txt", "KLAKLAK\n\nklaklak\nXXXX\nGGGGGG\nAAAAAA\nCCCCCC\n");
  OracleHarness o(std::make_shared<MotifMatchOracle>("KLAK"));
  InitSpec spec;
  spec.source = InitSpec::Source::File;
  spec.path = dir / "init.txt";
  spec.count = 4;
  History h;
  Engine rng(1);
  auto rep = load_init(spec, peptide(), o, h, 100, rng);
  // First 4 non-blank lines; the duplicate and the invalid line are skipped.
  CHECK(h.size() == 2);
  CHECK(rep.duplicates == 1);
  CHECK(rep.invalid == 1);
  CHECK(h.records()[1].candidate.canonical == "GGGGGG");

  spec.count = 10;
  History h2;
  CHECK(code_of([&] { load_init(spec, peptide(), o, h2, 100, rng); }) == ErrorCode::InsufficientInit);
}

TEST_CASE("initial data from templates and mutations") {
  OracleHarness o(std::make_shared<MotifMatchOracle>("KLAK"));
  InitSpec spec;
  spec.templates = {"KLAKLAKKLA", "GLFDIVKKVV"};
  spec.count = 30;
  History h;
  Engine rng(2);
  load_init(spec, peptide(), o, h, 100, rng);
  CHECK(h.size() == 30);
  CHECK(h.records()[0].candidate.canonical == "KLAKLAKKLA");
  CHECK(h.records()[1].candidate.canonical == "GLFDIVKKVV");
  for (const auto& r : h.records()) {
    CHECK(r.origin == Origin::init());
    const double d1 = ref::levenshtein(r.candidate.canonical, "KLAKLAKKLA");
    const double d2 = ref::levenshtein(r.candidate.canonical, "GLFDIVKKVV");
    CHECK(std::min(d1, d2) <= 1.0);
  }
  History capped;
  Engine rng2(2);
  load_init(spec, peptide(), o, capped, 12, rng2);
  CHECK(capped.size() == 12);
  Engine e(3);
  auto m = point_mutation("AAAA", "C", e);
  CHECK(m.size() == 4);
  CHECK(std::count(m.begin(), m.end(), 'C') == 1);
}

TEST_CASE("zero-signal resampling") {
  auto plateau = std::make_shared<PlateauOracle>("KLAKLAKKLAKLAK", 0.05, 11);
  OracleHarness o(plateau);
  History h;
  std::mt19937_64 g(5);
  for (int i = 0; i < 5; ++i) {
    std::string s;
    do s = fx::random_string(g, kAminoAcids, 8, 12);
    while (plateau->gate_open(s));
    h.append(canonicalize(s, DomainKind::Peptide), 0.0, Origin::init());
  }
  auto pool = random_string_pool(std::string(kAminoAcids), 8, 12);
  Engine rng(6);
  auto n = zero_signal_resample(h, pool, peptide(), o, 0.0, 10000, rng);
  CHECK(n >= 1);
  CHECK(h.records().back().score > 0.0);
  CHECK(h.records().back().origin == Origin::resampled());
  for (std::size_t i = 5; i + 1 < h.size(); ++i) CHECK(h.records()[i].score == 0.0);

  // Nothing to do when a score already differs from the floor.
  Engine rng2(6);
  CHECK(zero_signal_resample(h, pool, peptide(), o, 0.0, 10000, rng2) == 0);

  History flat;
  flat.append(canonicalize("AAAAAA", DomainKind::Peptide), 0.0, Origin::init());
  struct Flat final : Oracle {
    std::vector<double> evaluate(const std::vector<Candidate>& b) override { return std::vector<double>(b.size(), 0.0); }
    std::string name() const override { return "flat"; }
  };
  auto never = std::make_shared<Flat>();
  OracleHarness on(never);
  Engine rng3(1);
  CHECK(code_of([&] { zero_signal_resample(flat, pool, peptide(), on, 0.0, 20, rng3); }) ==
        ErrorCode::BudgetExhaustedDuringInit);
  CHECK(flat.size() == 20);
}
