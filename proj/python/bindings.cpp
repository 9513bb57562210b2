// SPDX-License-Identifier: Apache-2.0
//
// Python bindings. JSON values cross the boundary as their text form and
// are decoded on the Python side.
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "abo/config.hpp"
#include "abo/distance.hpp"
#include "abo/diversity.hpp"
#include "abo/filter.hpp"
#include "abo/oracle.hpp"
#include "abo/prompts.hpp"
#include "abo/run.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

using Overrides = std::vector<std::pair<std::string, std::string>>;

Overrides to_overrides(const std::map<std::string, std::string>& m) { return {m.begin(), m.end()}; }

json outcome_json(const abo::RunOutcome& o) {
  json j = {{"stop", o.interrupted ? "interrupted" : std::string(abo::to_string(o.stop))},
            {"already_finished", o.already_finished},
            {"rounds", o.rounds},
            {"evals_used", o.evals_used},
            {"best_score", o.best_score},
            {"output_dir", o.output_dir.string()}};
  j["portfolio_agg"] = o.portfolio_agg ? json(*o.portfolio_agg) : json(nullptr);
  return j;
}

abo::History history_from_pairs(const std::vector<std::pair<std::string, double>>& items) {
  abo::History h;
  for (const auto& [c, s] : items) h.append(abo::canonicalize(c, abo::DomainKind::Generic), s, abo::Origin::init());
  return h;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Agentic black-box sequence optimizer (C++ core)";

  static py::exception<abo::Error> exc(m, "AboError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const abo::Error& e) {
      py::set_error(exc, e.what());
    }
  });

  m.def("canonicalize", [](const std::string& raw, const std::string& kind) {
    return abo::canonicalize(raw, abo::parse_domain_kind(kind)).canonical;
  }, py::arg("raw"), py::arg("kind") = "peptide");

  m.def("levenshtein", [](const std::string& a, const std::string& b) { return abo::levenshtein(a, b); });
  m.def("normalized_edit_distance",
        [](const std::string& a, const std::string& b) { return abo::normalized_edit_distance(a, b); });
  m.def("similarity", [](const std::string& a, const std::string& b) { return abo::similarity(a, b); });
  m.def("format_score", &abo::format_score);

  m.def("parse_candidates", [](const std::string& reply) {
    auto r = abo::parse_candidates(reply);
    if (!r.ok()) throw abo::Error(r.error().code, r.error().message);
    return *r;
  }, "Candidate strings from an agent reply; raises AboError when none are found.");

  m.def("validate", [](const std::string& raw, const std::string& kind, std::size_t min_len, std::size_t max_len) {
    auto d = abo::make_domain(abo::parse_domain_kind(kind), {});
    d.min_length = min_len;
    d.max_length = max_len;
    return abo::validate(raw, d).has_value();
  }, py::arg("raw"), py::arg("kind") = "peptide", py::arg("min_length") = 5, py::arg("max_length") = 60);

  m.def("select_diverse_seeds",
        [](const std::vector<std::pair<std::string, double>>& items, std::size_t count, double threshold,
           const std::string& direction) {
          auto h = history_from_pairs(items);
          auto seeds = abo::select_diverse_seeds(h, count, threshold, abo::make_distance("normalized_edit"),
                                                 abo::parse_direction(direction));
          std::vector<std::pair<std::string, double>> out;
          for (const auto& s : seeds) out.emplace_back(s.candidate.canonical, s.score);
          return out;
        },
        py::arg("items"), py::arg("count"), py::arg("threshold"), py::arg("direction") = "maximize");

  m.def("best_portfolio",
        [](const std::vector<std::pair<std::string, double>>& items, int size, double beta,
           const std::string& direction) {
          auto h = history_from_pairs(items);
          abo::PortfolioSpec spec;
          spec.size = size;
          spec.beta = beta;
          auto p = abo::best_portfolio_greedy(h, spec, abo::make_distance("normalized_edit"),
                                              abo::parse_direction(direction));
          return abo::portfolio_to_json(p).dump();
        },
        py::arg("items"), py::arg("size"), py::arg("beta"), py::arg("direction") = "maximize");

  m.def("synthetic_scores", [](const std::string& config_json, const std::vector<std::string>& candidates) {
    auto cfg = abo::config_from_tree(json::parse(config_json), std::filesystem::current_path());
    abo::OracleHarness harness(abo::make_oracle(cfg), false);
    std::vector<abo::Candidate> batch;
    for (const auto& c : candidates) batch.push_back(abo::canonicalize(c, cfg.domain.kind));
    return harness.evaluate(batch);
  }, "Scores candidates with the oracle described by a config (JSON text).");

  m.def("merged_config", [](const std::string& path, const std::map<std::string, std::string>& overrides) {
    return abo::load_config(path, to_overrides(overrides)).tree.dump();
  });
  m.def("default_config", [] { return abo::default_config_tree().dump(); });

  m.def("run", [](const std::string& path, const std::map<std::string, std::string>& overrides) {
    auto cfg = abo::load_config(path, to_overrides(overrides));
    py::gil_scoped_release release;
    return outcome_json(abo::run_experiment(cfg)).dump();
  });
  m.def("resume", [](const std::string& checkpoint, const std::map<std::string, std::string>& overrides) {
    py::gil_scoped_release release;
    return outcome_json(abo::resume_experiment(checkpoint, to_overrides(overrides))).dump();
  });

  m.def("curve_csv", [](const std::string& run) {
    auto c = abo::read_checkpoint(run);
    auto cfg = abo::config_from_tree(c.config, c.base_dir);
    return abo::curve_csv(c.history, cfg.objective, cfg.domain.distance);
  });
  m.def("portfolio_report", [](const std::string& run) { return abo::portfolio_report(run).dump(); });
  m.def("token_report", [](const std::string& run) { return abo::token_report_for(run).dump(); });
}
