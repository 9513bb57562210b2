// SPDX-License-Identifier: Apache-2.0
//
// abo: command-line front end.
//
// Exit codes: 0 success, 1 runtime error, 2 usage error, 130 interrupted.
#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "abo/config.hpp"
#include "abo/run.hpp"

namespace {

constexpr int kExitError = 1;
constexpr int kExitUsage = 2;
constexpr int kExitInterrupted = 130;

void write_text(const std::string& out, const std::string& text) {
  if (out.empty() || out == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(out, std::ios::trunc);
  f << text;
  if (!f) throw abo::Error(abo::ErrorCode::Io, "cannot write " + out);
}

int report(const abo::RunOutcome& o) {
  if (o.already_finished) {
    std::printf("run already finished: %d rounds, %lld evaluations\n", o.rounds, static_cast<long long>(o.evals_used));
    return 0;
  }
  std::printf("%s after %d rounds, %lld evaluations, best %s", o.interrupted ? "interrupted" : std::string(abo::to_string(o.stop)).c_str(),
              o.rounds, static_cast<long long>(o.evals_used), abo::format_score(o.best_score).c_str());
  if (o.portfolio_agg) std::printf(", portfolio %s", abo::format_score(*o.portfolio_agg).c_str());
  std::printf("\noutput: %s\n", o.output_dir.string().c_str());
  return o.interrupted ? kExitInterrupted : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical agentic black-box sequence optimizer"};
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error, off")->capture_default_str();

  std::string config_path, output_dir, run_path, out_path;
  std::int64_t seed = -1;
  bool as_json = false;

  auto* run = app.add_subcommand("run", "Start a run from a config file; extra --a.b=value arguments override keys");
  run->add_option("config", config_path, "JSON config file")->required()->check(CLI::ExistingFile);
  run->add_option("-o,--output-dir", output_dir, "Run directory (overrides output_dir)");
  run->add_option("--seed", seed, "Root seed (overrides seed)");
  run->allow_extras();

  auto* resume = app.add_subcommand("resume", "Continue a run from its checkpoint");
  resume->add_option("checkpoint", run_path, "checkpoint.json, a round checkpoint, or a run directory")
      ->required()
      ->check(CLI::ExistingPath);
  resume->allow_extras();

  auto* curve = app.add_subcommand("export-curve", "Best-so-far curve as CSV");
  curve->add_option("run", run_path, "Run directory or checkpoint")->required()->check(CLI::ExistingPath);
  curve->add_option("-o,--output", out_path, "Output file (default stdout)");

  auto* portfolio = app.add_subcommand("export-portfolio", "Best portfolio as JSON");
  portfolio->add_option("run", run_path, "Run directory or checkpoint")->required()->check(CLI::ExistingPath);
  portfolio->add_option("-o,--output", out_path, "Output file (default stdout)");

  auto* tokens = app.add_subcommand("token-report", "Token usage per role and backend");
  tokens->add_option("run", run_path, "Run directory or checkpoint")->required()->check(CLI::ExistingPath);
  tokens->add_flag("--json", as_json, "Print JSON instead of a table");

  auto* validate = app.add_subcommand("validate-config", "Print the merged configuration or the first error");
  validate->add_option("config", config_path, "JSON config file")->required()->check(CLI::ExistingFile);
  validate->allow_extras();

  // Accept --log-level after the subcommand as well.
  for (auto* sub : app.get_subcommands({}))
    sub->add_option("--log-level", log_level, "trace, debug, info, warn, error, off");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  auto level = spdlog::level::from_str(log_level);
  spdlog::set_level(level);
  spdlog::set_pattern("[%H:%M:%S] [%^%l%$] %v");

  std::vector<std::pair<std::string, std::string>> overrides;
  try {
    for (auto* sub : {run, validate, resume})
      if (*sub) overrides = abo::parse_override_args(sub->remaining());
  } catch (const abo::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  }

  try {
    if (*run || *validate) {
      if (!output_dir.empty()) overrides.emplace_back("output_dir", nlohmann::json(output_dir).dump());
      if (seed >= 0) overrides.emplace_back("seed", std::to_string(seed));
      auto cfg = abo::load_config(config_path, overrides);
      if (*validate) {
        std::cout << cfg.tree.dump(2) << '\n';
        return 0;
      }
      return report(abo::run_experiment(cfg));
    }
    if (*resume) return report(abo::resume_experiment(run_path, overrides));
    if (*curve) {
      abo::export_curve(run_path, out_path);
      return 0;
    }
    if (*portfolio) {
      write_text(out_path, abo::portfolio_report(run_path).dump(2) + "\n");
      return 0;
    }
    if (*tokens) {
      auto rep = abo::token_report_for(run_path);
      std::cout << (as_json ? rep.dump(2) + "\n" : abo::render_token_report(rep));
      return 0;
    }
  } catch (const abo::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.code() == abo::ErrorCode::Interrupted ? kExitInterrupted : kExitError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitError;
  }
  return kExitUsage;
}
