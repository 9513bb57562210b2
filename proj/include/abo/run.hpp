// SPDX-License-Identifier: Apache-2.0
//
// Run directories: event log, history, checkpoints, summary, and the
// exports derived from them.
//
//   <output_dir>/events.jsonl
//   <output_dir>/history.jsonl
//   <output_dir>/checkpoint.json            latest round boundary
//   <output_dir>/checkpoints/round_NNNN.json
//   <output_dir>/summary.json               written when the run ends
#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "abo/config.hpp"
#include "abo/loop.hpp"

namespace abo {

struct RunOutcome {
  StopReason stop = StopReason::None;
  bool interrupted = false;
  bool already_finished = false;  // resume of a completed run
  int rounds = 0;
  std::int64_t evals_used = 0;
  double best_score = 0.0;
  std::optional<double> portfolio_agg;
  std::filesystem::path output_dir;
};

/// Process-wide flag set by the SIGINT handler.
std::atomic<bool>& interrupt_flag();
/// Installs the SIGINT handler (idempotent). A second SIGINT terminates.
void install_sigint_handler();

/// Starts a fresh run. Refuses an output directory that already holds a
/// checkpoint. Throws Error; returns with interrupted=true on SIGINT.
RunOutcome run_experiment(const RunConfig& cfg);

/// Continues from a checkpoint file (or a run directory). Later events and
/// history lines are discarded first. Overrides apply on top of the saved
/// configuration; the debug interrupt hook is cleared unless overridden.
RunOutcome resume_experiment(const std::filesystem::path& checkpoint,
                             const std::vector<std::pair<std::string, std::string>>& overrides = {});

/// Loaded checkpoint contents.
struct Checkpoint {
  nlohmann::json config;
  std::filesystem::path base_dir;
  int round = 0;
  bool finished = false;
  std::string stop;
  std::int64_t event_seq = 0;
  double wall_time_s = 0.0;
  History history;
  nlohmann::ordered_json registry;
  nlohmann::json ledger;
  nlohmann::json backend_state;
  std::optional<std::vector<std::int64_t>> portfolio;  // member eval_indices
};

/// Accepts a checkpoint file or a run directory. Throws CorruptCheckpoint.
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Records of every eval_batch event, in order.
History history_from_events(const std::vector<RunEvent>& events);

/// eval_index,best_so_far[,portfolio_agg,portfolio_size,portfolio_complete]
std::string curve_csv(const History& h, const ObjectiveSpec& objective, const Distance& dist);
void export_curve(const std::filesystem::path& run, const std::filesystem::path& out);
/// {agg_value, size, complete, members:[{sequence, score, eval_index}]}
nlohmann::json portfolio_report(const std::filesystem::path& run);
nlohmann::json token_report_for(const std::filesystem::path& run);

}  // namespace abo
