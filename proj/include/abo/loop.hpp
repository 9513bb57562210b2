// SPDX-License-Identifier: Apache-2.0
//
// The orchestration loop: explorer persistence phase, planner phase, and
// K x M worker hill climbs per round, under a strict evaluation budget.
#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "abo/backend.hpp"
#include "abo/context.hpp"
#include "abo/diversity.hpp"
#include "abo/domain.hpp"
#include "abo/events.hpp"
#include "abo/filter.hpp"
#include "abo/oracle.hpp"
#include "abo/prompts.hpp"
#include "abo/registry.hpp"
#include "abo/rng.hpp"

namespace abo {

struct LoopParams {
  int max_fails = 3;
  std::size_t seeds = 2;  // M
  PromptRequests requests;
  ContextSpec context;
  std::size_t registry_capacity = TaskRegistry::kDefaultCapacity;
  std::size_t parallel_workers = 1;  // 1 = sequential, deterministic
  std::array<double, 3> temperature{0.7, 0.7, 0.8};  // explorer, planner, worker
  int max_output_tokens = 8192;

  void validate() const;  // throws InvalidConfig
};

struct TrajectoryState {
  std::string task_name;
  Candidate seed;
  Candidate x_curr;
  double x_curr_score = 0.0;
  int fails = 0;
  int iterations = 0;
  bool terminated = false;
};

enum class StopReason { None, BudgetExhausted, Stagnation };
std::string_view to_string(StopReason r);

struct OptimizerSetup {
  DomainSpec domain;
  ObjectiveSpec objective;
  LoopParams params;
  HardConstraint constraint;
  std::shared_ptr<AgentBackend> backend;
  std::shared_ptr<OracleHarness> oracle;
  std::uint64_t seed = 0;
  std::shared_ptr<EventSink> events;                 // optional
  const std::atomic<bool>* interrupt = nullptr;      // optional; checked before agent calls
  std::function<void(const ScoredRecord&)> on_record;  // optional; called after each append
};

/// Owns History, TaskRegistry and TokenLedger. Not copyable.
class Optimizer {
 public:
  explicit Optimizer(OptimizerSetup setup);
  Optimizer(const Optimizer&) = delete;
  Optimizer& operator=(const Optimizer&) = delete;

  /// Loads the initial data (and resamples in the zero-signal regime).
  InitReport initialize(const InitSpec& init, const CandidatePool* resample_pool = nullptr);

  /// One outer round. Returns the stop reason observed at its end.
  StopReason run_round();
  /// Rounds until the budget is spent or a round makes no evaluation.
  /// `on_round_end` runs after every round (checkpoint hook).
  StopReason run(const std::function<void(int round)>& on_round_end = {});

  // Phases, exposed for tests. They operate on the current round.
  void explorer_phase();
  std::vector<std::string> planner_phase();
  void worker_phase(const std::vector<std::string>& work);

  const History& history() const { return history_; }
  const TaskRegistry& registry() const { return registry_; }
  const TokenLedger& ledger() const { return ledger_; }
  TokenLedger& ledger() { return ledger_; }
  int round() const { return round_; }
  bool budget_left() const { return history_.evals_used() < setup_.objective.budget; }
  void set_budget(std::int64_t budget) { setup_.objective.budget = budget; }
  const OptimizerSetup& setup() const { return setup_; }
  const std::optional<Portfolio>& best_portfolio() const { return best_portfolio_; }
  const std::vector<TrajectoryState>& last_trajectories() const { return trajectories_; }

  /// Restores state captured at a round boundary.
  void restore(History h, TaskRegistry r, int round, std::optional<Portfolio> portfolio);

 private:
  CompletionResult call_agent(AgentRole role, std::string system, std::string user, const std::string& phase,
                              const nlohmann::json& extra);
  /// Filter, truncate to budget, evaluate and append. Returns new records.
  std::vector<ScoredRecord> filter_and_evaluate(const std::vector<std::string>& raws, const Origin& origin,
                                                const std::string& phase, const nlohmann::json& extra,
                                                FilterReport* report_out);
  /// Folds the current greedy portfolio into the running best; true when it
  /// improved.
  bool update_portfolio();
  void worker_iteration(std::size_t t);
  void run_trajectory(std::size_t t);
  void emit(const std::string& phase, EventKind kind, nlohmann::json payload);
  void check_interrupt() const;

  OptimizerSetup setup_;
  History history_;
  TaskRegistry registry_;
  TokenLedger ledger_;
  int round_ = 0;
  Engine ctx_rng_;
  std::optional<Portfolio> best_portfolio_;
  std::vector<TrajectoryState> trajectories_;
  std::mutex gate_;  // serializes filter/evaluate/append and trajectory updates
};

}  // namespace abo
