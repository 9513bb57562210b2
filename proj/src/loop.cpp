// SPDX-License-Identifier: Apache-2.0
#include "abo/loop.hpp"

#include <algorithm>
#include <exception>
#include <thread>

#include <spdlog/spdlog.h>

namespace abo {

using json = nlohmann::json;

void LoopParams::validate() const {
  if (max_fails < 1) throw Error(ErrorCode::InvalidConfig, "loop.max_fails must be >= 1");
  if (seeds < 1) throw Error(ErrorCode::InvalidConfig, "loop.seeds must be >= 1");
  if (parallel_workers < 1) throw Error(ErrorCode::InvalidConfig, "loop.parallel_workers must be >= 1");
  if (registry_capacity <= 3) throw Error(ErrorCode::InvalidConfig, "loop.registry_capacity must exceed 3");
  for (double t : temperature)
    if (t < 0.0) throw Error(ErrorCode::InvalidConfig, "temperatures must be >= 0");
  context.validate();
}

std::string_view to_string(StopReason r) {
  switch (r) {
    case StopReason::None:
      return "none";
    case StopReason::BudgetExhausted:
      return "budget_exhausted";
    case StopReason::Stagnation:
      return "stagnation";
  }
  return "?";
}

namespace {

json record_json(const ScoredRecord& r) {
  return {{"eval_index", r.eval_index}, {"candidate", r.candidate.canonical}, {"raw", r.candidate.raw},
          {"score", r.score}, {"origin", r.origin.str()}, {"round", r.round}};
}

json merged(json base, const json& extra) {
  if (extra.is_object())
    for (const auto& [k, v] : extra.items()) base[k] = v;
  return base;
}

}  // namespace

Optimizer::Optimizer(OptimizerSetup setup)
    : setup_(std::move(setup)), registry_(setup_.domain.prompts.default_tasks, setup_.params.registry_capacity) {
  setup_.objective.validate();
  setup_.params.validate();
  setup_.constraint.validate();
  if (!setup_.backend) throw Error(ErrorCode::InvalidConfig, "no agent backend configured");
  if (!setup_.oracle) throw Error(ErrorCode::InvalidConfig, "no oracle configured");
  if (!setup_.domain.distance) setup_.domain.distance = make_distance(setup_.domain.distance_name);
}

void Optimizer::emit(const std::string& phase, EventKind kind, json payload) {
  if (setup_.events) setup_.events->emit(round_, phase, kind, std::move(payload));
}

void Optimizer::check_interrupt() const {
  if (setup_.interrupt && setup_.interrupt->load()) throw Error(ErrorCode::Interrupted, "interrupted");
}

InitReport Optimizer::initialize(const InitSpec& init, const CandidatePool* resample_pool) {
  Engine rng = RngStreams(setup_.seed).stream("init");
  auto rep = load_init(init, setup_.domain, *setup_.oracle, history_, setup_.objective.budget, rng);
  json recs = json::array();
  for (const auto& r : history_.records()) {
    recs.push_back(record_json(r));
    if (setup_.on_record) setup_.on_record(r);
  }
  emit("init", EventKind::EvalBatch, {{"records", recs}, {"discarded", 0}});

  if (init.zero_signal_guard) {
    if (!resample_pool) throw Error(ErrorCode::InvalidConfig, "zero-signal guard needs a resample pool");
    const auto before = history_.size();
    Engine prng = RngStreams(setup_.seed).stream("resample");
    try {
      rep.resampled = zero_signal_resample(history_, *resample_pool, setup_.domain, *setup_.oracle, init.floor,
                                           setup_.objective.budget, prng);
    } catch (...) {
      json extra = json::array();
      for (std::size_t i = before; i < history_.size(); ++i) extra.push_back(record_json(history_.records()[i]));
      if (!extra.empty()) emit("init", EventKind::EvalBatch, {{"records", extra}, {"discarded", 0}});
      throw;
    }
    json extra = json::array();
    for (std::size_t i = before; i < history_.size(); ++i) {
      extra.push_back(record_json(history_.records()[i]));
      if (setup_.on_record) setup_.on_record(history_.records()[i]);
    }
    if (!extra.empty()) emit("init", EventKind::EvalBatch, {{"records", extra}, {"discarded", 0}});
  }
  update_portfolio();
  return rep;
}

void Optimizer::restore(History h, TaskRegistry r, int round, std::optional<Portfolio> portfolio) {
  history_ = std::move(h);
  registry_ = std::move(r);
  round_ = round;
  best_portfolio_ = std::move(portfolio);
}

bool Optimizer::update_portfolio() {
  if (!setup_.objective.portfolio || history_.empty()) return false;
  auto p = best_portfolio_greedy(history_, *setup_.objective.portfolio, setup_.domain.distance,
                                 setup_.objective.direction);
  if (!best_portfolio_ || portfolio_better(p, *best_portfolio_, setup_.objective.direction)) {
    best_portfolio_ = std::move(p);
    return true;
  }
  return false;
}

CompletionResult Optimizer::call_agent(AgentRole role, std::string system, std::string user,
                                       const std::string& phase, const json& extra) {
  check_interrupt();
  CompletionRequest req;
  req.system = std::move(system);
  req.user = std::move(user);
  req.role = role;
  req.temperature = setup_.params.temperature[static_cast<std::size_t>(role)];
  req.max_output_tokens = setup_.params.max_output_tokens;
  const std::string backend = setup_.backend->name_for(role);
  try {
    auto res = setup_.backend->complete(req);
    ledger_.record(role, backend, res);
    emit(phase, EventKind::AgentCall,
         merged({{"role", to_string(role)},
                 {"backend", backend},
                 {"ok", true},
                 {"input_tokens", res.input_tokens},
                 {"output_tokens", res.output_tokens},
                 {"latency_ms", res.latency_ms},
                 {"failed_attempts", res.failed_attempts},
                 {"prompt_fnv1a", fnv1a(req.system + '\x1f' + req.user)},
                 {"reply", res.text}},
                extra));
    return res;
  } catch (const Error& e) {
    ledger_.record_failure(role, backend, 1);
    emit(phase, EventKind::AgentCall,
         merged({{"role", to_string(role)}, {"backend", backend}, {"ok", false}, {"error", e.what()}}, extra));
    throw;
  }
}

std::vector<ScoredRecord> Optimizer::filter_and_evaluate(const std::vector<std::string>& raws, const Origin& origin,
                                                         const std::string& phase, const json& extra,
                                                         FilterReport* report_out) {
  FilterReport report = filter_batch(raws, history_, setup_.constraint, setup_.domain);
  json rejected = json::array();
  for (const auto& r : report.rejected) {
    json j = {{"raw", r.raw}, {"reason", to_string(r.reason)}};
    if (r.memo_score) j["score"] = *r.memo_score;
    if (!r.detail.empty()) j["detail"] = r.detail;
    rejected.push_back(std::move(j));
  }
  emit(phase, EventKind::FilterReport,
       merged({{"received", raws.size()}, {"accepted", report.accepted.size()}, {"rejected", rejected}}, extra));

  std::vector<Candidate> batch = report.accepted;
  const auto remaining = static_cast<std::size_t>(std::max<std::int64_t>(0, setup_.objective.budget - history_.evals_used()));
  std::size_t discarded = 0;
  if (batch.size() > remaining) {
    discarded = batch.size() - remaining;
    batch.resize(remaining);
  }
  std::vector<ScoredRecord> added;
  if (!batch.empty()) {
    auto scores = setup_.oracle->evaluate(batch);
    json recs = json::array();
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto& r = history_.append(batch[i], scores[i], origin, round_);
      added.push_back(r);
      recs.push_back(record_json(r));
      if (setup_.on_record) setup_.on_record(r);
    }
    emit(phase, EventKind::EvalBatch, merged({{"records", recs}, {"discarded", discarded}}, extra));
  }
  if (report_out) *report_out = std::move(report);
  return added;
}

void Optimizer::explorer_phase() {
  const auto dir = setup_.objective.direction;
  const auto& pack = setup_.domain.prompts;
  int fails = 0;
  int iteration = 0;
  while (fails < setup_.params.max_fails && budget_left()) {
    ++iteration;
    const double best_before = best_record(history_, dir).score;
    const auto ctx = coverage_sample(history_, setup_.params.context, dir, ctx_rng_);
    const auto prompt = build_explorer_prompt(render_context(ctx), format_score(best_before), pack,
                                              setup_.objective, setup_.params.requests);
    const json extra = {{"iteration", iteration}};
    auto res = call_agent(AgentRole::Explorer, "", prompt, "explorer", extra);
    auto parsed = parse_candidates(res.text);
    bool improved = false;
    if (!parsed.ok()) {
      emit("explorer", EventKind::FilterReport,
           merged({{"received", 0}, {"accepted", 0}, {"rejected", json::array()}, {"parse_error", parsed.error().message}},
                  extra));
    } else {
      std::lock_guard lock(gate_);
      auto added = filter_and_evaluate(*parsed, Origin::explorer(), "explorer", extra, nullptr);
      const bool pf = update_portfolio();
      if (setup_.objective.portfolio)
        improved = pf;
      else
        improved = !added.empty() && is_improvement(best_record(history_, dir).score, best_before, dir);
    }
    fails = improved ? 0 : fails + 1;
  }
}

std::vector<std::string> Optimizer::planner_phase() {
  const auto dir = setup_.objective.direction;
  const auto ctx = coverage_sample(history_, setup_.params.context, dir, ctx_rng_);
  const auto prompt = build_planner_prompt(render_context(ctx), render_performance_stats(registry_),
                                           render_task_summary(registry_), setup_.domain.prompts, setup_.objective,
                                           setup_.params.requests);
  auto res = call_agent(AgentRole::Planner, "", prompt, "planner", json::object());
  auto parsed = parse_planner_reply(res.text, registry_);

  std::vector<std::string> work;
  std::vector<std::string> warnings;
  bool fallback = false;
  if (!parsed.ok()) {
    warnings.push_back(parsed.error().message);
    fallback = true;
  } else {
    warnings = parsed->warnings;
    for (const auto& d : parsed->directives) {
      std::string name = d.name;
      if (d.action == PlannerDirective::Action::Create) {
        auto add = registry_.add_task(d.name, d.text);
        name = add.name;
        json p = {{"action", "add"}, {"task", add.name}, {"replaced", add.replaced}};
        if (add.evicted) {
          p["evicted"] = *add.evicted;
          auto it = std::find(work.begin(), work.end(), *add.evicted);
          if (it != work.end()) {
            warnings.push_back("task " + *add.evicted + " was evicted by a later directive and is skipped");
            work.erase(it);
          }
        }
        emit("planner", EventKind::RegistryChange, std::move(p));
      }
      if (std::find(work.begin(), work.end(), name) == work.end()) work.push_back(name);
    }
  }
  if (work.empty()) {
    fallback = true;
    for (const auto& e : registry_.entries())
      if (e.is_default) work.push_back(e.name);
  }
  for (const auto& w : warnings) spdlog::warn("planner: {}", w);
  emit("planner", EventKind::RegistryChange,
       {{"action", "select"}, {"tasks", work}, {"fallback", fallback}, {"warnings", warnings}});
  return work;
}

void Optimizer::worker_phase(const std::vector<std::string>& work) {
  const auto dir = setup_.objective.direction;
  auto seeds = select_diverse_seeds(history_, setup_.params.seeds, setup_.domain.seed_threshold,
                                    setup_.domain.distance, dir);
  trajectories_.clear();
  for (const auto& task : work)
    for (const auto& s : seeds)
      trajectories_.push_back({task, s.candidate, s.candidate, s.score, 0, 0, false});

  const std::size_t n = trajectories_.size();
  const std::size_t threads = std::min(setup_.params.parallel_workers, n);
  if (threads <= 1) {
    for (std::size_t t = 0; t < n; ++t) run_trajectory(t);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr first_error;
  std::mutex err_mu;
  std::vector<std::thread> pool;
  for (std::size_t k = 0; k < threads; ++k)
    pool.emplace_back([&] {
      while (!stop.load()) {
        const auto t = next.fetch_add(1);
        if (t >= n) break;
        try {
          run_trajectory(t);
        } catch (...) {
          std::lock_guard lock(err_mu);
          if (!first_error) first_error = std::current_exception();
          stop.store(true);
        }
      }
    });
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

void Optimizer::run_trajectory(std::size_t t) {
  while (true) {
    {
      std::lock_guard lock(gate_);
      if (trajectories_[t].terminated) return;
      if (!budget_left()) {
        trajectories_[t].terminated = true;
        return;
      }
    }
    worker_iteration(t);
  }
}

void Optimizer::worker_iteration(std::size_t t) {
  const auto dir = setup_.objective.direction;
  TaskEntry task;
  Candidate x_curr;
  double x_score;
  {
    std::lock_guard lock(gate_);
    const auto& tr = trajectories_[t];
    const auto* e = registry_.find(tr.task_name);
    if (!e) throw Error(ErrorCode::UnknownTask, "task " + tr.task_name + " left the registry");
    task = *e;
    x_curr = tr.x_curr;
    x_score = tr.x_curr_score;
  }
  const auto prompts = build_worker_prompts(task, x_curr, setup_.domain.prompts, setup_.params.requests);
  const json extra = {{"task", task.name}, {"trajectory", t}, {"x_curr", x_curr.canonical}};
  auto res = call_agent(AgentRole::Worker, prompts.system, prompts.user, "worker", extra);
  auto parsed = parse_candidates(res.text);

  std::lock_guard lock(gate_);
  struct Move {
    Candidate c;
    double score;
    std::int64_t eval_index;
  };
  std::vector<Move> moves;
  if (!parsed.ok()) {
    emit("worker", EventKind::FilterReport,
         merged({{"received", 0}, {"accepted", 0}, {"rejected", json::array()}, {"parse_error", parsed.error().message}},
                extra));
  } else {
    FilterReport report;
    for (auto& r : filter_and_evaluate(*parsed, Origin::worker(task.name), "worker", extra, &report))
      moves.push_back({r.candidate, r.score, r.eval_index});
    for (auto& [c, s] : report.memoized()) {
      const auto* rec = history_.find(c.canonical);
      moves.push_back({c, s, rec ? rec->eval_index : 0});
    }
  }
  std::sort(moves.begin(), moves.end(), [dir](const Move& a, const Move& b) {
    if (a.score != b.score) return is_improvement(a.score, b.score, dir);
    return a.eval_index < b.eval_index;
  });

  auto& tr = trajectories_[t];
  const Move* chosen = nullptr;
  bool collapse = false;
  for (const auto& m : moves) {
    if (!is_improvement(m.score, x_score, dir)) break;
    bool clash = false;
    for (std::size_t o = 0; o < trajectories_.size(); ++o)
      if (o != t && !trajectories_[o].terminated && trajectories_[o].x_curr.canonical == m.c.canonical) {
        clash = true;
        break;
      }
    if (clash) {
      collapse = true;
      continue;
    }
    chosen = &m;
    break;
  }
  const bool success = chosen != nullptr;
  ++tr.iterations;
  if (success) {
    tr.x_curr = chosen->c;
    tr.x_curr_score = chosen->score;
    tr.fails = 0;
  } else {
    ++tr.fails;
  }
  if (tr.fails >= setup_.params.max_fails) tr.terminated = true;
  registry_.record_outcome(task.name, success);
  emit("worker", EventKind::RegistryChange,
       {{"action", "outcome"},
        {"task", task.name},
        {"trajectory", t},
        {"success", success},
        {"collapse", collapse && !success},
        {"x_curr", tr.x_curr.canonical},
        {"x_curr_score", tr.x_curr_score},
        {"fails", tr.fails},
        {"terminated", tr.terminated}});
}

StopReason Optimizer::run_round() {
  ++round_;
  ctx_rng_ = RngStreams(setup_.seed).stream("context", static_cast<std::uint64_t>(round_));
  const auto before = history_.evals_used();
  std::size_t tasks = 0;
  if (budget_left()) explorer_phase();
  if (budget_left()) {
    auto work = planner_phase();
    tasks = work.size();
    if (budget_left()) worker_phase(work);
  }
  const auto added = history_.evals_used() - before;
  StopReason reason = StopReason::None;
  if (!budget_left())
    reason = StopReason::BudgetExhausted;
  else if (added == 0)
    reason = StopReason::Stagnation;
  json p = {{"evals_used", history_.evals_used()},
            {"new_evals", added},
            {"best_score", best_record(history_, setup_.objective.direction).score},
            {"tasks", tasks},
            {"stop", to_string(reason)}};
  if (best_portfolio_) {
    p["portfolio_agg"] = best_portfolio_->agg_value;
    p["portfolio_size"] = best_portfolio_->members.size();
  }
  emit("round", EventKind::RoundEnd, std::move(p));
  return reason;
}

StopReason Optimizer::run(const std::function<void(int)>& on_round_end) {
  if (history_.empty()) throw Error(ErrorCode::EmptyHistory, "initialize() must run before the loop");
  if (!budget_left()) return StopReason::BudgetExhausted;
  while (true) {
    auto r = run_round();
    if (on_round_end) on_round_end(round_);
    if (r != StopReason::None) return r;
  }
}

}  // namespace abo
