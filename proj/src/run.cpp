// SPDX-License-Identifier: Apache-2.0
#include "abo/run.hpp"

#include <chrono>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <spdlog/spdlog.h>

namespace abo {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::atomic<bool> g_interrupt{false};

extern "C" void on_sigint(int) {
  g_interrupt.store(true);
  std::signal(SIGINT, SIG_DFL);
}

json record_to_json(const ScoredRecord& r) {
  return {{"eval_index", r.eval_index}, {"candidate", r.candidate.canonical}, {"raw", r.candidate.raw},
          {"score", r.score}, {"origin", r.origin.str()}, {"round", r.round}};
}

void append_record_json(History& h, const json& j, DomainKind kind) {
  Candidate c{j.at("raw").get<std::string>(), j.at("candidate").get<std::string>(), kind};
  const auto& r = h.append(std::move(c), j.at("score").get<double>(), Origin::parse(j.at("origin").get<std::string>()),
                           j.at("round").get<int>());
  if (r.eval_index != j.at("eval_index").get<std::int64_t>())
    throw Error(ErrorCode::CorruptCheckpoint, "eval_index mismatch at record " + std::to_string(r.eval_index));
}

/// Raises SIGINT after a fixed number of completed agent calls.
class InterruptingBackend final : public AgentBackend {
 public:
  InterruptingBackend(std::shared_ptr<AgentBackend> inner, std::int64_t after) : inner_(std::move(inner)), after_(after) {}
  CompletionResult complete(const CompletionRequest& req) override {
    auto r = inner_->complete(req);
    if (++calls_ == after_) std::raise(SIGINT);
    return r;
  }
  std::string name_for(AgentRole role) const override { return inner_->name_for(role); }
  json save_state() const override { return inner_->save_state(); }
  void restore_state(const json& s) override { inner_->restore_state(s); }

 private:
  std::shared_ptr<AgentBackend> inner_;
  std::int64_t after_;
  std::atomic<std::int64_t> calls_{0};
};

void write_atomic(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc | std::ios::binary);
    out << text;
    if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot rename " + tmp.string() + ": " + ec.message());
}

struct Session {
  RunConfig cfg;
  fs::path dir;
  std::shared_ptr<JsonlEventLog> events;
  std::shared_ptr<AgentBackend> backend;
  std::unique_ptr<Optimizer> opt;
  std::unique_ptr<std::ofstream> history_out;
  std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();
  double prior_wall_s = 0.0;

  void open(std::int64_t last_seq, bool resuming) {
    fs::create_directories(dir / "checkpoints");
    events = std::make_shared<JsonlEventLog>(dir / "events.jsonl", last_seq);
    backend = make_backend(cfg, resuming);
    if (cfg.interrupt_after_calls > 0) backend = std::make_shared<InterruptingBackend>(backend, cfg.interrupt_after_calls);
    history_out = std::make_unique<std::ofstream>(dir / "history.jsonl", std::ios::app | std::ios::binary);
    if (!*history_out) throw Error(ErrorCode::Io, "cannot open history.jsonl in " + dir.string());

    OptimizerSetup s;
    s.domain = cfg.domain;
    s.objective = cfg.objective;
    s.params = cfg.loop;
    s.constraint = cfg.constraint;
    s.backend = backend;
    s.oracle = std::make_shared<OracleHarness>(make_oracle(cfg), cfg.tree.at("oracle").at("cache").get<bool>());
    s.seed = cfg.seed;
    s.events = events;
    s.interrupt = &g_interrupt;
    std::ofstream* hout = history_out.get();
    s.on_record = [hout](const ScoredRecord& r) {
      *hout << record_to_json(r).dump() << '\n';
      hout->flush();
    };
    opt = std::make_unique<Optimizer>(std::move(s));
  }

  double wall_s() const {
    return prior_wall_s +
           std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  }

  void checkpoint(bool finished, StopReason stop) {
    char name[32];
    std::snprintf(name, sizeof name, "round_%04d.json", opt->round());
    const fs::path round_file = dir / "checkpoints" / name;
    const auto seq = events->emit(opt->round(), "round", EventKind::Checkpoint,
                                  {{"path", (fs::path("checkpoints") / name).string()}, {"finished", finished}});
    json j;
    j["format"] = 1;
    j["config"] = cfg.tree;
    j["base_dir"] = cfg.base_dir.string();
    j["round"] = opt->round();
    j["finished"] = finished;
    j["stop"] = to_string(stop);
    j["event_seq"] = seq;
    j["wall_time_s"] = wall_s();
    json hist = json::array();
    for (const auto& r : opt->history().records()) hist.push_back(record_to_json(r));
    j["history"] = std::move(hist);
    j["registry"] = opt->registry().to_json();
    j["ledger"] = opt->ledger().to_json();
    j["backend_state"] = backend->save_state();
    if (const auto& p = opt->best_portfolio()) {
      json ids = json::array();
      for (const auto& m : p->members) ids.push_back(m.eval_index);
      j["portfolio"] = ids;
    } else {
      j["portfolio"] = nullptr;
    }
    const auto text = j.dump(1);
    write_atomic(round_file, text);
    write_atomic(dir / "checkpoint.json", text);
  }

  void summary(StopReason stop, bool interrupted) {
    json s;
    s["stop"] = interrupted ? "interrupted" : std::string(to_string(stop));
    s["rounds"] = opt->round();
    s["evals_used"] = opt->history().evals_used();
    s["budget"] = cfg.objective.budget;
    if (!opt->history().empty()) {
      const auto& b = best_record(opt->history(), cfg.objective.direction);
      s["best"] = {{"candidate", b.candidate.canonical}, {"score", b.score}, {"eval_index", b.eval_index}};
    }
    if (const auto& p = opt->best_portfolio())
      s["portfolio"] = {{"agg_value", p->agg_value}, {"size", p->members.size()}, {"complete", p->complete}};
    s["tokens"] = token_report(opt->ledger());
    s["wall_time_s"] = wall_s();
    write_atomic(dir / "summary.json", s.dump(2) + "\n");
  }

  RunOutcome drive() {
    RunOutcome out;
    out.output_dir = dir;
    StopReason stop = StopReason::None;
    try {
      if (!opt->budget_left()) stop = StopReason::BudgetExhausted;
      while (stop == StopReason::None) {
        stop = opt->run_round();
        checkpoint(stop != StopReason::None, stop);
        const auto& best = best_record(opt->history(), cfg.objective.direction);
        spdlog::info("round {}: {} / {} evaluations, best {}", opt->round(), opt->history().evals_used(),
                     cfg.objective.budget, format_score(best.score));
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::Interrupted) {
        events->emit(opt->round(), "round", EventKind::Error, {{"code", to_string(e.code())}, {"message", e.detail()}});
        throw;
      }
      out.interrupted = true;
      spdlog::warn("interrupted during round {}; resume from {}", opt->round(), (dir / "checkpoint.json").string());
    }
    summary(stop, out.interrupted);
    out.stop = stop;
    out.rounds = opt->round();
    out.evals_used = opt->history().evals_used();
    out.best_score = best_record(opt->history(), cfg.objective.direction).score;
    if (const auto& p = opt->best_portfolio()) out.portfolio_agg = p->agg_value;
    return out;
  }
};

}  // namespace

std::atomic<bool>& interrupt_flag() { return g_interrupt; }

void install_sigint_handler() { std::signal(SIGINT, on_sigint); }

RunOutcome run_experiment(const RunConfig& cfg) {
  g_interrupt.store(false);
  install_sigint_handler();
  Session s;
  s.cfg = cfg;
  s.dir = cfg.output_dir;
  if (fs::exists(s.dir / "checkpoint.json"))
    throw Error(ErrorCode::InvalidConfig, s.dir.string() + " already holds a run; use resume or another output_dir");
  fs::create_directories(s.dir);
  for (const char* f : {"events.jsonl", "history.jsonl", "summary.json"}) fs::remove(s.dir / f);
  s.open(0, false);

  try {
    const CandidatePool pool = make_resample_pool(cfg);
    auto rep = s.opt->initialize(cfg.init, cfg.init.zero_signal_guard ? &pool : nullptr);
    spdlog::info("init: {} evaluated ({} duplicates, {} invalid, {} resampled)", rep.evaluated, rep.duplicates,
                 rep.invalid, rep.resampled);
  } catch (const Error& e) {
    s.events->emit(0, "init", EventKind::Error, {{"code", to_string(e.code())}, {"message", e.detail()}});
    throw;
  }
  s.checkpoint(!s.opt->budget_left(), s.opt->budget_left() ? StopReason::None : StopReason::BudgetExhausted);
  return s.drive();
}

Checkpoint read_checkpoint(const fs::path& path) {
  const fs::path file = fs::is_directory(path) ? path / "checkpoint.json" : path;
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorCode::CorruptCheckpoint, "cannot read checkpoint " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  auto j = json::parse(ss.str(), nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::CorruptCheckpoint, file.string() + " is not valid JSON");
  try {
    Checkpoint c;
    c.config = j.at("config");
    c.base_dir = j.at("base_dir").get<std::string>();
    c.round = j.at("round").get<int>();
    c.finished = j.at("finished").get<bool>();
    c.stop = j.at("stop").get<std::string>();
    c.event_seq = j.at("event_seq").get<std::int64_t>();
    c.wall_time_s = j.value("wall_time_s", 0.0);
    const auto kind = parse_domain_kind(c.config.at("domain").at("kind").get<std::string>());
    for (const auto& r : j.at("history")) append_record_json(c.history, r, kind);
    c.registry = nlohmann::ordered_json::parse(j.at("registry").dump());
    c.ledger = j.at("ledger");
    c.backend_state = j.at("backend_state");
    if (!j.at("portfolio").is_null()) c.portfolio = j.at("portfolio").get<std::vector<std::int64_t>>();
    return c;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptCheckpoint, file.string() + ": " + e.what());
  } catch (const std::logic_error& e) {
    throw Error(ErrorCode::CorruptCheckpoint, file.string() + ": " + e.what());
  }
}

History history_from_events(const std::vector<RunEvent>& events) {
  History h;
  for (const auto& e : events) {
    if (e.kind != EventKind::EvalBatch) continue;
    for (const auto& r : e.payload.at("records")) {
      // Canonical text is stored; the domain kind only matters for new input.
      append_record_json(h, r, DomainKind::Generic);
    }
  }
  return h;
}

RunOutcome resume_experiment(const fs::path& checkpoint,
                             const std::vector<std::pair<std::string, std::string>>& overrides) {
  g_interrupt.store(false);
  install_sigint_handler();
  Checkpoint c = read_checkpoint(checkpoint);
  const fs::path ck_file = fs::is_directory(checkpoint) ? checkpoint / "checkpoint.json" : checkpoint;
  // checkpoints/round_NNNN.json lives one level below the run directory.
  fs::path dir = fs::absolute(ck_file).parent_path();
  if (dir.filename() == "checkpoints") dir = dir.parent_path();

  std::vector<std::pair<std::string, std::string>> ov = {{"debug.interrupt_after_calls", "0"}};
  ov.insert(ov.end(), overrides.begin(), overrides.end());
  RunConfig cfg = config_from_tree(c.config, c.base_dir, ov);
  cfg.output_dir = dir;

  if (c.finished) {
    RunOutcome out;
    out.already_finished = true;
    out.rounds = c.round;
    out.evals_used = c.history.evals_used();
    out.best_score = best_record(c.history, cfg.objective.direction).score;
    out.output_dir = dir;
    spdlog::info("run in {} already finished ({})", dir.string(), c.stop);
    return out;
  }

  // Drop everything written after the checkpoint, then check the log agrees.
  truncate_events(dir / "events.jsonl", c.event_seq);
  const History from_log = history_from_events(read_events(dir / "events.jsonl"));
  if (from_log.size() != c.history.size())
    throw Error(ErrorCode::CorruptCheckpoint, "event log holds " + std::to_string(from_log.size()) +
                                                  " evaluations, checkpoint holds " + std::to_string(c.history.size()));
  for (std::size_t i = 0; i < from_log.size(); ++i)
    if (from_log.records()[i].candidate.canonical != c.history.records()[i].candidate.canonical)
      throw Error(ErrorCode::CorruptCheckpoint, "event log disagrees with checkpoint at evaluation " + std::to_string(i + 1));
  {
    std::string lines;
    for (const auto& r : c.history.records()) lines += record_to_json(r).dump() + "\n";
    write_atomic(dir / "history.jsonl", lines);
  }

  Session s;
  s.cfg = cfg;
  s.dir = dir;
  s.prior_wall_s = c.wall_time_s;
  s.open(c.event_seq, true);
  s.backend->restore_state(c.backend_state);
  s.opt->ledger().restore(c.ledger);
  std::optional<Portfolio> portfolio;
  if (c.portfolio && cfg.objective.portfolio) {
    Portfolio p;
    std::vector<double> scores;
    for (auto idx : *c.portfolio) {
      if (idx < 1 || idx > c.history.evals_used())
        throw Error(ErrorCode::CorruptCheckpoint, "portfolio member " + std::to_string(idx) + " is not in the history");
      p.members.push_back(c.history.records()[static_cast<std::size_t>(idx - 1)]);
      scores.push_back(p.members.back().score);
    }
    p.agg_value = aggregate(scores, *cfg.objective.portfolio);
    p.complete = static_cast<int>(p.members.size()) == cfg.objective.portfolio->size;
    portfolio = std::move(p);
  }
  s.opt->restore(std::move(c.history), TaskRegistry::from_json(c.registry, cfg.loop.registry_capacity), c.round,
                 std::move(portfolio));
  spdlog::info("resuming {} at round {} ({} evaluations)", dir.string(), c.round, s.opt->history().evals_used());
  return s.drive();
}

std::string curve_csv(const History& h, const ObjectiveSpec& objective, const Distance& dist) {
  // json::dump gives the shortest round-trip form of a double.
  auto num = [](double v) { return json(v).dump(); };
  std::ostringstream out;
  const bool pf = objective.portfolio.has_value();
  out << "eval_index,best_so_far";
  if (pf) out << ",portfolio_agg,portfolio_size,portfolio_complete";
  out << '\n';
  std::vector<PortfolioPoint> pts;
  if (pf && !h.empty()) pts = portfolio_progress(h, *objective.portfolio, dist, objective.direction);
  double best = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const auto& r = h.records()[i];
    if (i == 0 || is_improvement(r.score, best, objective.direction)) best = r.score;
    out << r.eval_index << ',' << num(best);
    if (pf) out << ',' << num(pts[i].agg_value) << ',' << pts[i].size << ',' << (pts[i].complete ? 1 : 0);
    out << '\n';
  }
  return out.str();
}

void export_curve(const fs::path& run, const fs::path& out) {
  Checkpoint c = read_checkpoint(run);
  RunConfig cfg = config_from_tree(c.config, c.base_dir);
  const auto text = curve_csv(c.history, cfg.objective, cfg.domain.distance);
  if (out.empty() || out == "-") {
    std::fwrite(text.data(), 1, text.size(), stdout);
    return;
  }
  write_atomic(out, text);
}

json portfolio_report(const fs::path& run) {
  Checkpoint c = read_checkpoint(run);
  RunConfig cfg = config_from_tree(c.config, c.base_dir);
  if (!cfg.objective.portfolio) throw Error(ErrorCode::InvalidConfig, "this run has no portfolio objective");
  Portfolio p;
  if (c.portfolio) {
    std::vector<double> scores;
    for (auto idx : *c.portfolio) {
      p.members.push_back(c.history.records().at(static_cast<std::size_t>(idx - 1)));
      scores.push_back(p.members.back().score);
    }
    p.agg_value = aggregate(scores, *cfg.objective.portfolio);
    p.complete = static_cast<int>(p.members.size()) == cfg.objective.portfolio->size;
  }
  return {{"agg_value", p.agg_value},
          {"size", p.members.size()},
          {"complete", p.complete},
          {"beta", cfg.objective.portfolio->beta},
          {"members", portfolio_to_json(p)}};
}

json token_report_for(const fs::path& run) {
  Checkpoint c = read_checkpoint(run);
  TokenLedger l;
  l.restore(c.ledger);
  return token_report(l);
}

}  // namespace abo
