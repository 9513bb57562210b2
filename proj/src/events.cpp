// SPDX-License-Identifier: Apache-2.0
#include "abo/events.hpp"

#include <chrono>
#include <ctime>

#include "abo/error.hpp"

namespace abo {

std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::AgentCall:
      return "agent_call";
    case EventKind::FilterReport:
      return "filter_report";
    case EventKind::EvalBatch:
      return "eval_batch";
    case EventKind::RegistryChange:
      return "registry_change";
    case EventKind::RoundEnd:
      return "round_end";
    case EventKind::Checkpoint:
      return "checkpoint";
    case EventKind::Error:
      return "error";
  }
  return "?";
}

namespace {

EventKind parse_kind(std::string_view s) {
  for (auto k : {EventKind::AgentCall, EventKind::FilterReport, EventKind::EvalBatch, EventKind::RegistryChange,
                 EventKind::RoundEnd, EventKind::Checkpoint, EventKind::Error})
    if (to_string(k) == s) return k;
  throw Error(ErrorCode::CorruptCheckpoint, "unknown event kind '" + std::string(s) + "'");
}

std::string utc_now() {
  using namespace std::chrono;
  const auto now = system_clock::now();
  const auto ms = duration_cast<milliseconds>(now.time_since_epoch()).count() % 1000;
  const std::time_t t = system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
  return buf;
}

}  // namespace

std::int64_t EventSink::emit(int round, std::string_view phase, EventKind kind, nlohmann::json payload) {
  std::lock_guard lock(mu_);
  RunEvent e{++seq_, utc_now(), round, std::string(phase), kind, std::move(payload)};
  write(e);
  return e.seq;
}

std::int64_t EventSink::last_seq() const {
  std::lock_guard lock(mu_);
  return seq_;
}

JsonlEventLog::JsonlEventLog(const std::filesystem::path& path, std::int64_t last_seq)
    : EventSink(last_seq), out_(path, std::ios::app | std::ios::binary) {
  if (!out_) throw Error(ErrorCode::Io, "cannot open event log " + path.string());
}

void JsonlEventLog::write(const RunEvent& e) {
  out_ << event_to_json(e).dump() << '\n';
  out_.flush();
}

nlohmann::json event_to_json(const RunEvent& e) {
  nlohmann::ordered_json j;
  j["seq"] = e.seq;
  j["timestamp"] = e.timestamp;
  j["round"] = e.round;
  j["phase"] = e.phase;
  j["kind"] = to_string(e.kind);
  j["payload"] = e.payload;
  return nlohmann::json(j);
}

RunEvent event_from_json(const nlohmann::json& j) {
  RunEvent e;
  e.seq = j.at("seq").get<std::int64_t>();
  e.timestamp = j.at("timestamp").get<std::string>();
  e.round = j.at("round").get<int>();
  e.phase = j.at("phase").get<std::string>();
  e.kind = parse_kind(j.at("kind").get<std::string>());
  e.payload = j.at("payload");
  return e;
}

std::vector<RunEvent> read_events(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::CorruptCheckpoint, "cannot read " + path.string());
  std::vector<RunEvent> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::CorruptCheckpoint, path.string() + ": unparseable event line");
    try {
      out.push_back(event_from_json(j));
    } catch (const nlohmann::json::exception& ex) {
      throw Error(ErrorCode::CorruptCheckpoint, path.string() + ": " + ex.what());
    }
    if (out.back().seq != static_cast<std::int64_t>(out.size()))
      throw Error(ErrorCode::CorruptCheckpoint, path.string() + ": sequence gap at event " + std::to_string(out.size()));
  }
  return out;
}

void truncate_events(const std::filesystem::path& path, std::int64_t seq) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::CorruptCheckpoint, "cannot read " + path.string());
  std::string kept, line;
  std::int64_t n = 0;
  while (n < seq && std::getline(in, line)) {
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("seq") || j["seq"] != n + 1)
      throw Error(ErrorCode::CorruptCheckpoint, path.string() + ": event " + std::to_string(n + 1) + " is damaged");
    kept += line;
    kept += '\n';
    ++n;
  }
  if (n < seq)
    throw Error(ErrorCode::CorruptCheckpoint, path.string() + " has " + std::to_string(n) +
                                                  " events but the checkpoint expects " + std::to_string(seq));
  in.close();
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  out << kept;
  if (!out) throw Error(ErrorCode::Io, "cannot rewrite " + path.string());
}

}  // namespace abo
