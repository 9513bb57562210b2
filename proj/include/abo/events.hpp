// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace abo {

enum class EventKind { AgentCall, FilterReport, EvalBatch, RegistryChange, RoundEnd, Checkpoint, Error };
std::string_view to_string(EventKind k);

struct RunEvent {
  std::int64_t seq = 0;
  std::string timestamp;
  int round = 0;
  std::string phase;
  EventKind kind = EventKind::AgentCall;
  nlohmann::json payload;
};

/// Receives events from the loop. The base class only numbers them.
class EventSink {
 public:
  virtual ~EventSink() = default;
  /// Thread-safe; assigns the next sequence number.
  std::int64_t emit(int round, std::string_view phase, EventKind kind, nlohmann::json payload);
  std::int64_t last_seq() const;

 protected:
  explicit EventSink(std::int64_t last_seq = 0) : seq_(last_seq) {}
  virtual void write(const RunEvent& e) = 0;

 private:
  mutable std::mutex mu_;
  std::int64_t seq_;
};

/// Keeps events in memory (tests).
class MemoryEventSink final : public EventSink {
 public:
  MemoryEventSink() = default;
  const std::vector<RunEvent>& events() const { return events_; }

 protected:
  void write(const RunEvent& e) override { events_.push_back(e); }

 private:
  std::vector<RunEvent> events_;
};

/// Append-only JSONL file; each line is flushed as soon as it is written.
class JsonlEventLog final : public EventSink {
 public:
  /// Opens `path` for appending after `last_seq` events.
  JsonlEventLog(const std::filesystem::path& path, std::int64_t last_seq = 0);

 protected:
  void write(const RunEvent& e) override;

 private:
  std::ofstream out_;
};

nlohmann::json event_to_json(const RunEvent& e);
RunEvent event_from_json(const nlohmann::json& j);

/// Reads every event line. Throws CorruptCheckpoint on unparseable lines or
/// a sequence gap.
std::vector<RunEvent> read_events(const std::filesystem::path& path);

/// Truncates the file after the event with sequence number `seq`. Throws
/// CorruptCheckpoint when fewer than `seq` events are present.
void truncate_events(const std::filesystem::path& path, std::int64_t seq);

}  // namespace abo
