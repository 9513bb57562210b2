// SPDX-License-Identifier: Apache-2.0
//
// Bounded library of natural-language local-search tasks with
// attempts/successes statistics.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "abo/error.hpp"

namespace abo {

struct TaskEntry {
  std::string name;
  std::string text;
  std::int64_t attempts = 0;
  std::int64_t successes = 0;
  bool is_default = false;

  double success_rate() const noexcept {
    return attempts > 0 ? static_cast<double>(successes) / static_cast<double>(attempts) : 0.0;
  }

  friend bool operator==(const TaskEntry&, const TaskEntry&) = default;
};

struct DefaultTask {
  std::string name;
  std::string text;
};

/// Upper-case, non-alphanumerics folded to '_', outer underscores trimmed.
std::string normalize_task_name(std::string_view name);

struct AddTaskResult {
  std::string name;  // final name (may carry a _V2 suffix)
  bool replaced = false;
  std::optional<std::string> evicted;
};

class TaskRegistry {
 public:
  static constexpr std::size_t kDefaultCapacity = 20;

  TaskRegistry() = default;
  /// Requires exactly three defaults and capacity > 3.
  TaskRegistry(const std::vector<DefaultTask>& defaults, std::size_t capacity = kDefaultCapacity);

  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t size() const noexcept { return entries_.size(); }
  const std::vector<TaskEntry>& entries() const noexcept { return entries_; }

  const TaskEntry* find(std::string_view name) const;
  bool contains(std::string_view name) const { return find(name) != nullptr; }
  bool is_default_name(std::string_view name) const;

  /// Throws UnknownTask.
  void record_outcome(std::string_view name, bool success);

  /// Adds or replaces a non-default task. Names colliding with a default get
  /// "_V2" appended. When full, evicts the non-default entry with the lowest
  /// success rate (ties: more attempts first, then smaller name).
  AddTaskResult add_task(std::string_view name, std::string_view text);

  nlohmann::ordered_json to_json() const;
  static TaskRegistry from_json(const nlohmann::ordered_json& j, std::size_t capacity);

  friend bool operator==(const TaskRegistry&, const TaskRegistry&) = default;

 private:
  TaskEntry* find_mut(std::string_view name);
  std::size_t eviction_victim() const;

  std::vector<TaskEntry> entries_;
  std::size_t capacity_ = kDefaultCapacity;
};

/// "NAME: successes/attempts (rate%)" lines, most attempts first, or
/// "No performance data yet." when nothing has run.
std::string render_performance_stats(const TaskRegistry& r);

/// "NAME: <first 100 characters of the first line>" per task, "..." appended
/// when the line was cut.
std::string render_task_summary(const TaskRegistry& r);

/// Integer percent, rounded half up.
int rate_percent(std::int64_t successes, std::int64_t attempts);

}  // namespace abo
