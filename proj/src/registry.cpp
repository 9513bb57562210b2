// SPDX-License-Identifier: Apache-2.0
#include "abo/registry.hpp"

#include <algorithm>
#include <cctype>

namespace abo {

std::string normalize_task_name(std::string_view name) {
  std::string out;
  for (char c : name) {
    auto uc = static_cast<unsigned char>(c);
    if (std::isalnum(uc))
      out.push_back(static_cast<char>(std::toupper(uc)));
    else if (!out.empty() && out.back() != '_')
      out.push_back('_');
  }
  while (!out.empty() && out.back() == '_') out.pop_back();
  return out;
}

TaskRegistry::TaskRegistry(const std::vector<DefaultTask>& defaults, std::size_t capacity)
    : capacity_(capacity) {
  if (defaults.size() != 3)
    throw Error(ErrorCode::InvalidConfig, "a domain must provide exactly 3 default tasks");
  if (capacity_ <= defaults.size())
    throw Error(ErrorCode::InvalidConfig, "registry capacity must exceed the number of default tasks");
  for (const auto& d : defaults) {
    auto name = normalize_task_name(d.name);
    if (name.empty() || d.text.empty())
      throw Error(ErrorCode::InvalidConfig, "default task needs a name and text");
    if (find(name)) throw Error(ErrorCode::InvalidConfig, "duplicate default task " + name);
    entries_.push_back({name, d.text, 0, 0, true});
  }
}

const TaskEntry* TaskRegistry::find(std::string_view name) const {
  for (const auto& e : entries_)
    if (e.name == name) return &e;
  return nullptr;
}

TaskEntry* TaskRegistry::find_mut(std::string_view name) {
  for (auto& e : entries_)
    if (e.name == name) return &e;
  return nullptr;
}

bool TaskRegistry::is_default_name(std::string_view name) const {
  const auto* e = find(name);
  return e && e->is_default;
}

void TaskRegistry::record_outcome(std::string_view name, bool success) {
  auto* e = find_mut(name);
  if (!e) throw Error(ErrorCode::UnknownTask, "no task named '" + std::string(name) + "'");
  ++e->attempts;
  if (success) ++e->successes;
}

namespace {

// a's success rate < b's, compared exactly on integers.
bool rate_less(const TaskEntry& a, const TaskEntry& b) {
  if (a.attempts == 0 || b.attempts == 0) {
    const bool a_pos = a.attempts > 0 && a.successes > 0;
    const bool b_pos = b.attempts > 0 && b.successes > 0;
    return !a_pos && b_pos;
  }
  return a.successes * b.attempts < b.successes * a.attempts;
}

}  // namespace

std::size_t TaskRegistry::eviction_victim() const {
  std::size_t victim = entries_.size();
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    if (e.is_default) continue;
    if (victim == entries_.size()) {
      victim = i;
      continue;
    }
    const auto& v = entries_[victim];
    bool worse = false;
    if (rate_less(e, v))
      worse = true;
    else if (!rate_less(v, e)) {
      if (e.attempts != v.attempts)
        worse = e.attempts > v.attempts;
      else
        worse = e.name < v.name;
    }
    if (worse) victim = i;
  }
  return victim;
}

AddTaskResult TaskRegistry::add_task(std::string_view raw_name, std::string_view text) {
  if (text.empty()) throw std::invalid_argument("task text must be non-empty");
  AddTaskResult res;
  res.name = normalize_task_name(raw_name);
  if (res.name.empty()) throw std::invalid_argument("task name must contain an alphanumeric character");
  if (is_default_name(res.name)) res.name += "_V2";

  if (auto* existing = find_mut(res.name)) {
    existing->text = std::string(text);
    res.replaced = true;
    return res;
  }
  if (entries_.size() + 1 > capacity_) {
    const std::size_t victim = eviction_victim();
    if (victim < entries_.size()) {
      res.evicted = entries_[victim].name;
      entries_.erase(entries_.begin() + static_cast<std::ptrdiff_t>(victim));
    }
  }
  entries_.push_back({res.name, std::string(text), 0, 0, false});
  return res;
}

nlohmann::ordered_json TaskRegistry::to_json() const {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& e : entries_)
    j[e.name] = {{"text", e.text}, {"attempts", e.attempts}, {"successes", e.successes},
                 {"is_default", e.is_default}};
  return j;
}

TaskRegistry TaskRegistry::from_json(const nlohmann::ordered_json& j, std::size_t capacity) {
  TaskRegistry r;
  r.capacity_ = capacity;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto& v = it.value();
    TaskEntry e{it.key(), v.at("text").get<std::string>(), v.at("attempts").get<std::int64_t>(),
                v.at("successes").get<std::int64_t>(), v.at("is_default").get<bool>()};
    if (e.successes > e.attempts || e.successes < 0)
      throw Error(ErrorCode::CorruptCheckpoint, "task " + e.name + " has successes > attempts");
    r.entries_.push_back(std::move(e));
  }
  if (r.entries_.size() > capacity)
    throw Error(ErrorCode::CorruptCheckpoint, "registry exceeds its capacity");
  return r;
}

int rate_percent(std::int64_t successes, std::int64_t attempts) {
  if (attempts <= 0) return 0;
  return static_cast<int>((200 * successes + attempts) / (2 * attempts));
}

std::string render_performance_stats(const TaskRegistry& r) {
  std::vector<const TaskEntry*> rows;
  bool any = false;
  for (const auto& e : r.entries()) {
    rows.push_back(&e);
    any = any || e.attempts > 0;
  }
  if (!any) return "No performance data yet.";
  std::stable_sort(rows.begin(), rows.end(),
                   [](const TaskEntry* a, const TaskEntry* b) { return a->attempts > b->attempts; });
  std::string out;
  for (const auto* e : rows) {
    if (!out.empty()) out += '\n';
    out += e->name + ": " + std::to_string(e->successes) + "/" + std::to_string(e->attempts) + " (" +
           std::to_string(rate_percent(e->successes, e->attempts)) + "%)";
  }
  return out;
}

namespace {

// Byte length of the first `n` UTF-8 code points of s (continuation bytes
// are 10xxxxxx).
std::size_t utf8_prefix_bytes(std::string_view s, std::size_t n, bool& truncated) {
  std::size_t count = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if ((static_cast<unsigned char>(s[i]) & 0xC0) != 0x80) {
      if (count == n) {
        truncated = true;
        return i;
      }
      ++count;
    }
  }
  truncated = false;
  return s.size();
}

}  // namespace

std::string render_task_summary(const TaskRegistry& r) {
  constexpr std::size_t kPreview = 100;
  std::string out;
  for (const auto& e : r.entries()) {
    std::string_view text = e.text;
    auto start = text.find_first_not_of(" \t\r\n");
    text = start == std::string_view::npos ? std::string_view{} : text.substr(start);
    std::string_view first_line = text.substr(0, text.find('\n'));
    while (!first_line.empty() && (first_line.back() == '\r' || first_line.back() == ' '))
      first_line.remove_suffix(1);
    bool truncated = false;
    auto len = utf8_prefix_bytes(first_line, kPreview, truncated);
    if (!out.empty()) out += '\n';
    out += e.name + ": " + std::string(first_line.substr(0, len));
    if (truncated) out += "...";
  }
  return out;
}

}  // namespace abo
