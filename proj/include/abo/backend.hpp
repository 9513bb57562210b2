// SPDX-License-Identifier: Apache-2.0
//
// Chat-completion backends and per-role token accounting.
#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "abo/error.hpp"
#include "abo/rng.hpp"

namespace abo {

enum class AgentRole { Explorer = 0, Planner = 1, Worker = 2 };
inline constexpr std::array<AgentRole, 3> kAllRoles{AgentRole::Explorer, AgentRole::Planner, AgentRole::Worker};
std::string_view to_string(AgentRole r);
AgentRole parse_agent_role(std::string_view s);  // throws InvalidConfig

struct CompletionRequest {
  std::string system;
  std::string user;
  double temperature = 0.7;
  int max_output_tokens = 8192;
  AgentRole role = AgentRole::Explorer;
};

struct CompletionResult {
  std::string text;
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;
  std::int64_t latency_ms = 0;
  std::int64_t failed_attempts = 0;  // retried attempts before this result
};

class AgentBackend {
 public:
  virtual ~AgentBackend() = default;
  /// Throws BackendUnavailable or BadResponse.
  virtual CompletionResult complete(const CompletionRequest& req) = 0;
  /// Name used in token accounting for calls of `role`.
  virtual std::string name_for(AgentRole role) const = 0;
  /// Replay cursor state for checkpoints. Stateless backends return null.
  virtual nlohmann::json save_state() const { return nullptr; }
  virtual void restore_state(const nlohmann::json& /*state*/) {}
};

// ---------------------------------------------------------------------------
// Token accounting

struct TokenCounts {
  std::int64_t input = 0;
  std::int64_t output = 0;
  std::int64_t calls = 0;
  std::int64_t failed_attempts = 0;
  std::int64_t total() const noexcept { return input + output; }
  TokenCounts& operator+=(const TokenCounts& o) noexcept;
  friend bool operator==(const TokenCounts&, const TokenCounts&) = default;
};

/// Thread-safe. Only the usage of successful calls is counted; retried
/// attempts are tallied separately in failed_attempts.
class TokenLedger {
 public:
  void record(AgentRole role, const std::string& backend, const CompletionResult& r);
  void record_failure(AgentRole role, const std::string& backend, std::int64_t attempts);

  std::map<std::string, TokenCounts> by_role() const;
  std::map<std::string, TokenCounts> by_backend() const;
  TokenCounts total() const;

  nlohmann::json to_json() const;
  /// Replaces the contents with a to_json() dump.
  void restore(const nlohmann::json& j);

 private:
  using Key = std::pair<std::string, std::string>;  // role, backend
  mutable std::mutex mu_;
  std::map<Key, TokenCounts> cells_;
};

/// {"per_role": {...}, "per_backend": {...}, "total": {...}}; every role is
/// present even with zero calls.
nlohmann::json token_report(const TokenLedger& ledger);
std::string render_token_report(const nlohmann::json& report);

// ---------------------------------------------------------------------------
// Implementations

/// Replays a JSONL script of {match: {role, nth_call}, reply, input_tokens?,
/// output_tokens?}. nth_call is 1-based per role; when omitted it continues
/// after the previous entry of that role.
class ScriptedBackend final : public AgentBackend {
 public:
  struct Entry {
    std::string reply;
    std::int64_t input_tokens = 0;
    std::int64_t output_tokens = 0;
  };

  /// Throws MalformedScript, Io.
  static std::unique_ptr<ScriptedBackend> load(const std::filesystem::path& path);
  static std::unique_ptr<ScriptedBackend> parse(std::string_view jsonl, const std::string& label = "<script>");

  CompletionResult complete(const CompletionRequest& req) override;
  std::string name_for(AgentRole) const override { return "scripted"; }
  nlohmann::json save_state() const override;
  void restore_state(const nlohmann::json& state) override;
  std::size_t entries(AgentRole role) const;

 private:
  std::array<std::map<std::int64_t, Entry>, 3> script_;
  std::array<std::int64_t, 3> cursor_{};
  mutable std::mutex mu_;
};

/// Forwards to an inner backend and appends every exchange to a script file
/// that ScriptedBackend can replay.
class RecordingBackend final : public AgentBackend {
 public:
  RecordingBackend(std::shared_ptr<AgentBackend> inner, const std::filesystem::path& path, bool append = false);
  CompletionResult complete(const CompletionRequest& req) override;
  std::string name_for(AgentRole role) const override { return inner_->name_for(role); }
  nlohmann::json save_state() const override;
  void restore_state(const nlohmann::json& state) override;

 private:
  std::shared_ptr<AgentBackend> inner_;
  std::ofstream out_;
  std::array<std::int64_t, 3> counts_{};
  std::mutex mu_;
};

/// Sends each role to its own backend.
class RoutedBackend final : public AgentBackend {
 public:
  explicit RoutedBackend(std::array<std::shared_ptr<AgentBackend>, 3> routes);
  CompletionResult complete(const CompletionRequest& req) override;
  std::string name_for(AgentRole role) const override;
  nlohmann::json save_state() const override;
  void restore_state(const nlohmann::json& state) override;

 private:
  std::array<std::shared_ptr<AgentBackend>, 3> routes_;
};

/// Rule-based stand-in for an LLM. Explorer replies mutate the best context
/// lines ("score: candidate"), worker replies mutate the "Input ...: X"
/// candidate, planner replies reuse every task named in the prompt.
/// Deterministic in (seed, role, call number).
class MutatorBackend final : public AgentBackend {
 public:
  struct Options {
    std::uint64_t seed = 0;
    std::string alphabet = "ACDEFGHIKLMNPQRSTVWY";
    std::size_t explorer_batch = 12;
    std::size_t worker_batch = 6;
    std::size_t max_edits = 2;        // point mutations per child, 1..max_edits
    std::size_t parent_pool = 4;      // explorer parents drawn from the top lines
    double random_fraction = 0.0;     // children replaced by random strings
  };

  explicit MutatorBackend(Options opt);
  CompletionResult complete(const CompletionRequest& req) override;
  std::string name_for(AgentRole) const override { return "mutator"; }
  nlohmann::json save_state() const override;
  void restore_state(const nlohmann::json& state) override;

 private:
  std::string mutate(const std::string& parent, Engine& rng) const;
  Options opt_;
  std::array<std::int64_t, 3> cursor_{};
  mutable std::mutex mu_;
};

struct HttpBackendConfig {
  std::string endpoint_url;  // full chat-completions URL or an API base
  std::string model;
  std::string api_key_env;  // environment variable holding the key; may be empty
  int max_retries = 4;
  std::int64_t retry_backoff_ms = 1000;
  std::int64_t max_backoff_ms = 60'000;
  std::chrono::milliseconds timeout{300'000};
};

/// OpenAI-compatible chat completions over cpp-httplib. Retries transport
/// errors, 429 and 5xx with exponential backoff.
class HttpBackend final : public AgentBackend {
 public:
  explicit HttpBackend(HttpBackendConfig cfg);
  CompletionResult complete(const CompletionRequest& req) override;
  std::string name_for(AgentRole) const override { return "http:" + cfg_.model; }
  const HttpBackendConfig& config() const { return cfg_; }

 private:
  HttpBackendConfig cfg_;
  std::string base_;
  std::string path_;
};

/// Parses an OpenAI-style response body. Throws BadResponse.
CompletionResult parse_chat_completion(std::string_view body);

}  // namespace abo
