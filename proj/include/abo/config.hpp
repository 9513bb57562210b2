// SPDX-License-Identifier: Apache-2.0
//
// Run configuration: a JSON key tree merged over built-in defaults, with
// dotted command-line overrides (--loop.max_fails=5).
#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "abo/backend.hpp"
#include "abo/core.hpp"
#include "abo/domain.hpp"
#include "abo/filter.hpp"
#include "abo/loop.hpp"
#include "abo/oracle.hpp"

namespace abo {

struct RunConfig {
  nlohmann::json tree;             // merged configuration, as embedded in checkpoints
  std::filesystem::path base_dir;  // relative paths resolve against this

  DomainSpec domain;
  ObjectiveSpec objective;
  LoopParams loop;
  InitSpec init;
  HardConstraint constraint;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir;
  std::int64_t interrupt_after_calls = 0;  // debug hook, 0 = off
};

/// Built-in defaults for every key.
nlohmann::json default_config_tree();

/// Sets `dotted` (a.b.c) to `value`, parsed as JSON when possible and kept as
/// a string otherwise. Unknown keys are rejected except under free-form
/// sections (oracle.params, backends.*, init.resample_pool, objective.portfolio).
void apply_override(nlohmann::json& tree, std::string_view dotted, std::string_view value);

/// Parses "--a.b=v" style arguments into (key, value) pairs.
std::vector<std::pair<std::string, std::string>> parse_override_args(const std::vector<std::string>& args);

/// Merges `user` onto defaults and validates. Throws InvalidConfig or Io.
RunConfig config_from_tree(const nlohmann::json& user, const std::filesystem::path& base_dir,
                           const std::vector<std::pair<std::string, std::string>>& overrides = {});

RunConfig load_config(const std::filesystem::path& path,
                      const std::vector<std::pair<std::string, std::string>>& overrides = {});

/// Directory holding the shipped prompt packs.
std::filesystem::path builtin_prompts_dir();

/// `append_record` keeps an existing recording file (resume).
std::shared_ptr<AgentBackend> make_backend(const RunConfig& cfg, bool append_record = false);
std::shared_ptr<Oracle> make_oracle(const RunConfig& cfg);
CandidatePool make_resample_pool(const RunConfig& cfg);

}  // namespace abo
