// SPDX-License-Identifier: Apache-2.0
//
// Prompt assembly for the three agent roles and parsing of their replies.
//
// Templates are plain UTF-8 files with {name} placeholders. A placeholder is
// a brace-enclosed identifier ([A-Za-z_][A-Za-z0-9_]*); JSON examples such as
// {"candidates": [...]} are left alone because they start with a quote.
//
// Placeholders per template:
//   explorer.txt      {C_global} {best_score} {explorer_batch_request}
//   planner.txt       {C_global} {performance_stats} {existing_tasks_summary}
//                     {planner_task_request}
//   worker_suffix.txt {worker_batch_request}
//   worker_user.txt   {x_curr} {worker_batch_request}
//   task_awareness.txt {objective_description}
#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "abo/core.hpp"
#include "abo/registry.hpp"

namespace abo {

struct PromptPack {
  std::string explorer_template;
  std::string planner_template;
  std::string worker_prefix;
  std::string worker_suffix;
  std::string worker_user_template;
  std::optional<std::string> task_awareness_slot;
  std::vector<DefaultTask> default_tasks;
};

/// Loads a pack directory. Throws Io naming the missing file.
PromptPack load_prompt_pack(const std::filesystem::path& dir);

/// Batch-size wording inserted into prompts.
struct PromptRequests {
  std::string explorer_batch = "10-20";
  std::string worker_batch = "5-10";
  std::string planner_tasks = "8-10";
};

using TemplateVars = std::map<std::string, std::string, std::less<>>;

/// Placeholder names referenced by a template, in order of first use.
std::vector<std::string> template_placeholders(std::string_view tmpl);

/// Substitutes every placeholder. Throws MissingPlaceholder when a referenced
/// name has no value.
std::string render_template(std::string_view tmpl, const TemplateVars& vars);

std::string build_explorer_prompt(std::string_view ctx_text, std::string_view best_score_text,
                                  const PromptPack& pack, const ObjectiveSpec& objective,
                                  const PromptRequests& req = {});

std::string build_planner_prompt(std::string_view ctx_text, std::string_view stats_text,
                                 std::string_view summary_text, const PromptPack& pack,
                                 const ObjectiveSpec& objective, const PromptRequests& req = {});

struct WorkerPrompts {
  std::string system;
  std::string user;
};

/// system = prefix + task text + suffix (blank-line separated);
/// user = worker user template with x_curr.
WorkerPrompts build_worker_prompts(const TaskEntry& task, const Candidate& x_curr,
                                   const PromptPack& pack, const PromptRequests& req = {});

/// Extracts the candidate list from the last well-formed JSON object in the
/// reply that has a "candidates" array. Never throws.
Result<std::vector<std::string>> parse_candidates(std::string_view reply);

struct PlannerDirective {
  enum class Action { UseExisting, Create };
  std::string name;
  Action action = Action::UseExisting;
  std::string text;  // Create only

  friend bool operator==(const PlannerDirective&, const PlannerDirective&) = default;
};

struct PlanParse {
  std::vector<PlannerDirective> directives;
  std::vector<std::string> warnings;
};

/// Extracts name -> description pairs from the last JSON object whose values
/// are all strings. USE_EXISTING entries naming unknown tasks are dropped with
/// a warning; creates that reuse a default name are renamed NAME_V2.
/// Never throws.
Result<PlanParse> parse_planner_reply(std::string_view reply, const TaskRegistry& registry);

}  // namespace abo
