// SPDX-License-Identifier: Apache-2.0
#include "abo/prompts.hpp"

#include <cctype>
#include <fstream>
#include <functional>
#include <sstream>

#include <nlohmann/json.hpp>

namespace abo {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string rstrip(std::string s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
  return s;
}

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

// Calls fn(pos, len, name) for every {identifier} occurrence.
template <typename Fn>
void scan_placeholders(std::string_view t, Fn&& fn) {
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] != '{' || i + 1 >= t.size() || !ident_start(t[i + 1])) continue;
    std::size_t j = i + 1;
    while (j < t.size() && ident_char(t[j])) ++j;
    if (j < t.size() && t[j] == '}') fn(i, j - i + 1, t.substr(i + 1, j - i - 1));
  }
}

std::string append_task_awareness(std::string prompt, const PromptPack& pack, const ObjectiveSpec& objective) {
  if (!objective.description || objective.description->empty()) return prompt;
  const std::string slot = pack.task_awareness_slot.value_or("## TASK DESCRIPTION\n\n{objective_description}");
  prompt += "\n\n";
  prompt += render_template(slot, {{"objective_description", *objective.description}});
  return prompt;
}

// End offset (exclusive) of the balanced object starting at `open`, or npos.
std::size_t match_object(std::string_view t, std::size_t open) {
  int depth = 0;
  bool in_str = false, esc = false;
  for (std::size_t i = open; i < t.size(); ++i) {
    char c = t[i];
    if (in_str) {
      if (esc)
        esc = false;
      else if (c == '\\')
        esc = true;
      else if (c == '"')
        in_str = false;
      continue;
    }
    if (c == '"')
      in_str = true;
    else if (c == '{')
      ++depth;
    else if (c == '}' && --depth == 0)
      return i + 1;
  }
  return std::string_view::npos;
}

// Walks '{' positions right to left and returns the first object accepted by
// `pred` (i.e. the last one in the text).
std::optional<ojson> last_object_where(std::string_view text, const std::function<bool(const ojson&)>& pred) {
  constexpr int kMaxOpenings = 4096;
  int seen = 0;
  for (std::size_t pos = text.rfind('{'); pos != std::string_view::npos && seen < kMaxOpenings;
       pos = pos == 0 ? std::string_view::npos : text.rfind('{', pos - 1), ++seen) {
    std::size_t end = match_object(text, pos);
    if (end == std::string_view::npos) continue;
    ojson j = ojson::parse(text.substr(pos, end - pos), nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.is_object()) continue;
    if (pred(j)) return j;
  }
  return std::nullopt;
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

PromptPack load_prompt_pack(const fs::path& dir) {
  PromptPack pack;
  pack.explorer_template = rstrip(read_file(dir / "explorer.txt"));
  pack.planner_template = rstrip(read_file(dir / "planner.txt"));
  pack.worker_prefix = rstrip(read_file(dir / "worker_prefix.txt"));
  pack.worker_suffix = rstrip(read_file(dir / "worker_suffix.txt"));
  pack.worker_user_template = rstrip(read_file(dir / "worker_user.txt"));
  if (fs::exists(dir / "task_awareness.txt"))
    pack.task_awareness_slot = rstrip(read_file(dir / "task_awareness.txt"));

  const auto tasks_path = dir / "default_tasks.json";
  ojson tasks = ojson::parse(read_file(tasks_path), nullptr, false);
  if (tasks.is_discarded() || !tasks.is_array())
    throw Error(ErrorCode::InvalidConfig, tasks_path.string() + ": expected a JSON array of {name, text}");
  for (const auto& t : tasks) {
    if (!t.is_object() || !t.contains("name") || !t.contains("text"))
      throw Error(ErrorCode::InvalidConfig, tasks_path.string() + ": each task needs name and text");
    pack.default_tasks.push_back({t["name"].get<std::string>(), rstrip(t["text"].get<std::string>())});
  }
  if (pack.default_tasks.size() != 3)
    throw Error(ErrorCode::InvalidConfig, tasks_path.string() + ": exactly 3 default tasks are required");
  return pack;
}

std::vector<std::string> template_placeholders(std::string_view tmpl) {
  std::vector<std::string> names;
  scan_placeholders(tmpl, [&](std::size_t, std::size_t, std::string_view name) {
    for (const auto& n : names)
      if (n == name) return;
    names.emplace_back(name);
  });
  return names;
}

std::string render_template(std::string_view tmpl, const TemplateVars& vars) {
  std::string out;
  std::size_t cursor = 0;
  scan_placeholders(tmpl, [&](std::size_t pos, std::size_t len, std::string_view name) {
    auto it = vars.find(name);
    if (it == vars.end())
      throw Error(ErrorCode::MissingPlaceholder, "no value for {" + std::string(name) + "}");
    out.append(tmpl.substr(cursor, pos - cursor));
    out.append(it->second);
    cursor = pos + len;
  });
  out.append(tmpl.substr(cursor));
  return out;
}

std::string build_explorer_prompt(std::string_view ctx_text, std::string_view best_score_text,
                                  const PromptPack& pack, const ObjectiveSpec& objective,
                                  const PromptRequests& req) {
  if (ctx_text.empty()) throw std::invalid_argument("explorer prompt needs a non-empty context");
  std::string p = render_template(pack.explorer_template, {{"C_global", std::string(ctx_text)},
                                                           {"best_score", std::string(best_score_text)},
                                                           {"explorer_batch_request", req.explorer_batch}});
  return append_task_awareness(std::move(p), pack, objective);
}

std::string build_planner_prompt(std::string_view ctx_text, std::string_view stats_text,
                                 std::string_view summary_text, const PromptPack& pack,
                                 const ObjectiveSpec& objective, const PromptRequests& req) {
  if (ctx_text.empty()) throw std::invalid_argument("planner prompt needs a non-empty context");
  std::string p = render_template(pack.planner_template,
                                  {{"C_global", std::string(ctx_text)},
                                   {"performance_stats", std::string(stats_text)},
                                   {"existing_tasks_summary", std::string(summary_text)},
                                   {"planner_task_request", req.planner_tasks}});
  return append_task_awareness(std::move(p), pack, objective);
}

WorkerPrompts build_worker_prompts(const TaskEntry& task, const Candidate& x_curr, const PromptPack& pack,
                                   const PromptRequests& req) {
  if (task.text.empty()) throw std::invalid_argument("worker task text must be non-empty");
  const TemplateVars vars{{"worker_batch_request", req.worker_batch}, {"x_curr", x_curr.canonical}};
  WorkerPrompts w;
  w.system = render_template(pack.worker_prefix, vars) + "\n\n" + rstrip(task.text) + "\n\n" +
             render_template(pack.worker_suffix, vars);
  w.user = render_template(pack.worker_user_template, vars);
  return w;
}

Result<std::vector<std::string>> parse_candidates(std::string_view reply) {
  try {
    auto obj = last_object_where(reply, [](const ojson& j) {
      auto it = j.find("candidates");
      return it != j.end() && it->is_array();
    });
    if (!obj) return Failure{ErrorCode::NoCandidatesFound, "no JSON object with a 'candidates' array"};
    std::vector<std::string> out;
    for (const auto& v : (*obj)["candidates"]) {
      if (!v.is_string()) continue;
      auto s = v.get<std::string>();
      if (trim(s).empty()) continue;
      out.push_back(std::move(s));
    }
    return out;
  } catch (const std::exception& e) {
    return Failure{ErrorCode::NoCandidatesFound, e.what()};
  }
}

Result<PlanParse> parse_planner_reply(std::string_view reply, const TaskRegistry& registry) {
  try {
    auto obj = last_object_where(reply, [](const ojson& j) {
      if (j.empty()) return false;
      for (const auto& [k, v] : j.items())
        if (!v.is_string()) return false;
      return true;
    });
    if (!obj) return Failure{ErrorCode::NoPlanFound, "no JSON object mapping task names to strings"};

    PlanParse plan;
    for (const auto& [key, value] : obj->items()) {
      std::string name = normalize_task_name(key);
      std::string text = trim(value.get<std::string>());
      if (name.empty()) {
        plan.warnings.push_back("dropped directive with empty task name");
        continue;
      }
      if (text == "USE_EXISTING") {
        if (!registry.contains(name)) {
          plan.warnings.push_back("USE_EXISTING names unknown task " + name);
          continue;
        }
        plan.directives.push_back({name, PlannerDirective::Action::UseExisting, {}});
      } else if (text.empty()) {
        plan.warnings.push_back("dropped task " + name + " with empty description");
      } else {
        if (registry.is_default_name(name)) name += "_V2";
        plan.directives.push_back({name, PlannerDirective::Action::Create, std::move(text)});
      }
    }
    return plan;
  } catch (const std::exception& e) {
    return Failure{ErrorCode::NoPlanFound, e.what()};
  }
}

}  // namespace abo
