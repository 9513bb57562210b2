// SPDX-License-Identifier: Apache-2.0
#include "abo/backend.hpp"

#include <httplib.h>

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <regex>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "http_util.hpp"

namespace abo {

using json = nlohmann::json;

std::string_view to_string(AgentRole r) {
  switch (r) {
    case AgentRole::Explorer:
      return "explorer";
    case AgentRole::Planner:
      return "planner";
    case AgentRole::Worker:
      return "worker";
  }
  return "?";
}

AgentRole parse_agent_role(std::string_view s) {
  for (auto r : kAllRoles)
    if (to_string(r) == s) return r;
  throw Error(ErrorCode::InvalidConfig, "unknown agent role '" + std::string(s) + "'");
}

namespace {
std::size_t idx(AgentRole r) { return static_cast<std::size_t>(r); }

json counts_json(const TokenCounts& c) {
  return {{"input", c.input}, {"output", c.output}, {"total", c.total()}, {"calls", c.calls},
          {"failed_attempts", c.failed_attempts}};
}

// Roughly four bytes per token; only used by the rule-based backend.
std::int64_t pseudo_tokens(std::size_t bytes) { return static_cast<std::int64_t>((bytes + 3) / 4); }
}  // namespace

// ---------------------------------------------------------------------------

TokenCounts& TokenCounts::operator+=(const TokenCounts& o) noexcept {
  input += o.input;
  output += o.output;
  calls += o.calls;
  failed_attempts += o.failed_attempts;
  return *this;
}

void TokenLedger::record(AgentRole role, const std::string& backend, const CompletionResult& r) {
  std::lock_guard lock(mu_);
  auto& c = cells_[{std::string(to_string(role)), backend}];
  c.input += r.input_tokens;
  c.output += r.output_tokens;
  c.calls += 1;
  c.failed_attempts += r.failed_attempts;
}

void TokenLedger::record_failure(AgentRole role, const std::string& backend, std::int64_t attempts) {
  std::lock_guard lock(mu_);
  cells_[{std::string(to_string(role)), backend}].failed_attempts += attempts;
}

std::map<std::string, TokenCounts> TokenLedger::by_role() const {
  std::lock_guard lock(mu_);
  std::map<std::string, TokenCounts> out;
  for (auto r : kAllRoles) out[std::string(to_string(r))];
  for (const auto& [k, c] : cells_) out[k.first] += c;
  return out;
}

std::map<std::string, TokenCounts> TokenLedger::by_backend() const {
  std::lock_guard lock(mu_);
  std::map<std::string, TokenCounts> out;
  for (const auto& [k, c] : cells_) out[k.second] += c;
  return out;
}

TokenCounts TokenLedger::total() const {
  std::lock_guard lock(mu_);
  TokenCounts t;
  for (const auto& [k, c] : cells_) t += c;
  return t;
}

json TokenLedger::to_json() const {
  std::lock_guard lock(mu_);
  json arr = json::array();
  for (const auto& [k, c] : cells_)
    arr.push_back({{"role", k.first}, {"backend", k.second}, {"input", c.input}, {"output", c.output},
                   {"calls", c.calls}, {"failed_attempts", c.failed_attempts}});
  return arr;
}

void TokenLedger::restore(const json& j) {
  std::lock_guard lock(mu_);
  cells_.clear();
  for (const auto& e : j) {
    TokenCounts c{e.at("input").get<std::int64_t>(), e.at("output").get<std::int64_t>(),
                  e.at("calls").get<std::int64_t>(), e.at("failed_attempts").get<std::int64_t>()};
    cells_[{e.at("role").get<std::string>(), e.at("backend").get<std::string>()}] = c;
  }
}

json token_report(const TokenLedger& ledger) {
  json per_role = json::object(), per_backend = json::object();
  for (const auto& [k, c] : ledger.by_role()) per_role[k] = counts_json(c);
  for (const auto& [k, c] : ledger.by_backend()) per_backend[k] = counts_json(c);
  return {{"per_role", per_role}, {"per_backend", per_backend}, {"total", counts_json(ledger.total())}};
}

std::string render_token_report(const json& report) {
  std::ostringstream os;
  auto row = [&](const std::string& label, const json& c) {
    os << label << ": input " << c.at("input").get<std::int64_t>() << ", output " << c.at("output").get<std::int64_t>()
       << ", total " << c.at("total").get<std::int64_t>() << ", calls " << c.at("calls").get<std::int64_t>() << '\n';
  };
  os << "per role\n";
  for (const auto& [k, c] : report.at("per_role").items()) row("  " + k, c);
  os << "per backend\n";
  for (const auto& [k, c] : report.at("per_backend").items()) row("  " + k, c);
  row("total", report.at("total"));
  return os.str();
}

// ---------------------------------------------------------------------------

std::unique_ptr<ScriptedBackend> ScriptedBackend::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read script " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

std::unique_ptr<ScriptedBackend> ScriptedBackend::parse(std::string_view jsonl, const std::string& label) {
  auto b = std::unique_ptr<ScriptedBackend>(new ScriptedBackend());
  std::array<std::int64_t, 3> last{};
  std::size_t line_no = 0, count = 0;
  std::size_t start = 0;
  while (start <= jsonl.size()) {
    auto nl = jsonl.find('\n', start);
    auto line = jsonl.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
    start = nl == std::string_view::npos ? jsonl.size() + 1 : nl + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    auto where = label + ":" + std::to_string(line_no);
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::MalformedScript, where + ": not a JSON object");
    if (!j.contains("match") || !j["match"].is_object() || !j["match"].contains("role") ||
        !j["match"]["role"].is_string())
      throw Error(ErrorCode::MalformedScript, where + ": missing match.role");
    if (!j.contains("reply") || !j["reply"].is_string())
      throw Error(ErrorCode::MalformedScript, where + ": missing string 'reply'");
    AgentRole role;
    try {
      role = parse_agent_role(j["match"]["role"].get<std::string>());
    } catch (const Error& e) {
      throw Error(ErrorCode::MalformedScript, where + ": " + e.detail());
    }
    std::int64_t n = last[idx(role)] + 1;
    if (j["match"].contains("nth_call")) {
      const auto& v = j["match"]["nth_call"];
      if (!v.is_number_integer() || v.get<std::int64_t>() < 1)
        throw Error(ErrorCode::MalformedScript, where + ": nth_call must be an integer >= 1");
      n = v.get<std::int64_t>();
    }
    Entry e{j["reply"].get<std::string>(), j.value("input_tokens", std::int64_t{0}),
            j.value("output_tokens", std::int64_t{0})};
    if (e.input_tokens < 0 || e.output_tokens < 0)
      throw Error(ErrorCode::MalformedScript, where + ": token counts must be >= 0");
    if (!b->script_[idx(role)].emplace(n, std::move(e)).second)
      throw Error(ErrorCode::MalformedScript,
                  where + ": duplicate entry for " + std::string(to_string(role)) + " call " + std::to_string(n));
    last[idx(role)] = n;
    ++count;
  }
  if (count == 0) throw Error(ErrorCode::MalformedScript, label + ": script has no entries");
  return b;
}

CompletionResult ScriptedBackend::complete(const CompletionRequest& req) {
  std::lock_guard lock(mu_);
  const auto i = idx(req.role);
  const auto n = cursor_[i] + 1;
  auto it = script_[i].find(n);
  if (it == script_[i].end())
    throw Error(ErrorCode::BackendUnavailable,
                "script has no reply for " + std::string(to_string(req.role)) + " call " + std::to_string(n));
  cursor_[i] = n;
  return {it->second.reply, it->second.input_tokens, it->second.output_tokens, 0, 0};
}

json ScriptedBackend::save_state() const {
  std::lock_guard lock(mu_);
  return {{"explorer", cursor_[0]}, {"planner", cursor_[1]}, {"worker", cursor_[2]}};
}

void ScriptedBackend::restore_state(const json& state) {
  std::lock_guard lock(mu_);
  for (auto r : kAllRoles) cursor_[idx(r)] = state.at(std::string(to_string(r))).get<std::int64_t>();
}

std::size_t ScriptedBackend::entries(AgentRole role) const { return script_[idx(role)].size(); }

// ---------------------------------------------------------------------------

RecordingBackend::RecordingBackend(std::shared_ptr<AgentBackend> inner, const std::filesystem::path& path, bool append)
    : inner_(std::move(inner)), out_(path, append ? std::ios::app : std::ios::trunc) {
  if (!out_) throw Error(ErrorCode::Io, "cannot write " + path.string());
}

CompletionResult RecordingBackend::complete(const CompletionRequest& req) {
  auto res = inner_->complete(req);
  std::lock_guard lock(mu_);
  const auto n = ++counts_[idx(req.role)];
  json line = {{"match", {{"role", to_string(req.role)}, {"nth_call", n}}},
               {"reply", res.text},
               {"input_tokens", res.input_tokens},
               {"output_tokens", res.output_tokens}};
  out_ << line.dump() << '\n';
  out_.flush();
  return res;
}

json RecordingBackend::save_state() const {
  return {{"counts", {counts_[0], counts_[1], counts_[2]}}, {"inner", inner_->save_state()}};
}

void RecordingBackend::restore_state(const json& state) {
  for (std::size_t i = 0; i < 3; ++i) counts_[i] = state.at("counts").at(i).get<std::int64_t>();
  inner_->restore_state(state.at("inner"));
}

// ---------------------------------------------------------------------------

RoutedBackend::RoutedBackend(std::array<std::shared_ptr<AgentBackend>, 3> routes) : routes_(std::move(routes)) {
  for (const auto& r : routes_)
    if (!r) throw Error(ErrorCode::InvalidConfig, "every agent role needs a backend");
}

CompletionResult RoutedBackend::complete(const CompletionRequest& req) { return routes_[idx(req.role)]->complete(req); }

std::string RoutedBackend::name_for(AgentRole role) const { return routes_[idx(role)]->name_for(role); }

json RoutedBackend::save_state() const {
  json j = json::object();
  for (auto r : kAllRoles) j[std::string(to_string(r))] = routes_[idx(r)]->save_state();
  return j;
}

void RoutedBackend::restore_state(const json& state) {
  for (auto r : kAllRoles) routes_[idx(r)]->restore_state(state.at(std::string(to_string(r))));
}

// ---------------------------------------------------------------------------

MutatorBackend::MutatorBackend(Options opt) : opt_(std::move(opt)) {
  if (opt_.alphabet.empty()) throw Error(ErrorCode::InvalidConfig, "mutator alphabet is empty");
  opt_.max_edits = std::max<std::size_t>(1, opt_.max_edits);
  opt_.parent_pool = std::max<std::size_t>(1, opt_.parent_pool);
}

std::string MutatorBackend::mutate(const std::string& parent, Engine& rng) const {
  std::vector<std::size_t> slots;
  for (std::size_t i = 0; i < parent.size(); ++i)
    if (opt_.alphabet.find(parent[i]) != std::string::npos) slots.push_back(i);
  if (opt_.random_fraction > 0.0 && uniform_unit(rng) < opt_.random_fraction) {
    std::string s = parent;
    for (auto p : slots) s[p] = opt_.alphabet[uniform_index(rng, opt_.alphabet.size())];
    return s;
  }
  std::string s = parent;
  if (slots.empty()) return s;
  const auto edits = 1 + uniform_index(rng, opt_.max_edits);
  for (std::size_t k = 0; k < edits; ++k) {
    const auto p = slots[uniform_index(rng, slots.size())];
    s[p] = opt_.alphabet[uniform_index(rng, opt_.alphabet.size())];
  }
  return s;
}

CompletionResult MutatorBackend::complete(const CompletionRequest& req) {
  std::int64_t n;
  {
    std::lock_guard lock(mu_);
    n = ++cursor_[idx(req.role)];
  }
  Engine rng(mix64(opt_.seed ^ mix64(fnv1a(to_string(req.role)) + static_cast<std::uint64_t>(n))));
  const std::string prompt = req.system + "\n" + req.user;
  std::istringstream lines(prompt);
  std::string line;
  json reply = json::object();

  if (req.role == AgentRole::Planner) {
    static const std::regex task_line(R"(^([A-Z][A-Z0-9_]*): )");
    std::vector<std::string> names;
    while (std::getline(lines, line)) {
      std::smatch m;
      if (std::regex_search(line, m, task_line) &&
          std::find(names.begin(), names.end(), m[1].str()) == names.end())
        names.push_back(m[1].str());
    }
    for (const auto& nm : names) reply[nm] = "USE_EXISTING";
  } else {
    std::vector<std::string> parents;
    if (req.role == AgentRole::Explorer) {
      static const std::regex ctx_line(R"(^\s*[-+]?[0-9][0-9.eE+\-]*:\s*(\S+)\s*$)");
      while (std::getline(lines, line)) {
        std::smatch m;
        if (std::regex_match(line, m, ctx_line)) parents.push_back(m[1].str());
      }
      if (parents.size() > opt_.parent_pool) parents.resize(opt_.parent_pool);
    } else {
      static const std::regex input_line(R"(Input [A-Za-z ]+:\s*(\S+))");
      std::smatch m;
      if (std::regex_search(req.user, m, input_line)) parents.push_back(m[1].str());
    }
    json cands = json::array();
    const std::size_t want = req.role == AgentRole::Explorer ? opt_.explorer_batch : opt_.worker_batch;
    for (std::size_t k = 0; k < want && !parents.empty(); ++k)
      cands.push_back(mutate(parents[uniform_index(rng, parents.size())], rng));
    reply["candidates"] = cands;
  }
  CompletionResult res;
  res.text = reply.dump();
  res.input_tokens = pseudo_tokens(prompt.size());
  res.output_tokens = pseudo_tokens(res.text.size());
  return res;
}

json MutatorBackend::save_state() const {
  std::lock_guard lock(mu_);
  return {{"explorer", cursor_[0]}, {"planner", cursor_[1]}, {"worker", cursor_[2]}};
}

void MutatorBackend::restore_state(const json& state) {
  std::lock_guard lock(mu_);
  for (auto r : kAllRoles) cursor_[idx(r)] = state.at(std::string(to_string(r))).get<std::int64_t>();
}

// ---------------------------------------------------------------------------

CompletionResult parse_chat_completion(std::string_view body) {
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::BadResponse, "response is not a JSON object");
  const auto choices = j.find("choices");
  if (choices == j.end() || !choices->is_array() || choices->empty())
    throw Error(ErrorCode::BadResponse, "response has no choices");
  const auto& first = (*choices)[0];
  if (!first.is_object() || !first.contains("message") || !first["message"].is_object())
    throw Error(ErrorCode::BadResponse, "choices[0].message missing");
  const auto& content = first["message"].value("content", json());
  if (!content.is_string()) throw Error(ErrorCode::BadResponse, "choices[0].message.content is not a string");
  CompletionResult r;
  r.text = content.get<std::string>();
  if (auto u = j.find("usage"); u != j.end() && u->is_object()) {
    r.input_tokens = u->value("prompt_tokens", std::int64_t{0});
    r.output_tokens = u->value("completion_tokens", std::int64_t{0});
  }
  if (r.input_tokens < 0 || r.output_tokens < 0) throw Error(ErrorCode::BadResponse, "negative token usage");
  return r;
}

HttpBackend::HttpBackend(HttpBackendConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.endpoint_url.empty() || cfg_.model.empty())
    throw Error(ErrorCode::InvalidConfig, "http backend requires endpoint_url and model");
  auto u = detail::split_url(cfg_.endpoint_url);
  base_ = u.base;
  path_ = u.path;
  const std::string suffix = "/chat/completions";
  if (path_.size() < suffix.size() || path_.compare(path_.size() - suffix.size(), suffix.size(), suffix) != 0) {
    if (!path_.empty() && path_.back() == '/') path_.pop_back();
    path_ += suffix;
  }
}

CompletionResult HttpBackend::complete(const CompletionRequest& req) {
  json messages = json::array();
  if (!req.system.empty()) messages.push_back({{"role", "system"}, {"content", req.system}});
  messages.push_back({{"role", "user"}, {"content", req.user}});
  const json body = {{"model", cfg_.model},
                     {"messages", messages},
                     {"temperature", req.temperature},
                     {"max_tokens", req.max_output_tokens}};
  const std::string payload = body.dump();

  httplib::Headers headers;
  if (!cfg_.api_key_env.empty()) {
    if (const char* key = std::getenv(cfg_.api_key_env.c_str()); key && *key)
      headers.emplace("Authorization", std::string("Bearer ") + key);
    else
      spdlog::warn("environment variable {} is not set; sending no API key", cfg_.api_key_env);
  }

  httplib::Client cli(base_);
  cli.set_connection_timeout(cfg_.timeout);
  cli.set_read_timeout(cfg_.timeout);
  cli.set_write_timeout(cfg_.timeout);

  const auto start = std::chrono::steady_clock::now();
  std::int64_t failed = 0;
  std::string last_error;
  for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
    std::int64_t wait_ms = std::min(cfg_.max_backoff_ms, cfg_.retry_backoff_ms << std::min(attempt, 20));
    auto res = cli.Post(path_, headers, payload, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
    } else if (res->status == 200) {
      auto out = parse_chat_completion(res->body);
      out.failed_attempts = failed;
      out.latency_ms =
          std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
      return out;
    } else if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      if (res->has_header("Retry-After")) {
        char* end = nullptr;
        const auto v = res->get_header_value("Retry-After");
        const long secs = std::strtol(v.c_str(), &end, 10);
        if (end && *end == '\0' && secs > 0) wait_ms = std::min(cfg_.max_backoff_ms, std::max(wait_ms, secs * 1000L));
      }
    } else {
      throw Error(ErrorCode::BackendUnavailable,
                  "HTTP " + std::to_string(res->status) + " from " + cfg_.endpoint_url + ": " + res->body.substr(0, 200));
    }
    ++failed;
    if (attempt < cfg_.max_retries) {
      spdlog::warn("{} (attempt {}/{}), retrying in {} ms", last_error, attempt + 1, cfg_.max_retries + 1, wait_ms);
      std::this_thread::sleep_for(std::chrono::milliseconds(wait_ms));
    }
  }
  throw Error(ErrorCode::BackendUnavailable,
              "giving up after " + std::to_string(failed) + " attempts: " + last_error);
}

}  // namespace abo
