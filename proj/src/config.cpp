// SPDX-License-Identifier: Apache-2.0
#include "abo/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace abo {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kDefaultTemplates = {
    "RACLHARSIARLHKRWRPVHQGLGLK", "KTLKIIRLLF",       "KRKRGLKLATALSLNNKF", "KIYKKLSTPPFTLNIRTLPKVKFPK",
    "RMARNLVRYVQGLKKKKVI",        "RNLVRYVQGLKKKKVIVIPVGIGPHANIK", "CVLLFSQLPAVKARGTKHRIKWNRK",
    "GHLLIHLIGKATLAL",            "RQKNHGIHFRVLAKALR", "HWITINTIKLSISLKI"};

// Paths (dotted) whose contents are not checked against the defaults.
bool free_form(const std::string& path) {
  return path == "oracle.params" || path.rfind("backends.", 0) == 0 ||
         path == "init.resample_pool" || path == "objective.portfolio";
}

void merge_into(json& base, const json& user, const std::string& path) {
  if (!user.is_object()) throw Error(ErrorCode::InvalidConfig, (path.empty() ? "config" : path) + " must be an object");
  for (const auto& [k, v] : user.items()) {
    const std::string child = path.empty() ? k : path + "." + k;
    if (!base.contains(k)) {
      if (free_form(path)) {
        base[k] = v;
        continue;
      }
      throw Error(ErrorCode::InvalidConfig, "unknown config key '" + child + "'");
    }
    if (base[k].is_object() && v.is_object() && !free_form(child))
      merge_into(base[k], v, child);
    else
      base[k] = v;
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path q(p);
  return q.is_absolute() ? q : base / q;
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  return it->get<T>();
}

std::string str_or_empty(const json& j, const char* key) { return get_or<std::string>(j, key, ""); }

std::shared_ptr<AgentBackend> build_backend(const json& spec, const RunConfig& cfg, const std::string& where) {
  if (!spec.is_object() || !spec.contains("kind"))
    throw Error(ErrorCode::InvalidConfig, where + " needs a 'kind' (scripted, mutator, http)");
  const auto kind = spec["kind"].get<std::string>();
  if (kind == "scripted") {
    const auto script = str_or_empty(spec, "script");
    if (script.empty()) throw Error(ErrorCode::InvalidConfig, where + ".script is required");
    return ScriptedBackend::load(resolve(cfg.base_dir, script));
  }
  if (kind == "mutator") {
    MutatorBackend::Options o;
    o.seed = get_or<std::uint64_t>(spec, "seed", cfg.seed);
    std::string fallback_alphabet = cfg.domain.kind == DomainKind::Smiles ? "CNO" : std::string(kAminoAcids);
    o.alphabet = get_or<std::string>(spec, "alphabet", fallback_alphabet);
    o.explorer_batch = get_or<std::size_t>(spec, "explorer_batch", o.explorer_batch);
    o.worker_batch = get_or<std::size_t>(spec, "worker_batch", o.worker_batch);
    o.max_edits = get_or<std::size_t>(spec, "max_edits", o.max_edits);
    o.parent_pool = get_or<std::size_t>(spec, "parent_pool", o.parent_pool);
    o.random_fraction = get_or<double>(spec, "random_fraction", o.random_fraction);
    return std::make_shared<MutatorBackend>(o);
  }
  if (kind == "http") {
    HttpBackendConfig h;
    h.endpoint_url = str_or_empty(spec, "endpoint_url");
    h.model = str_or_empty(spec, "model");
    h.api_key_env = get_or<std::string>(spec, "api_key_env", "OPENAI_API_KEY");
    if (spec.contains("api_key"))
      throw Error(ErrorCode::InvalidConfig, where + ": API keys are read from the environment; set api_key_env");
    h.max_retries = get_or<int>(spec, "max_retries", h.max_retries);
    h.retry_backoff_ms = get_or<std::int64_t>(spec, "retry_backoff_ms", h.retry_backoff_ms);
    h.max_backoff_ms = get_or<std::int64_t>(spec, "max_backoff_ms", h.max_backoff_ms);
    h.timeout = std::chrono::milliseconds(get_or<std::int64_t>(spec, "timeout_ms", h.timeout.count()));
    return std::make_shared<HttpBackend>(h);
  }
  throw Error(ErrorCode::InvalidConfig, where + ": unknown backend kind '" + kind + "'");
}

}  // namespace

json default_config_tree() {
  return {
      {"seed", 0},
      {"output_dir", "runs/default"},
      {"domain",
       {{"kind", "peptide"},
        {"prompts", nullptr},
        {"min_length", 5},
        {"max_length", 60},
        {"distance", "normalized_edit"},
        {"seed_threshold", nullptr},
        {"validator_command", nullptr},
        {"validator_timeout_ms", 60000}}},
      {"objective", {{"direction", "minimize"}, {"budget", 20000}, {"description", nullptr}, {"portfolio", nullptr}}},
      {"loop",
       {{"max_fails", 3},
        {"seeds", 2},
        {"context_size", 20},
        {"top_k", 8},
        {"registry_capacity", 20},
        {"explorer_batch_request", "10-20"},
        {"worker_batch_request", "5-10"},
        {"planner_task_request", "8-10"},
        {"parallel_workers", 1},
        {"temperature", {{"explorer", 0.7}, {"planner", 0.7}, {"worker", 0.8}}},
        {"max_output_tokens", 8192}}},
      {"backends",
       {{"default", {{"kind", "mutator"}}}, {"explorer", nullptr}, {"planner", nullptr}, {"worker", nullptr},
        {"record", nullptr}}},
      {"oracle",
       {{"kind", "synthetic"},
        {"name", "hidden-weights"},
        {"params", json::object()},
        {"command", nullptr},
        {"url", nullptr},
        {"timeout_ms", 60000},
        {"cache", true}}},
      {"init",
       {{"source", "templates"},
        {"path", nullptr},
        {"templates", kDefaultTemplates},
        {"count", 100},
        {"mutation_alphabet", std::string(kAminoAcids)},
        {"zero_signal_guard", false},
        {"floor", 0.0},
        {"resample_pool", {{"kind", "random"}, {"alphabet", nullptr}, {"min_length", 10}, {"max_length", 30}}}}},
      {"constraint", {{"kind", "none"}, {"templates", "init"}, {"min_similarity", 0.75}}},
      {"debug", {{"interrupt_after_calls", 0}}},
  };
}

void apply_override(json& tree, std::string_view dotted, std::string_view value) {
  if (dotted.empty()) throw Error(ErrorCode::InvalidConfig, "empty override key");
  json parsed = json::parse(value, nullptr, false);
  if (parsed.is_discarded()) parsed = std::string(value);

  json* node = &tree;
  std::string path;
  std::size_t start = 0;
  while (true) {
    auto dot = dotted.find('.', start);
    std::string key(dotted.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start));
    if (key.empty()) throw Error(ErrorCode::InvalidConfig, "malformed override key '" + std::string(dotted) + "'");
    const bool last = dot == std::string_view::npos;
    if (!node->is_object()) {
      if (node->is_null() && free_form(path))
        *node = json::object();
      else
        throw Error(ErrorCode::InvalidConfig, "override '" + std::string(dotted) + "' descends into a non-object");
    }
    if (!node->contains(key) && !free_form(path))
      throw Error(ErrorCode::InvalidConfig, "unknown config key '" + std::string(dotted) + "'");
    path = path.empty() ? key : path + "." + key;
    if (last) {
      (*node)[key] = parsed;
      return;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

std::vector<std::pair<std::string, std::string>> parse_override_args(const std::vector<std::string>& args) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& a : args) {
    if (a.rfind("--", 0) != 0 || a.find('=') == std::string::npos)
      throw Error(ErrorCode::InvalidConfig, "expected --key.path=value, got '" + a + "'");
    auto eq = a.find('=');
    out.emplace_back(a.substr(2, eq - 2), a.substr(eq + 1));
  }
  return out;
}

fs::path builtin_prompts_dir() {
  if (const char* env = std::getenv("ABO_PROMPTS_DIR"); env && *env) return env;
#ifdef ABO_SOURCE_DIR
  if (fs::exists(fs::path(ABO_SOURCE_DIR) / "prompts")) return fs::path(ABO_SOURCE_DIR) / "prompts";
#endif
  return "prompts";
}

RunConfig config_from_tree(const json& user, const fs::path& base_dir,
                           const std::vector<std::pair<std::string, std::string>>& overrides) {
  RunConfig cfg;
  cfg.base_dir = base_dir;
  cfg.tree = default_config_tree();
  merge_into(cfg.tree, user, "");
  for (const auto& [k, v] : overrides) apply_override(cfg.tree, k, v);
  const json& t = cfg.tree;

  try {
    cfg.seed = t.at("seed").get<std::uint64_t>();
    cfg.output_dir = t.at("output_dir").get<std::string>();
    cfg.interrupt_after_calls = t.at("debug").at("interrupt_after_calls").get<std::int64_t>();

    // domain
    const auto& d = t.at("domain");
    const auto kind = parse_domain_kind(d.at("kind").get<std::string>());
    fs::path prompt_dir;
    if (d.at("prompts").is_null()) {
      const char* sub = kind == DomainKind::Peptide ? "peptide" : kind == DomainKind::Smiles ? "molecule" : "generic";
      prompt_dir = builtin_prompts_dir() / sub;
    } else {
      prompt_dir = resolve(base_dir, d.at("prompts").get<std::string>());
    }
    cfg.domain = make_domain(kind, load_prompt_pack(prompt_dir));
    cfg.domain.min_length = d.at("min_length").get<std::size_t>();
    cfg.domain.max_length = d.at("max_length").get<std::size_t>();
    if (cfg.domain.min_length < 1 || cfg.domain.max_length < cfg.domain.min_length)
      throw Error(ErrorCode::InvalidConfig, "domain length bounds must satisfy 1 <= min_length <= max_length");
    cfg.domain.distance_name = d.at("distance").get<std::string>();
    cfg.domain.distance = make_distance(cfg.domain.distance_name);
    if (!d.at("seed_threshold").is_null()) cfg.domain.seed_threshold = d.at("seed_threshold").get<double>();
    if (!d.at("validator_command").is_null()) cfg.domain.validator_command = d.at("validator_command").get<std::string>();
    cfg.domain.validator_timeout = std::chrono::milliseconds(d.at("validator_timeout_ms").get<std::int64_t>());

    // objective
    const auto& o = t.at("objective");
    cfg.objective.direction = parse_direction(o.at("direction").get<std::string>());
    cfg.objective.budget = o.at("budget").get<std::int64_t>();
    if (!o.at("description").is_null()) cfg.objective.description = o.at("description").get<std::string>();
    if (!o.at("portfolio").is_null()) {
      const auto& p = o.at("portfolio");
      for (const auto& [k, v] : p.items())
        if (k != "size" && k != "beta" && k != "agg")
          throw Error(ErrorCode::InvalidConfig, "unknown config key 'objective.portfolio." + k + "'");
      PortfolioSpec ps;
      ps.size = get_or<int>(p, "size", ps.size);
      ps.beta = get_or<double>(p, "beta", ps.beta);
      ps.agg = get_or<std::string>(p, "agg", ps.agg);
      cfg.objective.portfolio = ps;
    }
    cfg.objective.validate();

    // loop
    const auto& l = t.at("loop");
    cfg.loop.max_fails = l.at("max_fails").get<int>();
    cfg.loop.seeds = l.at("seeds").get<std::size_t>();
    cfg.loop.context.context_size = l.at("context_size").get<std::size_t>();
    cfg.loop.context.top_k = l.at("top_k").get<std::size_t>();
    cfg.loop.registry_capacity = l.at("registry_capacity").get<std::size_t>();
    cfg.loop.requests.explorer_batch = l.at("explorer_batch_request").get<std::string>();
    cfg.loop.requests.worker_batch = l.at("worker_batch_request").get<std::string>();
    cfg.loop.requests.planner_tasks = l.at("planner_task_request").get<std::string>();
    cfg.loop.parallel_workers = l.at("parallel_workers").get<std::size_t>();
    for (auto r : kAllRoles)
      cfg.loop.temperature[static_cast<std::size_t>(r)] = l.at("temperature").at(std::string(to_string(r))).get<double>();
    cfg.loop.max_output_tokens = l.at("max_output_tokens").get<int>();
    cfg.loop.validate();

    // init
    const auto& in = t.at("init");
    const auto source = in.at("source").get<std::string>();
    if (source == "file") {
      cfg.init.source = InitSpec::Source::File;
      if (in.at("path").is_null()) throw Error(ErrorCode::InvalidConfig, "init.path is required for source=file");
      cfg.init.path = resolve(base_dir, in.at("path").get<std::string>());
      if (!fs::exists(cfg.init.path)) throw Error(ErrorCode::Io, "init file not found: " + cfg.init.path.string());
    } else if (source == "templates") {
      cfg.init.source = InitSpec::Source::TemplatesPlusMutations;
      cfg.init.templates = in.at("templates").get<std::vector<std::string>>();
    } else {
      throw Error(ErrorCode::InvalidConfig, "init.source must be 'file' or 'templates'");
    }
    cfg.init.count = in.at("count").get<std::size_t>();
    if (cfg.init.count < 1) throw Error(ErrorCode::InvalidConfig, "init.count must be >= 1");
    cfg.init.mutation_alphabet = in.at("mutation_alphabet").get<std::string>();
    cfg.init.zero_signal_guard = in.at("zero_signal_guard").get<bool>();
    cfg.init.floor = in.at("floor").get<double>();

    // constraint
    const auto& c = t.at("constraint");
    const auto ckind = c.at("kind").get<std::string>();
    if (ckind == "template_similarity") {
      std::vector<std::string> raw;
      if (c.at("templates").is_string() && c.at("templates").get<std::string>() == "init")
        raw = cfg.init.templates;
      else
        raw = c.at("templates").get<std::vector<std::string>>();
      std::vector<Candidate> templates;
      for (const auto& r : raw) templates.push_back(canonicalize(r, cfg.domain.kind));
      cfg.constraint = HardConstraint::template_similarity(std::move(templates), c.at("min_similarity").get<double>());
    } else if (ckind != "none") {
      throw Error(ErrorCode::InvalidConfig, "constraint.kind must be 'none' or 'template_similarity'");
    }
    cfg.constraint.validate();

    // Backends and oracle are built lazily, but their shape is checked here.
    for (const char* role : {"default", "explorer", "planner", "worker"}) {
      const auto& b = t.at("backends").at(role);
      if (!b.is_null() && (!b.is_object() || !b.contains("kind")))
        throw Error(ErrorCode::InvalidConfig, std::string("backends.") + role + " needs a 'kind'");
      if (b.is_object() && b.value("kind", "") == "scripted") {
        auto p = resolve(base_dir, b.value("script", ""));
        if (!fs::exists(p)) throw Error(ErrorCode::Io, "script not found: " + p.string());
      }
    }
    const auto okind = t.at("oracle").at("kind").get<std::string>();
    if (okind != "synthetic" && okind != "subprocess" && okind != "http")
      throw Error(ErrorCode::InvalidConfig, "oracle.kind must be synthetic, subprocess or http");
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("bad config value: ") + e.what());
  }
  return cfg;
}

RunConfig load_config(const fs::path& path, const std::vector<std::pair<std::string, std::string>>& overrides) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  json user = json::parse(ss.str(), nullptr, false, /*ignore_comments=*/true);
  if (user.is_discarded()) throw Error(ErrorCode::InvalidConfig, path.string() + " is not valid JSON");
  return config_from_tree(user, fs::absolute(path).parent_path(), overrides);
}

std::shared_ptr<AgentBackend> make_backend(const RunConfig& cfg, bool append_record) {
  const auto& b = cfg.tree.at("backends");
  auto shared = build_backend(b.at("default"), cfg, "backends.default");
  std::array<std::shared_ptr<AgentBackend>, 3> routes;
  bool routed = false;
  for (auto r : kAllRoles) {
    const auto& spec = b.at(std::string(to_string(r)));
    if (spec.is_null()) {
      routes[static_cast<std::size_t>(r)] = shared;
    } else {
      routes[static_cast<std::size_t>(r)] = build_backend(spec, cfg, "backends." + std::string(to_string(r)));
      routed = true;
    }
  }
  std::shared_ptr<AgentBackend> backend = routed ? std::make_shared<RoutedBackend>(routes) : shared;
  if (!b.at("record").is_null()) {
    auto path = fs::path(b.at("record").get<std::string>());
    if (path.is_relative()) path = cfg.output_dir / path;
    backend = std::make_shared<RecordingBackend>(backend, path, append_record);
  }
  return backend;
}

std::shared_ptr<Oracle> make_oracle(const RunConfig& cfg) {
  const auto& o = cfg.tree.at("oracle");
  const auto kind = o.at("kind").get<std::string>();
  const auto timeout = std::chrono::milliseconds(o.at("timeout_ms").get<std::int64_t>());
  if (kind == "subprocess") {
    if (o.at("command").is_null()) throw Error(ErrorCode::InvalidConfig, "oracle.command is required");
    return std::make_shared<SubprocessOracle>(o.at("command").get<std::string>(), timeout);
  }
  if (kind == "http") {
    if (o.at("url").is_null()) throw Error(ErrorCode::InvalidConfig, "oracle.url is required");
    return std::make_shared<HttpOracle>(o.at("url").get<std::string>(), timeout);
  }
  const auto name = o.at("name").get<std::string>();
  const auto& p = o.at("params");
  if (name == "motif-match") return std::make_shared<MotifMatchOracle>(get_or<std::string>(p, "target", "GLFDIVKKVVGALGSL"));
  if (name == "hidden-weights")
    return std::make_shared<HiddenWeightsOracle>(get_or<std::string>(p, "alphabet", std::string(kAminoAcids)),
                                                 get_or<std::uint64_t>(p, "seed", cfg.seed),
                                                 get_or<double>(p, "noise_sd", 0.0));
  if (name == "plateau")
    return std::make_shared<PlateauOracle>(get_or<std::string>(p, "target", "GLFDIVKKVVGALGSL"),
                                           get_or<double>(p, "mass", 0.01), get_or<std::uint64_t>(p, "seed", cfg.seed),
                                           get_or<double>(p, "floor", 0.0), get_or<double>(p, "scale", 1.0),
                                           get_or<std::size_t>(p, "prefix_len", 3));
  throw Error(ErrorCode::InvalidConfig, "unknown synthetic oracle '" + name + "'");
}

CandidatePool make_resample_pool(const RunConfig& cfg) {
  const auto& p = cfg.tree.at("init").at("resample_pool");
  const auto kind = get_or<std::string>(p, "kind", "random");
  if (kind == "file") {
    const auto path = resolve(cfg.base_dir, get_or<std::string>(p, "path", ""));
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot read resample pool " + path.string());
    std::vector<std::string> items;
    for (std::string line; std::getline(in, line);)
      if (line.find_first_not_of(" \t\r") != std::string::npos) items.push_back(line);
    return list_pool(std::move(items));
  }
  if (kind != "random") throw Error(ErrorCode::InvalidConfig, "init.resample_pool.kind must be random or file");
  return random_string_pool(get_or<std::string>(p, "alphabet", cfg.init.mutation_alphabet),
                            get_or<std::size_t>(p, "min_length", 10), get_or<std::size_t>(p, "max_length", 30));
}

}  // namespace abo
