// SPDX-License-Identifier: Apache-2.0
#include "abo/oracle.hpp"

#include <httplib.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <random>
#include <unordered_set>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "abo/filter.hpp"
#include "abo/process.hpp"
#include "http_util.hpp"

namespace abo {

double lcs_similarity(std::string_view a, std::string_view b) {
  const std::size_t n = std::max(a.size(), b.size());
  if (n == 0) return 1.0;
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return static_cast<double>(prev[b.size()]) / static_cast<double>(n);
}

double parse_score_line(std::string_view line) {
  std::string s(line);
  auto b = s.find_first_not_of(" \t\r");
  auto e = s.find_last_not_of(" \t\r");
  if (b == std::string::npos) throw Error(ErrorCode::OracleFailure, "empty score line");
  s = s.substr(b, e - b + 1);
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || errno == ERANGE)
    throw Error(ErrorCode::OracleFailure, "malformed score '" + s + "'");
  if (!std::isfinite(v)) throw Error(ErrorCode::OracleFailure, "non-finite score '" + s + "'");
  return v;
}

MotifMatchOracle::MotifMatchOracle(std::string target) : target_(std::move(target)) {
  if (target_.empty()) throw Error(ErrorCode::InvalidConfig, "motif-match target must be non-empty");
}

std::vector<double> MotifMatchOracle::evaluate(const std::vector<Candidate>& batch) {
  std::vector<double> out;
  out.reserve(batch.size());
  for (const auto& c : batch) out.push_back(lcs_similarity(c.canonical, target_));
  return out;
}

HiddenWeightsOracle::HiddenWeightsOracle(std::string alphabet, std::uint64_t seed, double noise_sd)
    : alphabet_(std::move(alphabet)), seed_(seed), noise_sd_(noise_sd) {
  Engine eng(mix64(seed ^ fnv1a("hidden-weights")));
  for (std::size_t i = 0; i < alphabet_.size(); ++i) weights_.push_back(2.0 * uniform_unit(eng) - 1.0);
}

double HiddenWeightsOracle::weight(char c) const {
  auto pos = alphabet_.find(c);
  return pos == std::string::npos ? 0.0 : weights_[pos];
}

std::vector<double> HiddenWeightsOracle::evaluate(const std::vector<Candidate>& batch) {
  std::vector<double> out;
  for (const auto& c : batch) {
    double s = 0.0;
    for (char ch : c.canonical) s += weight(ch);
    if (noise_sd_ > 0.0) {
      Engine eng(mix64(seed_ ^ fnv1a(c.canonical)));
      // Box-Muller on portable uniforms.
      const double u1 = 1.0 - uniform_unit(eng), u2 = uniform_unit(eng);
      s += noise_sd_ * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }
    out.push_back(s);
  }
  return out;
}

PlateauOracle::PlateauOracle(std::string target, double mass, std::uint64_t seed, double floor, double scale,
                             std::size_t prefix_len)
    : target_(std::move(target)), mass_(mass), seed_(seed), floor_(floor), scale_(scale), prefix_len_(prefix_len) {
  if (!(mass_ > 0.0 && mass_ <= 1.0)) throw Error(ErrorCode::InvalidConfig, "plateau mass must be in (0, 1]");
}

bool PlateauOracle::gate_open(std::string_view canonical) const {
  const auto key = canonical.substr(0, std::min(prefix_len_, canonical.size()));
  const std::uint64_t h = mix64(fnv1a(key) ^ mix64(seed_));
  return static_cast<double>(h >> 11) * (1.0 / 9007199254740992.0) < mass_;
}

std::vector<double> PlateauOracle::evaluate(const std::vector<Candidate>& batch) {
  std::vector<double> out;
  for (const auto& c : batch)
    out.push_back(gate_open(c.canonical) ? floor_ + scale_ * (1e-3 + lcs_similarity(c.canonical, target_)) : floor_);
  return out;
}

SubprocessOracle::SubprocessOracle(std::string command, std::chrono::milliseconds timeout)
    : command_(std::move(command)), timeout_(timeout) {}

std::vector<double> SubprocessOracle::evaluate(const std::vector<Candidate>& batch) {
  if (batch.empty()) return {};
  std::vector<std::string> lines;
  for (const auto& c : batch) {
    if (c.canonical.find('\n') != std::string::npos)
      throw Error(ErrorCode::OracleFailure, "candidate contains a newline");
    lines.push_back(c.canonical);
  }
  auto res = run_line_process(command_, lines, timeout_);
  if (res.exit_status != 0)
    throw Error(ErrorCode::OracleFailure, "oracle command exited with status " + std::to_string(res.exit_status));
  if (res.lines.size() < batch.size())
    throw Error(ErrorCode::OracleFailure, "oracle returned " + std::to_string(res.lines.size()) + " lines for " +
                                              std::to_string(batch.size()) + " candidates");
  std::vector<double> out;
  for (std::size_t i = 0; i < batch.size(); ++i) out.push_back(parse_score_line(res.lines[i]));
  return out;
}

HttpOracle::HttpOracle(std::string url, std::chrono::milliseconds timeout) : url_(std::move(url)), timeout_(timeout) {}

std::vector<double> HttpOracle::evaluate(const std::vector<Candidate>& batch) {
  const auto u = detail::split_url(url_);
  httplib::Client cli(u.base);
  cli.set_connection_timeout(timeout_);
  cli.set_read_timeout(timeout_);
  cli.set_write_timeout(timeout_);
  std::vector<double> out;
  for (const auto& c : batch) {
    nlohmann::json body = {{"candidate", c.canonical}};
    auto res = cli.Post(u.path, body.dump(), "application/json");
    if (!res) {
      if (res.error() == httplib::Error::Read || res.error() == httplib::Error::ConnectionTimeout)
        throw Error(ErrorCode::Timeout, "oracle request timed out: " + httplib::to_string(res.error()));
      throw Error(ErrorCode::OracleFailure, "oracle request failed: " + httplib::to_string(res.error()));
    }
    if (res->status != 200)
      throw Error(ErrorCode::OracleFailure, "oracle HTTP status " + std::to_string(res->status));
    auto j = nlohmann::json::parse(res->body, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("score") || !j["score"].is_number())
      throw Error(ErrorCode::OracleFailure, "oracle reply lacks a numeric 'score'");
    const double v = j["score"].get<double>();
    if (!std::isfinite(v)) throw Error(ErrorCode::OracleFailure, "non-finite score");
    out.push_back(v);
  }
  return out;
}

OracleHarness::OracleHarness(std::shared_ptr<Oracle> oracle, bool cache_enabled)
    : oracle_(std::move(oracle)), cache_enabled_(cache_enabled) {
  if (!oracle_) throw std::invalid_argument("OracleHarness needs an oracle");
}

std::vector<double> OracleHarness::evaluate(const std::vector<Candidate>& batch) {
  std::vector<double> out(batch.size());
  std::vector<Candidate> todo;
  std::vector<std::size_t> where;
  {
    std::lock_guard lock(mu_);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      if (cache_enabled_) {
        if (auto it = cache_.find(batch[i].canonical); it != cache_.end()) {
          out[i] = it->second;
          ++hits_;
          continue;
        }
      }
      todo.push_back(batch[i]);
      where.push_back(i);
    }
  }
  if (todo.empty()) return out;
  auto scores = oracle_->evaluate(todo);
  if (scores.size() != todo.size())
    throw Error(ErrorCode::OracleFailure, "oracle returned " + std::to_string(scores.size()) + " scores for " +
                                              std::to_string(todo.size()) + " candidates");
  for (double s : scores)
    if (!std::isfinite(s)) throw Error(ErrorCode::OracleFailure, "oracle produced a non-finite score");
  std::lock_guard lock(mu_);
  calls_ += static_cast<std::int64_t>(todo.size());
  for (std::size_t k = 0; k < todo.size(); ++k) {
    out[where[k]] = scores[k];
    if (cache_enabled_) cache_.emplace(todo[k].canonical, scores[k]);
  }
  return out;
}

std::int64_t OracleHarness::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

std::int64_t OracleHarness::cache_hits() const {
  std::lock_guard lock(mu_);
  return hits_;
}

CandidatePool random_string_pool(std::string alphabet, std::size_t min_len, std::size_t max_len) {
  if (alphabet.empty() || min_len == 0 || max_len < min_len)
    throw Error(ErrorCode::InvalidConfig, "random pool needs an alphabet and 1 <= min_len <= max_len");
  return [alphabet = std::move(alphabet), min_len, max_len](Engine& rng) {
    const std::size_t len = min_len + uniform_index(rng, max_len - min_len + 1);
    std::string s(len, ' ');
    for (auto& ch : s) ch = alphabet[uniform_index(rng, alphabet.size())];
    return s;
  };
}

CandidatePool list_pool(std::vector<std::string> items) {
  if (items.empty()) throw Error(ErrorCode::InvalidConfig, "resample pool is empty");
  return [items = std::move(items)](Engine& rng) { return items[uniform_index(rng, items.size())]; };
}

std::string point_mutation(std::string_view s, std::string_view alphabet, Engine& rng) {
  std::string out(s);
  if (out.empty() || alphabet.empty()) return out;
  const auto pos = uniform_index(rng, out.size());
  out[pos] = alphabet[uniform_index(rng, alphabet.size())];
  return out;
}

namespace {

std::vector<std::string> read_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw Error(ErrorCode::Io, "cannot read init file " + p.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    lines.push_back(line);
  }
  return lines;
}

}  // namespace

InitReport load_init(const InitSpec& spec, const DomainSpec& domain, OracleHarness& oracle, History& h,
                     std::int64_t budget, Engine& rng) {
  if (!h.empty()) throw std::logic_error("load_init expects an empty history");
  if (spec.count == 0) throw Error(ErrorCode::InvalidConfig, "init.count must be >= 1");
  InitReport rep;
  rep.requested = spec.count;

  std::vector<Candidate> batch;
  std::unordered_set<std::string> seen;
  auto take = [&](const std::string& raw) {
    auto c = validate(raw, domain);
    if (!c) {
      ++rep.invalid;
      return;
    }
    if (!seen.insert(c->canonical).second) {
      ++rep.duplicates;
      return;
    }
    batch.push_back(std::move(*c));
  };

  if (spec.source == InitSpec::Source::File) {
    auto lines = read_lines(spec.path);
    if (lines.size() < spec.count)
      throw Error(ErrorCode::InsufficientInit, spec.path.string() + " has " + std::to_string(lines.size()) +
                                                   " candidates, " + std::to_string(spec.count) + " requested");
    for (std::size_t i = 0; i < spec.count; ++i) take(lines[i]);
    if (batch.size() < spec.count)
      spdlog::warn("init: {} of {} lines usable ({} duplicates, {} invalid)", batch.size(), spec.count,
                   rep.duplicates, rep.invalid);
  } else {
    if (spec.templates.empty()) throw Error(ErrorCode::InvalidConfig, "init.templates is empty");
    for (const auto& t : spec.templates) {
      if (batch.size() >= spec.count) break;
      take(t);
    }
    if (batch.empty()) throw Error(ErrorCode::InsufficientInit, "no valid init template");
    const std::size_t base = batch.size();
    std::size_t attempts = 0;
    const std::size_t max_attempts = 1000 * spec.count + 1000;
    while (batch.size() < spec.count) {
      if (++attempts > max_attempts)
        throw Error(ErrorCode::InsufficientInit, "could not generate " + std::to_string(spec.count) +
                                                     " distinct valid init candidates");
      const auto& parent = batch[uniform_index(rng, base)].canonical;
      auto mutant = point_mutation(parent, spec.mutation_alphabet, rng);
      const auto before_invalid = rep.invalid;
      const auto before_dup = rep.duplicates;
      take(mutant);
      // Retries of the mutation operator are not shortfalls.
      rep.invalid = before_invalid;
      rep.duplicates = before_dup;
    }
  }

  if (static_cast<std::int64_t>(batch.size()) > budget) {
    spdlog::warn("init: truncating {} candidates to the budget of {}", batch.size(), budget);
    batch.resize(static_cast<std::size_t>(budget));
  }
  auto scores = oracle.evaluate(batch);
  for (std::size_t i = 0; i < batch.size(); ++i) h.append(batch[i], scores[i], Origin::init(), 0);
  rep.evaluated = batch.size();
  return rep;
}

std::size_t zero_signal_resample(History& h, const CandidatePool& pool, const DomainSpec& domain,
                                 OracleHarness& oracle, double floor, std::int64_t budget, Engine& rng) {
  auto all_floor = [&] {
    return std::all_of(h.records().begin(), h.records().end(), [&](const ScoredRecord& r) { return r.score == floor; });
  };
  if (!all_floor()) return 0;
  std::size_t resampled = 0;
  std::size_t stale = 0;
  while (true) {
    if (h.evals_used() >= budget)
      throw Error(ErrorCode::BudgetExhaustedDuringInit,
                  "all " + std::to_string(h.size()) + " evaluations scored the floor value");
    auto c = validate(pool(rng), domain);
    if (!c || h.contains(c->canonical)) {
      if (++stale > 100000) throw Error(ErrorCode::InsufficientInit, "resample pool yields no fresh candidates");
      continue;
    }
    stale = 0;
    const double s = oracle.evaluate({*c}).front();
    h.append(std::move(*c), s, Origin::resampled(), 0);
    ++resampled;
    if (s != floor) return resampled;
  }
}

}  // namespace abo
