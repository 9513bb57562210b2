// SPDX-License-Identifier: Apache-2.0
#include "abo/core.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

namespace abo {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyCandidate: return "EmptyCandidate";
    case ErrorCode::EmptyHistory: return "EmptyHistory";
    case ErrorCode::UnknownTask: return "UnknownTask";
    case ErrorCode::MissingPlaceholder: return "MissingPlaceholder";
    case ErrorCode::NoCandidatesFound: return "NoCandidatesFound";
    case ErrorCode::NoPlanFound: return "NoPlanFound";
    case ErrorCode::BackendUnavailable: return "BackendUnavailable";
    case ErrorCode::BadResponse: return "BadResponse";
    case ErrorCode::MalformedScript: return "MalformedScript";
    case ErrorCode::OracleFailure: return "OracleFailure";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::InsufficientInit: return "InsufficientInit";
    case ErrorCode::BudgetExhaustedDuringInit: return "BudgetExhaustedDuringInit";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::CorruptCheckpoint: return "CorruptCheckpoint";
    case ErrorCode::Interrupted: return "Interrupted";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

std::string_view to_string(DomainKind kind) {
  switch (kind) {
    case DomainKind::Peptide: return "peptide";
    case DomainKind::Smiles: return "smiles";
    case DomainKind::Generic: return "generic-string";
  }
  return "generic-string";
}

std::string_view to_string(Direction dir) {
  return dir == Direction::Maximize ? "maximize" : "minimize";
}

DomainKind parse_domain_kind(std::string_view s) {
  if (s == "peptide") return DomainKind::Peptide;
  if (s == "smiles" || s == "molecule") return DomainKind::Smiles;
  if (s == "generic" || s == "generic-string") return DomainKind::Generic;
  throw Error(ErrorCode::InvalidConfig, "unknown domain kind '" + std::string(s) + "'");
}

Direction parse_direction(std::string_view s) {
  if (s == "maximize" || s == "max") return Direction::Maximize;
  if (s == "minimize" || s == "min") return Direction::Minimize;
  throw Error(ErrorCode::InvalidConfig, "unknown direction '" + std::string(s) + "'");
}

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string strip_all_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s)
    if (!is_space(c)) out.push_back(c);
  return out;
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n\v\f");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n\v\f");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

Candidate canonicalize(std::string_view raw, DomainKind kind) {
  std::string canonical;
  switch (kind) {
    case DomainKind::Peptide:
      canonical = strip_all_whitespace(raw);
      std::transform(canonical.begin(), canonical.end(), canonical.begin(),
                     [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
      break;
    case DomainKind::Smiles:
      canonical = strip_all_whitespace(raw);
      break;
    case DomainKind::Generic:
      canonical = trim(raw);
      break;
  }
  if (canonical.empty())
    throw Error(ErrorCode::EmptyCandidate, "candidate is empty after normalization");
  return Candidate{std::string(raw), std::move(canonical), kind};
}

std::string format_score(double value) {
  char buf[64];
  double mag = std::fabs(value);
  if (value != 0.0 && mag < 1e-3 && std::isfinite(value))
    std::snprintf(buf, sizeof buf, "%.3e", value);
  else
    std::snprintf(buf, sizeof buf, "%#.4g", value);
  return buf;
}

void ObjectiveSpec::validate() const {
  if (budget < 1) throw Error(ErrorCode::InvalidConfig, "objective.budget must be >= 1");
  if (portfolio) {
    if (portfolio->size < 2) throw Error(ErrorCode::InvalidConfig, "portfolio size M must be >= 2");
    if (!(portfolio->beta > 0.0 && portfolio->beta <= 1.0))
      throw Error(ErrorCode::InvalidConfig, "portfolio beta must lie in (0, 1]");
    if (portfolio->agg != "mean")
      throw Error(ErrorCode::InvalidConfig, "unsupported portfolio aggregation '" + portfolio->agg + "'");
  }
}

std::string Origin::str() const {
  switch (kind) {
    case OriginKind::Init: return "init";
    case OriginKind::Explorer: return "explorer";
    case OriginKind::Worker: return "worker:" + task;
    case OriginKind::ResampledInit: return "resampled-init";
  }
  return "init";
}

Origin Origin::parse(std::string_view s) {
  if (s == "init") return init();
  if (s == "explorer") return explorer();
  if (s == "resampled-init") return resampled();
  if (s.substr(0, 7) == "worker:") return worker(std::string(s.substr(7)));
  throw std::invalid_argument("unknown origin '" + std::string(s) + "'");
}

const ScoredRecord& History::append(Candidate candidate, double score, Origin origin, int round) {
  if (!std::isfinite(score))
    throw Error(ErrorCode::OracleFailure, "non-finite score for '" + candidate.canonical + "'");
  if (index_.count(candidate.canonical))
    throw std::logic_error("duplicate canonical candidate appended: " + candidate.canonical);
  ScoredRecord rec;
  rec.eval_index = static_cast<std::int64_t>(records_.size()) + 1;
  rec.score = score;
  rec.origin = std::move(origin);
  rec.round = round;
  index_.emplace(candidate.canonical, records_.size());
  rec.candidate = std::move(candidate);
  records_.push_back(std::move(rec));
  return records_.back();
}

bool History::contains(std::string_view canonical) const {
  return index_.find(std::string(canonical)) != index_.end();
}

std::optional<double> History::lookup(std::string_view canonical) const {
  if (const auto* r = find(canonical)) return r->score;
  return std::nullopt;
}

const ScoredRecord* History::find(std::string_view canonical) const {
  auto it = index_.find(std::string(canonical));
  return it == index_.end() ? nullptr : &records_[it->second];
}

History History::prefix(std::size_t t) const {
  History out;
  t = std::min(t, records_.size());
  out.records_.assign(records_.begin(), records_.begin() + static_cast<std::ptrdiff_t>(t));
  for (std::size_t i = 0; i < t; ++i) out.index_.emplace(out.records_[i].candidate.canonical, i);
  return out;
}

bool ranks_before(const ScoredRecord& a, const ScoredRecord& b, Direction dir) {
  if (is_improvement(a.score, b.score, dir)) return true;
  if (is_improvement(b.score, a.score, dir)) return false;
  return a.eval_index < b.eval_index;
}

const ScoredRecord& best_record(const History& h, Direction dir) {
  if (h.empty()) throw Error(ErrorCode::EmptyHistory, "best_record on empty history");
  const auto& recs = h.records();
  const ScoredRecord* best = &recs.front();
  for (const auto& r : recs)
    if (is_improvement(r.score, best->score, dir)) best = &r;
  return *best;
}

std::vector<std::size_t> rank_order(const History& h, Direction dir) {
  const auto& recs = h.records();
  std::vector<std::size_t> idx(recs.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return ranks_before(recs[a], recs[b], dir); });
  return idx;
}

}  // namespace abo
