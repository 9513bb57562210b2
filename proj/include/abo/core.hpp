// SPDX-License-Identifier: Apache-2.0
//
// Candidate / score / history data model shared by every module.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "abo/error.hpp"

namespace abo {

enum class DomainKind { Peptide, Smiles, Generic };
enum class Direction { Maximize, Minimize };

std::string_view to_string(DomainKind kind);
std::string_view to_string(Direction dir);
DomainKind parse_domain_kind(std::string_view s);
Direction parse_direction(std::string_view s);

struct Candidate {
  std::string raw;
  std::string canonical;
  DomainKind kind = DomainKind::Generic;

  friend bool operator==(const Candidate& a, const Candidate& b) {
    return a.canonical == b.canonical;
  }
};

/// Peptides are upper-cased with all whitespace removed; SMILES lose all
/// whitespace; generic strings are trimmed. Throws EmptyCandidate when
/// nothing is left.
Candidate canonicalize(std::string_view raw, DomainKind kind);

/// Strict improvement: ties are never improvements.
constexpr bool is_improvement(double a, double b, Direction dir) noexcept {
  return dir == Direction::Maximize ? a > b : a < b;
}

/// 4 significant digits; scientific notation below 1e-3 ("1.957e-04").
std::string format_score(double value);

struct PortfolioSpec {
  int size = 20;       // M
  double beta = 0.75;  // minimum pairwise distance
  std::string agg = "mean";
};

struct ObjectiveSpec {
  Direction direction = Direction::Maximize;
  std::int64_t budget = 20000;
  std::optional<std::string> description;  // task awareness
  std::optional<PortfolioSpec> portfolio;

  /// Throws InvalidConfig.
  void validate() const;
};

enum class OriginKind { Init, Explorer, Worker, ResampledInit };

struct Origin {
  OriginKind kind = OriginKind::Init;
  std::string task;  // set for Worker

  static Origin init() { return {OriginKind::Init, {}}; }
  static Origin explorer() { return {OriginKind::Explorer, {}}; }
  static Origin worker(std::string task) { return {OriginKind::Worker, std::move(task)}; }
  static Origin resampled() { return {OriginKind::ResampledInit, {}}; }

  /// "init", "explorer", "worker:NAME", "resampled-init"
  std::string str() const;
  static Origin parse(std::string_view s);

  friend bool operator==(const Origin&, const Origin&) = default;
};

struct ScoredRecord {
  Candidate candidate;
  double score = 0.0;
  std::int64_t eval_index = 0;  // 1-based oracle call order
  Origin origin;
  int round = 0;
};

/// Evaluated dataset in insertion order with a canonical-text index.
/// Single writer; all mutation goes through append().
class History {
 public:
  /// Throws OracleFailure for non-finite scores and std::logic_error when the
  /// canonical text is already present.
  const ScoredRecord& append(Candidate candidate, double score, Origin origin, int round = 0);

  bool contains(std::string_view canonical) const;
  std::optional<double> lookup(std::string_view canonical) const;
  const ScoredRecord* find(std::string_view canonical) const;

  const std::vector<ScoredRecord>& records() const noexcept { return records_; }
  std::int64_t evals_used() const noexcept { return static_cast<std::int64_t>(records_.size()); }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }

  /// Prefix D_t (first t records).
  History prefix(std::size_t t) const;

 private:
  std::vector<ScoredRecord> records_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Best score under dir; earliest eval_index wins ties. Throws EmptyHistory.
const ScoredRecord& best_record(const History& h, Direction dir);

/// Indices of records sorted best-to-worst, ties by eval_index.
std::vector<std::size_t> rank_order(const History& h, Direction dir);

/// true when a should rank ahead of b.
bool ranks_before(const ScoredRecord& a, const ScoredRecord& b, Direction dir);

}  // namespace abo
