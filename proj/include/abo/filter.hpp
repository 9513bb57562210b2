// SPDX-License-Identifier: Apache-2.0
//
// Pre-evaluation filter: validity, in-batch and history dedup (with memoized
// scores), and hard constraints. Nothing rejected here costs budget.
#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "abo/core.hpp"
#include "abo/domain.hpp"

namespace abo {

/// Syntactic SMILES check: character set, balanced parentheses, closed
/// bracket atoms, and paired ring-closure labels (digits and %nn).
bool smiles_syntax_ok(std::string_view s);

/// Peptide alphabet and length check on a canonical sequence.
bool peptide_ok(std::string_view canonical, std::size_t min_len, std::size_t max_len);

/// Canonicalizes and validates one raw string. With an external validator
/// configured for SMILES, the validator's verdict replaces the syntactic one.
std::optional<Candidate> validate(std::string_view raw, const DomainSpec& domain);

/// Batched form of validate; the external validator runs once per batch.
std::vector<std::optional<Candidate>> validate_batch(const std::vector<std::string>& raws,
                                                     const DomainSpec& domain);

struct HardConstraint {
  enum class Kind { None, TemplateSimilarity };
  using Predicate = std::function<bool(const Candidate&)>;

  Kind kind = Kind::None;
  std::vector<Candidate> templates;
  double min_similarity = 0.75;
  std::vector<std::pair<std::string, Predicate>> predicates;  // named extras

  static HardConstraint template_similarity(std::vector<Candidate> templates, double min_similarity);

  /// Throws InvalidConfig.
  void validate() const;
  /// Reason string for the first violated rule, or nullopt when feasible.
  std::optional<std::string> violation(const Candidate& c) const;
  bool feasible(const Candidate& c) const { return !violation(c); }
};

/// Highest similarity of `c` to any template (0 with no templates).
double max_template_similarity(const Candidate& c, const std::vector<Candidate>& templates);

enum class RejectReason { Invalid, DuplicateInBatch, DuplicateInHistory, ConstraintViolation };
std::string_view to_string(RejectReason r);

struct Rejection {
  std::string raw;
  RejectReason reason = RejectReason::Invalid;
  std::optional<Candidate> candidate;  // absent for Invalid
  std::optional<double> memo_score;    // DuplicateInHistory only
  std::string detail;
};

struct FilterReport {
  std::vector<Candidate> accepted;
  std::vector<Rejection> rejected;

  /// History duplicates with their memoized scores, in batch order.
  std::vector<std::pair<Candidate, double>> memoized() const;
};

/// validate -> in-batch dedup (first kept) -> history dedup -> constraint.
FilterReport filter_batch(const std::vector<std::string>& batch, const History& h,
                          const HardConstraint& constraint, const DomainSpec& domain);

}  // namespace abo
