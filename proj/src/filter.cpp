// SPDX-License-Identifier: Apache-2.0
#include "abo/filter.hpp"

#include <algorithm>
#include <bitset>
#include <cctype>
#include <unordered_set>

#include "abo/process.hpp"

namespace abo {

bool peptide_ok(std::string_view canonical, std::size_t min_len, std::size_t max_len) {
  if (canonical.size() < min_len || canonical.size() > max_len) return false;
  return std::all_of(canonical.begin(), canonical.end(),
                     [](char c) { return kAminoAcids.find(c) != std::string_view::npos; });
}

bool smiles_syntax_ok(std::string_view s) {
  if (s.empty()) return false;
  std::bitset<100> open_rings;
  int depth = 0;
  bool have_atom = false;   // an atom exists in the current chain
  bool pending_bond = false;
  bool any_atom = false;
  char prev = 0;

  auto is_bond = [](char c) { return std::string_view("-=#$:/\\").find(c) != std::string_view::npos; };
  auto is_organic = [](char c) { return std::string_view("BCNOPSFIbcnops*").find(c) != std::string_view::npos; };

  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (c == '[') {
      auto close = s.find(']', i + 1);
      if (close == std::string_view::npos || close == i + 1) return false;
      for (std::size_t k = i + 1; k < close; ++k) {
        char b = s[k];
        if (!(std::isalnum(static_cast<unsigned char>(b)) || b == '@' || b == '+' || b == '-' || b == ':'))
          return false;
      }
      if (!std::isalpha(static_cast<unsigned char>(s[i + 1])) &&
          !std::isdigit(static_cast<unsigned char>(s[i + 1])) && s[i + 1] != '*')
        return false;
      i = close;
      have_atom = any_atom = true;
      pending_bond = false;
    } else if (c == ']') {
      return false;
    } else if (is_organic(c)) {
      if ((c == 'C' && i + 1 < s.size() && s[i + 1] == 'l') || (c == 'B' && i + 1 < s.size() && s[i + 1] == 'r'))
        ++i;
      have_atom = any_atom = true;
      pending_bond = false;
    } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '%') {
      if (!have_atom) return false;
      int label;
      if (c == '%') {
        if (i + 2 >= s.size() || !std::isdigit(static_cast<unsigned char>(s[i + 1])) ||
            !std::isdigit(static_cast<unsigned char>(s[i + 2])))
          return false;
        label = (s[i + 1] - '0') * 10 + (s[i + 2] - '0');
        i += 2;
      } else {
        label = c - '0';
      }
      open_rings.flip(static_cast<std::size_t>(label));
      pending_bond = false;
    } else if (is_bond(c)) {
      if (!have_atom || pending_bond) return false;
      pending_bond = true;
    } else if (c == '(') {
      if (!have_atom || pending_bond) return false;
      ++depth;
    } else if (c == ')') {
      if (depth == 0 || prev == '(' || pending_bond) return false;
      --depth;
    } else if (c == '.') {
      if (!have_atom || pending_bond || depth != 0) return false;
      have_atom = false;
    } else {
      return false;
    }
    prev = c;
  }
  return any_atom && depth == 0 && open_rings.none() && !pending_bond && prev != '.';
}

namespace {

std::optional<Candidate> canonical_or_none(std::string_view raw, DomainKind kind) {
  try {
    return canonicalize(raw, kind);
  } catch (const Error&) {
    return std::nullopt;
  }
}

bool builtin_ok(const Candidate& c, const DomainSpec& d) {
  switch (d.kind) {
    case DomainKind::Peptide:
      return peptide_ok(c.canonical, d.min_length, d.max_length);
    case DomainKind::Smiles:
      return smiles_syntax_ok(c.canonical);
    case DomainKind::Generic:
      return !c.canonical.empty();
  }
  return false;
}

}  // namespace

std::vector<std::optional<Candidate>> validate_batch(const std::vector<std::string>& raws,
                                                     const DomainSpec& domain) {
  std::vector<std::optional<Candidate>> out;
  out.reserve(raws.size());
  for (const auto& r : raws) out.push_back(canonical_or_none(r, domain.kind));

  const bool external = domain.kind == DomainKind::Smiles && domain.validator_command.has_value();
  if (!external) {
    for (auto& c : out)
      if (c && !builtin_ok(*c, domain)) c.reset();
    return out;
  }

  std::vector<std::string> lines;
  std::vector<std::size_t> where;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!out[i]) continue;
    // The protocol is line based; embedded newlines cannot be sent.
    if (out[i]->canonical.find('\n') != std::string::npos) {
      out[i].reset();
      continue;
    }
    lines.push_back(out[i]->canonical);
    where.push_back(i);
  }
  if (lines.empty()) return out;
  auto res = run_line_process(*domain.validator_command, lines, domain.validator_timeout);
  if (res.lines.size() < lines.size())
    throw Error(ErrorCode::Io, "validator returned " + std::to_string(res.lines.size()) + " lines for " +
                                   std::to_string(lines.size()) + " inputs");
  for (std::size_t k = 0; k < where.size(); ++k) {
    std::string verdict = res.lines[k];
    verdict.erase(std::remove_if(verdict.begin(), verdict.end(), [](unsigned char ch) { return std::isspace(ch); }),
                  verdict.end());
    if (verdict != "VALID") out[where[k]].reset();
  }
  return out;
}

std::optional<Candidate> validate(std::string_view raw, const DomainSpec& domain) {
  return validate_batch({std::string(raw)}, domain).front();
}

HardConstraint HardConstraint::template_similarity(std::vector<Candidate> templates, double min_similarity) {
  HardConstraint h;
  h.kind = Kind::TemplateSimilarity;
  h.templates = std::move(templates);
  h.min_similarity = min_similarity;
  return h;
}

void HardConstraint::validate() const {
  if (kind != Kind::TemplateSimilarity) return;
  if (!(min_similarity > 0.0 && min_similarity <= 1.0))
    throw Error(ErrorCode::InvalidConfig, "constraint.min_similarity must be in (0, 1]");
  if (templates.empty()) throw Error(ErrorCode::InvalidConfig, "template constraint needs at least one template");
}

double max_template_similarity(const Candidate& c, const std::vector<Candidate>& templates) {
  double best = 0.0;
  for (const auto& t : templates) {
    best = std::max(best, similarity(c, t));
    if (best >= 1.0) break;
  }
  return best;
}

std::optional<std::string> HardConstraint::violation(const Candidate& c) const {
  if (kind == Kind::TemplateSimilarity) {
    const double s = max_template_similarity(c, templates);
    if (s < min_similarity) return "template similarity " + format_score(s) + " < " + format_score(min_similarity);
  }
  for (const auto& [name, pred] : predicates)
    if (!pred(c)) return "predicate " + name;
  return std::nullopt;
}

std::string_view to_string(RejectReason r) {
  switch (r) {
    case RejectReason::Invalid:
      return "invalid";
    case RejectReason::DuplicateInBatch:
      return "duplicate_in_batch";
    case RejectReason::DuplicateInHistory:
      return "duplicate_in_history";
    case RejectReason::ConstraintViolation:
      return "constraint_violation";
  }
  return "?";
}

std::vector<std::pair<Candidate, double>> FilterReport::memoized() const {
  std::vector<std::pair<Candidate, double>> out;
  for (const auto& r : rejected)
    if (r.reason == RejectReason::DuplicateInHistory) out.emplace_back(*r.candidate, *r.memo_score);
  return out;
}

FilterReport filter_batch(const std::vector<std::string>& batch, const History& h,
                          const HardConstraint& constraint, const DomainSpec& domain) {
  FilterReport rep;
  auto checked = validate_batch(batch, domain);
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    auto& c = checked[i];
    if (!c) {
      rep.rejected.push_back({batch[i], RejectReason::Invalid, std::nullopt, std::nullopt, {}});
      continue;
    }
    if (!seen.insert(c->canonical).second) {
      rep.rejected.push_back({batch[i], RejectReason::DuplicateInBatch, *c, std::nullopt, {}});
      continue;
    }
    if (auto memo = h.lookup(c->canonical)) {
      rep.rejected.push_back({batch[i], RejectReason::DuplicateInHistory, *c, memo, {}});
      continue;
    }
    if (auto why = constraint.violation(*c)) {
      rep.rejected.push_back({batch[i], RejectReason::ConstraintViolation, *c, std::nullopt, *why});
      continue;
    }
    rep.accepted.push_back(std::move(*c));
  }
  return rep;
}

}  // namespace abo
