// SPDX-License-Identifier: Apache-2.0
//
// The black-box objective: built-in synthetic oracles, subprocess and HTTP
// adapters, a counting/caching harness, and initialization data loading.
#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "abo/core.hpp"
#include "abo/domain.hpp"
#include "abo/rng.hpp"

namespace abo {

class Oracle {
 public:
  virtual ~Oracle() = default;
  /// One score per candidate, same order. Implementations may throw
  /// OracleFailure or Timeout.
  virtual std::vector<double> evaluate(const std::vector<Candidate>& batch) = 0;
  virtual std::string name() const = 0;
};

/// Normalized LCS to a hidden target: LCS(c, target) / max(|c|, |target|).
/// Maximize.
class MotifMatchOracle final : public Oracle {
 public:
  explicit MotifMatchOracle(std::string target);
  std::vector<double> evaluate(const std::vector<Candidate>& batch) override;
  std::string name() const override { return "motif-match"; }

 private:
  std::string target_;
};

/// Sum over residues of a hidden per-letter weight in [-1, 1] drawn from
/// `seed`. Optional Gaussian noise is keyed by the candidate text, so the
/// oracle stays a pure function.
class HiddenWeightsOracle final : public Oracle {
 public:
  HiddenWeightsOracle(std::string alphabet, std::uint64_t seed, double noise_sd = 0.0);
  std::vector<double> evaluate(const std::vector<Candidate>& batch) override;
  std::string name() const override { return "hidden-weights"; }
  double weight(char c) const;

 private:
  std::string alphabet_;
  std::vector<double> weights_;
  std::uint64_t seed_;
  double noise_sd_;
};

/// Floor almost everywhere. A candidate leaves the floor only when a hash of
/// its first `prefix_len` characters falls below `mass`; there the score is
/// floor + scale * (0.001 + LCS similarity to the target), so mutations away
/// from the prefix keep a usable local signal.
class PlateauOracle final : public Oracle {
 public:
  PlateauOracle(std::string target, double mass, std::uint64_t seed, double floor = 0.0, double scale = 1.0,
                std::size_t prefix_len = 3);
  std::vector<double> evaluate(const std::vector<Candidate>& batch) override;
  std::string name() const override { return "plateau"; }
  bool gate_open(std::string_view canonical) const;

 private:
  std::string target_;
  double mass_;
  std::uint64_t seed_;
  double floor_;
  double scale_;
  std::size_t prefix_len_;
};

/// Runs `command` once per batch: N candidate lines in, N score lines out.
class SubprocessOracle final : public Oracle {
 public:
  SubprocessOracle(std::string command, std::chrono::milliseconds timeout);
  std::vector<double> evaluate(const std::vector<Candidate>& batch) override;
  std::string name() const override { return "subprocess"; }

 private:
  std::string command_;
  std::chrono::milliseconds timeout_;
};

/// POST {"candidate": text} -> {"score": number}, one request per candidate.
class HttpOracle final : public Oracle {
 public:
  HttpOracle(std::string url, std::chrono::milliseconds timeout);
  std::vector<double> evaluate(const std::vector<Candidate>& batch) override;
  std::string name() const override { return "http"; }

 private:
  std::string url_;
  std::chrono::milliseconds timeout_;
};

/// Normalized LCS similarity in [0, 1]; 1 for two empty strings.
double lcs_similarity(std::string_view a, std::string_view b);

/// Parses a decimal score line; throws OracleFailure when malformed or not
/// finite.
double parse_score_line(std::string_view line);

/// Counts oracle calls, enforces finite scores, optionally memoizes.
class OracleHarness {
 public:
  OracleHarness(std::shared_ptr<Oracle> oracle, bool cache_enabled = true);

  std::vector<double> evaluate(const std::vector<Candidate>& batch);
  /// Candidates actually sent to the oracle (cache hits excluded).
  std::int64_t calls() const;
  std::int64_t cache_hits() const;
  const Oracle& oracle() const { return *oracle_; }

 private:
  std::shared_ptr<Oracle> oracle_;
  bool cache_enabled_;
  mutable std::mutex mu_;
  std::unordered_map<std::string, double> cache_;
  std::int64_t calls_ = 0;
  std::int64_t hits_ = 0;
};

/// Source of fresh raw candidates for resampling.
using CandidatePool = std::function<std::string(Engine&)>;

/// Uniformly random strings over `alphabet` with length in [min_len, max_len].
CandidatePool random_string_pool(std::string alphabet, std::size_t min_len, std::size_t max_len);
/// Uniform draws from a fixed list.
CandidatePool list_pool(std::vector<std::string> items);

struct InitSpec {
  enum class Source { File, TemplatesPlusMutations };
  Source source = Source::TemplatesPlusMutations;
  std::filesystem::path path;          // File
  std::vector<std::string> templates;  // TemplatesPlusMutations
  std::string mutation_alphabet = std::string(kAminoAcids);
  std::size_t count = 100;
  bool zero_signal_guard = false;
  double floor = 0.0;
};

struct InitReport {
  std::size_t requested = 0;
  std::size_t evaluated = 0;
  std::size_t duplicates = 0;
  std::size_t invalid = 0;
  std::size_t resampled = 0;
};

/// Point mutation: one uniformly random position replaced by a uniformly
/// random alphabet letter (may reproduce the input).
std::string point_mutation(std::string_view s, std::string_view alphabet, Engine& rng);

/// Builds and evaluates the initial data set into an empty history, capped at
/// the budget. Throws InsufficientInit, OracleFailure.
InitReport load_init(const InitSpec& spec, const DomainSpec& domain, OracleHarness& oracle, History& h,
                     std::int64_t budget, Engine& rng);

/// When every score equals `floor`, draws from the pool and evaluates one
/// candidate at a time (origin resampled-init) until a score differs from
/// the floor. Returns the number of resamples. Throws
/// BudgetExhaustedDuringInit.
std::size_t zero_signal_resample(History& h, const CandidatePool& pool, const DomainSpec& domain,
                                 OracleHarness& oracle, double floor, std::int64_t budget, Engine& rng);

}  // namespace abo
