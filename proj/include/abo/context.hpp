// SPDX-License-Identifier: Apache-2.0
//
// Global context: the top-k records plus a rank-stride sample of the rest,
// rendered best-first as "score: candidate" lines for agent prompts.
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "abo/core.hpp"
#include "abo/rng.hpp"

namespace abo {

struct ContextSpec {
  std::size_t context_size = 20;
  std::size_t top_k = 8;

  void validate() const;
};

struct ContextEntry {
  std::size_t rank;  // 1-based, best first
  ScoredRecord record;
};

struct GlobalContext {
  std::vector<ContextEntry> entries;  // sorted best-to-worst
};

/// Stride over the remainder (ranks top_k+1..n) used when the history
/// exceeds the context size; 0 when no stride sampling happens.
std::size_t coverage_stride(std::size_t history_size, const ContextSpec& spec);

/// Samples the context. `offset`, when given, overrides the random offset
/// (must be < stride); otherwise it is drawn from `rng`. Throws EmptyHistory.
GlobalContext coverage_sample(const History& h, const ContextSpec& spec, Direction dir, Engine& rng,
                              std::optional<std::size_t> offset = std::nullopt);

/// One "score: candidate" line per entry, best first. Throws EmptyHistory on
/// an empty context.
std::string render_context(const GlobalContext& ctx);

}  // namespace abo
