// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include "abo/core.hpp"
#include "abo/distance.hpp"
#include "abo/prompts.hpp"

namespace abo {

inline constexpr std::string_view kAminoAcids = "ACDEFGHIKLMNPQRSTVWY";

/// Everything the loop needs to know about the search space.
struct DomainSpec {
  DomainKind kind = DomainKind::Generic;
  std::size_t min_length = 5;  // peptide length bounds
  std::size_t max_length = 60;
  std::string distance_name = "normalized_edit";
  Distance distance;
  double seed_threshold = 0.75;
  std::optional<std::string> validator_command;  // SMILES line-protocol validator
  std::chrono::milliseconds validator_timeout{60'000};
  PromptPack prompts;
};

/// 0.75 for peptides and generic strings, 0.5 for molecules.
double default_seed_threshold(DomainKind kind);

/// Domain with built-in defaults for `kind` and the given prompt pack.
DomainSpec make_domain(DomainKind kind, PromptPack pack);

}  // namespace abo
