// SPDX-License-Identifier: Apache-2.0
#include "abo/domain.hpp"

namespace abo {

double default_seed_threshold(DomainKind kind) { return kind == DomainKind::Smiles ? 0.5 : 0.75; }

DomainSpec make_domain(DomainKind kind, PromptPack pack) {
  DomainSpec d;
  d.kind = kind;
  d.distance = make_distance(d.distance_name);
  d.seed_threshold = default_seed_threshold(kind);
  d.prompts = std::move(pack);
  return d;
}

}  // namespace abo
