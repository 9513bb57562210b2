// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <string_view>

#include "abo/core.hpp"

namespace abo {

/// Levenshtein distance (unit costs).
std::size_t levenshtein(std::string_view a, std::string_view b);

/// Levenshtein distance divided by the length of the shorter string. Not
/// clamped: it can exceed 1 when the lengths differ a lot. Two empty strings
/// are at distance 0; one empty string against a non-empty one is at +inf.
double normalized_edit_distance(std::string_view a, std::string_view b);

/// 1 - min(1, normalized_edit_distance), always in [0, 1].
double similarity(std::string_view a, std::string_view b);
inline double similarity(const Candidate& a, const Candidate& b) {
  return similarity(a.canonical, b.canonical);
}

/// Domain distance: dist(a, a) == 0, symmetric, non-negative.
using Distance = std::function<double(const Candidate&, const Candidate&)>;

/// "normalized_edit" is the only built-in metric; molecule fingerprint
/// distances plug in through the Distance type.
Distance make_distance(std::string_view name);

}  // namespace abo
