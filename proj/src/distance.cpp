// SPDX-License-Identifier: Apache-2.0
#include "abo/distance.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <vector>

namespace abo {

namespace {

// Bit-vector edit distance (Myers / Hyyro), pattern length <= 64.
std::size_t levenshtein_bitparallel(std::string_view pattern, std::string_view text) {
  const std::size_t m = pattern.size();
  std::array<std::uint64_t, 256> peq{};
  for (std::size_t i = 0; i < m; ++i) peq[static_cast<unsigned char>(pattern[i])] |= std::uint64_t{1} << i;

  const std::uint64_t last = std::uint64_t{1} << (m - 1);
  std::uint64_t pv = ~std::uint64_t{0};
  std::uint64_t mv = 0;
  std::size_t score = m;
  for (char c : text) {
    const std::uint64_t eq = peq[static_cast<unsigned char>(c)];
    const std::uint64_t xv = eq | mv;
    const std::uint64_t xh = (((eq & pv) + pv) ^ pv) | eq;
    std::uint64_t ph = mv | ~(xh | pv);
    std::uint64_t mh = pv & xh;
    if (ph & last)
      ++score;
    else if (mh & last)
      --score;
    ph = (ph << 1) | 1;
    mh <<= 1;
    pv = mh | ~(xv | ph);
    mv = ph & xv;
  }
  return score;
}

std::size_t levenshtein_rows(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace

std::size_t levenshtein(std::string_view a, std::string_view b) {
  if (a.size() > b.size()) std::swap(a, b);
  if (a.empty()) return b.size();
  if (a.size() <= 64) return levenshtein_bitparallel(a, b);
  return levenshtein_rows(a, b);
}

double normalized_edit_distance(std::string_view a, std::string_view b) {
  const std::size_t shorter = std::min(a.size(), b.size());
  if (shorter == 0) return a.size() == b.size() ? 0.0 : std::numeric_limits<double>::infinity();
  return static_cast<double>(levenshtein(a, b)) / static_cast<double>(shorter);
}

double similarity(std::string_view a, std::string_view b) {
  return 1.0 - std::min(1.0, normalized_edit_distance(a, b));
}

Distance make_distance(std::string_view name) {
  if (name == "normalized_edit" || name == "edit")
    return [](const Candidate& a, const Candidate& b) {
      return normalized_edit_distance(a.canonical, b.canonical);
    };
  throw Error(ErrorCode::InvalidConfig, "unknown distance '" + std::string(name) + "'");
}

}  // namespace abo
