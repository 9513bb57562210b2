// SPDX-License-Identifier: Apache-2.0
#include "abo/context.hpp"

namespace abo {

void ContextSpec::validate() const {
  if (top_k < 1 || top_k > context_size)
    throw Error(ErrorCode::InvalidConfig, "context requires 1 <= top_k <= context_size");
}

std::size_t coverage_stride(std::size_t n, const ContextSpec& spec) {
  if (n <= spec.context_size) return 0;
  const std::size_t remainder = n - spec.top_k;
  const std::size_t slots = spec.context_size - spec.top_k;
  if (slots == 0 || remainder <= slots) return 0;
  return remainder / slots;
}

GlobalContext coverage_sample(const History& h, const ContextSpec& spec, Direction dir, Engine& rng,
                              std::optional<std::size_t> offset) {
  if (h.empty()) throw Error(ErrorCode::EmptyHistory, "coverage_sample on empty history");
  spec.validate();
  const auto order = rank_order(h, dir);
  const std::size_t n = order.size();

  std::vector<std::size_t> picked;  // 0-based ranks
  if (n <= spec.context_size) {
    for (std::size_t r = 0; r < n; ++r) picked.push_back(r);
  } else {
    for (std::size_t r = 0; r < spec.top_k; ++r) picked.push_back(r);
    const std::size_t remainder = n - spec.top_k;
    const std::size_t slots = spec.context_size - spec.top_k;
    if (remainder <= slots) {
      for (std::size_t r = spec.top_k; r < n; ++r) picked.push_back(r);
    } else {
      const std::size_t stride = remainder / slots;
      std::size_t off = offset ? *offset : static_cast<std::size_t>(uniform_index(rng, stride));
      if (off >= stride) throw std::invalid_argument("coverage offset must be < stride");
      for (std::size_t i = 0; i < slots; ++i) picked.push_back(spec.top_k + off + i * stride);
    }
  }

  GlobalContext ctx;
  ctx.entries.reserve(picked.size());
  for (std::size_t r : picked) ctx.entries.push_back({r + 1, h.records()[order[r]]});
  return ctx;
}

std::string render_context(const GlobalContext& ctx) {
  if (ctx.entries.empty()) throw Error(ErrorCode::EmptyHistory, "cannot render an empty context");
  std::string out;
  for (const auto& e : ctx.entries) {
    if (!out.empty()) out += '\n';
    out += format_score(e.record.score);
    out += ": ";
    out += e.record.candidate.canonical;
  }
  return out;
}

}  // namespace abo
