// SPDX-License-Identifier: Apache-2.0
#include "abo/diversity.hpp"

#include <algorithm>

namespace abo {

namespace {

// Greedy over records visited in `order`.
std::vector<const ScoredRecord*> greedy(const std::vector<const ScoredRecord*>& order, std::size_t m,
                                        double threshold, const Distance& dist) {
  std::vector<const ScoredRecord*> kept;
  for (const auto* r : order) {
    if (kept.size() >= m) break;
    bool ok = true;
    for (const auto* k : kept)
      if (dist(r->candidate, k->candidate) < threshold) {
        ok = false;
        break;
      }
    if (ok) kept.push_back(r);
  }
  return kept;
}

std::vector<const ScoredRecord*> sorted_records(const History& h, Direction dir) {
  std::vector<const ScoredRecord*> out;
  out.reserve(h.size());
  for (auto i : rank_order(h, dir)) out.push_back(&h.records()[i]);
  return out;
}

Portfolio make_portfolio(const std::vector<const ScoredRecord*>& kept, const PortfolioSpec& spec) {
  Portfolio p;
  std::vector<double> scores;
  for (const auto* r : kept) {
    p.members.push_back(*r);
    scores.push_back(r->score);
  }
  p.agg_value = aggregate(scores, spec);
  p.complete = p.members.size() == static_cast<std::size_t>(spec.size);
  return p;
}

}  // namespace

std::vector<ScoredRecord> select_diverse_seeds(const History& h, std::size_t m, double threshold,
                                               const Distance& dist, Direction dir) {
  if (h.empty()) throw Error(ErrorCode::EmptyHistory, "cannot select seeds from an empty history");
  std::vector<ScoredRecord> out;
  for (const auto* r : greedy(sorted_records(h, dir), m, threshold, dist)) out.push_back(*r);
  return out;
}

double aggregate(const std::vector<double>& scores, const PortfolioSpec& spec) {
  if (spec.agg != "mean") throw Error(ErrorCode::InvalidConfig, "unknown portfolio aggregate '" + spec.agg + "'");
  if (scores.empty()) return 0.0;
  double sum = 0.0;
  for (double s : scores) sum += s;
  return sum / static_cast<double>(scores.size());
}

Portfolio best_portfolio_greedy(const History& h, const PortfolioSpec& spec, const Distance& dist,
                                Direction dir) {
  if (h.empty()) throw Error(ErrorCode::EmptyHistory, "cannot build a portfolio from an empty history");
  auto kept = greedy(sorted_records(h, dir), static_cast<std::size_t>(spec.size), spec.beta, dist);
  return make_portfolio(kept, spec);
}

bool portfolio_better(const Portfolio& a, const Portfolio& b, Direction dir) {
  if (a.members.size() != b.members.size()) return a.members.size() > b.members.size();
  return !a.members.empty() && is_improvement(a.agg_value, b.agg_value, dir);
}

std::vector<PortfolioPoint> portfolio_progress(const History& h, const PortfolioSpec& spec,
                                               const Distance& dist, Direction dir) {
  std::vector<PortfolioPoint> out;
  const auto m = static_cast<std::size_t>(spec.size);
  std::vector<const ScoredRecord*> order;  // best first, maintained by insertion
  std::vector<const ScoredRecord*> current;
  Portfolio best;
  for (const auto& r : h.records()) {
    auto pos = std::upper_bound(order.begin(), order.end(), &r, [dir](const ScoredRecord* a, const ScoredRecord* b) {
      return ranks_before(*a, *b, dir);
    });
    order.insert(pos, &r);
    const bool unchanged = current.size() == m && ranks_before(*current.back(), r, dir);
    if (!unchanged) {
      current = greedy(order, m, spec.beta, dist);
      Portfolio p = make_portfolio(current, spec);
      if (best.members.empty() || portfolio_better(p, best, dir)) best = std::move(p);
    }
    out.push_back({r.eval_index, best.agg_value, best.members.size(), best.complete});
  }
  return out;
}

nlohmann::json portfolio_to_json(const Portfolio& p) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : p.members)
    arr.push_back({{"sequence", r.candidate.canonical}, {"score", r.score}, {"eval_index", r.eval_index}});
  return arr;
}

}  // namespace abo
