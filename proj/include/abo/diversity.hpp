// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "abo/core.hpp"
#include "abo/distance.hpp"

namespace abo {

/// Best-first greedy: a record is kept when its distance to every kept record
/// is >= threshold. Stops at m kept. Throws EmptyHistory.
std::vector<ScoredRecord> select_diverse_seeds(const History& h, std::size_t m, double threshold,
                                               const Distance& dist, Direction dir);

struct Portfolio {
  std::vector<ScoredRecord> members;  // selection order (best first)
  double agg_value = 0.0;
  bool complete = false;  // members.size() == M
};

/// Aggregate of scores under spec.agg. Only "mean" is built in.
double aggregate(const std::vector<double>& scores, const PortfolioSpec& spec);

/// Greedy portfolio under the pairwise dist >= beta constraint. Throws
/// EmptyHistory.
Portfolio best_portfolio_greedy(const History& h, const PortfolioSpec& spec, const Distance& dist,
                                Direction dir);

/// More members wins; at equal size, a strictly better aggregate wins.
bool portfolio_better(const Portfolio& a, const Portfolio& b, Direction dir);

struct PortfolioPoint {
  std::int64_t eval_index;
  double agg_value;
  std::size_t size;
  bool complete;
};

/// Best portfolio found so far after each evaluation: the running best (by
/// portfolio_better) of the greedy portfolios of the prefixes D_1..D_n. A
/// greedy recomputation is skipped when the new record ranks behind the last
/// member of a full greedy portfolio, since it cannot change the selection.
std::vector<PortfolioPoint> portfolio_progress(const History& h, const PortfolioSpec& spec,
                                               const Distance& dist, Direction dir);

/// [{sequence, score, eval_index}, ...]
nlohmann::json portfolio_to_json(const Portfolio& p);

}  // namespace abo
