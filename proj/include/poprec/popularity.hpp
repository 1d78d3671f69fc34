#pragma once

#include <cstdint>
#include <vector>

#include "poprec/data.hpp"

namespace poprec {

// Per-stage item popularity: share of the stage's interactions that land
// on each item. Stored values are clamped below by a per-stage epsilon
// (default half of one interaction's share) so that zero-count items keep
// a positive value; the unclamped distribution stays recoverable from the
// raw counts.
struct PopularityTable {
  std::size_t n_items = 0;
  std::vector<std::vector<std::int64_t>> counts;  // stage x item
  std::vector<std::vector<double>> m;             // stage x item, clamped
  std::vector<std::int64_t> totals;               // per stage
  std::vector<double> epsilon;                    // per stage clamp floor

  std::size_t n_stages() const { return m.size(); }

  // clamped popularity of item i in stage t
  double value(std::size_t t, std::size_t i) const { return m[t][i]; }

  // like value(), but a single-row (global) table answers for every stage
  double train_value(std::size_t t, std::size_t i) const {
    return m.size() == 1 ? m[0][i] : m[t][i];
  }

  // raw count/total distribution (all zeros for an empty stage)
  std::vector<double> unclamped(std::size_t t) const;
};

enum class ForecastMethod { LastStage, LinearTrend };

// Predicted next-stage popularity per item.
struct PopularityForecast {
  std::vector<double> m_tilde;
  ForecastMethod method = ForecastMethod::LastStage;
  double alpha = 0.0;
  int substages = 1;
  double epsilon = 0.0;
};

// epsilon_scale controls the clamp floor: eps_t = epsilon_scale / total_t
// (epsilon_scale / 1 for an empty stage).
PopularityTable local_popularity(const StagedDataset& s, double epsilon_scale = 0.5);

// Single-row table over all stages pooled.
PopularityTable global_popularity(const StagedDataset& s, double epsilon_scale = 0.5);

// Jensen-Shannon divergence (natural log) between the unclamped
// popularity distributions of stages t and s; range [0, ln 2].
double drift_of_popularity(const PopularityTable& p, std::size_t t, std::size_t s);

// JSD between two explicit distributions; 0*log(0) taken as 0.
double jensen_shannon_divergence(const std::vector<double>& p, const std::vector<double>& q);

// Forecasts next-stage popularity from the last training stage(s).
// method LastStage:   m~_i = m_i^T
// method LinearTrend: m~_i = m_i^T + alpha * (m_i^T - m_i^{T-1}), clamped at epsilon
// With substages > 1 the last training stage is re-split in time into that
// many equal-width sub-stages and the final one (or two) replace T (and T-1).
PopularityForecast forecast_popularity(const StagedDataset& train, const PopularityTable& local,
                                       ForecastMethod method, double alpha, int substages = 1,
                                       double epsilon_scale = 0.5);

}  // namespace poprec
