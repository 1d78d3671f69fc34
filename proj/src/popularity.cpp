#include "poprec/popularity.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace poprec {

namespace {

PopularityTable table_from_counts(std::vector<std::vector<std::int64_t>> counts,
                                  std::size_t n_items, double epsilon_scale) {
  PopularityTable p;
  p.n_items = n_items;
  p.counts = std::move(counts);
  p.m.resize(p.counts.size());
  for (std::size_t t = 0; t < p.counts.size(); ++t) {
    std::int64_t total = 0;
    for (auto c : p.counts[t]) total += c;
    p.totals.push_back(total);
    const double eps = epsilon_scale / static_cast<double>(std::max<std::int64_t>(total, 1));
    p.epsilon.push_back(eps);
    p.m[t].resize(n_items);
    for (std::size_t i = 0; i < n_items; ++i) {
      p.m[t][i] = p.counts[t][i] > 0
                      ? static_cast<double>(p.counts[t][i]) / static_cast<double>(total)
                      : eps;
    }
  }
  return p;
}

std::vector<std::int64_t> stage_counts(const std::vector<Interaction>& stage, std::size_t n_items) {
  std::vector<std::int64_t> c(n_items, 0);
  for (const auto& e : stage) ++c[e.item];
  return c;
}

}  // namespace

std::vector<double> PopularityTable::unclamped(std::size_t t) const {
  std::vector<double> out(n_items, 0.0);
  if (totals[t] > 0) {
    for (std::size_t i = 0; i < n_items; ++i)
      out[i] = static_cast<double>(counts[t][i]) / static_cast<double>(totals[t]);
  }
  return out;
}

PopularityTable local_popularity(const StagedDataset& s, double epsilon_scale) {
  if (s.n_stages() == 0) throw std::invalid_argument("no stages");
  std::vector<std::vector<std::int64_t>> counts;
  counts.reserve(s.n_stages());
  for (const auto& stage : s.stages) counts.push_back(stage_counts(stage, s.n_items()));
  return table_from_counts(std::move(counts), s.n_items(), epsilon_scale);
}

PopularityTable global_popularity(const StagedDataset& s, double epsilon_scale) {
  if (s.n_stages() == 0) throw std::invalid_argument("no stages");
  std::vector<std::int64_t> pooled(s.n_items(), 0);
  for (const auto& stage : s.stages)
    for (const auto& e : stage) ++pooled[e.item];
  std::vector<std::vector<std::int64_t>> counts;
  counts.push_back(std::move(pooled));
  return table_from_counts(std::move(counts), s.n_items(), epsilon_scale);
}

double jensen_shannon_divergence(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) throw std::invalid_argument("distribution sizes differ");
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double mid = 0.5 * (p[i] + q[i]);
    if (p[i] > 0.0) acc += 0.5 * p[i] * std::log(p[i] / mid);
    if (q[i] > 0.0) acc += 0.5 * q[i] * std::log(q[i] / mid);
  }
  return acc;
}

double drift_of_popularity(const PopularityTable& p, std::size_t t, std::size_t s) {
  if (t >= p.n_stages() || s >= p.n_stages()) throw std::out_of_range("stage index out of range");
  return jensen_shannon_divergence(p.unclamped(t), p.unclamped(s));
}

PopularityForecast forecast_popularity(const StagedDataset& train, const PopularityTable& local,
                                       ForecastMethod method, double alpha, int substages,
                                       double epsilon_scale) {
  if (substages < 1) throw std::invalid_argument("substages must be >= 1");
  const std::size_t T = local.n_stages();
  if (T == 0 || train.n_stages() != T) throw std::invalid_argument("table does not match dataset");
  if (train.stages.back().empty()) throw std::invalid_argument("last training stage is empty");

  PopularityForecast f;
  f.method = method;
  f.alpha = alpha;
  f.substages = substages;

  std::vector<double> last, prev;
  if (substages == 1) {
    if (method == ForecastMethod::LinearTrend && T < 2)
      throw std::invalid_argument("linear-trend forecast needs at least 2 stages");
    last = local.m[T - 1];
    f.epsilon = local.epsilon[T - 1];
    if (method == ForecastMethod::LinearTrend) prev = local.m[T - 2];
  } else {
    const auto& stage = train.stages.back();
    std::set<std::int64_t> distinct;
    for (const auto& e : stage) distinct.insert(e.timestamp);
    if (static_cast<int>(distinct.size()) < substages)
      throw std::runtime_error("degenerate sub-stages: last stage has fewer distinct timestamps than requested");

    Dataset sub;
    sub.interactions = stage;  // already time-sorted
    sub.user_ids = train.user_ids;
    sub.item_ids = train.item_ids;
    StagedDataset resplit = split_stages(sub, substages);
    PopularityTable subtable = local_popularity(resplit, epsilon_scale);
    last = subtable.m[substages - 1];
    f.epsilon = subtable.epsilon[substages - 1];
    if (method == ForecastMethod::LinearTrend) prev = subtable.m[substages - 2];
  }

  f.m_tilde.resize(last.size());
  for (std::size_t i = 0; i < last.size(); ++i) {
    double v = last[i];
    if (method == ForecastMethod::LinearTrend) v = last[i] + alpha * (last[i] - prev[i]);
    f.m_tilde[i] = std::max(v, f.epsilon);
  }
  return f;
}

}  // namespace poprec
