#include "poprec/baselines.hpp"

#include <memory>
#include <stdexcept>

namespace poprec {

namespace {

ScoreFn count_scorer(std::vector<double> counts) {
  auto shared = std::make_shared<std::vector<double>>(std::move(counts));
  return [shared](std::int32_t, std::int32_t i) { return (*shared)[i]; };
}

}  // namespace

ScoreFn most_pop_scorer(const EvalSplit& split) {
  if (split.train.total_events() == 0) throw std::invalid_argument("empty training data");
  std::vector<double> counts(split.n_items(), 0.0);
  for (const auto& stage : split.train.stages)
    for (const auto& e : stage) counts[e.item] += 1.0;
  return count_scorer(std::move(counts));
}

ScoreFn most_recent_scorer(const EvalSplit& split) {
  if (split.train.stages.empty() || split.train.stages.back().empty())
    throw std::invalid_argument("last training stage is empty");
  std::vector<double> counts(split.n_items(), 0.0);
  for (const auto& e : split.train.stages.back()) counts[e.item] += 1.0;
  return count_scorer(std::move(counts));
}

ScoreFn bprmf_a_scorer(const FactorModel& model, const PopularityForecast& forecast,
                       double gamma_tilde) {
  if (gamma_tilde < 0.0) throw std::invalid_argument("gamma_tilde must be >= 0");
  if (forecast.m_tilde.size() < model.n_items)
    throw std::invalid_argument("forecast does not cover the item catalog");
  auto m = std::make_shared<FactorModel>(model);
  auto f = std::make_shared<PopularityForecast>(forecast);
  return [m, f, gamma_tilde](std::int32_t u, std::int32_t i) {
    return pda_score(*m, u, i, *f, gamma_tilde);
  };
}

}  // namespace poprec
