#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "poprec/data.hpp"
#include "poprec/popularity.hpp"

namespace poprec {

// Total scoring function over (user, item) dense indices.
using ScoreFn = std::function<double(std::int32_t, std::int32_t)>;

struct UserRanking {
  std::int32_t user = 0;
  std::vector<std::int32_t> items;  // descending score, ties by ascending index
  std::vector<double> scores;
  bool truncated = false;  // fewer candidates than K
};

struct RankedList {
  int k = 0;
  std::vector<UserRanking> users;
};

struct MetricsAtK {
  int k = 0;
  double recall = 0.0;
  double precision = 0.0;
  double hit_ratio = 0.0;
  double ndcg = 0.0;
  std::size_t evaluated_users = 0;
  std::size_t skipped_users = 0;
};

// Equal-popularity-mass item groups; group 0 holds the most popular items.
struct GroupPartition {
  int n_groups = 0;
  std::vector<std::int32_t> item_group;  // item -> group
  std::vector<double> group_mass;
};

struct RecommendationRates {
  std::vector<double> rate;  // per group, sums to 1
  double stddev = 0.0;       // population std-dev across groups
};

// Per-user train-item sets, each sorted ascending.
std::vector<std::vector<std::int32_t>> train_items_by_user(const EvalSplit& split);

// All-ranking protocol: for each user of `group`, scores every item absent
// from the user's training interactions and keeps the top K
// (score descending, ties by ascending item index). Parallelized over
// users; bounded by the POPREC_THREADS environment variable.
RankedList recommend_topk(const ScoreFn& scorer, const EvalSplit& split,
                          const HoldoutGroup& group, int k);

// Recall / precision / hit-ratio / NDCG at `k` (k may be smaller than the
// list length; the list prefix is used). Users without ground truth are
// skipped and counted.
MetricsAtK compute_metrics(const RankedList& rl,
                           const std::vector<std::int32_t>& truth_users,
                           const std::vector<std::vector<std::int32_t>>& truth_items, int k);
MetricsAtK compute_metrics(const RankedList& rl, const HoldoutGroup& truth, int k);

// Sorts items by pooled popularity (descending, ties by index) and packs
// them greedily into n_groups groups of equal popularity mass.
GroupPartition partition_groups(const PopularityTable& pooled, int n_groups);

// Share of recommendation slots landing in each popularity group.
RecommendationRates recommendation_rate(const RankedList& rl, const GroupPartition& gp);

// Convenience: bucket a set of raw interactions (e.g. the training set
// itself) instead of a recommendation list.
RecommendationRates interaction_rate(const StagedDataset& s, const GroupPartition& gp);

}  // namespace poprec
