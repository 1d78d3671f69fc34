#include "poprec/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace poprec {

namespace {

unsigned thread_count() {
  if (const char* env = std::getenv("POPREC_THREADS")) {
    const long n = std::strtol(env, nullptr, 10);
    if (n >= 1) return static_cast<unsigned>(n);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  const unsigned workers = std::min<std::size_t>(thread_count(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace

std::vector<std::vector<std::int32_t>> train_items_by_user(const EvalSplit& split) {
  std::vector<std::vector<std::int32_t>> seen(split.n_users());
  for (const auto& stage : split.train.stages)
    for (const auto& e : stage) seen[e.user].push_back(e.item);
  for (auto& v : seen) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }
  return seen;
}

RankedList recommend_topk(const ScoreFn& scorer, const EvalSplit& split,
                          const HoldoutGroup& group, int k) {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  const auto n_items = static_cast<std::int32_t>(split.n_items());
  if (k > n_items) throw std::invalid_argument("k exceeds the item catalog");
  const auto seen = train_items_by_user(split);

  RankedList rl;
  rl.k = k;
  rl.users.resize(group.users.size());

  parallel_for(group.users.size(), [&](std::size_t idx) {
    const std::int32_t u = group.users[idx].user;
    const auto& excluded = seen[u];
    std::vector<std::pair<double, std::int32_t>> cand;
    cand.reserve(static_cast<std::size_t>(n_items) - excluded.size());
    for (std::int32_t i = 0; i < n_items; ++i) {
      if (std::binary_search(excluded.begin(), excluded.end(), i)) continue;
      cand.emplace_back(scorer(u, i), i);
    }
    const auto take = std::min<std::size_t>(static_cast<std::size_t>(k), cand.size());
    std::partial_sort(cand.begin(), cand.begin() + take, cand.end(),
                      [](const auto& a, const auto& b) {
                        if (a.first != b.first) return a.first > b.first;
                        return a.second < b.second;
                      });
    UserRanking& out = rl.users[idx];
    out.user = u;
    out.truncated = take < static_cast<std::size_t>(k);
    out.items.reserve(take);
    out.scores.reserve(take);
    for (std::size_t j = 0; j < take; ++j) {
      out.scores.push_back(cand[j].first);
      out.items.push_back(cand[j].second);
    }
  });
  return rl;
}

MetricsAtK compute_metrics(const RankedList& rl,
                           const std::vector<std::int32_t>& truth_users,
                           const std::vector<std::vector<std::int32_t>>& truth_items, int k) {
  if (truth_users.size() != truth_items.size())
    throw std::invalid_argument("truth users/items size mismatch");

  MetricsAtK m;
  m.k = k;
  double recall = 0.0, precision = 0.0, hr = 0.0, ndcg = 0.0;
  for (const auto& ur : rl.users) {
    const auto pos = std::lower_bound(truth_users.begin(), truth_users.end(), ur.user);
    if (pos == truth_users.end() || *pos != ur.user ||
        truth_items[pos - truth_users.begin()].empty()) {
      ++m.skipped_users;
      continue;
    }
    const auto& truth = truth_items[pos - truth_users.begin()];
    const auto len = std::min<std::size_t>(ur.items.size(), static_cast<std::size_t>(k));

    std::size_t hits = 0;
    double dcg = 0.0;
    for (std::size_t r = 0; r < len; ++r) {
      if (std::binary_search(truth.begin(), truth.end(), ur.items[r])) {
        ++hits;
        dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
      }
    }
    double idcg = 0.0;
    const auto ideal = std::min<std::size_t>(truth.size(), static_cast<std::size_t>(k));
    for (std::size_t r = 0; r < ideal; ++r) idcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);

    recall += static_cast<double>(hits) / static_cast<double>(truth.size());
    precision += static_cast<double>(hits) / static_cast<double>(k);
    hr += hits > 0 ? 1.0 : 0.0;
    ndcg += idcg > 0.0 ? dcg / idcg : 0.0;
    ++m.evaluated_users;
  }
  if (m.evaluated_users > 0) {
    const auto n = static_cast<double>(m.evaluated_users);
    m.recall = recall / n;
    m.precision = precision / n;
    m.hit_ratio = hr / n;
    m.ndcg = ndcg / n;
  }
  return m;
}

MetricsAtK compute_metrics(const RankedList& rl, const HoldoutGroup& truth, int k) {
  std::vector<std::int32_t> users;
  users.reserve(truth.users.size());
  for (const auto& u : truth.users) users.push_back(u.user);
  return compute_metrics(rl, users, ground_truth_items(truth), k);
}

GroupPartition partition_groups(const PopularityTable& pooled, int n_groups) {
  if (n_groups < 1) throw std::invalid_argument("group count must be >= 1");
  const std::size_t n_items = pooled.n_items;
  if (n_items < static_cast<std::size_t>(n_groups))
    throw std::invalid_argument("fewer items than groups");

  // pool counts across rows so both single-row and staged tables work
  std::vector<std::int64_t> pooled_counts(n_items, 0);
  std::int64_t pooled_total = 0;
  for (std::size_t t = 0; t < pooled.n_stages(); ++t) {
    for (std::size_t i = 0; i < n_items; ++i) pooled_counts[i] += pooled.counts[t][i];
    pooled_total += pooled.totals[t];
  }
  std::vector<double> mass(n_items, 0.0);
  if (pooled_total > 0)
    for (std::size_t i = 0; i < n_items; ++i)
      mass[i] = static_cast<double>(pooled_counts[i]) / static_cast<double>(pooled_total);
  std::vector<std::int32_t> order(n_items);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::int32_t a, std::int32_t b) {
    if (mass[a] != mass[b]) return mass[a] > mass[b];
    return a < b;
  });
  const double total = std::accumulate(mass.begin(), mass.end(), 0.0);
  const double target = total / static_cast<double>(n_groups);

  GroupPartition gp;
  gp.n_groups = n_groups;
  gp.item_group.assign(n_items, 0);
  gp.group_mass.assign(n_groups, 0.0);
  int g = 0;
  for (std::size_t rank = 0; rank < n_items; ++rank) {
    gp.item_group[order[rank]] = g;
    gp.group_mass[g] += mass[order[rank]];
    const std::size_t items_left = n_items - rank - 1;
    const auto groups_left = static_cast<std::size_t>(n_groups - g - 1);
    // close once the mass target is reached; also close early when the
    // remaining items are only just enough to keep every group non-empty
    if (g < n_groups - 1 && (gp.group_mass[g] >= target || items_left <= groups_left)) ++g;
  }
  return gp;
}

RecommendationRates recommendation_rate(const RankedList& rl, const GroupPartition& gp) {
  std::vector<std::int64_t> counts(gp.n_groups, 0);
  std::int64_t total = 0;
  for (const auto& ur : rl.users) {
    for (auto item : ur.items) {
      if (item < 0 || static_cast<std::size_t>(item) >= gp.item_group.size())
        throw std::out_of_range("recommended item has no group");
      ++counts[gp.item_group[item]];
      ++total;
    }
  }
  RecommendationRates rr;
  rr.rate.assign(gp.n_groups, 0.0);
  if (total > 0)
    for (int g = 0; g < gp.n_groups; ++g)
      rr.rate[g] = static_cast<double>(counts[g]) / static_cast<double>(total);
  const double mean = 1.0 / static_cast<double>(gp.n_groups);
  double var = 0.0;
  for (double r : rr.rate) var += (r - mean) * (r - mean);
  rr.stddev = std::sqrt(var / static_cast<double>(gp.n_groups));
  return rr;
}

RecommendationRates interaction_rate(const StagedDataset& s, const GroupPartition& gp) {
  RankedList rl;
  rl.users.resize(1);
  for (const auto& stage : s.stages)
    for (const auto& e : stage) rl.users[0].items.push_back(e.item);
  rl.k = static_cast<int>(rl.users[0].items.size());
  return recommendation_rate(rl, gp);
}

}  // namespace poprec
