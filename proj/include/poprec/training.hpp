#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "poprec/data.hpp"
#include "poprec/popularity.hpp"
#include "poprec/rng.hpp"
#include "poprec/scoring.hpp"

namespace poprec {

enum class TrainMode { PD, PDA };
enum class PopularityScope { Local, Global };

struct TrainConfig {
  double learning_rate = 0.001;
  std::size_t batch_size = 2048;
  double l2_lambda = 0.0;
  double gamma = 0.0;
  TrainMode mode = TrainMode::PD;
  PopularityScope popularity_scope = PopularityScope::Local;
  int patience = 100;
  int max_epochs = 1000;
  std::size_t embedding_dim = 64;
  double init_scale = 0.1;
  int validation_k = 20;  // early stopping watches Recall@validation_k
  std::uint64_t seed = 0;
};

// Adam moment accumulators, shaped like the embedding tables. Rows not
// touched by a batch keep stale moments (sparse/lazy updates).
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step_count = 0;
  std::vector<double> m_user, v_user, m_item, v_item;

  static AdamState like(const FactorModel& model);
};

// One pairwise example: positive (user, pos_item) observed in `stage`,
// neg_item never interacted by the user in training.
struct TrainExample {
  std::int32_t user = 0;
  std::int32_t pos_item = 0;
  std::int32_t stage = 0;
  std::int32_t neg_item = 0;
};

// Rejection sampler over each user's non-interacted items.
class NegativeSampler {
 public:
  explicit NegativeSampler(const EvalSplit& split);
  std::int32_t sample(std::int32_t user, Rng& rng) const;
  const std::vector<std::int32_t>& interacted(std::int32_t user) const { return seen_[user]; }

 private:
  std::size_t n_items_;
  std::vector<std::vector<std::int32_t>> seen_;  // sorted per user
};

// One-shot variant of the sampler (tests / ad-hoc use).
std::int32_t sample_negatives(const EvalSplit& split, std::int32_t user, Rng& rng);

// Sparse per-row gradients of a batch.
struct BatchGradients {
  std::vector<std::int32_t> user_rows, item_rows;
  std::vector<double> user_grads, item_grads;  // len(rows) x d, row-major
};

// Mean pairwise BPR loss of the batch under conditional scores, ie
// softplus(-(s_pos - s_neg)) averaged over pairs, plus the L2 term over
// the embedding rows the batch touches. The negative item's popularity is
// taken at the positive interaction's stage.
double pairwise_loss(const FactorModel& model, const std::vector<TrainExample>& batch,
                     const PopularityTable& pop, const TrainConfig& cfg);

// Same traversal, but also accumulates analytic gradients.
double loss_and_gradients(const FactorModel& model, const std::vector<TrainExample>& batch,
                          const PopularityTable& pop, const TrainConfig& cfg,
                          BatchGradients& out);

// One Adam update over the touched rows; returns the pre-update batch
// loss. Throws on non-finite gradients.
double step(FactorModel& model, AdamState& adam, const std::vector<TrainExample>& batch,
            const PopularityTable& pop, const TrainConfig& cfg);

struct EpochRecord {
  int epoch = 0;  // 1-based
  double loss = 0.0;
  double val_recall = 0.0;
  bool best = false;
};

struct TrainResult {
  FactorModel model;  // checkpoint with the best validation recall
  std::vector<EpochRecord> log;
  int best_epoch = 0;
  double best_recall = 0.0;
};

// Full training loop: shuffled batches with per-epoch negative resampling,
// validation Recall@k after every epoch with the mode's scorer (PD ranks
// by elu_prime(match), PDA by the forecast-adjusted score with
// gamma_tilde = gamma), early stopping on `patience` stale epochs.
// `forecast` is required in PDA mode.
TrainResult train(const EvalSplit& split, const PopularityTable& pop,
                  const PopularityForecast* forecast, const TrainConfig& cfg);

std::string train_log_jsonl(const std::vector<EpochRecord>& log);

}  // namespace poprec
