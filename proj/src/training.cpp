#include "poprec/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "poprec/evaluation.hpp"

namespace poprec {

AdamState AdamState::like(const FactorModel& model) {
  AdamState s;
  s.m_user.assign(model.user_emb.size(), 0.0);
  s.v_user.assign(model.user_emb.size(), 0.0);
  s.m_item.assign(model.item_emb.size(), 0.0);
  s.v_item.assign(model.item_emb.size(), 0.0);
  return s;
}

NegativeSampler::NegativeSampler(const EvalSplit& split)
    : n_items_(split.n_items()), seen_(train_items_by_user(split)) {}

std::int32_t NegativeSampler::sample(std::int32_t user, Rng& rng) const {
  const auto& seen = seen_[user];
  if (seen.size() >= n_items_)
    throw std::runtime_error("user interacted with every item; no negative exists");
  for (;;) {
    const auto j = static_cast<std::int32_t>(rng.uniform_index(n_items_));
    if (!std::binary_search(seen.begin(), seen.end(), j)) return j;
  }
}

std::int32_t sample_negatives(const EvalSplit& split, std::int32_t user, Rng& rng) {
  return NegativeSampler(split).sample(user, rng);
}

namespace {

inline double softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

inline double sigmoid(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

// Accumulates sparse row gradients without per-batch allocation churn.
class RowAccumulator {
 public:
  RowAccumulator(std::size_t n_rows, std::size_t d) : d_(d), slot_(n_rows, -1) {}

  double* row(std::int32_t r) {
    if (slot_[r] < 0) {
      slot_[r] = static_cast<std::int32_t>(rows_.size());
      rows_.push_back(r);
      grads_.resize(grads_.size() + d_, 0.0);
    }
    return grads_.data() + static_cast<std::size_t>(slot_[r]) * d_;
  }

  void drain(std::vector<std::int32_t>& rows, std::vector<double>& grads) {
    rows = std::move(rows_);
    grads = std::move(grads_);
    for (auto r : rows) slot_[r] = -1;
    rows_.clear();
    grads_.clear();
  }

 private:
  std::size_t d_;
  std::vector<std::int32_t> slot_;
  std::vector<std::int32_t> rows_;
  std::vector<double> grads_;
};

double batch_pass(const FactorModel& model, const std::vector<TrainExample>& batch,
                  const PopularityTable& pop, const TrainConfig& cfg, BatchGradients* out) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  const std::size_t d = model.d;
  const double inv_b = 1.0 / static_cast<double>(batch.size());

  RowAccumulator user_acc(model.n_users, d), item_acc(model.n_items, d);
  double data_loss = 0.0, reg = 0.0;

  for (const auto& ex : batch) {
    const double* ue = model.user_row(ex.user);
    const double* pe = model.item_row(ex.pos_item);
    const double* ne = model.item_row(ex.neg_item);

    double a = 0.0, b = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      a += ue[k] * pe[k];
      b += ue[k] * ne[k];
    }
    const double ci = pop_smooth(pop.train_value(ex.stage, ex.pos_item), cfg.gamma);
    const double cj = pop_smooth(pop.train_value(ex.stage, ex.neg_item), cfg.gamma);
    const double x = elu_prime(a) * ci - elu_prime(b) * cj;
    data_loss += softplus(-x);

    if (cfg.l2_lambda != 0.0) {
      double sq = 0.0;
      for (std::size_t k = 0; k < d; ++k) sq += ue[k] * ue[k] + pe[k] * pe[k] + ne[k] * ne[k];
      reg += sq;
    }

    if (out) {
      const double g = -sigmoid(-x);  // dL/dx for this pair
      const double ga = g * elu_prime_grad(a) * ci;
      const double gb = -g * elu_prime_grad(b) * cj;
      double* gu = user_acc.row(ex.user);
      double* gp = item_acc.row(ex.pos_item);
      double* gn = item_acc.row(ex.neg_item);
      const double l2 = 2.0 * cfg.l2_lambda;
      for (std::size_t k = 0; k < d; ++k) {
        gu[k] += inv_b * (ga * pe[k] + gb * ne[k] + l2 * ue[k]);
        gp[k] += inv_b * (ga * ue[k] + l2 * pe[k]);
        gn[k] += inv_b * (gb * ue[k] + l2 * ne[k]);
      }
    }
  }
  if (out) {
    user_acc.drain(out->user_rows, out->user_grads);
    item_acc.drain(out->item_rows, out->item_grads);
  }
  return inv_b * (data_loss + cfg.l2_lambda * reg);
}

void adam_apply(std::vector<double>& param, std::vector<double>& m, std::vector<double>& v,
                const std::vector<std::int32_t>& rows, const std::vector<double>& grads,
                std::size_t d, const AdamState& s, double lr) {
  const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step_count));
  const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step_count));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const std::size_t off = static_cast<std::size_t>(rows[r]) * d;
    const double* g = grads.data() + r * d;
    for (std::size_t k = 0; k < d; ++k) {
      double& mk = m[off + k];
      double& vk = v[off + k];
      mk = s.beta1 * mk + (1.0 - s.beta1) * g[k];
      vk = s.beta2 * vk + (1.0 - s.beta2) * g[k] * g[k];
      const double mhat = mk / bc1;
      const double vhat = vk / bc2;
      param[off + k] -= lr * mhat / (std::sqrt(vhat) + s.eps);
    }
  }
}

}  // namespace

double pairwise_loss(const FactorModel& model, const std::vector<TrainExample>& batch,
                     const PopularityTable& pop, const TrainConfig& cfg) {
  return batch_pass(model, batch, pop, cfg, nullptr);
}

double loss_and_gradients(const FactorModel& model, const std::vector<TrainExample>& batch,
                          const PopularityTable& pop, const TrainConfig& cfg,
                          BatchGradients& out) {
  return batch_pass(model, batch, pop, cfg, &out);
}

double step(FactorModel& model, AdamState& adam, const std::vector<TrainExample>& batch,
            const PopularityTable& pop, const TrainConfig& cfg) {
  BatchGradients g;
  const double loss = batch_pass(model, batch, pop, cfg, &g);
  if (!std::isfinite(loss)) throw std::runtime_error("non-finite loss in training step");
  for (double v : g.user_grads)
    if (!std::isfinite(v)) throw std::runtime_error("non-finite user gradient in training step");
  for (double v : g.item_grads)
    if (!std::isfinite(v)) throw std::runtime_error("non-finite item gradient in training step");

  ++adam.step_count;
  adam_apply(model.user_emb, adam.m_user, adam.v_user, g.user_rows, g.user_grads, model.d,
             adam, cfg.learning_rate);
  adam_apply(model.item_emb, adam.m_item, adam.v_item, g.item_rows, g.item_grads, model.d,
             adam, cfg.learning_rate);
  return loss;
}

namespace {

double validation_recall(const FactorModel& model, const EvalSplit& split,
                         const PopularityForecast* forecast, const TrainConfig& cfg) {
  ScoreFn scorer;
  if (cfg.mode == TrainMode::PDA) {
    scorer = [&](std::int32_t u, std::int32_t i) {
      return pda_score(model, u, i, *forecast, cfg.gamma);
    };
  } else {
    scorer = [&](std::int32_t u, std::int32_t i) { return pd_score(model, u, i); };
  }
  const RankedList rl = recommend_topk(scorer, split, split.validation, cfg.validation_k);
  return compute_metrics(rl, split.validation, cfg.validation_k).recall;
}

}  // namespace

TrainResult train(const EvalSplit& split, const PopularityTable& pop,
                  const PopularityForecast* forecast, const TrainConfig& cfg) {
  if (cfg.mode == TrainMode::PDA && forecast == nullptr)
    throw std::invalid_argument("PDA mode needs a popularity forecast");
  if (cfg.patience < 1) throw std::invalid_argument("patience must be >= 1");
  if (split.validation.users.empty())
    throw std::runtime_error("validation set is empty; early stopping is not computable");
  if (cfg.popularity_scope == PopularityScope::Global && pop.n_stages() != 1)
    throw std::invalid_argument("global popularity scope expects a single-row table");

  std::vector<TrainExample> positives;
  for (std::size_t t = 0; t < split.train.n_stages(); ++t)
    for (const auto& e : split.train.stages[t])
      positives.push_back({e.user, e.item, static_cast<std::int32_t>(t), -1});
  if (positives.empty()) throw std::runtime_error("no training interactions");

  FactorModel model = init_model(split.n_users(), split.n_items(), cfg.embedding_dim,
                                 cfg.init_scale, cfg.seed, cfg.gamma,
                                 cfg.mode == TrainMode::PDA ? cfg.gamma : 0.0);
  AdamState adam = AdamState::like(model);
  NegativeSampler sampler(split);
  Rng rng(cfg.seed);

  TrainResult result;
  result.model = model;
  std::vector<std::size_t> order(positives.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<TrainExample> batch;
  int stale = 0;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    rng.shuffle(order);
    for (auto idx : order) positives[idx].neg_item = sampler.sample(positives[idx].user, rng);

    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      batch.clear();
      for (std::size_t j = start; j < stop; ++j) batch.push_back(positives[order[j]]);
      loss_sum += step(model, adam, batch, pop, cfg) * static_cast<double>(batch.size());
      seen += batch.size();
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = loss_sum / static_cast<double>(seen);
    rec.val_recall = validation_recall(model, split, forecast, cfg);
    rec.best = result.log.empty() || rec.val_recall > result.best_recall;
    if (rec.best) {
      result.best_recall = rec.val_recall;
      result.best_epoch = epoch;
      result.model = model;
      stale = 0;
    } else {
      ++stale;
    }
    result.log.push_back(rec);
    if (stale >= cfg.patience) break;
  }
  return result;
}

std::string train_log_jsonl(const std::vector<EpochRecord>& log) {
  std::ostringstream out;
  out.precision(17);
  for (const auto& r : log) {
    out << "{\"epoch\":" << r.epoch << ",\"loss\":" << r.loss
        << ",\"val_recall\":" << r.val_recall << ",\"best\":" << (r.best ? "true" : "false")
        << "}\n";
  }
  return out.str();
}

}  // namespace poprec
