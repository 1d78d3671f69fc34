#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "poprec/data.hpp"

namespace poprec {

struct SimWorldConfig {
  std::size_t n_users = 1000;
  std::size_t n_items = 500;
  std::size_t d_true = 8;        // rank of the latent interest factors
  double interest_scale = 0.5;   // std of the latent factor entries
  double exposure_bias_strength = 1.0;  // exponent on popularity in exposure
  double conformity_strength = 1.0;     // exponent on popularity in consumption
  int stages = 10;
  std::int64_t events_per_stage = 10000;
  double drift_rate = 0.0;       // std of per-item log-popularity growth per stage
  double feedback_smoothing = 1.0;  // Laplace smoothing of realized counts
  std::uint64_t seed = 0;
};

// Ground truth of the synthetic generator: a static interest matrix, the
// exogenous per-stage popularity trajectory that injects drift, and the
// exponents wiring popularity into exposure and consumption. An exponent
// of 0 disables the corresponding edge.
struct SimWorld {
  SimWorldConfig config;
  std::vector<double> true_interest;  // n_users x n_items, row-major, positive
  std::vector<double> trajectory;     // stages x n_items: exogenous multiplier per stage

  double interest(std::size_t u, std::size_t i) const {
    return true_interest[u * config.n_items + i];
  }
  double trajectory_at(std::size_t t, std::size_t i) const {
    return trajectory[t * config.n_items + i];
  }
};

struct SimDataset {
  Dataset data;
  SimWorld world;
};

// Materializes interest (softplus of low-rank Gaussian factors) and the
// drift trajectory (per-item log-linear trends of std drift_rate).
SimWorld make_world(const SimWorldConfig& cfg);

// Samples `events_per_stage` accepted interactions per stage:
//   exposure:    item i drawn with prob ~ z_t(i)^exposure_bias_strength
//   consumption: uniform user u accepts with prob ~ interest(u,i) * z_t(i)^conformity_strength
// where z_t blends the previous stage's realized popularity (Laplace
// smoothed) with the exogenous trajectory. Accepted counts feed the next
// stage's z. Timestamps are dense per stage, so split_stages with the
// same stage count reproduces the generation stages exactly.
SimDataset generate(const SimWorld& world);

// Top-k items of a user by true interest, ties by ascending index.
std::vector<std::int32_t> oracle_ranking(const SimWorld& world, std::size_t u, int k);

// Sidecar with the world config and true-interest matrix, JSON.
void save_world_json(const SimWorld& world, const std::string& path);
SimWorld load_world_json(const std::string& path);

// Writes the interactions in the standard text format (user, item,
// timestamp), using external ids u<k>/i<k>.
void save_interactions_tsv(const Dataset& d, const std::string& path, char delimiter = '\t');

}  // namespace poprec
