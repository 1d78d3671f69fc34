#include "poprec/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "json.hpp"
#include "poprec/rng.hpp"

namespace poprec {

namespace {

double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

// cumulative-sum categorical sampler; deterministic given the Rng stream
class Categorical {
 public:
  explicit Categorical(const std::vector<double>& weights) : cum_(weights.size()) {
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      acc += weights[i];
      cum_[i] = acc;
    }
    if (!(acc > 0.0)) throw std::invalid_argument("categorical weights sum to zero");
    total_ = acc;
  }

  std::size_t sample(Rng& rng) const {
    const double u = rng.uniform01() * total_;
    const auto idx = static_cast<std::size_t>(
        std::upper_bound(cum_.begin(), cum_.end(), u) - cum_.begin());
    return std::min(idx, cum_.size() - 1);  // guard the u == total_ rounding edge
  }

 private:
  std::vector<double> cum_;
  double total_ = 0.0;
};

}  // namespace

SimWorld make_world(const SimWorldConfig& cfg) {
  if (cfg.n_users == 0 || cfg.n_items == 0 || cfg.d_true == 0)
    throw std::invalid_argument("world dimensions must be positive");
  if (cfg.exposure_bias_strength < 0.0 || cfg.conformity_strength < 0.0)
    throw std::invalid_argument("edge strengths must be >= 0");
  if (cfg.stages < 1 || cfg.events_per_stage < 1)
    throw std::invalid_argument("stages and events_per_stage must be positive");

  SimWorld w;
  w.config = cfg;
  Rng rng(cfg.seed);

  std::vector<double> ufac(cfg.n_users * cfg.d_true), ifac(cfg.n_items * cfg.d_true);
  for (auto& v : ufac) v = cfg.interest_scale * rng.gaussian();
  for (auto& v : ifac) v = cfg.interest_scale * rng.gaussian();

  w.true_interest.resize(cfg.n_users * cfg.n_items);
  for (std::size_t u = 0; u < cfg.n_users; ++u) {
    for (std::size_t i = 0; i < cfg.n_items; ++i) {
      double dot = 0.0;
      for (std::size_t k = 0; k < cfg.d_true; ++k)
        dot += ufac[u * cfg.d_true + k] * ifac[i * cfg.d_true + k];
      w.true_interest[u * cfg.n_items + i] = softplus(dot);
    }
  }

  std::vector<double> trend(cfg.n_items);
  for (auto& v : trend) v = cfg.drift_rate * rng.gaussian();
  w.trajectory.resize(static_cast<std::size_t>(cfg.stages) * cfg.n_items);
  for (int t = 0; t < cfg.stages; ++t)
    for (std::size_t i = 0; i < cfg.n_items; ++i)
      w.trajectory[static_cast<std::size_t>(t) * cfg.n_items + i] =
          std::exp(trend[i] * static_cast<double>(t));
  return w;
}

SimDataset generate(const SimWorld& world) {
  const auto& cfg = world.config;
  const std::size_t n_items = cfg.n_items;
  if (world.true_interest.size() != cfg.n_users * n_items)
    throw std::invalid_argument("world interest matrix has wrong shape");
  const double max_interest = *std::max_element(world.true_interest.begin(), world.true_interest.end());
  if (!(max_interest > 0.0)) throw std::invalid_argument("degenerate world: all-zero interest");

  Rng rng(cfg.seed + 0x9e3779b97f4a7c15ULL);  // independent stream from make_world
  std::vector<RawInteraction> raw;
  raw.reserve(static_cast<std::size_t>(cfg.stages) * static_cast<std::size_t>(cfg.events_per_stage));

  std::vector<double> prev_share(n_items, 1.0 / static_cast<double>(n_items));
  std::vector<std::int64_t> counts(n_items);

  for (int t = 0; t < cfg.stages; ++t) {
    // current popularity: previous realized share blended with the trajectory
    std::vector<double> z(n_items);
    double zsum = 0.0;
    for (std::size_t i = 0; i < n_items; ++i) {
      z[i] = prev_share[i] * world.trajectory_at(static_cast<std::size_t>(t), i);
      zsum += z[i];
    }
    for (auto& v : z) v /= zsum;

    std::vector<double> exposure(n_items), conform(n_items);
    double max_conform = 0.0;
    for (std::size_t i = 0; i < n_items; ++i) {
      exposure[i] = std::pow(z[i], cfg.exposure_bias_strength);
      conform[i] = std::pow(z[i], cfg.conformity_strength);
      max_conform = std::max(max_conform, conform[i]);
    }
    Categorical expose(exposure);

    std::fill(counts.begin(), counts.end(), 0);
    const std::int64_t base_ts = static_cast<std::int64_t>(t) * cfg.events_per_stage;
    std::int64_t accepted = 0;
    while (accepted < cfg.events_per_stage) {
      const std::size_t i = expose.sample(rng);
      const std::size_t u = rng.uniform_index(cfg.n_users);
      const double p = world.interest(u, i) * conform[i] / (max_interest * max_conform);
      if (rng.uniform01() < p) {
        raw.push_back({"u" + std::to_string(u), "i" + std::to_string(i), base_ts + accepted});
        ++counts[i];
        ++accepted;
      }
    }

    const double denom = static_cast<double>(cfg.events_per_stage) +
                         cfg.feedback_smoothing * static_cast<double>(n_items);
    for (std::size_t i = 0; i < n_items; ++i)
      prev_share[i] = (static_cast<double>(counts[i]) + cfg.feedback_smoothing) / denom;
  }

  SimDataset out;
  out.world = world;
  out.data = make_dataset(std::move(raw));
  return out;
}

std::vector<std::int32_t> oracle_ranking(const SimWorld& world, std::size_t u, int k) {
  const auto n_items = static_cast<std::int32_t>(world.config.n_items);
  std::vector<std::int32_t> order(n_items);
  std::iota(order.begin(), order.end(), 0);
  const auto take = std::min<std::size_t>(static_cast<std::size_t>(k), order.size());
  std::partial_sort(order.begin(), order.begin() + take, order.end(),
                    [&](std::int32_t a, std::int32_t b) {
                      const double ia = world.interest(u, a), ib = world.interest(u, b);
                      if (ia != ib) return ia > ib;
                      return a < b;
                    });
  order.resize(take);
  return order;
}

void save_world_json(const SimWorld& world, const std::string& path) {
  nlohmann::json j;
  const auto& c = world.config;
  j["config"] = {{"n_users", c.n_users},
                 {"n_items", c.n_items},
                 {"d_true", c.d_true},
                 {"interest_scale", c.interest_scale},
                 {"exposure_bias_strength", c.exposure_bias_strength},
                 {"conformity_strength", c.conformity_strength},
                 {"stages", c.stages},
                 {"events_per_stage", c.events_per_stage},
                 {"drift_rate", c.drift_rate},
                 {"feedback_smoothing", c.feedback_smoothing},
                 {"seed", c.seed}};
  j["true_interest"] = world.true_interest;
  j["trajectory"] = world.trajectory;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump() << "\n";
}

SimWorld load_world_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  nlohmann::json j;
  in >> j;
  SimWorld w;
  const auto& c = j.at("config");
  w.config.n_users = c.at("n_users").get<std::size_t>();
  w.config.n_items = c.at("n_items").get<std::size_t>();
  w.config.d_true = c.at("d_true").get<std::size_t>();
  w.config.interest_scale = c.at("interest_scale").get<double>();
  w.config.exposure_bias_strength = c.at("exposure_bias_strength").get<double>();
  w.config.conformity_strength = c.at("conformity_strength").get<double>();
  w.config.stages = c.at("stages").get<int>();
  w.config.events_per_stage = c.at("events_per_stage").get<std::int64_t>();
  w.config.drift_rate = c.at("drift_rate").get<double>();
  w.config.feedback_smoothing = c.at("feedback_smoothing").get<double>();
  w.config.seed = c.at("seed").get<std::uint64_t>();
  w.true_interest = j.at("true_interest").get<std::vector<double>>();
  w.trajectory = j.at("trajectory").get<std::vector<double>>();
  return w;
}

void save_interactions_tsv(const Dataset& d, const std::string& path, char delimiter) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& e : d.interactions)
    out << d.user_ids[e.user] << delimiter << d.item_ids[e.item] << delimiter << e.timestamp
        << "\n";
}

}  // namespace poprec
