#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "poprec/popularity.hpp"

namespace poprec {

// Matrix-factorization model: plain inner product of user and item
// embeddings (no bias terms), plus the popularity exponents used for
// training (gamma) and inference adjustment (gamma_tilde).
struct FactorModel {
  std::size_t n_users = 0;
  std::size_t n_items = 0;
  std::size_t d = 0;
  double gamma = 0.0;
  double gamma_tilde = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> user_emb;  // n_users x d, row-major
  std::vector<double> item_emb;  // n_items x d, row-major

  double* user_row(std::size_t u) { return user_emb.data() + u * d; }
  double* item_row(std::size_t i) { return item_emb.data() + i * d; }
  const double* user_row(std::size_t u) const { return user_emb.data() + u * d; }
  const double* item_row(std::size_t i) const { return item_emb.data() + i * d; }
};

FactorModel init_model(std::size_t n_users, std::size_t n_items, std::size_t d,
                       double init_scale, std::uint64_t seed,
                       double gamma = 0.0, double gamma_tilde = 0.0);

// Shifted ELU link: e^x for x <= 0, x+1 otherwise. Strictly positive,
// strictly increasing, value- and slope-continuous at 0.
inline double elu_prime(double x) { return x <= 0.0 ? std::exp(x) : x + 1.0; }

// d/dx of elu_prime
inline double elu_prime_grad(double x) { return x <= 0.0 ? std::exp(x) : 1.0; }

// m^gamma for clamped-positive popularity values
inline double pop_smooth(double m, double gamma) { return std::exp(gamma * std::log(m)); }

double match_score(const FactorModel& model, std::size_t u, std::size_t i);

// Unnormalized interaction propensity given the item's stage popularity:
// elu_prime(match) * m^gamma. Requires m > 0.
double conditional_score(const FactorModel& model, std::size_t u, std::size_t i,
                         double m, double gamma);

// Popularity-free ranking score, elu_prime(match).
double pd_score(const FactorModel& model, std::size_t u, std::size_t i);

// Ranking score adjusted with forecast popularity:
// elu_prime(match) * (m~_i)^gamma_tilde.
double pda_score(const FactorModel& model, std::size_t u, std::size_t i,
                 const PopularityForecast& forecast, double gamma_tilde);

// Versioned binary checkpoint; round-trips bit-exactly.
// Layout (little-endian):
//   char[4]  magic "PFAC"
//   u32      version (1)
//   u32      d
//   u64      n_users, n_items
//   f64      gamma, gamma_tilde
//   u64      seed
//   f64[n_users*d]  user embeddings, row-major
//   f64[n_items*d]  item embeddings, row-major
void save_checkpoint(const FactorModel& model, const std::string& path);
FactorModel load_checkpoint(const std::string& path);

}  // namespace poprec
