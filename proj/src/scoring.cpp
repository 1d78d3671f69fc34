#include "poprec/scoring.hpp"

#include <fstream>
#include <stdexcept>

#include "poprec/rng.hpp"

namespace poprec {

FactorModel init_model(std::size_t n_users, std::size_t n_items, std::size_t d,
                       double init_scale, std::uint64_t seed,
                       double gamma, double gamma_tilde) {
  if (d < 1) throw std::invalid_argument("embedding dimension must be >= 1");
  if (gamma < 0.0 || gamma_tilde < 0.0) throw std::invalid_argument("exponents must be >= 0");
  FactorModel m;
  m.n_users = n_users;
  m.n_items = n_items;
  m.d = d;
  m.gamma = gamma;
  m.gamma_tilde = gamma_tilde;
  m.seed = seed;
  m.user_emb.resize(n_users * d);
  m.item_emb.resize(n_items * d);
  Rng rng(seed);
  for (auto& v : m.user_emb) v = init_scale * rng.gaussian();
  for (auto& v : m.item_emb) v = init_scale * rng.gaussian();
  return m;
}

double match_score(const FactorModel& model, std::size_t u, std::size_t i) {
  if (u >= model.n_users || i >= model.n_items) throw std::out_of_range("user/item index out of range");
  const double* ue = model.user_row(u);
  const double* ie = model.item_row(i);
  double dot = 0.0;
  for (std::size_t k = 0; k < model.d; ++k) dot += ue[k] * ie[k];
  return dot;
}

double conditional_score(const FactorModel& model, std::size_t u, std::size_t i,
                         double m, double gamma) {
  if (m <= 0.0) throw std::domain_error("popularity value must be positive");
  return elu_prime(match_score(model, u, i)) * pop_smooth(m, gamma);
}

double pd_score(const FactorModel& model, std::size_t u, std::size_t i) {
  return elu_prime(match_score(model, u, i));
}

double pda_score(const FactorModel& model, std::size_t u, std::size_t i,
                 const PopularityForecast& forecast, double gamma_tilde) {
  if (i >= forecast.m_tilde.size()) throw std::out_of_range("no forecast entry for item");
  const double mt = forecast.m_tilde[i];
  if (mt <= 0.0) throw std::domain_error("forecast popularity must be positive");
  return elu_prime(match_score(model, u, i)) * pop_smooth(mt, gamma_tilde);
}

namespace {
constexpr char kCheckpointMagic[4] = {'P', 'F', 'A', 'C'};
constexpr std::uint32_t kCheckpointVersion = 1;
}  // namespace

void save_checkpoint(const FactorModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(kCheckpointMagic, 4);
  const std::uint32_t version = kCheckpointVersion;
  const auto d32 = static_cast<std::uint32_t>(model.d);
  const std::uint64_t nu = model.n_users, ni = model.n_items;
  out.write(reinterpret_cast<const char*>(&version), 4);
  out.write(reinterpret_cast<const char*>(&d32), 4);
  out.write(reinterpret_cast<const char*>(&nu), 8);
  out.write(reinterpret_cast<const char*>(&ni), 8);
  out.write(reinterpret_cast<const char*>(&model.gamma), 8);
  out.write(reinterpret_cast<const char*>(&model.gamma_tilde), 8);
  out.write(reinterpret_cast<const char*>(&model.seed), 8);
  out.write(reinterpret_cast<const char*>(model.user_emb.data()),
            static_cast<std::streamsize>(model.user_emb.size() * sizeof(double)));
  out.write(reinterpret_cast<const char*>(model.item_emb.data()),
            static_cast<std::streamsize>(model.item_emb.size() * sizeof(double)));
  if (!out) throw std::runtime_error("write failed: " + path);
}

FactorModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || !std::equal(magic, magic + 4, kCheckpointMagic))
    throw std::runtime_error(path + " is not a model checkpoint");
  std::uint32_t version = 0, d32 = 0;
  std::uint64_t nu = 0, ni = 0;
  in.read(reinterpret_cast<char*>(&version), 4);
  if (version != kCheckpointVersion) throw std::runtime_error("unsupported checkpoint version");
  in.read(reinterpret_cast<char*>(&d32), 4);
  in.read(reinterpret_cast<char*>(&nu), 8);
  in.read(reinterpret_cast<char*>(&ni), 8);

  FactorModel m;
  m.d = d32;
  m.n_users = nu;
  m.n_items = ni;
  in.read(reinterpret_cast<char*>(&m.gamma), 8);
  in.read(reinterpret_cast<char*>(&m.gamma_tilde), 8);
  in.read(reinterpret_cast<char*>(&m.seed), 8);
  m.user_emb.resize(m.n_users * m.d);
  m.item_emb.resize(m.n_items * m.d);
  in.read(reinterpret_cast<char*>(m.user_emb.data()),
          static_cast<std::streamsize>(m.user_emb.size() * sizeof(double)));
  in.read(reinterpret_cast<char*>(m.item_emb.data()),
          static_cast<std::streamsize>(m.item_emb.size() * sizeof(double)));
  if (!in) throw std::runtime_error("truncated checkpoint: " + path);
  return m;
}

}  // namespace poprec
