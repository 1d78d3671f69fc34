#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "poprec/baselines.hpp"
#include "poprec/data.hpp"
#include "poprec/evaluation.hpp"
#include "poprec/popularity.hpp"
#include "poprec/simulation.hpp"
#include "poprec/training.hpp"

namespace poprec {

enum class Method { MostPop, MostRecent, Bprmf, BprmfA, Pd, PdG, Pda };

Method parse_method(const std::string& name);
std::string method_name(Method m);
bool method_trains(Method m);

// Inclusive arithmetic grid; hi is included when it lands within 1e-9 of a
// step multiple.
std::vector<double> make_grid(double lo, double hi, double step);

struct ExperimentConfig {
  // data preparation
  std::string dataset_path;
  std::string prepared_path;  // optional pre-built split cache
  char delimiter = '\t';
  int kcore = 10;
  int stages = 10;
  double valid_frac = 0.3;

  Method method = Method::Pd;
  TrainConfig train;
  std::vector<double> gamma_grid = make_grid(0.02, 0.25, 0.02);
  ForecastMethod forecast_method = ForecastMethod::LinearTrend;
  double alpha = 1.0;
  int substages = 1;
  std::vector<double> gamma_tilde_grid = make_grid(0.02, 1.0, 0.02);
  bool tune_gamma_tilde = false;  // PDA: search gamma_tilde at inference (validation-selected)

  std::vector<int> k_list = {20, 50};
  int rr_groups = 10;
  std::string output_dir;
  std::uint64_t seed = 0;
};

nlohmann::json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const nlohmann::json& j);

struct SelectionOutcome {
  double gamma = 0.0;
  double val_recall = 0.0;
  int best_epoch = 0;
};

struct GridSearchResult {
  TrainResult best;
  double selected_gamma = 0.0;
  std::vector<SelectionOutcome> evaluated;
};

// Trains once per grid point (same seed throughout) and keeps the run
// with the highest validation recall. Only the validation holdout is
// consulted.
GridSearchResult select_gamma(const EvalSplit& split, const PopularityTable& pop,
                              const PopularityForecast* forecast, TrainConfig base,
                              const std::vector<double>& grid);

struct GammaTildeSearch {
  double selected = 0.0;
  double val_recall = 0.0;
  std::vector<std::pair<double, double>> evaluated;  // (gamma_tilde, val recall)
};

// Walks the gamma_tilde grid scoring the validation holdout with the
// forecast-adjusted score; stops early once the recall (rounded to 6
// decimals) has not changed for 3 consecutive steps.
GammaTildeSearch select_gamma_tilde(const FactorModel& model, const PopularityForecast& forecast,
                                    const EvalSplit& split, const std::vector<double>& grid,
                                    int k);

struct ExperimentResult {
  Method method = Method::Pd;
  double gamma = 0.0;
  double gamma_tilde = 0.0;
  double val_recall = 0.0;
  std::vector<MetricsAtK> metrics;      // per K in k_list, on the test holdout
  std::vector<RecommendationRates> rr;  // per K
  GroupPartition groups;
  std::optional<TrainResult> training;
  std::vector<SelectionOutcome> gamma_search;
  std::vector<std::pair<double, double>> gamma_tilde_search;
  nlohmann::json resolved_config;
};

// Prepared inputs shared by every method.
struct PreparedData {
  EvalSplit split;
  PopularityTable local;
  PopularityTable global;
};

PreparedData prepare_data(const ExperimentConfig& cfg);

// prepare -> popularity -> (train | baseline) -> evaluate; selection uses
// the validation holdout, final metrics the test holdout. Writes nothing.
ExperimentResult run_on_data(const PreparedData& data, const ExperimentConfig& cfg);

// Full pipeline; when cfg.output_dir is set, emits metrics.json, rr.csv,
// drift.csv, train.log.jsonl, config.json, split_summary.json and (for
// trained methods) model.ckpt into it.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

nlohmann::json result_to_json(const ExperimentResult& r);
void write_experiment_artifacts(const ExperimentResult& r, const PreparedData& data,
                                const ExperimentConfig& cfg);

// Drift CSV: rows "t,dp_next,dp_first" with 1-based t over a staged
// dataset: DP(t, t+1) and DP(1, t).
std::string drift_csv(const PopularityTable& local, const std::string& provenance);

// RR CSV: rows "k,group,rate".
std::string rr_csv(const ExperimentResult& r, const std::string& provenance);

// Methods x metrics table. The last report is treated as the candidate
// method; each other row carries an RI column, the candidate's relative
// improvement over that row averaged across the four metrics.
std::string compare_reports_csv(const std::vector<nlohmann::json>& reports);
std::string compare_reports_markdown(const std::vector<nlohmann::json>& reports);

// short fingerprint embedded in CSV artifacts
std::string config_fingerprint(const nlohmann::json& j);

}  // namespace poprec
