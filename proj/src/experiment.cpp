#include "poprec/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>
#include <stdexcept>

namespace poprec {

Method parse_method(const std::string& name) {
  if (name == "mostpop") return Method::MostPop;
  if (name == "mostrecent") return Method::MostRecent;
  if (name == "bprmf") return Method::Bprmf;
  if (name == "bprmf-a") return Method::BprmfA;
  if (name == "pd") return Method::Pd;
  if (name == "pd-g") return Method::PdG;
  if (name == "pda") return Method::Pda;
  throw std::invalid_argument("unknown method '" + name + "'");
}

std::string method_name(Method m) {
  switch (m) {
    case Method::MostPop: return "mostpop";
    case Method::MostRecent: return "mostrecent";
    case Method::Bprmf: return "bprmf";
    case Method::BprmfA: return "bprmf-a";
    case Method::Pd: return "pd";
    case Method::PdG: return "pd-g";
    case Method::Pda: return "pda";
  }
  return "?";
}

bool method_trains(Method m) {
  return m == Method::Bprmf || m == Method::BprmfA || m == Method::Pd || m == Method::PdG ||
         m == Method::Pda;
}

std::vector<double> make_grid(double lo, double hi, double step) {
  if (step <= 0.0) throw std::invalid_argument("grid step must be positive");
  std::vector<double> grid;
  for (int k = 0;; ++k) {
    const double v = lo + step * k;
    if (v > hi + 1e-9) break;
    grid.push_back(v);
  }
  if (grid.empty()) throw std::invalid_argument("empty grid");
  return grid;
}

namespace {

std::vector<double> grid_from_json(const nlohmann::json& j) {
  if (j.is_array()) return j.get<std::vector<double>>();
  return make_grid(j.at("lo").get<double>(), j.at("hi").get<double>(), j.at("step").get<double>());
}

std::string forecast_method_name(ForecastMethod m) {
  return m == ForecastMethod::LastStage ? "last-stage" : "linear-trend";
}

ForecastMethod parse_forecast_method(const std::string& s) {
  if (s == "last-stage") return ForecastMethod::LastStage;
  if (s == "linear-trend") return ForecastMethod::LinearTrend;
  throw std::invalid_argument("unknown forecast method '" + s + "'");
}

}  // namespace

nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["dataset"] = cfg.dataset_path;
  j["prepared"] = cfg.prepared_path;
  j["delimiter"] = std::string(1, cfg.delimiter);
  j["kcore"] = cfg.kcore;
  j["stages"] = cfg.stages;
  j["valid_frac"] = cfg.valid_frac;
  j["method"] = method_name(cfg.method);
  j["train"] = {{"learning_rate", cfg.train.learning_rate},
                {"batch_size", cfg.train.batch_size},
                {"l2_lambda", cfg.train.l2_lambda},
                {"patience", cfg.train.patience},
                {"max_epochs", cfg.train.max_epochs},
                {"embedding_dim", cfg.train.embedding_dim},
                {"init_scale", cfg.train.init_scale},
                {"validation_k", cfg.train.validation_k}};
  j["gamma_grid"] = cfg.gamma_grid;
  j["forecast"] = {{"method", forecast_method_name(cfg.forecast_method)},
                   {"alpha", cfg.alpha},
                   {"substages", cfg.substages}};
  j["gamma_tilde_grid"] = cfg.gamma_tilde_grid;
  j["tune_gamma_tilde"] = cfg.tune_gamma_tilde;
  j["k_list"] = cfg.k_list;
  j["rr_groups"] = cfg.rr_groups;
  j["output_dir"] = cfg.output_dir;
  j["seed"] = cfg.seed;
  return j;
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig cfg;
  if (j.contains("dataset")) cfg.dataset_path = j.at("dataset").get<std::string>();
  if (j.contains("prepared")) cfg.prepared_path = j.at("prepared").get<std::string>();
  if (j.contains("delimiter")) {
    const auto s = j.at("delimiter").get<std::string>();
    if (s.size() != 1) throw std::invalid_argument("delimiter must be a single character");
    cfg.delimiter = s[0];
  }
  if (j.contains("kcore")) cfg.kcore = j.at("kcore").get<int>();
  if (j.contains("stages")) cfg.stages = j.at("stages").get<int>();
  if (j.contains("valid_frac")) cfg.valid_frac = j.at("valid_frac").get<double>();
  if (j.contains("method")) cfg.method = parse_method(j.at("method").get<std::string>());
  if (j.contains("train")) {
    const auto& t = j.at("train");
    if (t.contains("learning_rate")) cfg.train.learning_rate = t.at("learning_rate").get<double>();
    if (t.contains("batch_size")) cfg.train.batch_size = t.at("batch_size").get<std::size_t>();
    if (t.contains("l2_lambda")) cfg.train.l2_lambda = t.at("l2_lambda").get<double>();
    if (t.contains("patience")) cfg.train.patience = t.at("patience").get<int>();
    if (t.contains("max_epochs")) cfg.train.max_epochs = t.at("max_epochs").get<int>();
    if (t.contains("embedding_dim")) cfg.train.embedding_dim = t.at("embedding_dim").get<std::size_t>();
    if (t.contains("init_scale")) cfg.train.init_scale = t.at("init_scale").get<double>();
    if (t.contains("validation_k")) cfg.train.validation_k = t.at("validation_k").get<int>();
  }
  if (j.contains("gamma_grid")) cfg.gamma_grid = grid_from_json(j.at("gamma_grid"));
  if (j.contains("forecast")) {
    const auto& f = j.at("forecast");
    if (f.contains("method")) cfg.forecast_method = parse_forecast_method(f.at("method").get<std::string>());
    if (f.contains("alpha")) cfg.alpha = f.at("alpha").get<double>();
    if (f.contains("substages")) cfg.substages = f.at("substages").get<int>();
  }
  if (j.contains("gamma_tilde_grid")) cfg.gamma_tilde_grid = grid_from_json(j.at("gamma_tilde_grid"));
  if (j.contains("tune_gamma_tilde")) cfg.tune_gamma_tilde = j.at("tune_gamma_tilde").get<bool>();
  if (j.contains("k_list")) cfg.k_list = j.at("k_list").get<std::vector<int>>();
  if (j.contains("rr_groups")) cfg.rr_groups = j.at("rr_groups").get<int>();
  if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  return cfg;
}

GridSearchResult select_gamma(const EvalSplit& split, const PopularityTable& pop,
                              const PopularityForecast* forecast, TrainConfig base,
                              const std::vector<double>& grid) {
  if (grid.empty()) throw std::invalid_argument("gamma grid is empty");
  GridSearchResult out;
  bool have_best = false;
  for (double gamma : grid) {
    base.gamma = gamma;
    TrainResult r = train(split, pop, forecast, base);
    out.evaluated.push_back({gamma, r.best_recall, r.best_epoch});
    if (!have_best || r.best_recall > out.best.best_recall) {
      out.best = std::move(r);
      out.selected_gamma = gamma;
      have_best = true;
    }
  }
  return out;
}

namespace {

double round6(double v) { return std::round(v * 1e6) / 1e6; }

double holdout_recall(const ScoreFn& scorer, const EvalSplit& split, const HoldoutGroup& group,
                      int k) {
  return compute_metrics(recommend_topk(scorer, split, group, k), group, k).recall;
}

}  // namespace

GammaTildeSearch select_gamma_tilde(const FactorModel& model, const PopularityForecast& forecast,
                                    const EvalSplit& split, const std::vector<double>& grid,
                                    int k) {
  if (grid.empty()) throw std::invalid_argument("gamma_tilde grid is empty");
  GammaTildeSearch out;
  int unchanged = 0;
  bool first = true;
  for (double gt : grid) {
    const ScoreFn scorer = [&](std::int32_t u, std::int32_t i) {
      return pda_score(model, u, i, forecast, gt);
    };
    const double recall = holdout_recall(scorer, split, split.validation, k);
    if (!out.evaluated.empty()) {
      if (round6(recall) == round6(out.evaluated.back().second))
        ++unchanged;
      else
        unchanged = 0;
    }
    out.evaluated.emplace_back(gt, recall);
    if (first || recall > out.val_recall) {
      out.val_recall = recall;
      out.selected = gt;
      first = false;
    }
    if (unchanged >= 3) break;  // flat for 3 consecutive steps
  }
  return out;
}

PreparedData prepare_data(const ExperimentConfig& cfg) {
  PreparedData data;
  if (!cfg.prepared_path.empty()) {
    data.split = load_split_file(cfg.prepared_path);
  } else {
    if (cfg.dataset_path.empty()) throw std::invalid_argument("no dataset or prepared split given");
    Dataset d = load_interactions(cfg.dataset_path, cfg.delimiter);
    if (cfg.kcore > 1) d = kcore_filter(d, cfg.kcore);
    data.split = make_eval_split(split_stages(d, cfg.stages), cfg.valid_frac, cfg.seed);
  }
  data.local = local_popularity(data.split.train);
  data.global = global_popularity(data.split.train);
  return data;
}

ExperimentResult run_on_data(const PreparedData& data, const ExperimentConfig& cfg) {
  const EvalSplit& split = data.split;
  ExperimentResult r;
  r.method = cfg.method;
  r.resolved_config = config_to_json(cfg);

  const bool needs_forecast =
      cfg.method == Method::Pda || cfg.method == Method::BprmfA;
  PopularityForecast forecast;
  if (needs_forecast)
    forecast = forecast_popularity(split.train, data.local, cfg.forecast_method, cfg.alpha,
                                   cfg.substages);

  ScoreFn final_scorer;
  switch (cfg.method) {
    case Method::MostPop:
      final_scorer = most_pop_scorer(split);
      break;
    case Method::MostRecent:
      final_scorer = most_recent_scorer(split);
      break;
    case Method::Bprmf:
    case Method::BprmfA: {
      TrainConfig tc = cfg.train;
      tc.seed = cfg.seed;
      tc.gamma = 0.0;
      tc.mode = TrainMode::PD;
      TrainResult tr = train(split, data.local, nullptr, tc);
      r.gamma = 0.0;
      r.val_recall = tr.best_recall;
      if (cfg.method == Method::BprmfA) {
        GammaTildeSearch gs = select_gamma_tilde(tr.model, forecast, split, cfg.gamma_tilde_grid,
                                                 cfg.train.validation_k);
        r.gamma_tilde = gs.selected;
        r.val_recall = gs.val_recall;
        r.gamma_tilde_search = gs.evaluated;
        tr.model.gamma_tilde = gs.selected;
        final_scorer = bprmf_a_scorer(tr.model, forecast, gs.selected);
      }
      r.training = std::move(tr);
      if (cfg.method == Method::Bprmf) {
        const FactorModel& m = r.training->model;
        final_scorer = [&m](std::int32_t u, std::int32_t i) { return pd_score(m, u, i); };
      }
      break;
    }
    case Method::Pd:
    case Method::PdG:
    case Method::Pda: {
      TrainConfig tc = cfg.train;
      tc.seed = cfg.seed;
      tc.mode = cfg.method == Method::Pda ? TrainMode::PDA : TrainMode::PD;
      tc.popularity_scope =
          cfg.method == Method::PdG ? PopularityScope::Global : PopularityScope::Local;
      const PopularityTable& pop =
          cfg.method == Method::PdG ? data.global : data.local;
      GridSearchResult gr = select_gamma(split, pop, needs_forecast ? &forecast : nullptr, tc,
                                         cfg.gamma_grid);
      r.gamma = gr.selected_gamma;
      r.val_recall = gr.best.best_recall;
      r.gamma_search = std::move(gr.evaluated);
      r.training = std::move(gr.best);
      FactorModel& m = r.training->model;
      if (cfg.method == Method::Pda) {
        r.gamma_tilde = r.gamma;  // Algorithm default: tied exponents
        if (cfg.tune_gamma_tilde) {
          GammaTildeSearch gs = select_gamma_tilde(m, forecast, split, cfg.gamma_tilde_grid,
                                                   cfg.train.validation_k);
          r.gamma_tilde = gs.selected;
          r.val_recall = gs.val_recall;
          r.gamma_tilde_search = gs.evaluated;
        }
        m.gamma_tilde = r.gamma_tilde;
        auto fc = std::make_shared<PopularityForecast>(forecast);
        const double gt = r.gamma_tilde;
        final_scorer = [&m, fc, gt](std::int32_t u, std::int32_t i) {
          return pda_score(m, u, i, *fc, gt);
        };
      } else {
        final_scorer = [&m](std::int32_t u, std::int32_t i) { return pd_score(m, u, i); };
      }
      break;
    }
  }

  // test-set evaluation at every requested K
  const int k_max = *std::max_element(cfg.k_list.begin(), cfg.k_list.end());
  const RankedList full = recommend_topk(final_scorer, split, split.test, k_max);
  r.groups = partition_groups(data.global, cfg.rr_groups);
  for (int k : cfg.k_list) {
    r.metrics.push_back(compute_metrics(full, split.test, k));
    RankedList prefix;
    prefix.k = k;
    prefix.users = full.users;
    for (auto& u : prefix.users) {
      if (u.items.size() > static_cast<std::size_t>(k)) {
        u.items.resize(k);
        u.scores.resize(k);
      }
    }
    r.rr.push_back(recommendation_rate(prefix, r.groups));
  }
  return r;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  PreparedData data = prepare_data(cfg);
  ExperimentResult r = run_on_data(data, cfg);
  if (!cfg.output_dir.empty()) write_experiment_artifacts(r, data, cfg);
  return r;
}

nlohmann::json result_to_json(const ExperimentResult& r) {
  nlohmann::json j;
  j["config"] = r.resolved_config;
  j["method"] = method_name(r.method);
  j["selected"] = {{"gamma", r.gamma}, {"gamma_tilde", r.gamma_tilde}};
  j["validation"] = {{"recall", r.val_recall}};
  nlohmann::json test;
  for (const auto& m : r.metrics) {
    test["k" + std::to_string(m.k)] = {{"recall", m.recall},
                                       {"precision", m.precision},
                                       {"hit_ratio", m.hit_ratio},
                                       {"ndcg", m.ndcg},
                                       {"evaluated_users", m.evaluated_users},
                                       {"skipped_users", m.skipped_users}};
  }
  j["test"] = test;
  nlohmann::json rr;
  for (std::size_t idx = 0; idx < r.rr.size(); ++idx) {
    rr["k" + std::to_string(r.metrics[idx].k)] = {{"rates", r.rr[idx].rate},
                                                  {"stddev", r.rr[idx].stddev}};
  }
  j["rr"] = rr;
  if (!r.gamma_search.empty()) {
    nlohmann::json gs = nlohmann::json::array();
    for (const auto& g : r.gamma_search)
      gs.push_back({{"gamma", g.gamma}, {"val_recall", g.val_recall}, {"best_epoch", g.best_epoch}});
    j["gamma_search"] = gs;
  }
  if (!r.gamma_tilde_search.empty()) {
    nlohmann::json gs = nlohmann::json::array();
    for (const auto& [gt, rec] : r.gamma_tilde_search)
      gs.push_back({{"gamma_tilde", gt}, {"val_recall", rec}});
    j["gamma_tilde_search"] = gs;
  }
  return j;
}

std::string config_fingerprint(const nlohmann::json& j) {
  // FNV-1a over the canonical dump; provenance marker, not a crypto hash
  const std::string s = j.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

std::string drift_csv(const PopularityTable& local, const std::string& provenance) {
  std::ostringstream out;
  out.precision(17);
  out << "# " << provenance << "\n";
  out << "t,dp_next,dp_first\n";
  for (std::size_t t = 0; t + 1 < local.n_stages(); ++t) {
    out << (t + 1) << "," << drift_of_popularity(local, t, t + 1) << ","
        << drift_of_popularity(local, 0, t) << "\n";
  }
  return out.str();
}

std::string rr_csv(const ExperimentResult& r, const std::string& provenance) {
  std::ostringstream out;
  out.precision(17);
  out << "# " << provenance << "\n";
  out << "k,group,rate\n";
  for (std::size_t idx = 0; idx < r.rr.size(); ++idx) {
    for (std::size_t g = 0; g < r.rr[idx].rate.size(); ++g)
      out << r.metrics[idx].k << "," << (g + 1) << "," << r.rr[idx].rate[g] << "\n";
  }
  return out.str();
}

void write_experiment_artifacts(const ExperimentResult& r, const PreparedData& data,
                                const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.output_dir);
  const fs::path dir(cfg.output_dir);
  const std::string fp = "config fingerprint=" + config_fingerprint(r.resolved_config) +
                         " seed=" + std::to_string(cfg.seed) +
                         " method=" + method_name(r.method);

  auto write_file = [](const fs::path& p, const std::string& content) {
    std::ofstream out(p);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << content;
  };

  write_file(dir / "config.json", r.resolved_config.dump(2) + "\n");
  write_file(dir / "metrics.json", result_to_json(r).dump(2) + "\n");
  write_file(dir / "split_summary.json", split_summary_json(data.split) + "\n");
  write_file(dir / "rr.csv", rr_csv(r, fp));
  write_file(dir / "drift.csv", drift_csv(data.local, fp));
  if (r.training) {
    std::string log = "{\"config_fingerprint\":\"" + config_fingerprint(r.resolved_config) +
                      "\",\"seed\":" + std::to_string(cfg.seed) + "}\n";
    log += train_log_jsonl(r.training->log);
    write_file(dir / "train.log.jsonl", log);
    save_checkpoint(r.training->model, (dir / "model.ckpt").string());
  }
}

namespace {

struct ReportRow {
  std::string method;
  int k;
  double recall, precision, hit_ratio, ndcg;
};

std::vector<ReportRow> rows_for(const nlohmann::json& report) {
  std::vector<ReportRow> rows;
  const auto& test = report.at("test");
  for (auto it = test.begin(); it != test.end(); ++it) {
    ReportRow row;
    row.method = report.at("method").get<std::string>();
    row.k = std::stoi(it.key().substr(1));
    row.recall = it.value().at("recall").get<double>();
    row.precision = it.value().at("precision").get<double>();
    row.hit_ratio = it.value().at("hit_ratio").get<double>();
    row.ndcg = it.value().at("ndcg").get<double>();
    rows.push_back(row);
  }
  std::sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) { return a.k < b.k; });
  return rows;
}

double relative_improvement(const ReportRow& base, const ReportRow& cand) {
  double acc = 0.0;
  int n = 0;
  const double pairs[4][2] = {{base.recall, cand.recall},
                              {base.precision, cand.precision},
                              {base.hit_ratio, cand.hit_ratio},
                              {base.ndcg, cand.ndcg}};
  for (const auto& p : pairs) {
    if (p[0] != 0.0) {
      acc += (p[1] - p[0]) / p[0];
      ++n;
    }
  }
  return n > 0 ? 100.0 * acc / n : 0.0;
}

void check_matching_ks(const std::vector<std::vector<ReportRow>>& all) {
  for (const auto& rows : all) {
    if (rows.size() != all.front().size())
      throw std::invalid_argument("reports have mismatched K lists");
    for (std::size_t i = 0; i < rows.size(); ++i)
      if (rows[i].k != all.front()[i].k)
        throw std::invalid_argument("reports have mismatched K lists");
  }
}

}  // namespace

std::string compare_reports_csv(const std::vector<nlohmann::json>& reports) {
  if (reports.size() < 2) throw std::invalid_argument("compare needs at least 2 reports");
  std::vector<std::vector<ReportRow>> all;
  for (const auto& r : reports) all.push_back(rows_for(r));
  check_matching_ks(all);

  std::ostringstream out;
  out.precision(6);
  out << std::fixed;
  out << "method,k,recall,precision,hit_ratio,ndcg,ri_pct\n";
  const auto& cand = all.back();
  for (std::size_t m = 0; m < all.size(); ++m) {
    for (std::size_t ki = 0; ki < all[m].size(); ++ki) {
      const auto& row = all[m][ki];
      out << row.method << "," << row.k << "," << row.recall << "," << row.precision << ","
          << row.hit_ratio << "," << row.ndcg << ",";
      if (m + 1 == all.size())
        out << "-";
      else
        out << relative_improvement(row, cand[ki]);
      out << "\n";
    }
  }
  return out.str();
}

std::string compare_reports_markdown(const std::vector<nlohmann::json>& reports) {
  if (reports.size() < 2) throw std::invalid_argument("compare needs at least 2 reports");
  std::vector<std::vector<ReportRow>> all;
  for (const auto& r : reports) all.push_back(rows_for(r));
  check_matching_ks(all);

  std::ostringstream out;
  out.precision(6);
  out << std::fixed;
  out << "| method | k | recall | precision | hit_ratio | ndcg | RI |\n";
  out << "|---|---|---|---|---|---|---|\n";
  const auto& cand = all.back();
  for (std::size_t m = 0; m < all.size(); ++m) {
    for (std::size_t ki = 0; ki < all[m].size(); ++ki) {
      const auto& row = all[m][ki];
      out << "| " << row.method << " | " << row.k << " | " << row.recall << " | " << row.precision
          << " | " << row.hit_ratio << " | " << row.ndcg << " | ";
      if (m + 1 == all.size())
        out << "- |\n";
      else
        out << relative_improvement(row, cand[ki]) << "% |\n";
    }
  }
  return out.str();
}

}  // namespace poprec
