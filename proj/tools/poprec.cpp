// Command-line front end: prepare / simulate / train / evaluate /
// analyze drift / analyze rr / compare.

#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "poprec/experiment.hpp"

namespace fs = std::filesystem;
using namespace poprec;

namespace {

char parse_delimiter(const std::string& s) {
  if (s == "\\t" || s == "tab") return '\t';
  if (s.size() != 1) throw CLI::ValidationError("--delimiter must be one character or 'tab'");
  return s[0];
}

void write_file(const fs::path& p, const std::string& content) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << content;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  nlohmann::json j;
  in >> j;
  return config_from_json(j);
}

struct MethodInputs {
  ExperimentConfig cfg;
  std::string checkpoint;
};

// Builds the inference scorer for a method from a prepared split plus an
// optional checkpoint (required by bprmf / bprmf-a / pd / pd-g / pda).
ScoreFn make_scorer(const MethodInputs& in, const PreparedData& data) {
  switch (in.cfg.method) {
    case Method::MostPop:
      return most_pop_scorer(data.split);
    case Method::MostRecent:
      return most_recent_scorer(data.split);
    default:
      break;
  }
  if (in.checkpoint.empty())
    throw std::runtime_error(method_name(in.cfg.method) + " needs --checkpoint");
  auto model = std::make_shared<FactorModel>(load_checkpoint(in.checkpoint));
  if (model->n_users != data.split.n_users() || model->n_items != data.split.n_items())
    throw std::runtime_error("checkpoint shape does not match the prepared split");
  if (in.cfg.method == Method::Pda || in.cfg.method == Method::BprmfA) {
    auto fc = std::make_shared<PopularityForecast>(forecast_popularity(
        data.split.train, data.local, in.cfg.forecast_method, in.cfg.alpha, in.cfg.substages));
    const double gt = model->gamma_tilde;
    return [model, fc, gt](std::int32_t u, std::int32_t i) {
      return pda_score(*model, u, i, *fc, gt);
    };
  }
  return [model](std::int32_t u, std::int32_t i) { return pd_score(*model, u, i); };
}

int cmd_prepare(const std::string& input, const std::string& delim, int kcore, int stages,
                double valid_frac, std::uint64_t seed, const std::string& outdir) {
  Dataset d = load_interactions(input, parse_delimiter(delim));
  if (kcore > 1) d = kcore_filter(d, kcore);
  EvalSplit split = make_eval_split(split_stages(d, stages), valid_frac, seed);
  fs::create_directories(outdir);
  save_split_file(split, (fs::path(outdir) / "split.bin").string());
  write_file(fs::path(outdir) / "split_summary.json", split_summary_json(split) + "\n");
  std::cout << split_summary_json(split) << "\n";
  return 0;
}

int cmd_simulate(const SimWorldConfig& wc, const std::string& outdir) {
  SimWorld world = make_world(wc);
  SimDataset sim = generate(world);
  fs::create_directories(outdir);
  save_interactions_tsv(sim.data, (fs::path(outdir) / "interactions.tsv").string());
  save_world_json(world, (fs::path(outdir) / "world.json").string());
  std::cout << "wrote " << sim.data.interactions.size() << " interactions, "
            << sim.data.n_users() << " users, " << sim.data.n_items() << " items\n";
  return 0;
}

int cmd_train(const ExperimentConfig& cfg) {
  ExperimentResult r = run_experiment(cfg);
  std::cout << "method=" << method_name(r.method) << " gamma=" << r.gamma
            << " gamma_tilde=" << r.gamma_tilde << " val_recall=" << r.val_recall << "\n";
  for (const auto& m : r.metrics)
    std::cout << "test k=" << m.k << " recall=" << m.recall << " precision=" << m.precision
              << " hr=" << m.hit_ratio << " ndcg=" << m.ndcg << "\n";
  if (!cfg.output_dir.empty()) std::cout << "artifacts in " << cfg.output_dir << "\n";
  return 0;
}

int cmd_evaluate(const MethodInputs& in) {
  PreparedData data;
  data.split = load_split_file(in.cfg.prepared_path);
  data.local = local_popularity(data.split.train);
  data.global = global_popularity(data.split.train);

  const ScoreFn scorer = make_scorer(in, data);
  ExperimentResult r;
  r.method = in.cfg.method;
  r.resolved_config = config_to_json(in.cfg);
  const int k_max = *std::max_element(in.cfg.k_list.begin(), in.cfg.k_list.end());
  const RankedList full = recommend_topk(scorer, data.split, data.split.test, k_max);
  r.groups = partition_groups(data.global, in.cfg.rr_groups);
  for (int k : in.cfg.k_list) {
    r.metrics.push_back(compute_metrics(full, data.split.test, k));
    RankedList prefix;
    prefix.k = k;
    prefix.users = full.users;
    for (auto& u : prefix.users)
      if (u.items.size() > static_cast<std::size_t>(k)) {
        u.items.resize(k);
        u.scores.resize(k);
      }
    r.rr.push_back(recommendation_rate(prefix, r.groups));
  }
  const std::string fp = "config fingerprint=" + config_fingerprint(r.resolved_config) +
                         " seed=" + std::to_string(in.cfg.seed) +
                         " method=" + method_name(r.method);
  if (!in.cfg.output_dir.empty()) {
    fs::create_directories(in.cfg.output_dir);
    write_file(fs::path(in.cfg.output_dir) / "metrics.json", result_to_json(r).dump(2) + "\n");
    write_file(fs::path(in.cfg.output_dir) / "rr.csv", rr_csv(r, fp));
  }
  std::cout << result_to_json(r).dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"popularity-deconfounded recommender toolkit"};
  app.require_subcommand(1);

  // ---- prepare ----
  std::string in_path, delim = "tab", outdir = ".";
  int kcore = 10, stages = 10;
  double valid_frac = 0.3;
  std::uint64_t seed = 0;
  auto* prep = app.add_subcommand("prepare", "filter, stage and split an interaction log");
  prep->add_option("--input", in_path, "interaction file (user, item, timestamp)")->required();
  prep->add_option("--delimiter", delim, "field delimiter (default tab)");
  prep->add_option("--kcore", kcore, "k-core filter threshold (<=1 disables)");
  prep->add_option("--stages", stages, "number of time stages");
  prep->add_option("--valid-frac", valid_frac, "fraction of holdout users for validation");
  prep->add_option("--seed", seed, "holdout shuffle seed")->required();
  prep->add_option("--out", outdir, "output directory");

  // ---- simulate ----
  SimWorldConfig wc;
  std::string sim_out = ".";
  auto* sim = app.add_subcommand("simulate", "generate a synthetic confounded interaction log");
  sim->add_option("--users", wc.n_users, "number of users");
  sim->add_option("--items", wc.n_items, "number of items");
  sim->add_option("--rank", wc.d_true, "latent interest rank");
  sim->add_option("--interest-scale", wc.interest_scale, "latent factor scale");
  sim->add_option("--exposure-bias", wc.exposure_bias_strength, "popularity exponent in exposure");
  sim->add_option("--conformity", wc.conformity_strength, "popularity exponent in consumption");
  sim->add_option("--stages", wc.stages, "number of stages");
  sim->add_option("--events-per-stage", wc.events_per_stage, "accepted events per stage");
  sim->add_option("--drift", wc.drift_rate, "std of per-item log popularity growth per stage");
  sim->add_option("--feedback-smoothing", wc.feedback_smoothing, "Laplace smoothing of realized counts");
  sim->add_option("--seed", wc.seed, "world + generation seed")->required();
  sim->add_option("--out", sim_out, "output directory");

  // ---- train ----
  std::string cfg_path, method_str, t_out;
  double gamma_override = -1.0, alpha_override = -1.0;
  std::string forecast_override;
  int substages_override = -1;
  bool tune_gt = false;
  std::uint64_t t_seed = 0;
  std::string t_input, t_prepared;
  auto* tr = app.add_subcommand("train", "run the full experiment for a method");
  tr->add_option("--config", cfg_path, "experiment config JSON");
  tr->add_option("--input", t_input, "raw interaction file (overrides config)");
  tr->add_option("--prepared", t_prepared, "prepared split.bin (overrides config)");
  tr->add_option("--method", method_str, "mostpop|mostrecent|bprmf|bprmf-a|pd|pd-g|pda");
  tr->add_option("--gamma", gamma_override, "fix gamma instead of grid searching");
  tr->add_option("--forecast", forecast_override, "last-stage|linear-trend");
  tr->add_option("--alpha", alpha_override, "drift strength of the linear forecast");
  tr->add_option("--substages", substages_override, "re-split the last stage into N sub-stages");
  tr->add_flag("--tune-gamma-tilde", tune_gt, "search gamma_tilde on validation for inference");
  tr->add_option("--seed", t_seed, "experiment seed")->required();
  tr->add_option("--out", t_out, "output directory");

  // ---- evaluate ----
  std::string e_prepared, e_method, e_checkpoint, e_out, e_forecast = "linear-trend";
  double e_alpha = 1.0;
  int e_substages = 1;
  std::vector<int> e_ks{20, 50};
  int e_groups = 10;
  auto* ev = app.add_subcommand("evaluate", "score the test holdout with a method/checkpoint");
  ev->add_option("--prepared", e_prepared, "prepared split.bin")->required();
  ev->add_option("--method", e_method, "method name")->required();
  ev->add_option("--checkpoint", e_checkpoint, "model checkpoint (trained methods)");
  ev->add_option("--forecast", e_forecast, "forecast method for pda/bprmf-a");
  ev->add_option("--alpha", e_alpha, "forecast alpha");
  ev->add_option("--substages", e_substages, "forecast sub-stages");
  ev->add_option("--k", e_ks, "cutoffs to report");
  ev->add_option("--rr-groups", e_groups, "popularity groups for RR");
  ev->add_option("--out", e_out, "output directory");

  // ---- analyze ----
  auto* an = app.add_subcommand("analyze", "dataset/recommendation analyses");
  an->require_subcommand(1);
  std::string ad_input, ad_delim = "tab", ad_out;
  int ad_stages = 10;
  auto* drift = an->add_subcommand("drift", "per-stage popularity drift CSV");
  drift->add_option("--input", ad_input, "interaction file")->required();
  drift->add_option("--delimiter", ad_delim, "field delimiter");
  drift->add_option("--stages", ad_stages, "number of time stages");
  drift->add_option("--out", ad_out, "output CSV path (stdout if omitted)");

  std::string ar_prepared, ar_method, ar_checkpoint, ar_out, ar_forecast = "linear-trend";
  double ar_alpha = 1.0;
  int ar_substages = 1, ar_groups = 10, ar_k = 20;
  auto* rr = an->add_subcommand("rr", "recommendation rate per popularity group CSV");
  rr->add_option("--prepared", ar_prepared, "prepared split.bin")->required();
  rr->add_option("--method", ar_method, "method name")->required();
  rr->add_option("--checkpoint", ar_checkpoint, "model checkpoint (trained methods)");
  rr->add_option("--forecast", ar_forecast, "forecast method for pda/bprmf-a");
  rr->add_option("--alpha", ar_alpha, "forecast alpha");
  rr->add_option("--substages", ar_substages, "forecast sub-stages");
  rr->add_option("--groups", ar_groups, "popularity groups");
  rr->add_option("--k", ar_k, "list length");
  rr->add_option("--out", ar_out, "output CSV path (stdout if omitted)");

  // ---- compare ----
  std::vector<std::string> cmp_reports;
  std::string cmp_out, cmp_format = "markdown";
  auto* cmp = app.add_subcommand("compare", "tabulate metrics.json reports (last = candidate)");
  cmp->add_option("reports", cmp_reports, "metrics.json files")->required()->expected(-2);
  cmp->add_option("--format", cmp_format, "markdown|csv");
  cmp->add_option("--out", cmp_out, "output path (stdout if omitted)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*prep) return cmd_prepare(in_path, delim, kcore, stages, valid_frac, seed, outdir);
    if (*sim) return cmd_simulate(wc, sim_out);

    if (*tr) {
      ExperimentConfig cfg = cfg_path.empty() ? ExperimentConfig{} : load_config(cfg_path);
      if (!t_input.empty()) cfg.dataset_path = t_input;
      if (!t_prepared.empty()) cfg.prepared_path = t_prepared;
      if (!method_str.empty()) cfg.method = parse_method(method_str);
      if (gamma_override >= 0.0) cfg.gamma_grid = {gamma_override};
      if (!forecast_override.empty())
        cfg.forecast_method = forecast_override == "last-stage" ? ForecastMethod::LastStage
                                                                : ForecastMethod::LinearTrend;
      if (alpha_override >= 0.0) cfg.alpha = alpha_override;
      if (substages_override >= 1) cfg.substages = substages_override;
      if (tune_gt) cfg.tune_gamma_tilde = true;
      cfg.seed = t_seed;
      if (!t_out.empty()) cfg.output_dir = t_out;
      return cmd_train(cfg);
    }

    if (*ev) {
      MethodInputs mi;
      mi.cfg.prepared_path = e_prepared;
      mi.cfg.method = parse_method(e_method);
      mi.cfg.forecast_method =
          e_forecast == "last-stage" ? ForecastMethod::LastStage : ForecastMethod::LinearTrend;
      mi.cfg.alpha = e_alpha;
      mi.cfg.substages = e_substages;
      mi.cfg.k_list = e_ks;
      mi.cfg.rr_groups = e_groups;
      mi.cfg.output_dir = e_out;
      mi.checkpoint = e_checkpoint;
      return cmd_evaluate(mi);
    }

    if (*drift) {
      Dataset d = load_interactions(ad_input, parse_delimiter(ad_delim));
      StagedDataset staged = split_stages(d, ad_stages);
      PopularityTable local = local_popularity(staged);
      const std::string csv = drift_csv(local, "input=" + ad_input +
                                                   " stages=" + std::to_string(ad_stages));
      if (ad_out.empty())
        std::cout << csv;
      else
        write_file(ad_out, csv);
      return 0;
    }

    if (*rr) {
      MethodInputs mi;
      mi.cfg.prepared_path = ar_prepared;
      mi.cfg.method = parse_method(ar_method);
      mi.cfg.forecast_method =
          ar_forecast == "last-stage" ? ForecastMethod::LastStage : ForecastMethod::LinearTrend;
      mi.cfg.alpha = ar_alpha;
      mi.cfg.substages = ar_substages;
      mi.checkpoint = ar_checkpoint;
      PreparedData data;
      data.split = load_split_file(ar_prepared);
      data.local = local_popularity(data.split.train);
      data.global = global_popularity(data.split.train);
      const ScoreFn scorer = make_scorer(mi, data);
      const RankedList rl = recommend_topk(scorer, data.split, data.split.test, ar_k);
      const GroupPartition gp = partition_groups(data.global, ar_groups);
      const RecommendationRates rates = recommendation_rate(rl, gp);
      std::ostringstream csv;
      csv.precision(17);
      csv << "# method=" << method_name(mi.cfg.method) << " k=" << ar_k << "\n";
      csv << "group,rate\n";
      for (std::size_t g = 0; g < rates.rate.size(); ++g)
        csv << (g + 1) << "," << rates.rate[g] << "\n";
      csv << "# stddev," << rates.stddev << "\n";
      if (ar_out.empty())
        std::cout << csv.str();
      else
        write_file(ar_out, csv.str());
      return 0;
    }

    if (*cmp) {
      std::vector<nlohmann::json> reports;
      for (const auto& p : cmp_reports) {
        std::ifstream in(p);
        if (!in) throw std::runtime_error("cannot open " + p);
        nlohmann::json j;
        in >> j;
        reports.push_back(std::move(j));
      }
      const std::string table = cmp_format == "csv" ? compare_reports_csv(reports)
                                                    : compare_reports_markdown(reports);
      if (cmp_out.empty())
        std::cout << table;
      else
        write_file(cmp_out, table);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
