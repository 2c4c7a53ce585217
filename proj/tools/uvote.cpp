#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "uvote/uvote.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void print_report_table(const std::string& strategy, const json& regions) {
  std::printf("strategy=%s\n", strategy.c_str());
  std::printf("  %-8s %8s %10s %10s %10s %10s\n", "region", "count", "MAE", "RMSE",
              "Pearson%", "UCE");
  for (const char* name : {"all", "many", "medium", "few"}) {
    const json& r = regions.at(name);
    auto cell = [&](const char* key) {
      const json& v = r.at(key);
      if (v.is_null()) return std::string("-");
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.3f", v.get<double>());
      return std::string(buf);
    };
    std::printf("  %-8s %8lld %10s %10s %10s %10s\n", name,
                static_cast<long long>(r.at("count").get<std::size_t>()),
                cell("mae").c_str(), cell("rmse").c_str(), cell("pearson_pct").c_str(),
                cell("uce").c_str());
  }
}

void print_experiment_report(const json& report) {
  std::printf("winner: %lld experts (validation score %g)\n",
              static_cast<long long>(report.at("winner").at("experts").get<std::size_t>()),
              report.at("winner").at("validation_score").get<double>());
  for (const auto& cand : report.at("candidates")) {
    if (cand.at("experts") != report.at("winner").at("experts")) continue;
    for (const auto& [strategy, regions] : cand.at("test").items())
      print_report_table(strategy, regions);
  }
}

int cmd_generate(const uvote::SyntheticSpec& spec, std::uint64_t seed,
                 const std::string& out_dir) {
  uvote::SyntheticData data = uvote::generate_synthetic(spec, seed);
  fs::create_directories(out_dir);
  uvote::save_csv(data.train, (fs::path(out_dir) / "train.csv").string());
  uvote::save_csv(data.val, (fs::path(out_dir) / "val.csv").string());
  uvote::save_csv(data.test, (fs::path(out_dir) / "test.csv").string());

  json meta;
  meta["schema_version"] = 1;
  meta["seed"] = seed;
  meta["spec"] = uvote::synthetic_spec_to_json(spec);
  meta["realized_imbalance"] = data.realized_imbalance;
  meta["bin_counts"] = data.bin_counts;
  meta["ground_truth"] = {{"mean", "x0^3"},
                          {"noise_scale", "noise_base + noise_slope * y / target_range"}};
  meta["splits"] = {{"train", data.train.size()},
                    {"val", data.val.size()},
                    {"test", data.test.size()}};
  std::ofstream out(fs::path(out_dir) / "dataset.json", std::ios::binary);
  out << meta.dump(2) << '\n';

  std::printf("wrote %s (n=%zu, realized imbalance %.2f)\n", out_dir.c_str(),
              data.train.size() + data.val.size() + data.test.size(),
              data.realized_imbalance);
  return 0;
}

int cmd_run(const uvote::ExperimentConfig& config) {
  uvote::ExperimentResult result = uvote::run_experiment(config);
  print_experiment_report(result.report);
  if (!config.output_dir.empty())
    std::printf("artifacts in %s\n", config.output_dir.c_str());
  return 0;
}

int cmd_evaluate(const std::string& model_path, const std::string& train_csv,
                 const std::string& test_csv, const std::string& target_column,
                 const std::vector<std::string>& strategy_names, double bin_width,
                 const std::string& spread_name, const std::string& out_dir) {
  const uvote::UvoteModel model = uvote::load_model(model_path);
  const uvote::Dataset train_set = uvote::load_csv(train_csv, target_column);
  const uvote::Dataset test_set = uvote::load_csv(test_csv, target_column);
  const uvote::UncertaintySpread spread = uvote::spread_from_string(spread_name);

  std::map<uvote::Strategy, uvote::MetricsReport> reports;
  json tests;
  for (const auto& name : strategy_names) {
    const uvote::Strategy strategy = uvote::strategy_from_string(name);
    uvote::MetricsReport report =
        uvote::evaluate_model(model, test_set.features, test_set.targets,
                              train_set.targets, strategy, bin_width, spread);
    tests[name] = uvote::metrics_report_to_json(report);
    print_report_table(name, tests[name]);
    reports.emplace(strategy, std::move(report));
  }

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    json report{{"schema_version", 1},
                {"kind", "evaluation"},
                {"experts", model.num_experts()},
                {"test", tests}};
    std::ofstream out(fs::path(out_dir) / "report.json", std::ios::binary);
    out << report.dump(2) << '\n';
    std::ofstream csv(fs::path(out_dir) / "report.csv", std::ios::binary);
    csv << uvote::reports_to_csv(reports);
    std::printf("artifacts in %s\n", out_dir.c_str());
  }
  return 0;
}

int cmd_report(const std::string& run_dir) {
  std::ifstream in(fs::path(run_dir) / "report.json", std::ios::binary);
  if (!in) throw uvote::InputError("no report.json under " + run_dir);
  json report;
  in >> report;
  if (report.value("kind", "") == "experiment") {
    print_experiment_report(report);
  } else {
    for (const auto& [strategy, regions] : report.at("test").items())
      print_report_table(strategy, regions);
  }
  return 0;
}

void add_synthetic_options(CLI::App* cmd, uvote::SyntheticSpec& spec) {
  cmd->add_option("--n", spec.n, "number of samples");
  cmd->add_option("--dim", spec.dim, "feature dimension");
  cmd->add_option("--imbalance", spec.imbalance, "max/min target-bin count ratio");
  cmd->add_option("--bins", spec.bins, "number of target bins");
  cmd->add_option("--bin-width", spec.bin_width, "target bin width");
  cmd->add_option("--noise-base", spec.noise_base, "noise scale at y=0");
  cmd->add_option("--noise-slope", spec.noise_slope, "noise scale growth over the range");
  cmd->add_option("--feature-noise", spec.feature_noise, "signal feature noise sigma");
  cmd->add_option("--train-frac", spec.train_fraction, "training fraction");
  cmd->add_option("--val-frac", spec.val_fraction, "validation fraction");
}

// Options shared by `train` and `sweep`. Values laid over the config file
// (or the defaults) only when explicitly passed.
struct RunOptions {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  uvote::SyntheticSpec synthetic;
  std::string train_csv, val_csv, test_csv, target_column = "target";
  std::vector<std::size_t> hidden;
  std::string activation;
  std::size_t epochs = 0, batch_size = 0, experts = 0;
  double lr_main = -1, lr_uncertainty = -1, decay_factor = -1;
  std::vector<std::size_t> milestones;
  std::string weighting, schedule, blend, loss, density_kind;
  double density_bin_width = -1, bandwidth = -1;
  std::vector<std::string> strategies;
  double eval_bin_width = -1;
  std::string spread;
};

void add_run_options(CLI::App* cmd, RunOptions& opt, bool require_seed) {
  cmd->add_option("--config", opt.config_path, "experiment config JSON");
  cmd->add_option("--out", opt.out_dir, "run directory for artifacts");
  auto* seed = cmd->add_option("--seed", opt.seed, "RNG seed");
  if (require_seed) seed->required();
  add_synthetic_options(cmd, opt.synthetic);
  cmd->add_option("--train-csv", opt.train_csv, "training CSV (switches source to csv)");
  cmd->add_option("--val-csv", opt.val_csv, "validation CSV");
  cmd->add_option("--test-csv", opt.test_csv, "test CSV");
  cmd->add_option("--target-column", opt.target_column, "target column name");
  cmd->add_option("--hidden", opt.hidden, "trunk widths, e.g. --hidden 32 32")
      ->delimiter(',');
  cmd->add_option("--activation", opt.activation, "trunk activation");
  cmd->add_option("--epochs", opt.epochs, "training epochs");
  cmd->add_option("--batch-size", opt.batch_size, "minibatch size");
  cmd->add_option("--experts", opt.experts, "number of expert heads");
  cmd->add_option("--lr", opt.lr_main, "main learning rate");
  cmd->add_option("--lr-uncertainty", opt.lr_uncertainty, "log-scale head learning rate");
  cmd->add_option("--decay-milestones", opt.milestones, "epochs where the lr drops")
      ->delimiter(',');
  cmd->add_option("--decay-factor", opt.decay_factor, "lr decay factor");
  cmd->add_option("--weighting", opt.weighting, "frequency_power|uniform");
  cmd->add_option("--schedule", opt.schedule, "dynamic|flat");
  cmd->add_option("--blend", opt.blend, "sum|mean over experts 1..M-1");
  cmd->add_option("--loss", opt.loss, "laplace_nll|l1|l2");
  cmd->add_option("--density", opt.density_kind, "histogram|kde");
  cmd->add_option("--density-bin-width", opt.density_bin_width, "histogram bin width");
  cmd->add_option("--bandwidth", opt.bandwidth, "kde bandwidth");
  cmd->add_option("--strategy", opt.strategies,
                  "aggregation strategies to evaluate (repeatable)");
  cmd->add_option("--eval-bin-width", opt.eval_bin_width, "shot-region bin width");
  cmd->add_option("--spread", opt.spread, "laplace_std|laplace_scale");
}

uvote::ExperimentConfig assemble_config(const CLI::App* cmd, const RunOptions& opt) {
  uvote::ExperimentConfig config;
  if (!opt.config_path.empty())
    config = uvote::load_experiment_config(opt.config_path);
  else
    config.synthetic = uvote::SyntheticSpec{};

  auto passed = [&](const std::string& name) { return cmd->count(name) > 0; };

  if (passed("--seed")) config.seed = opt.seed;
  if (passed("--out")) config.output_dir = opt.out_dir;

  if (passed("--train-csv") || passed("--val-csv") || passed("--test-csv")) {
    uvote::CsvSource src;
    src.train_path = opt.train_csv;
    src.val_path = opt.val_csv;
    src.test_path = opt.test_csv;
    src.target_column = opt.target_column;
    if (src.train_path.empty() || src.val_path.empty() || src.test_path.empty())
      throw uvote::ConfigError("csv source needs --train-csv, --val-csv and --test-csv");
    config.csv = src;
    config.synthetic.reset();
  } else if (!config.csv) {
    uvote::SyntheticSpec spec = config.synthetic.value_or(uvote::SyntheticSpec{});
    for (const char* name :
         {"--n", "--dim", "--imbalance", "--bins", "--bin-width", "--noise-base",
          "--noise-slope", "--feature-noise", "--train-frac", "--val-frac"})
      if (passed(name)) {
        spec = opt.synthetic;  // flags were parsed straight into opt.synthetic
        break;
      }
    config.synthetic = spec;
  }

  if (passed("--hidden")) config.hidden = opt.hidden;
  if (passed("--activation"))
    config.hidden_activation = uvote::activation_from_string(opt.activation);
  if (passed("--epochs")) config.train.max_epochs = opt.epochs;
  if (passed("--batch-size")) config.train.batch_size = opt.batch_size;
  if (passed("--experts")) config.train.num_experts = opt.experts;
  if (passed("--lr")) config.train.lr_main = opt.lr_main;
  if (passed("--lr-uncertainty")) config.train.lr_uncertainty = opt.lr_uncertainty;
  if (passed("--decay-milestones")) config.train.decay_milestones = opt.milestones;
  if (passed("--decay-factor")) config.train.decay_factor = opt.decay_factor;
  if (passed("--weighting"))
    config.train.weighting = uvote::weighting_from_string(opt.weighting);
  if (passed("--schedule"))
    config.train.schedule = uvote::schedule_from_string(opt.schedule);
  if (passed("--blend")) config.train.blend = uvote::blend_from_string(opt.blend);
  if (passed("--loss")) config.train.loss = uvote::loss_kind_from_string(opt.loss);
  if (passed("--density"))
    config.train.density.kind = uvote::density_kind_from_string(opt.density_kind);
  if (passed("--density-bin-width"))
    config.train.density.bin_width = opt.density_bin_width;
  if (passed("--bandwidth")) config.train.density.bandwidth = opt.bandwidth;
  if (passed("--strategy")) {
    config.eval.strategies.clear();
    for (const auto& s : opt.strategies)
      config.eval.strategies.push_back(uvote::strategy_from_string(s));
  }
  if (passed("--eval-bin-width")) config.eval.bin_width = opt.eval_bin_width;
  if (passed("--spread")) config.eval.spread = uvote::spread_from_string(opt.spread);
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"UVOTE: uncertainty-voting expert ensembles for imbalanced regression"};
  app.require_subcommand(1);

  // generate
  auto* generate = app.add_subcommand("generate", "write a synthetic benchmark dataset");
  uvote::SyntheticSpec gen_spec;
  std::uint64_t gen_seed = 0;
  std::string gen_out;
  add_synthetic_options(generate, gen_spec);
  generate->add_option("--seed", gen_seed, "RNG seed");
  generate->add_option("--out", gen_out, "output directory")->required();

  // train
  auto* train_cmd = app.add_subcommand("train", "train one configuration and report");
  RunOptions train_opt;
  add_run_options(train_cmd, train_opt, /*require_seed=*/true);

  // sweep
  auto* sweep_cmd =
      app.add_subcommand("sweep", "train several expert counts, pick the best on validation");
  RunOptions sweep_opt;
  std::vector<std::size_t> sweep_experts;
  std::string sweep_selection;
  add_run_options(sweep_cmd, sweep_opt, /*require_seed=*/true);
  sweep_cmd->add_option("--sweep-experts", sweep_experts, "expert counts to try")
      ->delimiter(',');
  sweep_cmd->add_option("--selection", sweep_selection, "mae|pearson");

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "evaluate a saved model checkpoint");
  std::string eval_model, eval_train_csv, eval_test_csv, eval_target = "target";
  std::string eval_out, eval_spread = "laplace_std";
  std::vector<std::string> eval_strategies{"min_uncertainty"};
  double eval_bin_width = 1.0;
  eval_cmd->add_option("--model", eval_model, "model checkpoint JSON")->required();
  eval_cmd->add_option("--train-csv", eval_train_csv, "training CSV (for shot regions)")
      ->required();
  eval_cmd->add_option("--test-csv", eval_test_csv, "test CSV")->required();
  eval_cmd->add_option("--target-column", eval_target, "target column name");
  eval_cmd->add_option("--strategy", eval_strategies, "strategies to evaluate");
  eval_cmd->add_option("--bin-width", eval_bin_width, "shot-region bin width");
  eval_cmd->add_option("--spread", eval_spread, "laplace_std|laplace_scale");
  eval_cmd->add_option("--out", eval_out, "directory for report.json/report.csv");

  // report
  auto* report_cmd = app.add_subcommand("report", "print the report of a finished run");
  std::string report_dir;
  report_cmd->add_option("--run", report_dir, "run directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (generate->parsed()) return cmd_generate(gen_spec, gen_seed, gen_out);
    if (train_cmd->parsed()) return cmd_run(assemble_config(train_cmd, train_opt));
    if (sweep_cmd->parsed()) {
      uvote::ExperimentConfig config = assemble_config(sweep_cmd, sweep_opt);
      if (!sweep_experts.empty()) {
        uvote::SweepConfig sw;
        sw.expert_counts = sweep_experts;
        if (!sweep_selection.empty())
          sw.selection = sweep_selection == "pearson" ? uvote::SelectionMetric::pearson
                                                      : uvote::SelectionMetric::mae;
        config.sweep = sw;
      }
      if (!config.sweep)
        throw uvote::ConfigError("sweep: provide --sweep-experts or a config with a sweep");
      return cmd_run(config);
    }
    if (eval_cmd->parsed())
      return cmd_evaluate(eval_model, eval_train_csv, eval_test_csv, eval_target,
                          eval_strategies, eval_bin_width, eval_spread, eval_out);
    if (report_cmd->parsed()) return cmd_report(report_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
