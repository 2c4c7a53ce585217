#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "uvote/common.hpp"
#include "uvote/dataset.hpp"
#include "uvote/density.hpp"
#include "uvote/metrics.hpp"
#include "uvote/model.hpp"
#include "uvote/synthetic.hpp"
#include "uvote/train.hpp"

namespace uvote {

constexpr int kConfigSchemaVersion = 1;
constexpr int kReportSchemaVersion = 1;

struct CsvSource {
  std::string train_path;
  std::string val_path;
  std::string test_path;
  std::string target_column = "target";
};

struct EvalConfig {
  std::vector<Strategy> strategies{Strategy::min_uncertainty};
  double bin_width = 1.0;
  UncertaintySpread spread = UncertaintySpread::laplace_std;
};

enum class SelectionMetric { mae, pearson };

struct SweepConfig {
  std::vector<std::size_t> expert_counts;
  std::optional<SelectionMetric> selection;  // unset: mae, or pearson under l2 loss
};

// Everything a run needs; serializes to JSON so a run can be reproduced
// bit-for-bit from its config snapshot.
struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::string output_dir;
  std::optional<SyntheticSpec> synthetic;
  std::optional<CsvSource> csv;
  std::vector<std::size_t> hidden{32, 32};
  Activation hidden_activation = Activation::relu;
  TrainConfig train;
  EvalConfig eval;
  std::optional<SweepConfig> sweep;
};

// ---- json (de)serialization --------------------------------------------

namespace detail {

inline nlohmann::json to_json(const std::optional<double>& v) {
  if (!v) return nullptr;
  return *v;
}

inline nlohmann::json region_to_json(const RegionMetrics& m) {
  return {{"count", m.count},
          {"mae", to_json(m.mae)},
          {"rmse", to_json(m.rmse)},
          {"pearson_pct", to_json(m.pearson_pct)},
          {"uce", to_json(m.uce)}};
}

}  // namespace detail

inline nlohmann::json metrics_report_to_json(const MetricsReport& r) {
  return {{"all", detail::region_to_json(r.all)},
          {"many", detail::region_to_json(r.many)},
          {"medium", detail::region_to_json(r.medium)},
          {"few", detail::region_to_json(r.few)}};
}

inline nlohmann::json synthetic_spec_to_json(const SyntheticSpec& s) {
  return {{"n", s.n},
          {"dim", s.dim},
          {"imbalance", s.imbalance},
          {"bins", s.bins},
          {"bin_width", s.bin_width},
          {"noise_base", s.noise_base},
          {"noise_slope", s.noise_slope},
          {"feature_noise", s.feature_noise},
          {"train_fraction", s.train_fraction},
          {"val_fraction", s.val_fraction}};
}

inline SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j) {
  SyntheticSpec s;
  s.n = j.value("n", s.n);
  s.dim = j.value("dim", s.dim);
  s.imbalance = j.value("imbalance", s.imbalance);
  s.bins = j.value("bins", s.bins);
  s.bin_width = j.value("bin_width", s.bin_width);
  s.noise_base = j.value("noise_base", s.noise_base);
  s.noise_slope = j.value("noise_slope", s.noise_slope);
  s.feature_noise = j.value("feature_noise", s.feature_noise);
  s.train_fraction = j.value("train_fraction", s.train_fraction);
  s.val_fraction = j.value("val_fraction", s.val_fraction);
  return s;
}

inline nlohmann::json experiment_config_to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["schema_version"] = kConfigSchemaVersion;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  if (c.synthetic) {
    j["dataset"] = {{"source", "synthetic"},
                    {"synthetic", synthetic_spec_to_json(*c.synthetic)}};
  } else if (c.csv) {
    j["dataset"] = {{"source", "csv"},
                    {"csv",
                     {{"train", c.csv->train_path},
                      {"val", c.csv->val_path},
                      {"test", c.csv->test_path},
                      {"target_column", c.csv->target_column}}}};
  }
  j["architecture"] = {{"hidden", c.hidden},
                       {"activation", to_string(c.hidden_activation)}};
  nlohmann::json t;
  t["epochs"] = c.train.max_epochs;
  t["batch_size"] = c.train.batch_size;
  t["lr_main"] = c.train.lr_main;
  t["lr_uncertainty"] = c.train.lr_uncertainty;
  if (c.train.decay_milestones) t["decay_milestones"] = *c.train.decay_milestones;
  t["decay_factor"] = c.train.decay_factor;
  t["experts"] = c.train.num_experts;
  t["weighting"] = to_string(c.train.weighting);
  t["schedule"] = to_string(c.train.schedule);
  t["blend"] = to_string(c.train.blend);
  t["loss"] = to_string(c.train.loss);
  t["density"] = {{"kind", to_string(c.train.density.kind)},
                  {"bin_width", c.train.density.bin_width},
                  {"bandwidth", c.train.density.bandwidth}};
  j["train"] = t;
  nlohmann::json strategies = nlohmann::json::array();
  for (Strategy s : c.eval.strategies) strategies.push_back(to_string(s));
  j["evaluate"] = {{"strategies", strategies},
                   {"bin_width", c.eval.bin_width},
                   {"uncertainty_spread", to_string(c.eval.spread)}};
  if (c.sweep) {
    nlohmann::json sw{{"experts", c.sweep->expert_counts}};
    if (c.sweep->selection)
      sw["selection"] = *c.sweep->selection == SelectionMetric::mae ? "mae" : "pearson";
    j["sweep"] = sw;
  }
  return j;
}

inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  if (j.value("schema_version", kConfigSchemaVersion) != kConfigSchemaVersion)
    throw ConfigError("experiment config: unsupported schema_version");
  ExperimentConfig c;
  c.seed = j.value("seed", std::uint64_t{0});
  c.output_dir = j.value("output_dir", std::string{});
  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    const std::string source = d.value("source", "synthetic");
    if (source == "synthetic") {
      c.synthetic = synthetic_spec_from_json(d.value("synthetic", nlohmann::json::object()));
    } else if (source == "csv") {
      const auto& cs = d.at("csv");
      CsvSource src;
      src.train_path = cs.at("train").get<std::string>();
      src.val_path = cs.at("val").get<std::string>();
      src.test_path = cs.at("test").get<std::string>();
      src.target_column = cs.value("target_column", std::string{"target"});
      c.csv = src;
    } else {
      throw ConfigError("experiment config: unknown dataset source '" + source + "'");
    }
  } else {
    c.synthetic = SyntheticSpec{};
  }
  if (j.contains("architecture")) {
    const auto& a = j.at("architecture");
    c.hidden = a.value("hidden", c.hidden);
    c.hidden_activation =
        activation_from_string(a.value("activation", std::string{"relu"}));
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    c.train.max_epochs = t.value("epochs", c.train.max_epochs);
    c.train.batch_size = t.value("batch_size", c.train.batch_size);
    c.train.lr_main = t.value("lr_main", c.train.lr_main);
    c.train.lr_uncertainty = t.value("lr_uncertainty", c.train.lr_uncertainty);
    if (t.contains("decay_milestones"))
      c.train.decay_milestones = t.at("decay_milestones").get<std::vector<std::size_t>>();
    c.train.decay_factor = t.value("decay_factor", c.train.decay_factor);
    c.train.num_experts = t.value("experts", c.train.num_experts);
    c.train.weighting =
        weighting_from_string(t.value("weighting", std::string{"frequency_power"}));
    c.train.schedule = schedule_from_string(t.value("schedule", std::string{"dynamic"}));
    c.train.blend = blend_from_string(t.value("blend", std::string{"sum"}));
    c.train.loss = loss_kind_from_string(t.value("loss", std::string{"laplace_nll"}));
    if (t.contains("density")) {
      const auto& d = t.at("density");
      c.train.density.kind =
          density_kind_from_string(d.value("kind", std::string{"histogram"}));
      c.train.density.bin_width = d.value("bin_width", c.train.density.bin_width);
      c.train.density.bandwidth = d.value("bandwidth", c.train.density.bandwidth);
    }
  }
  if (j.contains("evaluate")) {
    const auto& e = j.at("evaluate");
    if (e.contains("strategies")) {
      c.eval.strategies.clear();
      for (const auto& s : e.at("strategies"))
        c.eval.strategies.push_back(strategy_from_string(s.get<std::string>()));
    }
    c.eval.bin_width = e.value("bin_width", c.eval.bin_width);
    c.eval.spread =
        spread_from_string(e.value("uncertainty_spread", std::string{"laplace_std"}));
  }
  if (j.contains("sweep")) {
    SweepConfig sw;
    sw.expert_counts = j.at("sweep").at("experts").get<std::vector<std::size_t>>();
    if (j.at("sweep").contains("selection")) {
      const std::string sel = j.at("sweep").at("selection").get<std::string>();
      if (sel == "mae")
        sw.selection = SelectionMetric::mae;
      else if (sel == "pearson")
        sw.selection = SelectionMetric::pearson;
      else
        throw ConfigError("experiment config: unknown selection metric '" + sel + "'");
    }
    c.sweep = sw;
  }
  if (c.eval.strategies.empty())
    throw ConfigError("experiment config: need at least one evaluation strategy");
  return c;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open config " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return experiment_config_from_json(j);
}

// ---- pipeline ------------------------------------------------------------

// Sample frequencies feeding the expert weights. Every expert column is
// rescaled to mean 1: raw (1/f)^p columns shrink with the dataset size, which
// starves the rebalanced experts of gradient signal relative to expert 0.
// The rescaling changes nothing about the relative weighting within a column.
inline WeightTable training_weights(const std::vector<double>& train_targets,
                                    std::size_t num_experts, const TrainConfig& tc) {
  if (tc.weighting == WeightingMode::uniform)
    return uniform_weights(train_targets.size(), num_experts);
  std::vector<double> freq(train_targets.size());
  if (tc.density.kind == DensityKind::histogram) {
    const HistogramDensity hist = histogram_density(train_targets, tc.density.bin_width);
    for (std::size_t n = 0; n < train_targets.size(); ++n)
      freq[n] = static_cast<double>(hist.counts[hist.sample_bins[n]]);
  } else {
    const KdeDensity kde(train_targets, tc.density.bandwidth);
    for (std::size_t n = 0; n < train_targets.size(); ++n) freq[n] = kde(train_targets[n]);
  }
  return expert_weights(freq, num_experts, /*normalize_columns=*/true);
}

struct CandidateResult {
  std::size_t experts = 0;
  double validation_score = 0.0;
  MetricsReport validation;
  std::map<Strategy, MetricsReport> test;
  std::vector<EpochLog> history;
  UvoteModel model;
};

struct ExperimentResult {
  std::vector<CandidateResult> candidates;
  std::size_t winner_index = 0;
  nlohmann::json report;

  const CandidateResult& winner() const { return candidates[winner_index]; }
};

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
}

inline std::string training_log_lines(const std::vector<EpochLog>& history) {
  std::string lines;
  for (const auto& log : history) {
    nlohmann::json j{{"epoch", log.epoch},
                     {"alpha", log.losses.alpha},
                     {"per_expert_loss", log.losses.per_expert},
                     {"total_loss", log.losses.total},
                     {"lr", log.lr}};
    lines += j.dump();
    lines += '\n';
  }
  return lines;
}

inline std::string csv_cell(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string{};
}

}  // namespace detail

inline std::string reports_to_csv(const std::map<Strategy, MetricsReport>& reports) {
  std::string csv = "strategy,region,count,mae,rmse,pearson_pct,uce\n";
  for (const auto& [strategy, report] : reports) {
    const std::pair<const char*, const RegionMetrics*> rows[] = {
        {"all", &report.all},
        {"many", &report.many},
        {"medium", &report.medium},
        {"few", &report.few}};
    for (const auto& [name, metrics] : rows) {
      csv += std::string(to_string(strategy)) + ',' + name + ',' +
             std::to_string(metrics->count) + ',' + detail::csv_cell(metrics->mae) + ',' +
             detail::csv_cell(metrics->rmse) + ',' + detail::csv_cell(metrics->pearson_pct) + ',' +
             detail::csv_cell(metrics->uce) + '\n';
    }
  }
  return csv;
}

// Trains every candidate expert count, selects the winner on the validation
// set, evaluates each configured strategy on the test set, and writes the
// whole run (config snapshot, per-candidate training logs and checkpoints,
// report.json, report.csv) into config.output_dir when it is non-empty.
inline ExperimentResult run_experiment(const ExperimentConfig& config) {
  namespace fs = std::filesystem;
  const bool persist = !config.output_dir.empty();
  fs::path dir(config.output_dir);
  if (persist) {
    fs::create_directories(dir);
    detail::write_text(dir / "config.json",
                       experiment_config_to_json(config).dump(2) + "\n");
    detail::write_text(dir / "status.json",
                       nlohmann::json{{"status", "running"}}.dump(2) + "\n");
  }

  try {
    // Resolve data.
    Dataset train_set, val_set, test_set;
    if (config.synthetic) {
      SyntheticData data = generate_synthetic(*config.synthetic, config.seed);
      train_set = std::move(data.train);
      val_set = std::move(data.val);
      test_set = std::move(data.test);
    } else if (config.csv) {
      train_set = load_csv(config.csv->train_path, config.csv->target_column);
      val_set = load_csv(config.csv->val_path, config.csv->target_column);
      test_set = load_csv(config.csv->test_path, config.csv->target_column);
    } else {
      throw ConfigError("experiment: no dataset source configured");
    }

    const std::vector<std::size_t> candidates =
        config.sweep ? config.sweep->expert_counts
                     : std::vector<std::size_t>{config.train.num_experts};
    if (candidates.empty()) throw ConfigError("experiment: empty sweep list");

    const SelectionMetric selection =
        config.sweep && config.sweep->selection
            ? *config.sweep->selection
            : (config.train.loss == LossKind::l2 ? SelectionMetric::pearson
                                                 : SelectionMetric::mae);
    const Strategy selection_strategy = config.eval.strategies.front();

    ExperimentResult result;
    for (std::size_t experts : candidates) {
      CandidateResult cand;
      cand.experts = experts;

      ModelConfig mc;
      mc.input_dim = train_set.dim();
      mc.hidden = config.hidden;
      mc.num_experts = experts;
      mc.hidden_activation = config.hidden_activation;
      cand.model = build_model(mc, config.seed);

      TrainConfig tc = config.train;
      tc.num_experts = experts;
      tc.seed = config.seed;
      // A single expert has nothing to blend; the dynamic schedule would
      // just scale the lone loss by alpha, so it degenerates to flat.
      if (experts == 1) tc.schedule = ScheduleMode::flat;
      // Plain L1/L2 training never touches the log-scale heads; pin them to
      // zero so those baselines predict a unit scale rather than init noise.
      if (tc.loss != LossKind::laplace_nll) {
        for (auto& head : cand.model.heads) {
          for (double& w : head.log_scale.weights.values()) w = 0.0;
          for (double& b : head.log_scale.bias) b = 0.0;
        }
      }

      const WeightTable weights = training_weights(train_set.targets, experts, tc);
      cand.history = train(cand.model, train_set.features, train_set.targets, weights, tc);

      cand.validation =
          evaluate_model(cand.model, val_set.features, val_set.targets,
                         train_set.targets, selection_strategy, config.eval.bin_width,
                         config.eval.spread);
      cand.validation_score = selection == SelectionMetric::mae
                                  ? cand.validation.all.mae.value()
                                  : -cand.validation.all.pearson_pct.value();

      for (Strategy strategy : config.eval.strategies)
        cand.test.emplace(strategy, evaluate_model(cand.model, test_set.features,
                                                   test_set.targets, train_set.targets,
                                                   strategy, config.eval.bin_width,
                                                   config.eval.spread));

      if (persist) {
        const std::string tag = "_m" + std::to_string(experts);
        detail::write_text(dir / ("train_log" + tag + ".jsonl"),
                           detail::training_log_lines(cand.history));
        save_model(cand.model, (dir / ("model" + tag + ".json")).string());
      }
      result.candidates.push_back(std::move(cand));
    }

    result.winner_index = 0;
    for (std::size_t i = 1; i < result.candidates.size(); ++i)
      if (result.candidates[i].validation_score <
          result.candidates[result.winner_index].validation_score)
        result.winner_index = i;

    nlohmann::json report;
    report["schema_version"] = kReportSchemaVersion;
    report["kind"] = "experiment";
    report["seed"] = config.seed;
    report["selection"] = {
        {"metric", selection == SelectionMetric::mae ? "mae" : "pearson"},
        {"strategy", to_string(selection_strategy)}};
    report["winner"] = {
        {"experts", result.winner().experts},
        {"validation_score", result.winner().validation_score}};
    report["candidates"] = nlohmann::json::array();
    for (const auto& cand : result.candidates) {
      nlohmann::json tests;
      for (const auto& [strategy, rep] : cand.test)
        tests[to_string(strategy)] = metrics_report_to_json(rep);
      report["candidates"].push_back({{"experts", cand.experts},
                                      {"validation_score", cand.validation_score},
                                      {"validation", metrics_report_to_json(cand.validation)},
                                      {"test", tests}});
    }
    result.report = report;

    if (persist) {
      detail::write_text(dir / "report.json", report.dump(2) + "\n");
      detail::write_text(dir / "report.csv", reports_to_csv(result.winner().test));
      save_model(result.winner().model, (dir / "model.json").string());
      detail::write_text(dir / "status.json",
                         nlohmann::json{{"status", "complete"}}.dump(2) + "\n");
    }
    return result;
  } catch (const std::exception& e) {
    if (persist)
      detail::write_text(dir / "status.json",
                         nlohmann::json{{"status", "failed"}, {"error", e.what()}}.dump(2) +
                             "\n");
    throw;
  }
}

}  // namespace uvote
