#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "uvote/aggregate.hpp"
#include "uvote/common.hpp"
#include "uvote/density.hpp"
#include "uvote/model.hpp"

namespace uvote {

inline double mae(std::span<const double> y, std::span<const double> y_hat) {
  if (y.size() != y_hat.size()) throw ShapeError("mae: length mismatch");
  if (y.empty()) throw InputError("mae: empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) acc += std::abs(y[i] - y_hat[i]);
  return acc / static_cast<double>(y.size());
}

inline double rmse(std::span<const double> y, std::span<const double> y_hat) {
  if (y.size() != y_hat.size()) throw ShapeError("rmse: length mismatch");
  if (y.empty()) throw InputError("rmse: empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double r = y[i] - y_hat[i];
    acc += r * r;
  }
  return std::sqrt(acc / static_cast<double>(y.size()));
}

// Pearson correlation coefficient scaled to a percentage.
inline double pearson_pct(std::span<const double> y, std::span<const double> y_hat) {
  if (y.size() != y_hat.size()) throw ShapeError("pearson_pct: length mismatch");
  if (y.empty()) throw InputError("pearson_pct: empty input");
  const double n = static_cast<double>(y.size());
  double mean_y = 0.0, mean_p = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    mean_y += y[i];
    mean_p += y_hat[i];
  }
  mean_y /= n;
  mean_p /= n;
  double cov = 0.0, var_y = 0.0, var_p = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double dy = y[i] - mean_y;
    const double dp = y_hat[i] - mean_p;
    cov += dy * dp;
    var_y += dy * dy;
    var_p += dp * dp;
  }
  if (var_y == 0.0 || var_p == 0.0)
    throw MetricError("pearson_pct: correlation undefined (zero variance)");
  return cov / std::sqrt(var_y * var_p) * 100.0;
}

// How the predicted Laplace log scale converts to a per-sample spread when
// comparing against bin MAE: the exact standard deviation sqrt(2)*b, or the
// scale b itself (the mean absolute deviation).
enum class UncertaintySpread { laplace_std, laplace_scale };

inline const char* to_string(UncertaintySpread s) {
  return s == UncertaintySpread::laplace_std ? "laplace_std" : "laplace_scale";
}
inline UncertaintySpread spread_from_string(std::string_view s) {
  if (s == "laplace_std") return UncertaintySpread::laplace_std;
  if (s == "laplace_scale") return UncertaintySpread::laplace_scale;
  throw ConfigError("unknown uncertainty spread: " + std::string(s));
}

inline double spread_from_log_scale(double s_hat, UncertaintySpread spread) {
  const double b = std::exp(s_hat);
  return spread == UncertaintySpread::laplace_std ? std::sqrt(2.0) * b : b;
}

// Calibration error: bin-weighted gap between the MAE of a bin and the mean
// predicted spread of its samples, binned over the target range.
inline double uce(std::span<const double> y, std::span<const double> y_hat,
                  std::span<const double> s_hat, double bin_width,
                  UncertaintySpread spread = UncertaintySpread::laplace_std) {
  if (y.size() != y_hat.size() || y.size() != s_hat.size())
    throw ShapeError("uce: length mismatch");
  if (y.empty()) throw InputError("uce: empty input");
  const HistogramDensity bins = histogram_density({y.begin(), y.end()}, bin_width);
  const std::size_t b = bins.bin_count();
  std::vector<double> err_sum(b, 0.0), spread_sum(b, 0.0);
  std::vector<std::size_t> count(b, 0);
  for (std::size_t i = 0; i < y.size(); ++i) {
    const std::size_t bin = bins.sample_bins[i];
    err_sum[bin] += std::abs(y[i] - y_hat[i]);
    spread_sum[bin] += spread_from_log_scale(s_hat[i], spread);
    count[bin] += 1;
  }
  double acc = 0.0;
  const double n = static_cast<double>(y.size());
  for (std::size_t bin = 0; bin < b; ++bin) {
    if (count[bin] == 0) continue;
    const double c = static_cast<double>(count[bin]);
    acc += (c / n) * std::abs(err_sum[bin] / c - spread_sum[bin] / c);
  }
  return acc;
}

// ---- shot regions ------------------------------------------------------

enum class ShotRegion { many, medium, few };

inline const char* to_string(ShotRegion r) {
  switch (r) {
    case ShotRegion::many: return "many";
    case ShotRegion::medium: return "medium";
    case ShotRegion::few: return "few";
  }
  return "few";
}

constexpr long long kManyShotThreshold = 100;  // strictly more than this
constexpr long long kFewShotThreshold = 20;    // strictly fewer than this

struct ShotPartition {
  std::vector<ShotRegion> labels;       // one per test sample
  HistogramDensity train_histogram;     // counts the labels derive from

  static ShotRegion region_for_count(long long count) {
    if (count > kManyShotThreshold) return ShotRegion::many;
    if (count < kFewShotThreshold) return ShotRegion::few;
    return ShotRegion::medium;
  }
};

// Labels every test sample by the training count of its target bin. Bins
// unseen in training (including out-of-range targets) count as zero.
inline ShotPartition shot_partition(const std::vector<double>& train_targets,
                                    const std::vector<double>& test_targets,
                                    double bin_width) {
  ShotPartition part;
  part.train_histogram = histogram_density(train_targets, bin_width);
  part.labels.reserve(test_targets.size());
  for (double y : test_targets)
    part.labels.push_back(
        ShotPartition::region_for_count(part.train_histogram.count_at(y)));
  return part;
}

// ---- per-region report --------------------------------------------------

struct RegionMetrics {
  std::size_t count = 0;
  std::optional<double> mae;
  std::optional<double> rmse;
  std::optional<double> pearson_pct;
  std::optional<double> uce;
};

struct MetricsReport {
  Strategy strategy = Strategy::min_uncertainty;
  double bin_width = 1.0;
  RegionMetrics all;
  RegionMetrics many;
  RegionMetrics medium;
  RegionMetrics few;

  const RegionMetrics& region(ShotRegion r) const {
    switch (r) {
      case ShotRegion::many: return many;
      case ShotRegion::medium: return medium;
      case ShotRegion::few: return few;
    }
    return few;
  }
};

namespace detail {

// `strict` propagates an undefined correlation instead of recording null;
// used for the whole test set, where zero variance means a degenerate
// evaluation rather than a small region.
inline RegionMetrics region_metrics(std::span<const double> y,
                                    std::span<const double> y_hat,
                                    std::span<const double> s_hat, double bin_width,
                                    UncertaintySpread spread, bool strict) {
  RegionMetrics out;
  out.count = y.size();
  if (y.empty()) return out;
  out.mae = mae(y, y_hat);
  out.rmse = rmse(y, y_hat);
  out.uce = uce(y, y_hat, s_hat, bin_width, spread);
  try {
    out.pearson_pct = pearson_pct(y, y_hat);
  } catch (const MetricError&) {
    if (strict) throw;
    out.pearson_pct = std::nullopt;
  }
  return out;
}

}  // namespace detail

// Full evaluation protocol: aggregate the experts, split the test set into
// shot regions by training-bin counts, and compute all metrics per region.
inline MetricsReport evaluate_predictions(const ExpertOutput& outputs,
                                          const std::vector<double>& test_targets,
                                          const std::vector<double>& train_targets,
                                          Strategy strategy, double bin_width,
                                          UncertaintySpread spread = UncertaintySpread::laplace_std) {
  const AggregatedPrediction agg =
      aggregate(outputs, strategy,
                strategy == Strategy::oracle ? &test_targets : nullptr);
  const ShotPartition part = shot_partition(train_targets, test_targets, bin_width);

  MetricsReport report;
  report.strategy = strategy;
  report.bin_width = bin_width;
  report.all = detail::region_metrics(test_targets, agg.y_hat, agg.s_hat, bin_width,
                                      spread, /*strict=*/true);

  for (ShotRegion region : {ShotRegion::many, ShotRegion::medium, ShotRegion::few}) {
    std::vector<double> y, y_hat, s_hat;
    for (std::size_t i = 0; i < test_targets.size(); ++i) {
      if (part.labels[i] != region) continue;
      y.push_back(test_targets[i]);
      y_hat.push_back(agg.y_hat[i]);
      s_hat.push_back(agg.s_hat[i]);
    }
    RegionMetrics metrics =
        detail::region_metrics(y, y_hat, s_hat, bin_width, spread, /*strict=*/false);
    switch (region) {
      case ShotRegion::many: report.many = std::move(metrics); break;
      case ShotRegion::medium: report.medium = std::move(metrics); break;
      case ShotRegion::few: report.few = std::move(metrics); break;
    }
  }
  return report;
}

inline MetricsReport evaluate_model(const UvoteModel& model, const Matrix& test_inputs,
                                    const std::vector<double>& test_targets,
                                    const std::vector<double>& train_targets,
                                    Strategy strategy, double bin_width,
                                    UncertaintySpread spread = UncertaintySpread::laplace_std) {
  return evaluate_predictions(predict_all(model, test_inputs), test_targets,
                              train_targets, strategy, bin_width, spread);
}

}  // namespace uvote
