#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "uvote/common.hpp"
#include "uvote/matrix.hpp"

namespace uvote {

// Equal-width histogram over the target range. The first bin edge is
// aligned to a multiple of the width so bins land on the same grid
// regardless of the exact minimum.
struct HistogramDensity {
  double origin = 0.0;
  double width = 1.0;
  std::vector<long long> counts;
  long long total = 0;
  std::vector<std::size_t> sample_bins;  // bin of each input sample, in order

  std::size_t bin_count() const { return counts.size(); }

  // May fall outside [0, bin_count) for values beyond the training range.
  long long bin_index(double y) const {
    return static_cast<long long>(std::floor((y - origin) / width));
  }

  long long count_at(double y) const {
    if (!std::isfinite(y)) return 0;
    const double offset = std::floor((y - origin) / width);
    if (offset < 0.0 || offset >= static_cast<double>(counts.size())) return 0;
    return counts[static_cast<std::size_t>(offset)];
  }

  std::vector<double> edges() const {
    std::vector<double> e(counts.size() + 1);
    for (std::size_t i = 0; i < e.size(); ++i) e[i] = origin + width * static_cast<double>(i);
    return e;
  }
};

inline HistogramDensity histogram_density(const std::vector<double>& targets,
                                          double bin_width) {
  if (targets.empty()) throw InputError("histogram_density: empty targets");
  if (!(bin_width > 0.0)) throw InputError("histogram_density: bin width must be positive");
  if (!all_finite(targets)) throw InputError("histogram_density: non-finite target");

  const auto [lo_it, hi_it] = std::minmax_element(targets.begin(), targets.end());
  HistogramDensity hist;
  hist.width = bin_width;
  hist.origin = std::floor(*lo_it / bin_width) * bin_width;
  if ((*hi_it - hist.origin) / bin_width > 5e7)
    throw InputError("histogram_density: bin width too small for the target range");
  const long long top = static_cast<long long>(std::floor((*hi_it - hist.origin) / bin_width));
  hist.counts.assign(static_cast<std::size_t>(top) + 1, 0);
  hist.sample_bins.reserve(targets.size());
  for (double y : targets) {
    long long b = hist.bin_index(y);
    b = std::clamp<long long>(b, 0, top);  // guards float rounding at the edges
    hist.counts[static_cast<std::size_t>(b)] += 1;
    hist.sample_bins.push_back(static_cast<std::size_t>(b));
  }
  hist.total = static_cast<long long>(targets.size());
  return hist;
}

// Gaussian kernel density estimate over a fixed support set.
class KdeDensity {
 public:
  KdeDensity(std::vector<double> support, double bandwidth)
      : support_(std::move(support)), bandwidth_(bandwidth) {
    if (support_.empty()) throw InputError("kde: empty support");
    if (!(bandwidth_ > 0.0)) throw InputError("kde: bandwidth must be positive");
    if (!all_finite(support_)) throw InputError("kde: non-finite support point");
  }

  double operator()(double query) const {
    const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    double acc = 0.0;
    for (double x : support_) {
      const double u = (query - x) / bandwidth_;
      acc += norm * std::exp(-0.5 * u * u);
    }
    return acc / (static_cast<double>(support_.size()) * bandwidth_);
  }

  double bandwidth() const { return bandwidth_; }
  const std::vector<double>& support() const { return support_; }

 private:
  std::vector<double> support_;
  double bandwidth_;
};

inline double kde_density(const std::vector<double>& targets, double bandwidth,
                          double query) {
  return KdeDensity(targets, bandwidth)(query);
}

// Per-sample, per-expert weights (1/f_n)^(p_m) with p_m = m/(M-1); a single
// expert gets p = 0. Column 0 is therefore always all ones.
struct WeightTable {
  Matrix weights;               // N x M
  std::vector<double> powers;   // M
};

inline std::vector<double> expert_powers(std::size_t num_experts) {
  if (num_experts == 0) throw InputError("expert_powers: need at least one expert");
  std::vector<double> p(num_experts, 0.0);
  for (std::size_t m = 1; m < num_experts; ++m)
    p[m] = static_cast<double>(m) / static_cast<double>(num_experts - 1);
  return p;
}

// `normalize_columns` rescales every expert column to mean 1; used when the
// frequencies come from a KDE, whose absolute scale is arbitrary.
inline WeightTable expert_weights(const std::vector<double>& frequencies,
                                  std::size_t num_experts,
                                  bool normalize_columns = false) {
  if (frequencies.empty()) throw InputError("expert_weights: empty frequencies");
  constexpr double kFrequencyFloor = 1e-12;
  WeightTable table;
  table.powers = expert_powers(num_experts);
  table.weights = Matrix(frequencies.size(), num_experts);
  for (std::size_t n = 0; n < frequencies.size(); ++n) {
    const double f = frequencies[n];
    if (!(f > 0.0) || !std::isfinite(f))
      throw InputError("expert_weights: frequency of sample " + std::to_string(n) +
                       " must be positive (density underflow?)");
    const double clamped = std::max(f, kFrequencyFloor);
    for (std::size_t m = 0; m < num_experts; ++m)
      table.weights(n, m) = std::pow(clamped, -table.powers[m]);
  }
  if (normalize_columns) {
    for (std::size_t m = 0; m < num_experts; ++m) {
      double mean = 0.0;
      for (std::size_t n = 0; n < frequencies.size(); ++n) mean += table.weights(n, m);
      mean /= static_cast<double>(frequencies.size());
      for (std::size_t n = 0; n < frequencies.size(); ++n) table.weights(n, m) /= mean;
    }
  }
  return table;
}

inline WeightTable uniform_weights(std::size_t n, std::size_t num_experts) {
  WeightTable table;
  table.powers.assign(num_experts, 0.0);
  table.weights = Matrix(n, num_experts, 1.0);
  return table;
}

}  // namespace uvote
