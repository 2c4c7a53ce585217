#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "uvote/common.hpp"
#include "uvote/dataset.hpp"
#include "uvote/rng.hpp"

namespace uvote {

// Long-tailed regression benchmark with a controllable imbalance factor.
//
// Targets live on [0, bins*bin_width). Bin counts follow a geometric decay
// whose max/min ratio realizes the requested factor. The clean target is a
// cubic in the signal feature, y = g(u) = u^3, the additive Laplace noise has
// scale noise_base + noise_slope * y / range (so the heteroscedasticity is
// learnable from the input), and the observed signal feature is u plus
// Gaussian measurement noise. That last part is what makes the imbalance
// matter: with a noisy feature the posterior over the target leans toward
// the dense region, so an unweighted fit is biased in the tail. Remaining
// features are standard normal nuisance.
struct SyntheticSpec {
  std::size_t n = 5000;
  std::size_t dim = 4;
  double imbalance = 100.0;
  std::size_t bins = 100;
  double bin_width = 1.0;
  double noise_base = 0.5;
  double noise_slope = 2.0;
  double feature_noise = 0.35;
  double train_fraction = 0.70;
  double val_fraction = 0.15;

  double target_range() const { return static_cast<double>(bins) * bin_width; }
  double noise_scale_at(double y) const {
    return noise_base + noise_slope * y / target_range();
  }
  static double ground_truth(double x0) { return x0 * x0 * x0; }
  static double ground_truth_inverse(double y) { return std::cbrt(y); }
};

struct SyntheticData {
  Dataset train;
  Dataset val;
  Dataset test;
  // Per-sample true noise scales, aligned with each split.
  std::vector<double> train_noise_scale;
  std::vector<double> val_noise_scale;
  std::vector<double> test_noise_scale;
  std::vector<long long> bin_counts;  // whole generated set
  double realized_imbalance = 1.0;
};

namespace detail {

// Integer bin counts summing to n whose max/min ratio realizes `imbalance`
// almost exactly: the end bins are pinned to (c_max, c_min) and only the
// interior is scaled to absorb the total.
inline std::vector<long long> plan_bin_counts(std::size_t n, std::size_t bins,
                                              double imbalance) {
  if (bins == 0) throw ConfigError("synthetic: bins must be >= 1");
  if (!(imbalance >= 1.0)) throw ConfigError("synthetic: imbalance factor must be >= 1");
  const long long total = static_cast<long long>(n);

  if (bins == 1) return {total};

  if (imbalance == 1.0) {
    const long long q = total / static_cast<long long>(bins);
    if (q < 1) throw ConfigError("synthetic: not enough samples for the requested bins");
    std::vector<long long> counts(bins, q);
    long long rem = total - q * static_cast<long long>(bins);
    for (std::size_t b = 0; rem > 0; ++b, --rem) counts[b] += 1;
    return counts;
  }

  const std::size_t b_last = bins - 1;

  if (bins == 2) {  // no interior bins to absorb the total; solve directly
    const long long tail = std::max<long long>(
        1, std::llround(static_cast<double>(total) / (1.0 + imbalance)));
    if (total - tail < tail)
      throw ConfigError("synthetic: imbalance factor infeasible for two bins");
    return {total - tail, tail};
  }

  // Normalizer of the pure geometric profile at c_min = 1.
  double norm = 0.0;
  for (std::size_t j = 0; j < bins; ++j)
    norm += std::pow(imbalance, static_cast<double>(j) / static_cast<double>(b_last));
  long long c_min = std::max<long long>(1, std::llround(static_cast<double>(total) / norm));

  auto c_max_for = [&](long long cm) { return std::llround(imbalance * static_cast<double>(cm)); };
  auto min_total = [&](long long cm) {
    return c_max_for(cm) + static_cast<long long>(b_last) * cm;
  };
  auto max_total = [&](long long cm) {
    return c_max_for(cm) * static_cast<long long>(b_last) + cm;
  };

  while (c_min > 1 && min_total(c_min) > total) --c_min;
  while (max_total(c_min) < total) ++c_min;
  if (min_total(c_min) > total)
    throw ConfigError("synthetic: imbalance factor " + std::to_string(imbalance) +
                      " infeasible for n=" + std::to_string(n) + " (needs count < 1)");

  const long long c_max = c_max_for(c_min);
  const double rho = std::pow(static_cast<double>(c_min) / static_cast<double>(c_max),
                              1.0 / static_cast<double>(b_last));

  auto profile = [&](double scale) {
    std::vector<long long> counts(bins);
    counts[0] = c_max;
    counts[b_last] = c_min;
    for (std::size_t b = 1; b < b_last; ++b) {
      const double ideal = scale * static_cast<double>(c_max) *
                           std::pow(rho, static_cast<double>(b));
      counts[b] = std::clamp(std::llround(ideal), c_min, c_max);
    }
    return counts;
  };
  auto sum_of = [](const std::vector<long long>& c) {
    long long s = 0;
    for (long long v : c) s += v;
    return s;
  };

  double lo = 0.0, hi = 1.0;
  while (sum_of(profile(hi)) < total) hi *= 2.0;
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (sum_of(profile(mid)) >= total)
      hi = mid;
    else
      lo = mid;
  }
  std::vector<long long> counts = profile(hi);

  // Absorb any rounding residue in interior bins, keeping the pinned
  // extremes as the global max and min.
  long long delta = sum_of(counts) - total;
  while (delta != 0) {
    bool moved = false;
    for (std::size_t b = 1; b < b_last && delta != 0; ++b) {
      if (delta > 0 && counts[b] > c_min) {
        counts[b] -= 1;
        --delta;
        moved = true;
      } else if (delta < 0 && counts[b] < c_max) {
        counts[b] += 1;
        ++delta;
        moved = true;
      }
    }
    if (!moved)
      throw ConfigError("synthetic: cannot match n with the requested imbalance");
  }
  return counts;
}

// Largest-remainder split of a bin into train/val/test, forcing a training
// sample whenever the bin is occupied and a test sample from two upward.
inline std::array<std::size_t, 3> split_bin(std::size_t count, double train_fraction,
                                            double val_fraction) {
  const double fracs[3] = {train_fraction, val_fraction,
                           1.0 - train_fraction - val_fraction};
  std::size_t base[3];
  double remainder[3];
  std::size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    const double ideal = fracs[i] * static_cast<double>(count);
    base[i] = static_cast<std::size_t>(ideal);
    remainder[i] = ideal - static_cast<double>(base[i]);
    assigned += base[i];
  }
  // Ties and leftovers favour train, then test, then val.
  const int order[3] = {0, 2, 1};
  while (assigned < count) {
    int best = order[0];
    for (int idx : order)
      if (remainder[idx] > remainder[best]) best = idx;
    base[best] += 1;
    remainder[best] = -1.0;
    ++assigned;
  }
  if (count >= 1 && base[0] == 0) {
    if (base[2] >= base[1] && base[2] > 0)
      base[2] -= 1;
    else
      base[1] -= 1;
    base[0] += 1;
  }
  if (count >= 2 && base[2] == 0) {
    if (base[0] >= 2)
      base[0] -= 1;
    else
      base[1] -= 1;
    base[2] += 1;
  }
  return {base[0], base[1], base[2]};
}

}  // namespace detail

inline SyntheticData generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  if (spec.n < 100) throw ConfigError("synthetic: n must be >= 100");
  if (spec.dim < 1) throw ConfigError("synthetic: dim must be >= 1");
  if (!(spec.bin_width > 0.0)) throw ConfigError("synthetic: bin_width must be positive");
  if (!(spec.train_fraction > 0.0) || !(spec.val_fraction >= 0.0) ||
      !(spec.train_fraction + spec.val_fraction < 1.0))
    throw ConfigError("synthetic: split fractions must leave room for a test set");
  if (!(spec.noise_base > 0.0)) throw ConfigError("synthetic: noise_base must be positive");

  const auto counts = detail::plan_bin_counts(spec.n, spec.bins, spec.imbalance);

  std::mt19937_64 rng(seed);
  SyntheticData data;
  data.bin_counts = counts;

  long long max_count = 0, min_count = counts[0];
  for (long long c : counts) {
    max_count = std::max(max_count, c);
    if (c > 0) min_count = std::min(min_count, c);
  }
  data.realized_imbalance = static_cast<double>(max_count) / static_cast<double>(min_count);

  struct Row {
    std::vector<double> x;
    double y;
    double scale;
  };
  std::vector<Row> split_rows[3];

  for (std::size_t b = 0; b < counts.size(); ++b) {
    const std::size_t count = static_cast<std::size_t>(counts[b]);
    const auto quota = detail::split_bin(count, spec.train_fraction, spec.val_fraction);
    for (std::size_t i = 0; i < count; ++i) {
      Row row;
      row.y = (static_cast<double>(b) + uniform01(rng)) * spec.bin_width;
      row.scale = spec.noise_scale_at(row.y);
      const double noise = laplace(rng, row.scale);
      row.x.resize(spec.dim);
      row.x[0] = SyntheticSpec::ground_truth_inverse(row.y - noise) +
                 spec.feature_noise * standard_normal(rng);
      for (std::size_t c = 1; c < spec.dim; ++c) row.x[c] = standard_normal(rng);
      const int split = i < quota[0] ? 0 : (i < quota[0] + quota[1] ? 1 : 2);
      split_rows[split].push_back(std::move(row));
    }
  }

  auto pack = [&](const std::vector<Row>& rows, Dataset& ds, std::vector<double>& scales) {
    ds.features = Matrix(rows.size(), spec.dim);
    ds.targets.resize(rows.size());
    scales.resize(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      for (std::size_t c = 0; c < spec.dim; ++c) ds.features(r, c) = rows[r].x[c];
      ds.targets[r] = rows[r].y;
      scales[r] = rows[r].scale;
    }
  };
  pack(split_rows[0], data.train, data.train_noise_scale);
  pack(split_rows[1], data.val, data.val_noise_scale);
  pack(split_rows[2], data.test, data.test_noise_scale);
  return data;
}

}  // namespace uvote
