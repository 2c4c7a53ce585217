#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "uvote/density.hpp"
#include "uvote/rng.hpp"

using Catch::Approx;
using namespace uvote;

namespace {

// Independent oracle: the kernel sum written as a plain double loop over a
// vector of queries, sharing no code with KdeDensity.
std::vector<double> kde_brute_force(const std::vector<double>& data, double h,
                                    const std::vector<double>& queries) {
  std::vector<double> out;
  for (double q : queries) {
    double total = 0.0;
    for (double x : data) {
      const double u = (q - x) / h;
      total += std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi);
    }
    out.push_back(total / (static_cast<double>(data.size()) * h));
  }
  return out;
}

}  // namespace

TEST_CASE("histogram counts repeated targets") {
  const auto hist = histogram_density({1.0, 1.0, 2.0, 5.0}, 1.0);
  REQUIRE(hist.count_at(1.0) == 2);
  REQUIRE(hist.count_at(2.0) == 1);
  REQUIRE(hist.count_at(5.0) == 1);
  REQUIRE(hist.counts[hist.sample_bins[0]] == 2);  // per-sample lookup of y=1
  REQUIRE(hist.total == 4);
}

TEST_CASE("histogram with all-equal targets has one occupied bin") {
  const auto hist = histogram_density(std::vector<double>(17, 3.25), 0.5);
  long long occupied = 0;
  for (long long c : hist.counts)
    if (c > 0) ++occupied;
  REQUIRE(occupied == 1);
  REQUIRE(hist.count_at(3.25) == 17);
}

TEST_CASE("uniform grid targets give unit counts") {
  std::vector<double> targets;
  for (int i = 0; i < 100; ++i) targets.push_back(static_cast<double>(i));
  const auto hist = histogram_density(targets, 1.0);
  REQUIRE(hist.bin_count() == 100);
  for (long long c : hist.counts) REQUIRE(c == 1);
}

TEST_CASE("histogram partitions every sample exactly once") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> targets;
    const std::size_t n = 1 + bounded(rng, 300);
    for (std::size_t i = 0; i < n; ++i) targets.push_back(uniform_range(rng, -50.0, 50.0));
    const double width = uniform_range(rng, 0.1, 5.0);
    const auto hist = histogram_density(targets, width);
    long long sum = 0;
    for (long long c : hist.counts) sum += c;
    REQUIRE(sum == static_cast<long long>(n));
    REQUIRE(hist.sample_bins.size() == n);
    // edges equally spaced
    const auto edges = hist.edges();
    for (std::size_t i = 1; i < edges.size(); ++i)
      REQUIRE(edges[i] - edges[i - 1] == Approx(width).margin(1e-12));
  }
}

TEST_CASE("histogram rejects bad input") {
  REQUIRE_THROWS_AS(histogram_density({}, 1.0), InputError);
  REQUIRE_THROWS_AS(histogram_density({1.0}, 0.0), InputError);
  REQUIRE_THROWS_AS(histogram_density({1.0}, -2.0), InputError);
}

TEST_CASE("kde at a single support point matches the closed form") {
  // 1/(N h) * (2 pi)^{-1/2} with N = 1, h = 2
  const double expected = 1.0 / (1.0 * 2.0) * (1.0 / std::sqrt(2.0 * std::numbers::pi));
  REQUIRE(kde_density({0.7}, 2.0, 0.7) == Approx(expected).epsilon(1e-12));
  REQUIRE(kde_density({0.7}, 2.0, 0.7) == Approx(0.19947114020071635).epsilon(1e-10));
}

TEST_CASE("kde of symmetric points matches the brute-force oracle") {
  const std::vector<double> data{-1.5, 1.5};
  const double h = 0.8;
  const double at_center = kde_density(data, h, 0.0);
  const auto oracle = kde_brute_force(data, h, {0.0});
  REQUIRE(at_center == Approx(oracle[0]).epsilon(1e-15));
  // each point contributes the same mass at the midpoint
  const double single = kde_density({1.5}, h, 0.0);
  REQUIRE(at_center == Approx(single).epsilon(1e-12));
}

TEST_CASE("kde equals the brute-force oracle on random datasets") {
  std::mt19937_64 rng(123);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + bounded(rng, 200);
    std::vector<double> data;
    for (std::size_t i = 0; i < n; ++i) data.push_back(uniform_range(rng, -10.0, 10.0));
    const double h = uniform_range(rng, 0.05, 3.0);
    const KdeDensity kde(data, h);
    std::vector<double> queries;
    for (int q = 0; q < 20; ++q) queries.push_back(uniform_range(rng, -15.0, 15.0));
    const auto oracle = kde_brute_force(data, h, queries);
    for (std::size_t q = 0; q < queries.size(); ++q)
      REQUIRE(std::abs(kde(queries[q]) - oracle[q]) < 1e-12);
  }
}

TEST_CASE("kde decays monotonically beyond the data range") {
  const std::vector<double> data{-1.0, 0.0, 2.0};
  const KdeDensity kde(data, 0.5);
  double prev = kde(2.5);
  for (double q = 3.0; q < 12.0; q += 0.5) {
    const double cur = kde(q);
    REQUIRE(cur < prev);
    prev = cur;
  }
  REQUIRE(prev < 1e-12);
  REQUIRE(prev > 0.0);
}

TEST_CASE("kde is shift-invariant") {
  std::mt19937_64 rng(7);
  std::vector<double> data;
  for (int i = 0; i < 60; ++i) data.push_back(uniform_range(rng, 0.0, 5.0));
  const double h = 0.7, q = 2.3, shift = 1234.5;
  std::vector<double> shifted = data;
  for (double& x : shifted) x += shift;
  REQUIRE(kde_density(data, h, q) ==
          Approx(kde_density(shifted, h, q + shift)).margin(1e-12));
}

TEST_CASE("kde rejects a non-positive bandwidth") {
  REQUIRE_THROWS_AS(kde_density({1.0}, 0.0, 0.5), InputError);
  REQUIRE_THROWS_AS(kde_density({1.0}, -1.0, 0.5), InputError);
}

TEST_CASE("expert powers follow m/(M-1)") {
  REQUIRE(expert_powers(1) == std::vector<double>{0.0});
  REQUIRE(expert_powers(2) == std::vector<double>{0.0, 1.0});
  REQUIRE(expert_powers(3) == std::vector<double>{0.0, 0.5, 1.0});
}

TEST_CASE("expert weights follow the inverse-frequency power law") {
  const auto table = expert_weights({4.0, 1.0}, 3);
  // f=4: p=0 -> 1, p=0.5 -> 0.5, p=1 -> 0.25
  REQUIRE(table.weights(0, 0) == Approx(1.0));
  REQUIRE(table.weights(0, 1) == Approx(0.5));
  REQUIRE(table.weights(0, 2) == Approx(0.25));
  // f=1 needs no rebalancing: all ones
  REQUIRE(table.weights(1, 0) == Approx(1.0));
  REQUIRE(table.weights(1, 1) == Approx(1.0));
  REQUIRE(table.weights(1, 2) == Approx(1.0));
}

TEST_CASE("balanced data degenerates to uniform weights") {
  const auto table = expert_weights(std::vector<double>(10, 1.0), 4);
  for (std::size_t n = 0; n < 10; ++n)
    for (std::size_t m = 0; m < 4; ++m) REQUIRE(table.weights(n, m) == 1.0);
}

TEST_CASE("weight monotonicity in frequency and power") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const double f1 = uniform_range(rng, 1.0, 500.0);
    const double f2 = f1 + uniform_range(rng, 0.5, 100.0);
    const auto table = expert_weights({f1, f2}, 4);
    // fixed p > 0: strictly decreasing in f
    for (std::size_t m = 1; m < 4; ++m)
      REQUIRE(table.weights(0, m) > table.weights(1, m));
    // fixed f > 1: strictly decreasing in p, and column 0 stays at one
    REQUIRE(table.weights(1, 0) == 1.0);
    for (std::size_t m = 1; m < 4; ++m)
      REQUIRE(table.weights(1, m) < table.weights(1, m - 1));
    REQUIRE(all_finite(table.weights.values()));
  }
}

TEST_CASE("column normalization rescales to mean one") {
  const auto table = expert_weights({0.003, 0.04, 0.2}, 3, /*normalize_columns=*/true);
  for (std::size_t m = 0; m < 3; ++m) {
    double mean = 0.0;
    for (std::size_t n = 0; n < 3; ++n) {
      REQUIRE(table.weights(n, m) > 0.0);
      mean += table.weights(n, m);
    }
    REQUIRE(mean / 3.0 == Approx(1.0).epsilon(1e-12));
  }
  // column 0 is ones even after normalization
  for (std::size_t n = 0; n < 3; ++n) REQUIRE(table.weights(n, 0) == Approx(1.0));
}

TEST_CASE("non-positive frequencies are rejected") {
  REQUIRE_THROWS_AS(expert_weights({1.0, 0.0}, 2), InputError);
  REQUIRE_THROWS_AS(expert_weights({1.0, -3.0}, 2), InputError);
  REQUIRE_THROWS_AS(expert_weights({}, 2), InputError);
  REQUIRE_THROWS_AS(expert_weights({1.0}, 0), InputError);
}
