#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "uvote/dataset.hpp"
#include "uvote/rng.hpp"
#include "uvote/synthetic.hpp"

using Catch::Approx;
using namespace uvote;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / name;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("csv loads features and target by header name") {
  const auto path = temp_file("uvote_basic.csv");
  write_file(path, "f0,f1,target\n1,2,3\n4,5,6\n-0.5,0.25,10\n");
  const Dataset ds = load_csv(path.string());
  REQUIRE(ds.size() == 3);
  REQUIRE(ds.dim() == 2);
  REQUIRE(ds.features(0, 1) == 2.0);
  REQUIRE(ds.targets[2] == 10.0);
  std::filesystem::remove(path);
}

TEST_CASE("target column may sit anywhere in the header") {
  const auto path = temp_file("uvote_target_first.csv");
  write_file(path, "label,a,b\n7,1,2\n8,3,4\n");
  const Dataset ds = load_csv(path.string(), "label");
  REQUIRE(ds.targets == std::vector<double>{7.0, 8.0});
  REQUIRE(ds.features(1, 0) == 3.0);
  REQUIRE(ds.features(1, 1) == 4.0);
  std::filesystem::remove(path);
}

TEST_CASE("blank lines are parse errors naming the line") {
  const auto path = temp_file("uvote_blank.csv");
  write_file(path, "f0,target\n1,2\n\n3,4\n");
  try {
    load_csv(path.string());
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    REQUIRE(std::string(e.what()).find("line 3") != std::string::npos);
  }
  std::filesystem::remove(path);
}

TEST_CASE("ragged rows and bad cells carry their location") {
  const auto ragged = temp_file("uvote_ragged.csv");
  write_file(ragged, "f0,f1,target\n1,2,3\n4,5\n");
  REQUIRE_THROWS_AS(load_csv(ragged.string()), ParseError);
  std::filesystem::remove(ragged);

  const auto bad_cell = temp_file("uvote_badcell.csv");
  write_file(bad_cell, "f0,target\n1,2\nx,4\n");
  try {
    load_csv(bad_cell.string());
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    const std::string what = e.what();
    REQUIRE(what.find("line 3") != std::string::npos);
    REQUIRE(what.find("column 1") != std::string::npos);
  }
  std::filesystem::remove(bad_cell);
}

TEST_CASE("missing target column is rejected") {
  const auto path = temp_file("uvote_notarget.csv");
  write_file(path, "f0,f1\n1,2\n");
  REQUIRE_THROWS_AS(load_csv(path.string()), ParseError);
  std::filesystem::remove(path);
}

TEST_CASE("save then load reproduces the dataset exactly") {
  std::mt19937_64 rng(77);
  Dataset ds;
  ds.features = Matrix(40, 3);
  for (double& v : ds.features.values()) v = uniform_range(rng, -1e3, 1e3);
  ds.targets.resize(40);
  for (double& v : ds.targets) v = uniform_range(rng, -50.0, 50.0);

  const auto path = temp_file("uvote_roundtrip.csv");
  save_csv(ds, path.string());
  const Dataset back = load_csv(path.string());
  std::filesystem::remove(path);

  REQUIRE(back.size() == ds.size());
  REQUIRE(back.dim() == ds.dim());
  for (std::size_t r = 0; r < ds.size(); ++r) {
    REQUIRE(back.targets[r] == ds.targets[r]);
    for (std::size_t c = 0; c < ds.dim(); ++c)
      REQUIRE(back.features(r, c) == ds.features(r, c));
  }
}

TEST_CASE("generated splits survive the csv round trip exactly") {
  SyntheticSpec spec;
  spec.n = 300;
  spec.dim = 3;
  spec.imbalance = 6.0;
  spec.bins = 15;
  const SyntheticData data = generate_synthetic(spec, 21);

  const auto path = temp_file("uvote_synth_roundtrip.csv");
  save_csv(data.test, path.string());
  const Dataset back = load_csv(path.string());
  std::filesystem::remove(path);

  REQUIRE(back.size() == data.test.size());
  for (std::size_t r = 0; r < back.size(); ++r) {
    REQUIRE(std::abs(back.targets[r] - data.test.targets[r]) < 1e-12);
    for (std::size_t c = 0; c < back.dim(); ++c)
      REQUIRE(back.features(r, c) == data.test.features(r, c));
  }
}

TEST_CASE("balanced generation is near-uniform") {
  SyntheticSpec spec;
  spec.n = 2000;
  spec.dim = 2;
  spec.imbalance = 1.0;
  const SyntheticData data = generate_synthetic(spec, 3);
  long long lo = data.bin_counts[0], hi = data.bin_counts[0];
  for (long long c : data.bin_counts) {
    lo = std::min(lo, c);
    hi = std::max(hi, c);
  }
  REQUIRE(static_cast<double>(hi) / static_cast<double>(lo) <= 1.2);
  REQUIRE(data.realized_imbalance <= 1.2);
}

TEST_CASE("requested imbalance factor is realized within twenty percent") {
  SyntheticSpec spec;
  spec.n = 5000;
  spec.dim = 4;
  spec.imbalance = 100.0;
  const SyntheticData data = generate_synthetic(spec, 11);
  REQUIRE(data.realized_imbalance >= 80.0);
  REQUIRE(data.realized_imbalance <= 120.0);

  long long total = 0;
  for (long long c : data.bin_counts) total += c;
  REQUIRE(total == 5000);
  REQUIRE(data.train.size() + data.val.size() + data.test.size() == 5000);
}

TEST_CASE("imbalance realization holds across sizes and factors") {
  for (std::size_t n : {2000, 3500, 8000}) {
    for (double factor : {3.0, 17.0, 60.0, 250.0}) {
      SyntheticSpec spec;
      spec.n = n;
      spec.dim = 1;
      spec.imbalance = factor;
      const SyntheticData data = generate_synthetic(spec, n + std::size_t(factor));
      REQUIRE(data.realized_imbalance >= 0.8 * factor);
      REQUIRE(data.realized_imbalance <= 1.2 * factor);
      long long total = 0;
      for (long long c : data.bin_counts) total += c;
      REQUIRE(total == static_cast<long long>(n));
    }
  }
}

TEST_CASE("small bin counts are planned exactly") {
  for (std::size_t bins : {1, 2, 3, 5}) {
    SyntheticSpec spec;
    spec.n = 2400;
    spec.dim = 1;
    spec.bins = bins;
    spec.bin_width = 10.0;
    spec.imbalance = bins == 1 ? 1.0 : 7.0;
    const SyntheticData data = generate_synthetic(spec, bins);
    REQUIRE(data.bin_counts.size() == bins);
    long long total = 0;
    for (long long c : data.bin_counts) {
      REQUIRE(c >= 1);
      total += c;
    }
    REQUIRE(total == 2400);
    if (bins >= 2) {
      REQUIRE(data.realized_imbalance >= 0.8 * 7.0);
      REQUIRE(data.realized_imbalance <= 1.2 * 7.0);
    }
  }
}

TEST_CASE("tail bins still contribute test samples") {
  SyntheticSpec spec;
  spec.n = 5000;
  spec.imbalance = 100.0;
  const SyntheticData data = generate_synthetic(spec, 4);
  // the sparsest bin has at least two samples, so the split policy puts at
  // least one of them in train and one in test
  const double top = spec.target_range();
  long long tail_test = 0;
  for (double y : data.test.targets)
    if (y > 0.8 * top) ++tail_test;
  REQUIRE(tail_test >= 10);
}

TEST_CASE("generation is deterministic per seed, byte for byte") {
  SyntheticSpec spec;
  spec.n = 600;
  spec.dim = 3;
  spec.imbalance = 20.0;
  spec.bins = 30;
  const auto a = generate_synthetic(spec, 42);
  const auto b = generate_synthetic(spec, 42);

  const auto pa = temp_file("uvote_det_a.csv");
  const auto pb = temp_file("uvote_det_b.csv");
  save_csv(a.train, pa.string());
  save_csv(b.train, pb.string());
  REQUIRE(read_file(pa) == read_file(pb));
  std::filesystem::remove(pa);
  std::filesystem::remove(pb);

  const auto c = generate_synthetic(spec, 43);
  REQUIRE(c.train.targets != a.train.targets);
}

TEST_CASE("noise scales are recorded per split and grow with the target") {
  SyntheticSpec spec;
  spec.n = 1000;
  spec.imbalance = 10.0;
  spec.bins = 20;
  const SyntheticData data = generate_synthetic(spec, 9);
  REQUIRE(data.train_noise_scale.size() == data.train.size());
  REQUIRE(data.test_noise_scale.size() == data.test.size());
  for (std::size_t i = 0; i < data.train.size(); ++i)
    REQUIRE(data.train_noise_scale[i] ==
            Approx(spec.noise_scale_at(data.train.targets[i])).epsilon(1e-12));
}

TEST_CASE("features encode the inverted ground truth") {
  SyntheticSpec spec;
  spec.n = 500;
  spec.dim = 2;
  spec.imbalance = 5.0;
  spec.bins = 25;
  spec.feature_noise = 0.0;  // isolate the inversion relation
  const SyntheticData data = generate_synthetic(spec, 31);
  // y - g(x0) is the sampled noise; it should be within a plausible range of
  // the recorded scale rather than unbounded
  for (std::size_t i = 0; i < data.train.size(); ++i) {
    const double noise =
        data.train.targets[i] - SyntheticSpec::ground_truth(data.train.features(i, 0));
    REQUIRE(std::abs(noise) < 40.0 * data.train_noise_scale[i]);
  }
}

TEST_CASE("infeasible imbalance requests are rejected") {
  SyntheticSpec spec;
  spec.n = 100;
  spec.bins = 100;
  spec.imbalance = 100.0;  // needs bins below one sample
  REQUIRE_THROWS_AS(generate_synthetic(spec, 1), ConfigError);

  SyntheticSpec bad;
  bad.imbalance = 0.5;
  REQUIRE_THROWS_AS(generate_synthetic(bad, 1), ConfigError);

  SyntheticSpec tiny;
  tiny.n = 50;
  REQUIRE_THROWS_AS(generate_synthetic(tiny, 1), ConfigError);
}
