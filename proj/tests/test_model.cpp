#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "uvote/model.hpp"
#include "uvote/rng.hpp"

using Catch::Approx;
using namespace uvote;

namespace {

UvoteModel constant_head_model(double bias_y, double bias_s) {
  UvoteModel model;
  UvoteModel::Head head;
  head.value = DenseLayer{Matrix(1, 2, 0.0), {bias_y}, Activation::identity};
  head.log_scale = DenseLayer{Matrix(1, 2, 0.0), {bias_s}, Activation::identity};
  model.heads.push_back(head);
  return model;
}

}  // namespace

TEST_CASE("zero-weight heads emit their biases for every input") {
  const UvoteModel model = constant_head_model(4.5, -0.25);
  const auto out = predict_all(model, Matrix::from_rows({{1.0, 2.0}, {-3.0, 0.5}}));
  for (std::size_t n = 0; n < 2; ++n) {
    REQUIRE(out.y_hat(n, 0) == 4.5);
    REQUIRE(out.s_hat(n, 0) == -0.25);
  }
}

TEST_CASE("copied heads produce identical columns") {
  UvoteModel model = build_model({.input_dim = 3, .hidden = {8}, .num_experts = 2}, 17);
  model.heads[1] = model.heads[0];
  const Matrix x = Matrix::from_rows({{0.3, -0.7, 1.1}, {2.0, 0.0, -1.0}});
  const auto out = predict_all(model, x);
  for (std::size_t n = 0; n < 2; ++n) {
    REQUIRE(out.y_hat(n, 0) == out.y_hat(n, 1));
    REQUIRE(out.s_hat(n, 0) == out.s_hat(n, 1));
  }
}

TEST_CASE("hand-set trunk and head match a straight-line evaluation") {
  UvoteModel model;
  model.trunk.push_back(
      DenseLayer{Matrix::from_rows({{1.0, -1.0}, {2.0, 0.0}}), {0.0, 1.0}, Activation::relu});
  UvoteModel::Head head;
  head.value = DenseLayer{Matrix::from_rows({{0.5, 0.25}}), {-1.0}, Activation::identity};
  head.log_scale = DenseLayer{Matrix::from_rows({{1.0, 0.0}}), {0.0}, Activation::identity};
  model.heads.push_back(head);

  // input (2, 3): pre = (2-3, 4+1) = (-1, 5); relu -> (0, 5)
  // y = 0.5*0 + 0.25*5 - 1 = 0.25 ; s = 1*0 + 0*5 + 0 = 0
  const auto out = predict_all(model, Matrix::from_rows({{2.0, 3.0}}));
  REQUIRE(out.y_hat(0, 0) == Approx(0.25).epsilon(1e-12));
  REQUIRE(out.s_hat(0, 0) == Approx(0.0).margin(1e-12));
}

TEST_CASE("head parameter count is 2*M*(dim_z + 1)") {
  const UvoteModel model =
      build_model({.input_dim = 4, .hidden = {16, 32}, .num_experts = 2}, 3);
  REQUIRE(model.embedding_dim() == 32);
  REQUIRE(model.head_parameter_count() == 132);

  // each extra expert adds exactly 2*(dim_z + 1) parameters
  const UvoteModel wider =
      build_model({.input_dim = 4, .hidden = {16, 32}, .num_experts = 3}, 3);
  REQUIRE(wider.parameter_count() - model.parameter_count() == 2 * (32 + 1));
}

TEST_CASE("build_model is deterministic per seed") {
  const ModelConfig config{.input_dim = 1, .hidden = {}, .num_experts = 1};
  const UvoteModel a = build_model(config, 123);
  const UvoteModel b = build_model(config, 123);
  const auto va = a.parameter_views();
  const auto vb = b.parameter_views();
  REQUIRE(va.size() == vb.size());
  for (std::size_t t = 0; t < va.size(); ++t)
    for (std::size_t i = 0; i < va[t].size(); ++i) REQUIRE(va[t][i] == vb[t][i]);
}

TEST_CASE("build_model rejects invalid dimensions") {
  REQUIRE_THROWS_AS(build_model({.input_dim = 0}, 1), ConfigError);
  REQUIRE_THROWS_AS(build_model({.input_dim = 2, .hidden = {}, .num_experts = 0}, 1),
                    ConfigError);
  REQUIRE_THROWS_AS(build_model({.input_dim = 2, .hidden = {0}}, 1), ConfigError);
}

TEST_CASE("expert columns equal single-expert models sharing trunk and head") {
  const UvoteModel full =
      build_model({.input_dim = 3, .hidden = {8, 8}, .num_experts = 3}, 21);
  Matrix x(5, 3);
  std::mt19937_64 rng(4);
  for (double& v : x.values()) v = uniform_range(rng, -2.0, 2.0);
  const auto out = predict_all(full, x);

  for (std::size_t m = 0; m < 3; ++m) {
    UvoteModel single;
    single.trunk = full.trunk;
    single.heads.push_back(full.heads[m]);
    const auto solo = predict_all(single, x);
    for (std::size_t n = 0; n < 5; ++n) {
      REQUIRE(solo.y_hat(n, 0) == Approx(out.y_hat(n, m)).margin(1e-12));
      REQUIRE(solo.s_hat(n, 0) == Approx(out.s_hat(n, m)).margin(1e-12));
    }
  }
}

TEST_CASE("log-scale outputs are clamped to +-15") {
  UvoteModel model = constant_head_model(0.0, 40.0);
  const auto hi = predict_all(model, Matrix(1, 2, 0.0));
  REQUIRE(hi.s_hat(0, 0) == 15.0);
  model.heads[0].log_scale.bias[0] = -40.0;
  const auto lo = predict_all(model, Matrix(1, 2, 0.0));
  REQUIRE(lo.s_hat(0, 0) == -15.0);
}

TEST_CASE("predict_all rejects mismatched input width") {
  const UvoteModel model = build_model({.input_dim = 3, .hidden = {4}}, 9);
  REQUIRE_THROWS_AS(predict_all(model, Matrix(2, 5, 0.0)), ShapeError);
}

TEST_CASE("checkpoint round-trips bit-exactly") {
  const UvoteModel model =
      build_model({.input_dim = 4, .hidden = {6, 5}, .num_experts = 2}, 77);
  const std::string path =
      (std::filesystem::temp_directory_path() / "uvote_model_roundtrip.json").string();
  save_model(model, path);
  const UvoteModel loaded = load_model(path);
  std::remove(path.c_str());

  const auto va = model.parameter_views();
  const auto vb = loaded.parameter_views();
  REQUIRE(va.size() == vb.size());
  for (std::size_t t = 0; t < va.size(); ++t) {
    REQUIRE(va[t].size() == vb[t].size());
    for (std::size_t i = 0; i < va[t].size(); ++i) REQUIRE(va[t][i] == vb[t][i]);
  }
  REQUIRE(loaded.trunk[0].activation == model.trunk[0].activation);
}

TEST_CASE("loading a corrupt checkpoint fails cleanly") {
  const auto path = std::filesystem::temp_directory_path() / "uvote_bad_model.json";
  {
    std::ofstream out(path);
    out << "{\"kind\": \"uvote_model\", \"schema_version\": 999}";
  }
  REQUIRE_THROWS_AS(load_model(path.string()), ParseError);
  std::filesystem::remove(path);
}
