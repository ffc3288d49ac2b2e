#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mvscreen/checkpoint.hpp"
#include "mvscreen/model.hpp"
#include "mvscreen/synthetic.hpp"
#include "shape_oracle.hpp"
#include "support.hpp"

#include <cmath>
#include <fstream>
#include <set>

using namespace mvscreen;
using namespace mvscreen::model;
namespace fs = std::filesystem;

namespace {

Image mirrored(const Image& img) { return img.rowwise().reverse(); }

data::Exam mirrored_exam(std::uint64_t seed) {
  const data::SyntheticConfig c{data::Scale::from_denominator(8), 0};
  const data::Exam src = data::generate_synthetic_exam(seed, 2, c);
  data::Exam e = src;
  using data::View;
  // Right views are mirrors of the left ones, so orientation standardization
  // makes each pair identical.
  e.views[View::RCC] = {data::ImageRecord::in_memory(View::RCC, "t", mirrored(src.views.at(View::LCC)[0].pixels()))};
  e.views[View::RMLO] = {data::ImageRecord::in_memory(View::RMLO, "t", mirrored(src.views.at(View::LMLO)[0].pixels()))};
  return e;
}

}  // namespace

TEST_CASE("full-scale column trace") {
  const auto plan = layer_skip_plan(data::Scale::from_denominator(1));
  CHECK(plan.trace == test::full_scale_trace());
  CHECK_FALSE(plan.truncated());
  CHECK(plan.layers.size() == 17);
  CHECK(plan.embedding_size == 256);
}

TEST_CASE("layer-skip plans agree with an independent shape walker") {
  for (int d : {1, 2, 4, 8}) {
    const auto scale = data::Scale::from_denominator(d);
    const auto plan = layer_skip_plan(scale);
    const auto rule = data::CropRule::at(scale);
    const auto oracle = test::walk_column(rule.crop_height, rule.crop_width);
    CAPTURE(d);
    CHECK(plan.layers.size() == oracle.kept);
    CHECK(plan.trace == oracle.trace);
    CHECK(plan.embedding_size == oracle.embedding);
    // The plan is a prefix of the full list.
    const auto full = ColumnSpec::full().layers;
    for (std::size_t i = 0; i < plan.layers.size(); ++i) CHECK(plan.layers[i] == full[i]);
  }
  CHECK(layer_skip_plan(data::Scale::from_denominator(8)).truncated());
  CHECK_THROWS_AS(layer_skip_plan(ColumnSpec::full(), 2, 2), ShapeError);
}

TEST_CASE("width divisor scales map counts only") {
  const auto a = ColumnSpec::full(1).layers;
  const auto b = ColumnSpec::full(4).layers;
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].maps == 4 * b[i].maps);
    CHECK(a[i].kernel_h == b[i].kernel_h);
    CHECK(a[i].stride_w == b[i].stride_w);
  }
  CHECK_THROWS(ColumnSpec::full(3));
}

TEST_CASE("build: determinism, Glorot bounds, zero biases, parameter names") {
  const auto config = ModelConfig::for_scale(data::Scale::from_denominator(8));
  Rng r1 = make_rng(5, "init"), r2 = make_rng(5, "init");
  const auto a = build_model<float>(config, r1);
  const auto b = build_model<float>(config, r2);
  const auto na = a.named(), nb = b.named();
  REQUIRE(na.size() == nb.size());
  for (std::size_t i = 0; i < na.size(); ++i) {
    CHECK(na[i].name == nb[i].name);
    CHECK((na[i].tensor.values().array() == nb[i].tensor.values().array()).all());
  }
  const double head_limit = std::sqrt(6.0 / 1027.0);
  CHECK(a.head_weights.values().cwiseAbs().maxCoeff() <= head_limit);
  CHECK(a.head_weights.values().cwiseAbs().maxCoeff() > 0.9 * head_limit);
  CHECK(a.head_bias.values().isZero());
  // First conv: one input map, 32 output maps, 3x3 kernel.
  const double conv_limit = std::sqrt(6.0 / (9.0 + 32.0 * 9.0));
  CHECK(a.cc.weights[0].values().cwiseAbs().maxCoeff() <= conv_limit);
  for (const auto& bias : a.cc.biases) CHECK(bias.values().isZero());
  CHECK(a.hidden_weights.dim(1) == 4 * a.plan.embedding_size);
  Index count = 0;
  std::set<std::string> names;
  for (const auto& n : na) {
    count += n.tensor.size();
    names.insert(n.name);
  }
  CHECK(names.size() == na.size());
  CHECK(count == a.parameter_count());
}

TEST_CASE("truncated model's column parameters are a subset of the full model's") {
  auto small = ModelConfig::for_scale(data::Scale::from_denominator(8));
  auto large = ModelConfig::for_scale(data::Scale::from_denominator(1));
  small.width_divisor = large.width_divisor = 8;
  small.hidden_units = large.hidden_units = 8;
  Rng rng(4);
  const auto a = build_model<float>(small, rng);
  const auto b = build_model<float>(large, rng);
  CHECK(a.parameter_count() < b.parameter_count());
  REQUIRE(a.cc.weights.size() < b.cc.weights.size());
  for (std::size_t i = 0; i < a.cc.weights.size(); ++i) {
    CHECK(a.cc.weights[i].shape() == b.cc.weights[i].shape());
    CHECK(a.mlo.biases[i].shape() == b.mlo.biases[i].shape());
  }
  std::set<std::string> large_names;
  for (const auto& n : b.named()) large_names.insert(n.name);
  for (const auto& n : a.named()) CHECK(large_names.count(n.name) == 1);
}

TEST_CASE("L/R columns share storage") {
  Rng rng(1);
  const auto p = build_model<double>(test::tiny_config(), rng);
  CHECK(p.column_for(data::View::LCC).weights[0].same_storage(p.column_for(data::View::RCC).weights[0]));
  CHECK(p.column_for(data::View::LMLO).weights[0].same_storage(p.column_for(data::View::RMLO).weights[0]));
  CHECK_FALSE(p.cc.weights[0].same_storage(p.mlo.weights[0]));
}

TEST_CASE("forward: valid distribution, eval determinism, order matters") {
  Rng rng(2);
  const auto p = build_model<double>(test::tiny_config(), rng);
  std::array<TensorD, 4> views;
  for (auto& v : views) v = image_tensor<double>(test::random_image(41, 31, rng));
  Rng unused(0);
  const auto out = forward(views, p, ForwardOptions{}, unused);
  CHECK(std::abs(out.probabilities.values().sum() - 1.0) < 1e-12);
  CHECK(out.embeddings[0].size() == p.plan.embedding_size);
  const auto again = forward(views, p, ForwardOptions{}, unused);
  CHECK((out.logits.values().array() == again.logits.values().array()).all());
  std::swap(views[0], views[1]);
  const auto swapped = forward(views, p, ForwardOptions{}, unused);
  CHECK((swapped.logits.values().array() != out.logits.values().array()).any());

  // Train phase draws noise and dropout from the rng.
  const ForwardOptions train{Phase::train, 0.01, 0.2};
  Rng n1(4), n2(4), n3(5);
  const auto t1 = forward(views, p, train, n1);
  const auto t2 = forward(views, p, train, n2);
  const auto t3 = forward(views, p, train, n3);
  CHECK((t1.logits.values().array() == t2.logits.values().array()).all());
  CHECK((t1.logits.values().array() != t3.logits.values().array()).any());
}

TEST_CASE("full-width scale 1/8 model emits a valid distribution") {
  Rng rng(3);
  const auto p = build_model<float>(ModelConfig::for_scale(data::Scale::from_denominator(8)), rng);
  std::array<Image, 4> views;
  for (auto& v : views) v = test::random_image(325, 250, rng);
  const auto d = predict_views(views, p);
  CHECK(d.p[0] + d.p[1] + d.p[2] == doctest::Approx(1.0).epsilon(1e-6));
  for (double v : d.p) CHECK(v > 0);
}

TEST_CASE("mirrored-pair exam gives identical left and right embeddings") {
  const auto config = ModelConfig::for_scale(data::Scale::from_denominator(8));
  Rng rng(6);
  const auto p = build_model<float>(config, rng);
  const data::PipelineConfig pipeline{data::Scale::from_denominator(8), data::Scale::from_denominator(8)};
  for (std::uint64_t seed : {1u, 2u}) {
    Rng unused(0);
    const auto images = data::prepare_views(mirrored_exam(seed), pipeline, data::Mode::validation, unused);
    std::array<TensorF, 4> views;
    for (std::size_t v = 0; v < 4; ++v) views[v] = image_tensor<float>(images[v]);
    const auto out = forward(views, p, ForwardOptions{}, unused);
    CHECK((out.embeddings[0].values().array() == out.embeddings[1].values().array()).all());
    CHECK((out.embeddings[2].values().array() == out.embeddings[3].values().array()).all());
    CHECK((out.embeddings[0].values().array() != out.embeddings[2].values().array()).any());
  }
}

TEST_CASE("TTA: one crop equals a single test-mode pass, average of valid distributions") {
  const auto config = ModelConfig::for_scale(data::Scale::from_denominator(8));
  Rng rng(7);
  const auto p = build_model<float>(config, rng);
  const data::SyntheticConfig c{data::Scale::from_denominator(8), 80};
  const auto exam = data::generate_synthetic_exam(3, 0, c);
  const data::PipelineConfig pipeline{data::Scale::from_denominator(8), data::Scale::from_denominator(8)};

  Rng crop_rng = make_rng(99, "tta", 0);
  const auto single = predict_views(data::prepare_views(exam, pipeline, data::Mode::test, crop_rng), p);
  const auto tta1 = predict_tta(exam, p, pipeline, 1, 99);
  for (std::size_t k = 0; k < 3; ++k) CHECK(tta1.p[k] == single.p[k]);

  const auto tta10 = predict_tta(exam, p, pipeline, 10, 99);
  CHECK(tta10.p[0] + tta10.p[1] + tta10.p[2] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK_THROWS(predict_tta(exam, p, pipeline, 0, 99));

  // A crop-sized image leaves no room for jitter: every crop agrees.
  const auto tight = data::generate_synthetic_exam(3, 0, data::SyntheticConfig{data::Scale::from_denominator(8), 0});
  const auto t10 = predict_tta(tight, p, pipeline, 10, 5);
  const auto v = predict_validation(tight, p, pipeline);
  for (std::size_t k = 0; k < 3; ++k) CHECK(t10.p[k] == doctest::Approx(v.p[k]).epsilon(1e-12));

  const data::PipelineConfig wrong{data::Scale::from_denominator(4), data::Scale::from_denominator(4)};
  CHECK_THROWS(predict_validation(exam, p, wrong));
}

TEST_CASE("checkpoint round trip is bit-exact") {
  const auto dir = test::scratch_dir("checkpoint");
  auto config = ModelConfig::for_scale(data::Scale::from_denominator(8));
  config.width_divisor = 4;
  config.hidden_units = 32;
  Rng rng(8);
  const auto p = build_model<float>(config, rng);
  save_checkpoint(p, dir / "a.mvdc");
  const auto q = load_checkpoint(dir / "a.mvdc");
  CHECK(q.config == p.config);
  CHECK(q.plan.layers == p.plan.layers);
  CHECK(q.plan.trace == p.plan.trace);
  const auto np = p.named(), nq = q.named();
  REQUIRE(np.size() == nq.size());
  for (std::size_t i = 0; i < np.size(); ++i) {
    CHECK(np[i].name == nq[i].name);
    CHECK(np[i].tensor.shape() == nq[i].tensor.shape());
    CHECK((np[i].tensor.values().array() == nq[i].tensor.values().array()).all());
  }
  CHECK(q.cc.weights[0].same_storage(q.column_for(data::View::RCC).weights[0]));

  std::array<Image, 4> views;
  for (auto& v : views) v = test::random_image(325, 250, rng);
  const auto a = predict_views(views, p), b = predict_views(views, q);
  for (std::size_t k = 0; k < 3; ++k) CHECK(a.p[k] == b.p[k]);

  save_checkpoint(q, dir / "b.mvdc");
  CHECK(test::slurp(dir / "a.mvdc") == test::slurp(dir / "b.mvdc"));
}

TEST_CASE("checkpoint corruption is reported with the field") {
  const auto dir = test::scratch_dir("checkpoint_bad");
  Rng rng(9);
  auto config = ModelConfig::for_scale(data::Scale::from_denominator(8));
  config.width_divisor = 8;
  config.hidden_units = 4;
  save_checkpoint(build_model<float>(config, rng), dir / "good.mvdc");
  const std::string bytes = test::slurp(dir / "good.mvdc");

  auto field_of = [&](const std::string& content) -> std::string {
    std::ofstream(dir / "bad.mvdc", std::ios::binary) << content;
    try {
      load_checkpoint(dir / "bad.mvdc");
    } catch (const CheckpointError& e) {
      return e.field();
    }
    return "<loaded>";
  };
  std::string magic = bytes;
  magic[0] = 'X';
  CHECK(field_of(magic) == "magic");
  std::string version = bytes;
  version[4] = 9;
  CHECK(field_of(version) == "version");
  std::string scale = bytes;
  scale[8] = 3;
  CHECK(field_of(scale) == "scale");
  CHECK(field_of(bytes.substr(0, bytes.size() - 5)) != "<loaded>");
  CHECK(field_of(bytes.substr(0, 6)) == "version");
  CHECK(field_of(bytes + "x") == "trailer");
  CHECK(field_of(bytes) == "<loaded>");

  CHECK_THROWS_AS(load_checkpoint(dir / "none.mvdc"), CheckpointError);
  const auto loaded = load_checkpoint(dir / "good.mvdc");
  CHECK_NOTHROW(require_checkpoint_scale(loaded, data::Scale::from_denominator(8)));
  try {
    require_checkpoint_scale(loaded, data::Scale::from_denominator(1));
    FAIL("scale mismatch accepted");
  } catch (const CheckpointError& e) {
    CHECK(e.field() == "scale");
  }
}
