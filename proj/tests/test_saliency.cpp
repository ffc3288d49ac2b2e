#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mvscreen/metrics.hpp"
#include "mvscreen/saliency.hpp"
#include "mvscreen/synthetic.hpp"
#include "support.hpp"

#include <cmath>

using namespace mvscreen;
using namespace mvscreen::saliency;

namespace {

std::array<Image, 4> random_views(Rng& rng, Index h = 41, Index w = 31) {
  std::array<Image, 4> v;
  for (auto& img : v) img = test::random_image(h, w, rng);
  return v;
}

double entropy_at(const std::array<Image, 4>& views, const model::ModelParams<double>& params) {
  std::array<TensorD, 4> t;
  for (std::size_t v = 0; v < 4; ++v) t[v] = model::image_tensor<double>(views[v]);
  Rng unused(0);
  NoGradGuard guard;
  return nn::entropy(model::forward(t, params, model::ForwardOptions{}, unused).probabilities).item();
}

}  // namespace

TEST_CASE("saliency is nonnegative, shaped like the inputs, and deterministic") {
  Rng rng(1);
  const auto params = model::build_model<double>(test::tiny_config(), rng);
  const auto views = random_views(rng);
  const auto a = saliency::saliency<double>(views, params);
  const auto b = saliency::saliency<double>(views, params);
  for (std::size_t v = 0; v < 4; ++v) {
    CHECK(a.maps[v].rows() == 41);
    CHECK(a.maps[v].cols() == 31);
    CHECK((a.maps[v] >= 0).all());
    CHECK((a.maps[v] > 0).any());
    CHECK((a.maps[v] == b.maps[v]).all());
  }
  CHECK(a.entropy == doctest::Approx(entropy_at(views, params)).epsilon(1e-12));
  // No gradient is left behind on the parameters.
  for (const auto& t : params.tensors()) CHECK_FALSE(t.has_grad());
}

TEST_CASE("saliency matches finite differences of the entropy at 20 random pixels") {
  for (std::uint64_t seed : {2u, 3u, 4u}) {
    Rng rng(seed);
    const auto params = model::build_model<double>(test::tiny_config(), rng);
    const auto views = random_views(rng);
    const auto result = saliency::saliency<double>(views, params);
    int checked = 0;
    double worst = 0;
    for (int k = 0; k < 20; ++k) {
      const auto v = static_cast<std::size_t>(uniform_int(rng, 0, 3));
      const Index r = uniform_int(rng, 0, 40), c = uniform_int(rng, 0, 30);
      const double h = 1e-6;
      auto plus = views, minus = views;
      plus[v](r, c) += static_cast<float>(h);
      minus[v](r, c) -= static_cast<float>(h);
      // Inputs are float images; use the step actually applied.
      const double step = static_cast<double>(plus[v](r, c)) - static_cast<double>(minus[v](r, c));
      const double fd = std::abs((entropy_at(plus, params) - entropy_at(minus, params)) / step);
      const double an = result.maps[v](r, c);
      const double scale = std::max({std::abs(fd), std::abs(an), 1e-7});
      worst = std::max(worst, std::abs(fd - an) / scale);
      ++checked;
    }
    CAPTURE(seed);
    CHECK(checked == 20);
    CHECK(worst < 1e-3);
  }
}

TEST_CASE("a zero-weight head gives all-zero maps") {
  Rng rng(5);
  auto params = model::build_model<double>(test::tiny_config(), rng);
  params.head_weights.values_mut().setZero();
  const auto result = saliency::saliency<double>(random_views(rng), params);
  for (const auto& m : result.maps) CHECK((m == 0).all());
  CHECK(result.entropy == doctest::Approx(std::log(3.0)).epsilon(1e-12));
}

TEST_CASE("exam saliency at scale 1/8 and input checks") {
  Rng rng(6);
  const auto params = model::build_model<float>(model::ModelConfig::for_scale(data::Scale::from_denominator(8)), rng);
  const auto exam = data::generate_synthetic_exam(9, 0, {data::Scale::from_denominator(8), 0});
  const data::PipelineConfig pipeline{data::Scale::from_denominator(8), data::Scale::from_denominator(8)};
  const auto result = exam_saliency(exam, params, pipeline);
  CHECK(result.maps[0].rows() == 325);
  CHECK(result.maps[3].cols() == 250);
  CHECK(result.entropy > 0);
  CHECK(result.entropy <= std::log(3.0));
  CHECK_THROWS(saliency::saliency<float>(random_views(rng), params));
}

TEST_CASE("heatmap rendering") {
  SaliencyMap<float> ramp(1, 101);
  for (Index i = 0; i <= 100; ++i) ramp(0, i) = static_cast<float>(i);
  const auto img = render_heatmap(ramp, 99.0);
  // 100 positive entries; the 99th smallest is 99.
  CHECK(img(0, 0) == 0);
  CHECK(img(0, 99) == 255);
  CHECK(img(0, 100) == 255);
  CHECK(img(0, 50) == std::lround(255.0 * 50 / 99));

  const auto full = render_heatmap(ramp, 100.0);
  CHECK(full(0, 100) == 255);
  CHECK(full(0, 50) == 128);

  // Rendering ignores the overall magnitude.
  SaliencyMap<float> scaled = ramp * 1e-6f;
  CHECK((render_heatmap(scaled, 99.0) == img).all());

  CHECK((render_heatmap(SaliencyMap<float>::Zero(4, 4)) == 0).all());
  SaliencyMap<float> single = SaliencyMap<float>::Zero(3, 3);
  single(1, 1) = 0.5f;
  const auto dot = render_heatmap(single);
  CHECK(dot(1, 1) == 255);
  CHECK(dot(0, 0) == 0);
  CHECK_THROWS(render_heatmap(ramp, 0.0));
  SaliencyMap<float> bad = ramp;
  bad(0, 3) = std::nanf("");
  CHECK_THROWS(render_heatmap(bad));
}
