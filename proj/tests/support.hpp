#pragma once

#include "mvscreen/data.hpp"
#include "mvscreen/model.hpp"
#include "mvscreen/ops.hpp"
#include "mvscreen/rng.hpp"

#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

namespace test {

using namespace mvscreen;

inline TensorD random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0,
                             bool requires_grad = true) {
  TensorD::Vector v(shape_numel(shape));
  for (Index i = 0; i < v.size(); ++i) v[i] = lo + (hi - lo) * uniform_unit(rng);
  return TensorD(std::move(shape), std::move(v), requires_grad);
}

/// sum(t * w) for a fixed random w: turns any op into a scalar with a
/// generic upstream gradient.
inline TensorD project(const TensorD& t, std::uint64_t seed) {
  Rng rng(seed);
  return nn::sum(nn::mul(t, random_tensor(t.shape(), rng, -1.0, 1.0, false)));
}

/// Small column config for fast end-to-end checks.
inline model::ModelConfig tiny_config(Index height = 41, Index width = 31) {
  model::ModelConfig c;
  c.scale = data::Scale::from_denominator(8);
  c.input_height = height;
  c.input_width = width;
  c.width_divisor = 8;
  c.hidden_units = 6;
  return c;
}

inline Image random_image(Index h, Index w, Rng& rng) {
  Image img(h, w);
  for (Index i = 0; i < img.size(); ++i) img.data()[i] = static_cast<float>(standard_normal(rng));
  return img;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::path(MVSCREEN_TEST_TMP) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace test
