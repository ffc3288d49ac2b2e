#include "mvscreen/rng.hpp"

#include <Eigen/Core>

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mvscreen {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t root, std::string_view stream, std::uint64_t a,
                          std::uint64_t b) {
  std::uint64_t h = splitmix64(root);
  h = splitmix64(h ^ fnv1a(stream));
  h = splitmix64(h ^ a);
  h = splitmix64(h ^ (b + 0x632be59bd9b4e019ULL));
  return h;
}

std::int64_t uniform_int(Rng& rng, std::int64_t lo, std::int64_t hi) {
  if (hi < lo) throw std::invalid_argument("uniform_int: empty range");
  const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
  if (span == 0) return lo + static_cast<std::int64_t>(rng());
  // Rejection sampling keeps the draw exactly uniform.
  const std::uint64_t limit = Rng::max() - (Rng::max() % span + 1) % span;
  std::uint64_t x;
  do {
    x = rng();
  } while (x > limit);
  return lo + static_cast<std::int64_t>(x % span);
}

double uniform_unit(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double standard_normal(Rng& rng) {
  double u1;
  do {
    u1 = uniform_unit(rng);
  } while (u1 <= 0.0);
  const double u2 = uniform_unit(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

void fill_standard_normal(Rng& rng, std::span<float> out) {
  const auto n = static_cast<Eigen::Index>(out.size());
  const Eigen::Index pairs = (n + 1) / 2;
  Eigen::ArrayXf u1(pairs), u2(pairs);
  for (Eigen::Index i = 0; i < pairs; ++i) {
    // 24 random bits each; u1 lies in (0, 1].
    const std::uint64_t x = rng();
    u1[i] = static_cast<float>((x >> 40) + 1) * 0x1.0p-24f;
    u2[i] = static_cast<float>((x >> 16) & 0xffffff) * 0x1.0p-24f;
  }
  const Eigen::ArrayXf radius = (-2.0f * u1.log()).sqrt();
  const Eigen::ArrayXf angle = (2.0f * std::numbers::pi_v<float>) * u2;
  const Eigen::ArrayXf a = radius * angle.cos();
  const Eigen::ArrayXf b = radius * angle.sin();
  for (Eigen::Index i = 0; i < pairs; ++i) {
    out[static_cast<std::size_t>(2 * i)] = a[i];
    if (2 * i + 1 < n) out[static_cast<std::size_t>(2 * i + 1)] = b[i];
  }
}

}  // namespace mvscreen
