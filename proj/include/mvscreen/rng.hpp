#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace mvscreen {

using Rng = std::mt19937_64;

/// Splits a root seed into an independent stream per subsystem name and
/// optional integer coordinates (epoch, sample index, ...).
std::uint64_t derive_seed(std::uint64_t root, std::string_view stream, std::uint64_t a = 0,
                          std::uint64_t b = 0);

inline Rng make_rng(std::uint64_t root, std::string_view stream, std::uint64_t a = 0,
                    std::uint64_t b = 0) {
  return Rng(derive_seed(root, stream, a, b));
}

/// Uniform integer in [lo, hi], independent of the standard library's
/// distribution implementation.
std::int64_t uniform_int(Rng& rng, std::int64_t lo, std::int64_t hi);

/// Uniform real in [0, 1).
double uniform_unit(Rng& rng);

/// Standard normal draw (Box-Muller), stable across standard libraries.
double standard_normal(Rng& rng);

/// Fills out with standard normal draws, two per Box-Muller pair. Much
/// faster than repeated standard_normal for large buffers.
void fill_standard_normal(Rng& rng, std::span<float> out);

}  // namespace mvscreen
