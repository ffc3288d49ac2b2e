#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mvscreen {

/// p(y|x) over BI-RADS {0, 1, 2}.
struct PredictionDistribution {
  std::array<double, 3> p{1.0 / 3, 1.0 / 3, 1.0 / 3};

  double operator[](int c) const { return p[static_cast<std::size_t>(c)]; }

  /// Nonnegative entries summing to 1 within tolerance.
  bool valid(double tolerance = 1e-6) const {
    double total = 0;
    for (double v : p) {
      if (!(v >= 0.0)) return false;
      total += v;
    }
    return std::abs(total - 1.0) <= tolerance;
  }

  void require_valid(const char* context) const {
    if (!valid()) {
      throw std::invalid_argument(std::string(context) + ": not a probability distribution (" +
                                  std::to_string(p[0]) + ", " + std::to_string(p[1]) + ", " +
                                  std::to_string(p[2]) + ")");
    }
  }

  friend bool operator==(const PredictionDistribution&, const PredictionDistribution&) = default;
};

}  // namespace mvscreen
