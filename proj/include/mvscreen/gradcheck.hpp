#pragma once

#include "mvscreen/tensor.hpp"

#include <functional>
#include <vector>

namespace mvscreen::nn {

struct GradCheckResult {
  bool passed = false;
  double max_rel_error = 0.0;
  Index worst_index = -1;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
};

struct GradCheckOptions {
  /// Central-difference step, scaled by max(1, |x_i|).
  double step = 1e-4;
  /// Entries to probe; empty probes every entry.
  std::vector<Index> indices;
};

/// Scalar-valued function of one tensor. It must be deterministic.
using ScalarFunction = std::function<TensorD(const TensorD&)>;

/// Compares the reverse-mode gradient of fn at input against central finite
/// differences. Relative error is |a-n| / max(|a|, |n|, 1e-8).
GradCheckResult finite_diff_check(const ScalarFunction& fn, const TensorD& input,
                                  double tolerance, const GradCheckOptions& options = {});

}  // namespace mvscreen::nn
