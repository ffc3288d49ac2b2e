#include "mvscreen/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mvscreen::nn {

GradCheckResult finite_diff_check(const ScalarFunction& fn, const TensorD& input,
                                  double tolerance, const GradCheckOptions& options) {
  TensorD probe = input.detached_copy(/*requires_grad=*/true);
  Eigen::VectorXd analytic;
  {
    TensorD loss = fn(probe);
    loss.backward();
    analytic = probe.grad();
  }

  std::vector<Index> indices = options.indices;
  if (indices.empty()) {
    indices.resize(static_cast<std::size_t>(input.size()));
    std::iota(indices.begin(), indices.end(), Index{0});
  }

  GradCheckResult result;
  NoGradGuard no_grad;
  TensorD shifted = input.detached_copy();
  for (Index i : indices) {
    const double x = input[i];
    const double h = options.step * std::max(1.0, std::abs(x));
    shifted.values_mut()[i] = x + h;
    const double up = fn(shifted).item();
    shifted.values_mut()[i] = x - h;
    const double down = fn(shifted).item();
    shifted.values_mut()[i] = x;

    const double numeric = (up - down) / (2.0 * h);
    const double a = analytic[i];
    const double rel =
        std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
    if (rel > result.max_rel_error || result.worst_index < 0) {
      result.max_rel_error = rel;
      result.worst_index = i;
      result.analytic_at_worst = a;
      result.numeric_at_worst = numeric;
    }
  }
  result.passed = result.max_rel_error < tolerance;
  return result;
}

}  // namespace mvscreen::nn
