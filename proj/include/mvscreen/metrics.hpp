#pragma once

#include "mvscreen/distribution.hpp"

#include <array>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace mvscreen::metrics {

class MetricError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// -sum p log p in nats, 0 log 0 = 0.
double entropy(const PredictionDistribution& dist);

/// Mann-Whitney U of the positives with midranks for ties. Exact for any
/// realistic sample size: the value is a multiple of 1/2.
double mann_whitney_u(std::span<const double> scores, std::span<const int> labels);

/// P(random positive outscores random negative), ties credited 1/2.
double auc_binary(std::span<const double> scores, std::span<const int> labels);

struct MacAuc {
  std::array<double, 3> auc{};  // class c vs. others, scored by p[c]
  double mac_auc = 0.0;         // unweighted mean of the three
};

MacAuc mac_auc(std::span<const PredictionDistribution> dists, std::span<const int> labels);

struct ConfidenceThresholds {
  std::array<double, 3> threshold{};  // entropy, nats
  double percent = 30.0;
};

/// Per-class nearest-rank k-th percentile of validation entropies.
ConfidenceThresholds confidence_thresholds(std::span<const PredictionDistribution> dists,
                                           std::span<const int> labels, double percent = 30.0);

/// How the high-confidence AUCs pick their population.
enum class HcSubset {
  /// All three AUCs on the union of the kept exams.
  union_of_kept,
  /// AUC for class c: kept exams of class c against every exam of the
  /// other classes.
  per_class,
};

struct HcResult {
  MacAuc metrics;
  std::array<double, 3> kept_fraction{};
  std::array<int, 3> kept{};
};

/// Keeps test exams of class c whose entropy is strictly below t_c, then
/// recomputes the one-vs-rest AUCs and their mean.
HcResult hc_mac_auc(std::span<const PredictionDistribution> dists, std::span<const int> labels,
                    const ConfidenceThresholds& thresholds,
                    HcSubset subset = HcSubset::union_of_kept);

/// Mean of one-hot votes.
PredictionDistribution committee_distribution(std::span<const int> votes);

/// Equal-weight elementwise mean.
PredictionDistribution ensemble(const PredictionDistribution& a, const PredictionDistribution& b);

/// (p_o - p_e) / (1 - p_e) with p_e from the marginal products.
double cohen_kappa(std::span<const int> a, std::span<const int> b);

/// Symmetric matrix of pairwise kappas, 1 on the diagonal.
std::vector<std::vector<double>> kappa_matrix(const std::vector<std::vector<int>>& raters);

struct MetricsReport {
  MacAuc overall;
  std::optional<HcResult> high_confidence;
  std::optional<ConfidenceThresholds> thresholds;
  int n = 0;
};

}  // namespace mvscreen::metrics
