#include "mvscreen/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>

namespace mvscreen::metrics {

namespace {

void require_label(int label) {
  if (label < 0 || label > 2) {
    throw MetricError("label " + std::to_string(label) + " outside {0,1,2}");
  }
}

std::array<int, 3> class_sizes(std::span<const int> labels) {
  std::array<int, 3> n{};
  for (int l : labels) {
    require_label(l);
    ++n[static_cast<std::size_t>(l)];
  }
  return n;
}

}  // namespace

double entropy(const PredictionDistribution& dist) {
  dist.require_valid("entropy");
  double h = 0.0;
  for (double p : dist.p) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

double mann_whitney_u(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw MetricError("scores and labels differ in length");
  std::size_t positives = 0;
  for (int l : labels) {
    if (l != 0 && l != 1) throw MetricError("binary labels must be 0 or 1");
    positives += static_cast<std::size_t>(l);
  }
  const std::size_t n = scores.size();
  if (positives == 0 || positives == n) {
    throw MetricError("AUC undefined: need at least one positive and one negative example");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Twice the rank sum keeps midranks integral.
  std::uint64_t twice_rank_sum = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const std::uint64_t twice_midrank = (i + 1) + (j + 1);
    for (std::size_t k = i; k <= j; ++k) {
      if (labels[order[k]] == 1) twice_rank_sum += twice_midrank;
    }
    i = j + 1;
  }
  const std::uint64_t p = positives;
  return (static_cast<double>(twice_rank_sum) - static_cast<double>(p * (p + 1))) / 2.0;
}

double auc_binary(std::span<const double> scores, std::span<const int> labels) {
  const double u = mann_whitney_u(scores, labels);
  const double positives = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
  const double negatives = static_cast<double>(labels.size()) - positives;
  return u / (positives * negatives);
}

MacAuc mac_auc(std::span<const PredictionDistribution> dists, std::span<const int> labels) {
  if (dists.size() != labels.size()) throw MetricError("predictions and labels differ in length");
  const auto sizes = class_sizes(labels);
  for (int c = 0; c < 3; ++c) {
    if (sizes[static_cast<std::size_t>(c)] == 0) {
      throw MetricError("macAUC undefined: class " + std::to_string(c) + " has no examples");
    }
  }
  MacAuc out;
  std::vector<double> scores(dists.size());
  std::vector<int> binary(dists.size());
  for (int c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < dists.size(); ++i) {
      scores[i] = dists[i][c];
      binary[i] = labels[i] == c ? 1 : 0;
    }
    out.auc[static_cast<std::size_t>(c)] = auc_binary(scores, binary);
  }
  out.mac_auc = (out.auc[0] + out.auc[1] + out.auc[2]) / 3.0;
  return out;
}

ConfidenceThresholds confidence_thresholds(std::span<const PredictionDistribution> dists,
                                           std::span<const int> labels, double percent) {
  if (dists.size() != labels.size()) throw MetricError("predictions and labels differ in length");
  if (!(percent > 0.0) || percent > 100.0) {
    throw MetricError("confidence percent must lie in (0, 100]");
  }
  std::array<std::vector<double>, 3> per_class;
  for (std::size_t i = 0; i < dists.size(); ++i) {
    require_label(labels[i]);
    per_class[static_cast<std::size_t>(labels[i])].push_back(entropy(dists[i]));
  }
  ConfidenceThresholds out;
  out.percent = percent;
  for (std::size_t c = 0; c < 3; ++c) {
    auto& values = per_class[c];
    if (values.empty()) {
      throw MetricError("confidence thresholds need validation examples of every class; class " +
                        std::to_string(c) + " is empty");
    }
    std::sort(values.begin(), values.end());
    const double n = static_cast<double>(values.size());
    auto rank = static_cast<std::size_t>(std::ceil(percent * n / 100.0 - 1e-9));
    rank = std::clamp<std::size_t>(rank, 1, values.size());
    out.threshold[c] = values[rank - 1];
  }
  return out;
}

HcResult hc_mac_auc(std::span<const PredictionDistribution> dists, std::span<const int> labels,
                    const ConfidenceThresholds& thresholds, HcSubset subset) {
  if (dists.size() != labels.size()) throw MetricError("predictions and labels differ in length");
  const auto sizes = class_sizes(labels);
  std::vector<bool> keep(dists.size());
  HcResult out;
  for (std::size_t i = 0; i < dists.size(); ++i) {
    const auto c = static_cast<std::size_t>(labels[i]);
    keep[i] = entropy(dists[i]) < thresholds.threshold[c];
    if (keep[i]) ++out.kept[c];
  }
  for (std::size_t c = 0; c < 3; ++c) {
    out.kept_fraction[c] = sizes[c] ? static_cast<double>(out.kept[c]) / sizes[c] : 0.0;
    if (out.kept[c] == 0) {
      throw MetricError("HC-macAUC undefined: no class " + std::to_string(c) +
                        " example falls below its confidence threshold");
    }
  }

  if (subset == HcSubset::union_of_kept) {
    std::vector<PredictionDistribution> kept_dists;
    std::vector<int> kept_labels;
    for (std::size_t i = 0; i < dists.size(); ++i) {
      if (keep[i]) {
        kept_dists.push_back(dists[i]);
        kept_labels.push_back(labels[i]);
      }
    }
    out.metrics = mac_auc(kept_dists, kept_labels);
    return out;
  }

  for (int c = 0; c < 3; ++c) {
    std::vector<double> scores;
    std::vector<int> binary;
    for (std::size_t i = 0; i < dists.size(); ++i) {
      const bool positive = labels[i] == c;
      if (positive && !keep[i]) continue;
      scores.push_back(dists[i][c]);
      binary.push_back(positive ? 1 : 0);
    }
    out.metrics.auc[static_cast<std::size_t>(c)] = auc_binary(scores, binary);
  }
  out.metrics.mac_auc = (out.metrics.auc[0] + out.metrics.auc[1] + out.metrics.auc[2]) / 3.0;
  return out;
}

PredictionDistribution committee_distribution(std::span<const int> votes) {
  if (votes.empty()) throw MetricError("committee needs at least one vote");
  std::array<int, 3> counts{};
  for (int v : votes) {
    require_label(v);
    ++counts[static_cast<std::size_t>(v)];
  }
  PredictionDistribution d;
  for (std::size_t c = 0; c < 3; ++c) d.p[c] = static_cast<double>(counts[c]) / votes.size();
  return d;
}

PredictionDistribution ensemble(const PredictionDistribution& a, const PredictionDistribution& b) {
  a.require_valid("ensemble");
  b.require_valid("ensemble");
  PredictionDistribution d;
  for (std::size_t c = 0; c < 3; ++c) d.p[c] = 0.5 * (a.p[c] + b.p[c]);
  return d;
}

double cohen_kappa(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw MetricError("kappa: rater label lists differ in length");
  if (a.empty()) throw MetricError("kappa: no ratings");
  std::map<int, std::pair<double, double>> marginals;
  double agree = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    marginals[a[i]].first += 1;
    marginals[b[i]].second += 1;
    if (a[i] == b[i]) agree += 1;
  }
  const double n = static_cast<double>(a.size());
  const double p_o = agree / n;
  double p_e = 0;
  for (const auto& [label, m] : marginals) p_e += (m.first / n) * (m.second / n);
  if (p_e >= 1.0) {
    if (p_o == 1.0) return 1.0;
    throw MetricError("kappa undefined: expected agreement is 1");
  }
  return (p_o - p_e) / (1.0 - p_e);
}

std::vector<std::vector<double>> kappa_matrix(const std::vector<std::vector<int>>& raters) {
  const std::size_t n = raters.size();
  std::vector<std::vector<double>> m(n, std::vector<double>(n, 1.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      m[i][j] = m[j][i] = cohen_kappa(raters[i], raters[j]);
    }
  }
  return m;
}

}  // namespace mvscreen::metrics
