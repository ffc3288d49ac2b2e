#pragma once

#include "mvscreen/metrics.hpp"

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

namespace mvscreen::report {

struct PredictionRow {
  std::string exam_id;
  PredictionDistribution dist;
  int label = 0;
};

/// CSV: exam_id,p0,p1,p2,label
void write_predictions(std::ostream& out, const std::vector<PredictionRow>& rows);
void write_predictions(const std::filesystem::path& path, const std::vector<PredictionRow>& rows);
std::vector<PredictionRow> read_predictions(const std::filesystem::path& path);

/// One column of a results table (a data fraction, a scale, a model).
struct ReportColumn {
  std::string heading;
  metrics::MetricsReport report;
};

/// Rows "0 vs. others", "1 vs. others", "2 vs. others", "macAUC",
/// "HC-macAUC"; one column per entry.
std::string format_results_table(const std::string& corner, const std::vector<ReportColumn>& columns);

/// Long-format CSV: setting,auc0,auc1,auc2,macauc,hc_macauc,kept0,kept1,kept2,n
void write_results_csv(const std::filesystem::path& path, const std::string& setting_name,
                       const std::vector<ReportColumn>& columns);

/// macAUC as a function of the confidence percentile P.
struct ConfidenceCurvePoint {
  double percent = 0;
  double mac_auc = 0;
};
std::string format_confidence_table(const std::vector<ConfidenceCurvePoint>& points);

std::string format_kappa_table(const std::vector<std::string>& names,
                               const std::vector<std::vector<double>>& kappa);

}  // namespace mvscreen::report
