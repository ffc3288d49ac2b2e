#include "mvscreen/report.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace mvscreen::report {

namespace {

std::string number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string render(const std::vector<std::vector<std::string>>& cells, std::size_t header_rows,
                   std::size_t rule_before) {
  std::vector<std::size_t> widths;
  for (const auto& row : cells) {
    widths.resize(std::max(widths.size(), row.size()));
    for (std::size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], row[c].size());
  }
  std::size_t total = 0;
  for (std::size_t w : widths) total += w + 3;
  std::ostringstream os;
  for (std::size_t r = 0; r < cells.size(); ++r) {
    if (r == header_rows) os << std::string(total, '=') << '\n';
    if (rule_before && r == rule_before) os << std::string(total, '-') << '\n';
    for (std::size_t c = 0; c < cells[r].size(); ++c) {
      os << std::setw(static_cast<int>(widths[c])) << cells[r][c];
      os << (c == 0 ? " | " : "   ");
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace

void write_predictions(std::ostream& out, const std::vector<PredictionRow>& rows) {
  out << "exam_id,p0,p1,p2,label\n";
  for (const auto& r : rows) {
    out << r.exam_id << ',' << number(r.dist.p[0]) << ',' << number(r.dist.p[1]) << ','
        << number(r.dist.p[2]) << ',' << r.label << '\n';
  }
}

void write_predictions(const std::filesystem::path& path, const std::vector<PredictionRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  write_predictions(out, rows);
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

std::vector<PredictionRow> read_predictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path.string() + ": cannot open predictions");
  std::string line;
  if (!std::getline(in, line) || line != "exam_id,p0,p1,p2,label") {
    throw std::runtime_error(path.string() + ": missing prediction header");
  }
  std::vector<PredictionRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 5) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected 5 fields");
    }
    PredictionRow r;
    r.exam_id = f[0];
    try {
      for (std::size_t c = 0; c < 3; ++c) r.dist.p[c] = std::stod(f[c + 1]);
      r.label = std::stoi(f[4]);
    } catch (const std::exception&) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": malformed number");
    }
    rows.push_back(r);
  }
  return rows;
}

std::string format_results_table(const std::string& corner, const std::vector<ReportColumn>& columns) {
  std::vector<std::vector<std::string>> cells;
  cells.push_back({corner});
  for (const auto& col : columns) cells[0].push_back(col.heading);
  for (int c = 0; c < 3; ++c) {
    std::vector<std::string> row{std::to_string(c) + " vs. others"};
    for (const auto& col : columns) row.push_back(fixed3(col.report.overall.auc[static_cast<std::size_t>(c)]));
    cells.push_back(std::move(row));
  }
  std::vector<std::string> mac{"macAUC"}, hc{"HC-macAUC"};
  bool any_hc = false;
  for (const auto& col : columns) {
    mac.push_back(fixed3(col.report.overall.mac_auc));
    if (col.report.high_confidence) {
      any_hc = true;
      hc.push_back(fixed3(col.report.high_confidence->metrics.mac_auc));
    } else {
      hc.push_back("-");
    }
  }
  cells.push_back(std::move(mac));
  if (any_hc) cells.push_back(std::move(hc));
  return render(cells, 1, 4);
}

void write_results_csv(const std::filesystem::path& path, const std::string& setting_name,
                       const std::vector<ReportColumn>& columns) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  out << setting_name << ",auc0,auc1,auc2,macauc,hc_macauc,kept0,kept1,kept2,n\n";
  for (const auto& col : columns) {
    const auto& r = col.report;
    out << col.heading << ',' << number(r.overall.auc[0]) << ',' << number(r.overall.auc[1]) << ','
        << number(r.overall.auc[2]) << ',' << number(r.overall.mac_auc) << ',';
    if (r.high_confidence) {
      const auto& hc = *r.high_confidence;
      out << number(hc.metrics.mac_auc) << ',' << number(hc.kept_fraction[0]) << ','
          << number(hc.kept_fraction[1]) << ',' << number(hc.kept_fraction[2]);
    } else {
      out << ",,,";
    }
    out << ',' << r.n << '\n';
  }
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

std::string format_confidence_table(const std::vector<ConfidenceCurvePoint>& points) {
  std::vector<std::vector<std::string>> cells{{"T_P%"}, {"macAUC"}};
  for (const auto& p : points) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "T%g%%", p.percent);
    cells[0].push_back(buf);
    cells[1].push_back(fixed3(p.mac_auc));
  }
  return render(cells, 1, 0);
}

std::string format_kappa_table(const std::vector<std::string>& names,
                               const std::vector<std::vector<double>>& kappa) {
  std::vector<std::vector<std::string>> cells;
  cells.push_back({""});
  for (const auto& n : names) cells[0].push_back(n);
  for (std::size_t i = 0; i < names.size(); ++i) {
    std::vector<std::string> row{names[i]};
    for (std::size_t j = 0; j < names.size(); ++j) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.2f", kappa[i][j]);
      row.push_back(j > i ? buf : "");
    }
    cells.push_back(std::move(row));
  }
  return render(cells, 1, 0);
}

}  // namespace mvscreen::report
