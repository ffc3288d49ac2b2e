#include "mvscreen/manifest.hpp"

#include <json.hpp>

#include <fstream>

namespace mvscreen::data {

namespace fs = std::filesystem;
using nlohmann::json;
using Kind = ManifestError::Kind;

namespace {

std::string where(const fs::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line) + ": ";
}

Exam parse_exam(const json& j, const fs::path& manifest, std::size_t line) {
  const fs::path base = manifest.parent_path();
  Exam exam;
  try {
    exam.exam_id = j.at("exam_id").get<std::string>();
    exam.patient_id = j.at("patient_id").get<std::string>();
    exam.exam_date = j.at("exam_date").get<std::string>();
    exam.label = j.at("label").get<int>();
  } catch (const json::exception& e) {
    throw ManifestError(Kind::syntax, where(manifest, line) + e.what());
  }
  if (exam.label < 0 || exam.label >= kNumClasses) {
    throw ManifestError(Kind::invalid_label, where(manifest, line) + "exam " + exam.exam_id +
                                                 ": label " + std::to_string(exam.label) +
                                                 " outside {0,1,2}");
  }
  const json* views = j.contains("views") ? &j.at("views") : nullptr;
  for (View v : kViews) {
    const std::string name(view_name(v));
    if (!views || !views->contains(name) || !views->at(name).is_array() ||
        views->at(name).empty()) {
      throw ManifestError(Kind::missing_view,
                          where(manifest, line) + "exam " + exam.exam_id + ": missing view " + name);
    }
    for (const json& entry : views->at(name)) {
      std::string rel, timestamp;
      try {
        rel = entry.at("path").get<std::string>();
        timestamp = entry.at("timestamp").get<std::string>();
      } catch (const json::exception& e) {
        throw ManifestError(Kind::syntax, where(manifest, line) + e.what());
      }
      const fs::path image = fs::path(rel).is_absolute() ? fs::path(rel) : base / rel;
      try {
        read_pgm_header(image);
      } catch (const ImageError& e) {
        throw ManifestError(Kind::unreadable_image, where(manifest, line) + "exam " +
                                                        exam.exam_id + ": " + e.what());
      }
      exam.views[v].push_back(ImageRecord::from_file(v, timestamp, image.string()));
    }
  }
  return exam;
}

}  // namespace

std::vector<Exam> load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ManifestError(Kind::missing_file, path.string() + ": cannot open manifest");
  std::vector<Exam> exams;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      throw ManifestError(Kind::syntax, where(path, line) + e.what());
    }
    exams.push_back(parse_exam(j, path, line));
  }
  return exams;
}

void write_manifest(const std::vector<Exam>& exams, const fs::path& path) {
  const fs::path base = fs::absolute(path).parent_path();
  std::ofstream out(path);
  if (!out) throw DataError(path.string() + ": cannot open manifest for writing");
  for (const Exam& exam : exams) {
    json views = json::object();
    for (View v : kViews) {
      json list = json::array();
      auto it = exam.views.find(v);
      if (it != exam.views.end()) {
        for (const ImageRecord& rec : it->second) {
          if (rec.path.empty()) {
            throw DataError("exam " + exam.exam_id + ": image without a file path");
          }
          fs::path p = fs::absolute(rec.path);
          const fs::path rel = p.lexically_relative(base);
          if (!rel.empty() && *rel.begin() != "..") p = rel;
          list.push_back({{"path", p.generic_string()}, {"timestamp", rec.timestamp}});
        }
      }
      views[std::string(view_name(v))] = std::move(list);
    }
    json j = {{"exam_id", exam.exam_id},
              {"patient_id", exam.patient_id},
              {"exam_date", exam.exam_date},
              {"label", exam.label},
              {"views", std::move(views)}};
    out << j.dump() << '\n';
  }
  if (!out) throw DataError(path.string() + ": write failed");
}

std::vector<Exam> write_dataset(const std::vector<Exam>& exams, const fs::path& dir) {
  fs::create_directories(dir / "images");
  std::vector<Exam> written;
  written.reserve(exams.size());
  for (const Exam& exam : exams) {
    Exam copy = exam;
    for (auto& [view, records] : copy.views) {
      for (std::size_t k = 0; k < records.size(); ++k) {
        std::string name = exam.exam_id + "_" + std::string(view_name(view)) + "_" +
                           std::to_string(k) + ".pgm";
        const fs::path file = dir / "images" / name;
        write_pgm16(file, records[k].pixels());
        records[k] = ImageRecord::from_file(view, records[k].timestamp, file.string());
      }
    }
    written.push_back(std::move(copy));
  }
  write_manifest(written, dir / "manifest.jsonl");
  return written;
}

void write_dataset_info(const DatasetInfo& info, const fs::path& dir) {
  const fs::path path = dir / "dataset.txt";
  std::ofstream out(path);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  out << "scale=" << info.scale.str() << "\nseed=" << info.seed << "\nn_exams=" << info.n_exams << '\n';
  if (!out) throw DataError(path.string() + ": write failed");
}

DatasetInfo read_dataset_info(const fs::path& dir) {
  DatasetInfo info;
  const fs::path path = dir / "dataset.txt";
  if (!fs::exists(path)) return info;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    try {
      if (key == "scale") info.scale = Scale::parse(value);
      else if (key == "seed") info.seed = std::stoull(value);
      else if (key == "n_exams") info.n_exams = std::stoi(value);
    } catch (const std::exception& e) {
      throw DataError(path.string() + ": bad value for " + key + ": " + e.what());
    }
  }
  return info;
}

}  // namespace mvscreen::data
