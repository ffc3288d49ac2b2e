#pragma once

#include "mvscreen/data.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace mvscreen::data {

class ManifestError : public DataError {
 public:
  enum class Kind { missing_file, syntax, missing_view, unreadable_image, invalid_label };

  ManifestError(Kind kind, const std::string& message) : DataError(message), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// JSON-lines manifest, one exam per line:
///   {"exam_id":..., "patient_id":..., "exam_date":"YYYY-MM-DD", "label":0|1|2,
///    "views":{"L-CC":[{"path":..., "timestamp":...}], ...}}
/// Relative image paths resolve against the manifest's directory. Every
/// image header is checked at load time; pixels are read on demand.
std::vector<Exam> load_manifest(const std::filesystem::path& path);

/// Writes metadata for exams whose records carry a path. Paths under the
/// manifest's directory are stored relative to it.
void write_manifest(const std::vector<Exam>& exams, const std::filesystem::path& path);

/// Materializes every image as a 16-bit PGM under dir/images and writes
/// dir/manifest.jsonl. Returns the exams rebound to the written files.
std::vector<Exam> write_dataset(const std::vector<Exam>& exams, const std::filesystem::path& dir);

/// dir/dataset.txt, key=value lines. scale is the resolution the images
/// were stored at; a directory without the file is taken as full scale.
struct DatasetInfo {
  Scale scale;
  std::uint64_t seed = 0;
  int n_exams = 0;
};
void write_dataset_info(const DatasetInfo& info, const std::filesystem::path& dir);
DatasetInfo read_dataset_info(const std::filesystem::path& dir);

}  // namespace mvscreen::data
