#pragma once

#include "mvscreen/image.hpp"
#include "mvscreen/rng.hpp"

#include <array>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mvscreen::data {

using Eigen::Index;

/// The four screening views, in the fixed concatenation order.
enum class View { LCC = 0, RCC = 1, LMLO = 2, RMLO = 3 };
inline constexpr std::array<View, 4> kViews{View::LCC, View::RCC, View::LMLO, View::RMLO};
inline constexpr int kNumClasses = 3;

std::string_view view_name(View view);  // "L-CC", ...
View parse_view(std::string_view name);
bool is_right(View view);
bool is_cc(View view);

enum class Mode { train, validation, test };
std::string_view mode_name(Mode mode);
Mode parse_mode(std::string_view name);

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input resolution relative to the full 2600x2000 crop: 1, 1/2, 1/4 or 1/8.
class Scale {
 public:
  constexpr Scale() = default;
  static Scale from_denominator(int denominator);
  /// Accepts "1", "1/2", "0.5", "x1/8", ...
  static Scale parse(std::string_view text);

  int denominator() const { return denominator_; }
  double factor() const { return 1.0 / denominator_; }
  std::string str() const;

  friend bool operator==(Scale, Scale) = default;

 private:
  explicit constexpr Scale(int d) : denominator_(d) {}
  int denominator_ = 1;
};

inline const std::array<Scale, 4>& supported_scales() {
  static const std::array<Scale, 4> scales{Scale::from_denominator(1), Scale::from_denominator(2),
                                           Scale::from_denominator(4), Scale::from_denominator(8)};
  return scales;
}

struct ImageRecord {
  View view = View::LCC;
  /// ISO-8601 acquisition time; fixed-width strings compare chronologically.
  std::string timestamp;
  /// Backing file, empty for in-memory or generated images.
  std::string path;
  /// Produces the pixels on demand.
  std::function<Image()> source;

  Image pixels() const;

  static ImageRecord in_memory(View view, std::string timestamp, Image pixels);
  static ImageRecord from_file(View view, std::string timestamp, std::string path);
};

struct Exam {
  std::string exam_id;
  std::string patient_id;
  std::string exam_date;  // YYYY-MM-DD
  int label = 1;
  std::map<View, std::vector<ImageRecord>> views;

  /// Throws DataError if a view is missing or the label is out of range.
  void validate() const;
};

struct CropRule {
  Index crop_height = 2600;
  Index crop_width = 2000;
  Index jitter_cap = 100;

  /// Crop rule for inputs downscaled to the given scale.
  static CropRule at(Scale scale);
};

struct CropWindow {
  Index top = 0;
  Index left = 0;
  Index height = 0;
  Index width = 0;
  /// Jitter that was applied relative to the base (centered, leftmost) spot.
  Index shift_vertical = 0;
  Index shift_horizontal = 0;
};

struct SplitSpec {
  double train_fraction = 0.8;
  double validation_fraction = 0.1;
  double test_fraction = 0.1;
};

struct DatasetSplit {
  std::vector<Exam> train;
  std::vector<Exam> validation;
  std::vector<Exam> test;
};

/// (x - mean) / population std; constant images map to zeros.
Image normalize_image(const Image& pixels);

Image flip_horizontal(const Image& pixels);

/// Mirrors R-CC and R-MLO so every breast faces the same way.
ImageRecord standardize_orientation(const ImageRecord& record);

/// Places the crop leftmost and vertically centered, then (train/test)
/// translates it by integer jitter drawn per the rule.
CropWindow sample_crop_window(Index height, Index width, const CropRule& rule, Mode mode,
                              Rng& rng);
Image crop(const Image& pixels, const CropWindow& window);
Image sample_crop(const Image& pixels, const CropRule& rule, Mode mode, Rng& rng);

/// Catmull-Rom bicubic resampling to the given extents, antialiased when
/// shrinking.
Image resize_bicubic(const Image& pixels, Index out_height, Index out_width);
/// Downscale by factor in (0, 1]; output extents are rounded.
Image downscale(const Image& pixels, double factor);

/// One record per view: uniform choice in train/test, earliest timestamp in
/// validation.
std::array<ImageRecord, 4> select_image_per_view(const Exam& exam, Mode mode, Rng& rng);

/// Patients ordered by their latest exam date: first 80% train, next 10%
/// validation, last 10% test.
DatasetSplit split_by_patient(const std::vector<Exam>& exams, const SplitSpec& spec = {});

/// The latest exam of every patient, in input order of first appearance.
std::vector<Exam> latest_exam_per_patient(const std::vector<Exam>& exams);

/// Where a dataset's pixels come from and what the model consumes.
struct PipelineConfig {
  Scale native_scale;  // resolution the stored images were captured at
  Scale target_scale;  // resolution the model consumes

  CropRule crop_rule() const { return CropRule::at(target_scale); }
  double downscale_factor() const;
};

/// select -> standardize orientation -> downscale -> crop -> normalize.
/// Returns the four model inputs in view order.
std::array<Image, 4> prepare_views(const Exam& exam, const PipelineConfig& config, Mode mode,
                                   Rng& rng);

}  // namespace mvscreen::data
