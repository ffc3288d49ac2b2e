#pragma once

#include "mvscreen/data.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace mvscreen::data {

/// Stand-in for private screening data. Every breast is a smooth textured
/// half-ellipse against the chest wall; labels differ only in injected blobs:
///   0: one high-contrast blob in one breast (both views of that side)
///   1: nothing
///   2: low-contrast blobs at mirrored positions in both breasts
struct SyntheticConfig {
  Scale scale;
  /// Extra rows (split top/bottom) and columns (right side) beyond the crop,
  /// in full-resolution pixels. 200 gives 2800x2200 at scale 1.
  Index margin = 0;
};

struct Blob {
  View view;
  double row = 0;  // pixel coordinates in the standardized (left-facing) frame
  double col = 0;
  double radius = 0;
  double amplitude = 0;
};

/// Image extents produced for a config: (2600 + margin) / d by (2000 + margin) / d.
std::array<Index, 2> synthetic_extent(const SyntheticConfig& config);

/// Blobs injected into an exam. Empty for label 1.
std::vector<Blob> synthetic_blobs(std::uint64_t seed, int label, const SyntheticConfig& config);

/// Pixels of one acquisition, in stored (unmirrored) orientation, 16-bit range.
Image generate_view_image(std::uint64_t seed, int label, View view, int image_index,
                          const SyntheticConfig& config);

/// Pure function of (seed, label): one image per view, generated lazily.
Exam generate_synthetic_exam(std::uint64_t seed, int label, const SyntheticConfig& config);

struct SyntheticDatasetSpec {
  int n_exams = 100;
  std::uint64_t seed = 0;
  SyntheticConfig image;
  /// Class proportions for labels 0, 1, 2.
  std::array<double, 3> class_mix{0.13, 0.46, 0.41};
  /// Probability that an exam belongs to the previous exam's patient.
  double repeat_patient_rate = 0.1;
  /// Probability that a view carries a second acquisition.
  double extra_image_rate = 0.05;
};

/// Exact per-class counts: rounded shares, remainder absorbed by the
/// largest class.
std::array<int, 3> class_counts(int n, const std::array<double, 3>& mix);

std::vector<Exam> generate_synthetic_dataset(const SyntheticDatasetSpec& spec);

}  // namespace mvscreen::data
