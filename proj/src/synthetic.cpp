#include "mvscreen/synthetic.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>

namespace mvscreen::data {

namespace {

constexpr int kTextureTerms = 6;
constexpr double kTextureAmplitude = 0.03;
constexpr double kPixelNoise = 0.02;
constexpr double kBlobRadius = 0.05;  // fraction of crop height

struct Frame {
  Index height, width;      // full image
  Index crop_h, crop_w;     // crop at this scale
  Index top;                // base crop offset
};

Frame frame_for(const SyntheticConfig& config) {
  const auto extent = synthetic_extent(config);
  const CropRule rule = CropRule::at(config.scale);
  return {extent[0], extent[1], rule.crop_height, rule.crop_width,
          (extent[0] - rule.crop_height) / 2};
}

std::string format_date(int days_since_2010) {
  using namespace std::chrono;
  const year_month_day ymd{sys_days{year{2010} / January / 1} + days{days_since_2010}};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

}  // namespace

std::array<Index, 2> synthetic_extent(const SyntheticConfig& config) {
  if (config.margin < 0) throw DataError("synthetic margin must be non-negative");
  const int d = config.scale.denominator();
  return {(2600 + config.margin) / d, (2000 + config.margin) / d};
}

std::vector<Blob> synthetic_blobs(std::uint64_t seed, int label, const SyntheticConfig& config) {
  if (label < 0 || label >= kNumClasses) {
    throw DataError("synthetic label " + std::to_string(label) + " outside {0,1,2}");
  }
  const Frame f = frame_for(config);
  Rng rng = make_rng(seed, "synthetic-layout", static_cast<std::uint64_t>(label));
  auto place = [&] {
    const double row = static_cast<double>(f.top) + (0.3 + 0.4 * uniform_unit(rng)) * f.crop_h;
    const double col = (0.15 + 0.35 * uniform_unit(rng)) * f.crop_w;
    return std::pair{row, col};
  };
  const double radius = kBlobRadius * static_cast<double>(f.crop_h);

  std::vector<Blob> blobs;
  if (label == 0) {
    const bool right = uniform_unit(rng) < 0.5;
    const double amplitude = 0.25 + 0.30 * uniform_unit(rng);
    for (View v : {right ? View::RCC : View::LCC, right ? View::RMLO : View::LMLO}) {
      const auto [row, col] = place();
      blobs.push_back({v, row, col, radius, amplitude});
    }
  } else if (label == 2) {
    const double amplitude = 0.08 + 0.12 * uniform_unit(rng);
    for (auto [left, right] : {std::pair{View::LCC, View::RCC}, std::pair{View::LMLO, View::RMLO}}) {
      const auto [row, col] = place();
      blobs.push_back({left, row, col, radius, amplitude});
      blobs.push_back({right, row, col, radius, amplitude});
    }
  }
  return blobs;
}

Image generate_view_image(std::uint64_t seed, int label, View view, int image_index,
                          const SyntheticConfig& config) {
  const Frame f = frame_for(config);
  Rng rng = make_rng(seed, "synthetic-background", static_cast<std::uint64_t>(view),
                     static_cast<std::uint64_t>(image_index));

  // Low-frequency texture as a rank-kTextureTerms product of cosines.
  Eigen::MatrixXf row_terms(f.height, kTextureTerms);
  Eigen::MatrixXf col_terms(f.width, kTextureTerms);
  for (int k = 0; k < kTextureTerms; ++k) {
    const double fr = 1.0 + 4.0 * uniform_unit(rng);
    const double fc = 1.0 + 4.0 * uniform_unit(rng);
    const double pr = 2.0 * std::numbers::pi * uniform_unit(rng);
    const double pc = 2.0 * std::numbers::pi * uniform_unit(rng);
    row_terms.col(k) = (Eigen::ArrayXd::LinSpaced(f.height, 0.0, 1.0) * 2.0 * std::numbers::pi * fr + pr)
                           .cos()
                           .cast<float>() *
                       static_cast<float>(kTextureAmplitude);
    col_terms.col(k) =
        (Eigen::ArrayXd::LinSpaced(f.width, 0.0, 1.0) * 2.0 * std::numbers::pi * fc + pc).cos().cast<float>();
  }
  Image texture = (row_terms * col_terms.transpose()).array() + 0.45f;

  for (const Blob& b : synthetic_blobs(seed, label, config)) {
    if (b.view != view) continue;
    const Index r0 = std::max<Index>(0, static_cast<Index>(b.row - 3 * b.radius));
    const Index r1 = std::min<Index>(f.height - 1, static_cast<Index>(b.row + 3 * b.radius));
    const Index c0 = std::max<Index>(0, static_cast<Index>(b.col - 3 * b.radius));
    const Index c1 = std::min<Index>(f.width - 1, static_cast<Index>(b.col + 3 * b.radius));
    for (Index r = r0; r <= r1; ++r) {
      for (Index c = c0; c <= c1; ++c) {
        const double d2 = (r - b.row) * (r - b.row) + (c - b.col) * (c - b.col);
        texture(r, c) += static_cast<float>(b.amplitude * std::exp(-d2 / (2.0 * b.radius * b.radius)));
      }
    }
  }

  Image noise(f.height, f.width);
  fill_standard_normal(rng, {noise.data(), static_cast<std::size_t>(noise.size())});

  // Breast silhouette against the left edge of the standardized frame.
  const double center_row = static_cast<double>(f.top) + 0.5 * f.crop_h;
  const double semi_rows = (is_cc(view) ? 0.42 : 0.46) * f.crop_h;
  const double semi_cols = (is_cc(view) ? 0.80 : 0.72) * f.crop_w;
  const Eigen::ArrayXf dc2 =
      (Eigen::ArrayXf::LinSpaced(f.width, 0.0f, static_cast<float>(f.width - 1)) / static_cast<float>(semi_cols))
          .square();
  Image out(f.height, f.width);
  for (Index r = 0; r < f.height; ++r) {
    const auto dr = static_cast<float>((r - center_row) / semi_rows);
    const Eigen::ArrayXf radial = (dc2 + dr * dr).sqrt();
    const Eigen::ArrayXf tissue = ((1.0f - radial) / 0.08f).max(0.0f).min(1.0f);
    const Eigen::ArrayXf intensity = 0.05f + tissue * texture.row(r).transpose() +
                                     static_cast<float>(kPixelNoise) * noise.row(r).transpose();
    out.row(r) = (4000.0f + 40000.0f * intensity).round().max(0.0f).min(65535.0f).transpose();
  }
  return is_right(view) ? flip_horizontal(out) : out;
}

Exam generate_synthetic_exam(std::uint64_t seed, int label, const SyntheticConfig& config) {
  if (label < 0 || label >= kNumClasses) {
    throw DataError("synthetic label " + std::to_string(label) + " outside {0,1,2}");
  }
  Exam exam;
  char id[32];
  std::snprintf(id, sizeof id, "S%016llx", static_cast<unsigned long long>(seed));
  exam.exam_id = id;
  exam.patient_id = "P" + exam.exam_id.substr(1);
  exam.exam_date = format_date(static_cast<int>(derive_seed(seed, "synthetic-date") % 2400));
  exam.label = label;
  for (View v : kViews) {
    ImageRecord rec;
    rec.view = v;
    rec.timestamp = exam.exam_date + "T09:00:00";
    rec.source = [seed, label, v, config] { return generate_view_image(seed, label, v, 0, config); };
    exam.views[v].push_back(std::move(rec));
  }
  return exam;
}

std::array<int, 3> class_counts(int n, const std::array<double, 3>& mix) {
  const double total = mix[0] + mix[1] + mix[2];
  if (n < 0 || !(total > 0) || mix[0] < 0 || mix[1] < 0 || mix[2] < 0) {
    throw DataError("invalid class mix");
  }
  std::array<int, 3> counts{};
  int assigned = 0;
  for (int c = 0; c < 3; ++c) {
    counts[static_cast<std::size_t>(c)] =
        static_cast<int>(std::lround(n * mix[static_cast<std::size_t>(c)] / total));
    assigned += counts[static_cast<std::size_t>(c)];
  }
  const auto largest = static_cast<std::size_t>(std::max_element(mix.begin(), mix.end()) - mix.begin());
  counts[largest] += n - assigned;
  return counts;
}

std::vector<Exam> generate_synthetic_dataset(const SyntheticDatasetSpec& spec) {
  const auto counts = class_counts(spec.n_exams, spec.class_mix);
  std::vector<int> labels;
  for (int c = 0; c < 3; ++c) labels.insert(labels.end(), counts[static_cast<std::size_t>(c)], c);
  Rng rng = make_rng(spec.seed, "synthetic-dataset");
  for (std::size_t i = labels.size(); i > 1; --i) {
    std::swap(labels[i - 1], labels[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(i) - 1))]);
  }

  std::vector<Exam> exams;
  exams.reserve(labels.size());
  int patient = 0;
  int patient_day = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::uint64_t exam_seed = derive_seed(spec.seed, "synthetic-exam", i);
    const int label = labels[i];
    const bool repeat = i > 0 && uniform_unit(rng) < spec.repeat_patient_rate;
    int day;
    if (repeat) {
      day = patient_day + 300 + static_cast<int>(uniform_int(rng, 0, 200));
    } else {
      ++patient;
      day = static_cast<int>(uniform_int(rng, 0, 2400));
    }
    patient_day = day;

    Exam exam;
    char buf[32];
    std::snprintf(buf, sizeof buf, "E%06zu", i);
    exam.exam_id = buf;
    std::snprintf(buf, sizeof buf, "P%06d", patient);
    exam.patient_id = buf;
    exam.exam_date = format_date(day);
    exam.label = label;
    for (View v : kViews) {
      const int images = uniform_unit(rng) < spec.extra_image_rate ? 2 : 1;
      for (int k = 0; k < images; ++k) {
        ImageRecord rec;
        rec.view = v;
        std::snprintf(buf, sizeof buf, "T%02d:%02d:00", 9 + k, static_cast<int>(uniform_int(rng, 0, 59)));
        rec.timestamp = exam.exam_date + buf;
        rec.source = [exam_seed, label, v, k, cfg = spec.image] {
          return generate_view_image(exam_seed, label, v, k, cfg);
        };
        exam.views[v].push_back(std::move(rec));
      }
    }
    exams.push_back(std::move(exam));
  }
  return exams;
}

}  // namespace mvscreen::data
