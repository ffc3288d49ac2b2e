#include "mvscreen/data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <unordered_map>

namespace mvscreen::data {

std::string_view view_name(View view) {
  switch (view) {
    case View::LCC: return "L-CC";
    case View::RCC: return "R-CC";
    case View::LMLO: return "L-MLO";
    case View::RMLO: return "R-MLO";
  }
  return "?";
}

View parse_view(std::string_view name) {
  for (View v : kViews) {
    if (view_name(v) == name) return v;
  }
  throw DataError("unknown view '" + std::string(name) + "'");
}

bool is_right(View view) { return view == View::RCC || view == View::RMLO; }
bool is_cc(View view) { return view == View::LCC || view == View::RCC; }

std::string_view mode_name(Mode mode) {
  switch (mode) {
    case Mode::train: return "train";
    case Mode::validation: return "validation";
    case Mode::test: return "test";
  }
  return "?";
}

Mode parse_mode(std::string_view name) {
  if (name == "train") return Mode::train;
  if (name == "validation" || name == "val") return Mode::validation;
  if (name == "test") return Mode::test;
  throw DataError("unknown mode '" + std::string(name) + "'");
}

Scale Scale::from_denominator(int denominator) {
  if (denominator != 1 && denominator != 2 && denominator != 4 && denominator != 8) {
    throw DataError("unsupported scale 1/" + std::to_string(denominator) +
                    " (expected 1, 1/2, 1/4 or 1/8)");
  }
  return Scale(denominator);
}

Scale Scale::parse(std::string_view text) {
  std::string s(text);
  if (!s.empty() && (s[0] == 'x' || s[0] == 'X')) s.erase(0, 1);
  try {
    if (const auto slash = s.find('/'); slash != std::string::npos) {
      std::size_t used = 0;
      const int num = std::stoi(s.substr(0, slash), &used);
      if (used != slash || num != 1) throw DataError("");
      const std::string den_text = s.substr(slash + 1);
      const int den = std::stoi(den_text, &used);
      if (used != den_text.size()) throw DataError("");
      return from_denominator(den);
    }
    std::size_t used = 0;
    const double value = std::stod(s, &used);
    if (used != s.size() || value <= 0) throw DataError("");
    const double den = 1.0 / value;
    const int rounded = static_cast<int>(std::lround(den));
    if (std::abs(den - rounded) > 1e-9) throw DataError("");
    return from_denominator(rounded);
  } catch (const DataError& e) {
    if (std::string_view(e.what()).empty()) {
      throw DataError("invalid scale '" + std::string(text) + "'");
    }
    throw;
  } catch (const std::exception&) {
    throw DataError("invalid scale '" + std::string(text) + "'");
  }
}

std::string Scale::str() const {
  return denominator_ == 1 ? "1" : "1/" + std::to_string(denominator_);
}

Image ImageRecord::pixels() const {
  if (!source) throw DataError("image record for " + std::string(view_name(view)) + " has no source");
  return source();
}

ImageRecord ImageRecord::in_memory(View view, std::string timestamp, Image pixels) {
  auto shared = std::make_shared<const Image>(std::move(pixels));
  return ImageRecord{view, std::move(timestamp), {}, [shared] { return *shared; }};
}

ImageRecord ImageRecord::from_file(View view, std::string timestamp, std::string path) {
  std::string p = path;
  return ImageRecord{view, std::move(timestamp), std::move(path), [p] { return read_pgm(p); }};
}

void Exam::validate() const {
  if (label < 0 || label >= kNumClasses) {
    throw DataError("exam " + exam_id + ": label " + std::to_string(label) +
                    " outside {0,1,2}");
  }
  for (View v : kViews) {
    auto it = views.find(v);
    if (it == views.end() || it->second.empty()) {
      throw DataError("exam " + exam_id + ": missing view " + std::string(view_name(v)));
    }
  }
}

CropRule CropRule::at(Scale scale) {
  const int d = scale.denominator();
  CropRule rule;
  rule.crop_height = 2600 / d;
  rule.crop_width = 2000 / d;
  rule.jitter_cap = std::lround(100.0 / d);
  return rule;
}

Image normalize_image(const Image& pixels) {
  const double n = static_cast<double>(pixels.size());
  const double mean = pixels.cast<double>().sum() / n;
  const double var = (pixels.cast<double>() - mean).square().sum() / n;
  const double sigma = std::sqrt(var);
  if (sigma < 1e-8) return Image::Zero(pixels.rows(), pixels.cols());
  return ((pixels.cast<double>() - mean) / sigma).cast<float>();
}

Image flip_horizontal(const Image& pixels) { return pixels.rowwise().reverse(); }

ImageRecord standardize_orientation(const ImageRecord& record) {
  if (!is_right(record.view)) return record;
  ImageRecord out = record;
  auto inner = record.source;
  out.source = [inner] { return flip_horizontal(inner()); };
  return out;
}

CropWindow sample_crop_window(Index height, Index width, const CropRule& rule, Mode mode,
                              Rng& rng) {
  if (height < rule.crop_height || width < rule.crop_width) {
    throw DataError("image " + std::to_string(height) + "x" + std::to_string(width) +
                    " smaller than crop " + std::to_string(rule.crop_height) + "x" +
                    std::to_string(rule.crop_width));
  }
  CropWindow w;
  w.height = rule.crop_height;
  w.width = rule.crop_width;
  w.top = (height - rule.crop_height) / 2;
  w.left = 0;
  if (mode == Mode::validation) return w;

  const Index b_top = w.top;
  const Index b_bottom = height - rule.crop_height - w.top;
  const Index b_right = width - rule.crop_width;
  w.shift_vertical = uniform_int(rng, -std::min(b_top, rule.jitter_cap),
                                 std::min(b_bottom, rule.jitter_cap));
  w.shift_horizontal = uniform_int(rng, 0, std::min(b_right, rule.jitter_cap));
  w.top += w.shift_vertical;
  w.left += w.shift_horizontal;
  return w;
}

Image crop(const Image& pixels, const CropWindow& window) {
  if (window.top < 0 || window.left < 0 || window.top + window.height > pixels.rows() ||
      window.left + window.width > pixels.cols()) {
    throw DataError("crop window outside image");
  }
  return pixels.block(window.top, window.left, window.height, window.width);
}

Image sample_crop(const Image& pixels, const CropRule& rule, Mode mode, Rng& rng) {
  return crop(pixels, sample_crop_window(pixels.rows(), pixels.cols(), rule, mode, rng));
}

namespace {

double catmull_rom(double t) {
  constexpr double a = -0.5;
  t = std::abs(t);
  if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
  if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
  return 0.0;
}

struct ResampleTable {
  std::vector<Index> first;            // first contributing input index
  std::vector<std::vector<double>> w;  // weights for consecutive clamped inputs
};

ResampleTable make_table(Index in, Index out) {
  const double ratio = static_cast<double>(out) / static_cast<double>(in);
  const double stretch = std::min(ratio, 1.0);
  const double support = 2.0 / stretch;
  ResampleTable table;
  table.first.resize(static_cast<std::size_t>(out));
  table.w.resize(static_cast<std::size_t>(out));
  for (Index o = 0; o < out; ++o) {
    const double center = (static_cast<double>(o) + 0.5) / ratio - 0.5;
    const Index lo = static_cast<Index>(std::floor(center - support)) + 1;
    const Index hi = static_cast<Index>(std::ceil(center + support)) - 1;
    std::vector<double> weights;
    double total = 0;
    for (Index i = lo; i <= hi; ++i) {
      const double w = catmull_rom((static_cast<double>(i) - center) * stretch);
      weights.push_back(w);
      total += w;
    }
    for (double& w : weights) w /= total;
    table.first[static_cast<std::size_t>(o)] = lo;
    table.w[static_cast<std::size_t>(o)] = std::move(weights);
  }
  return table;
}

}  // namespace

Image resize_bicubic(const Image& pixels, Index out_height, Index out_width) {
  if (out_height < 1 || out_width < 1) {
    throw DataError("resize to non-positive extent " + std::to_string(out_height) + "x" +
                    std::to_string(out_width));
  }
  if (out_height == pixels.rows() && out_width == pixels.cols()) return pixels;

  const Index in_h = pixels.rows(), in_w = pixels.cols();
  const ResampleTable cols = make_table(in_w, out_width);
  const ResampleTable rows = make_table(in_h, out_height);

  Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> horizontal(in_h, out_width);
  for (Index y = 0; y < in_h; ++y) {
    const float* src = pixels.data() + y * in_w;
    for (Index x = 0; x < out_width; ++x) {
      const auto& w = cols.w[static_cast<std::size_t>(x)];
      const Index lo = cols.first[static_cast<std::size_t>(x)];
      double acc = 0;
      for (std::size_t k = 0; k < w.size(); ++k) {
        const Index i = std::clamp<Index>(lo + static_cast<Index>(k), 0, in_w - 1);
        acc += w[k] * src[i];
      }
      horizontal(y, x) = acc;
    }
  }

  Image out(out_height, out_width);
  for (Index y = 0; y < out_height; ++y) {
    const auto& w = rows.w[static_cast<std::size_t>(y)];
    const Index lo = rows.first[static_cast<std::size_t>(y)];
    Eigen::Array<double, 1, Eigen::Dynamic> acc = Eigen::Array<double, 1, Eigen::Dynamic>::Zero(out_width);
    for (std::size_t k = 0; k < w.size(); ++k) {
      const Index i = std::clamp<Index>(lo + static_cast<Index>(k), 0, in_h - 1);
      acc += w[k] * horizontal.row(i);
    }
    out.row(y) = acc.cast<float>();
  }
  return out;
}

Image downscale(const Image& pixels, double factor) {
  if (!(factor > 0.0) || factor > 1.0) {
    throw DataError("downscale factor must lie in (0, 1], got " + std::to_string(factor));
  }
  const Index h = std::lround(static_cast<double>(pixels.rows()) * factor);
  const Index w = std::lround(static_cast<double>(pixels.cols()) * factor);
  if (h < 1 || w < 1) throw DataError("downscale yields an empty image");
  return resize_bicubic(pixels, h, w);
}

std::array<ImageRecord, 4> select_image_per_view(const Exam& exam, Mode mode, Rng& rng) {
  std::array<ImageRecord, 4> chosen;
  for (View v : kViews) {
    auto it = exam.views.find(v);
    if (it == exam.views.end() || it->second.empty()) {
      throw DataError("exam " + exam.exam_id + ": no image for view " +
                      std::string(view_name(v)));
    }
    const auto& list = it->second;
    std::size_t pick = 0;
    if (mode == Mode::validation) {
      pick = static_cast<std::size_t>(
          std::min_element(list.begin(), list.end(),
                           [](const ImageRecord& a, const ImageRecord& b) {
                             return a.timestamp < b.timestamp;
                           }) -
          list.begin());
    } else if (list.size() > 1) {
      pick = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(list.size()) - 1));
    }
    chosen[static_cast<std::size_t>(v)] = list[pick];
  }
  return chosen;
}

DatasetSplit split_by_patient(const std::vector<Exam>& exams, const SplitSpec& spec) {
  const double total = spec.train_fraction + spec.validation_fraction + spec.test_fraction;
  if (std::abs(total - 1.0) > 1e-9 || spec.train_fraction <= 0 ||
      spec.validation_fraction <= 0 || spec.test_fraction <= 0) {
    throw DataError("split fractions must be positive and sum to 1");
  }
  std::unordered_map<std::string, std::string> latest;
  std::vector<std::string> patients;
  for (const Exam& e : exams) {
    if (e.patient_id.empty() || e.exam_date.empty()) {
      throw DataError("exam " + e.exam_id + " lacks a patient id or date");
    }
    auto [it, inserted] = latest.emplace(e.patient_id, e.exam_date);
    if (inserted) {
      patients.push_back(e.patient_id);
    } else if (e.exam_date > it->second) {
      it->second = e.exam_date;
    }
  }
  if (patients.size() < 10) {
    throw DataError("split_by_patient needs at least 10 patients, got " +
                    std::to_string(patients.size()));
  }
  std::stable_sort(patients.begin(), patients.end(),
                   [&](const std::string& a, const std::string& b) {
                     const auto& da = latest.at(a);
                     const auto& db = latest.at(b);
                     return da != db ? da < db : a < b;
                   });
  const double n = static_cast<double>(patients.size());
  const auto train_end = static_cast<std::size_t>(std::floor(n * spec.train_fraction + 0.5));
  const auto val_end = static_cast<std::size_t>(
      std::floor(n * (spec.train_fraction + spec.validation_fraction) + 0.5));

  std::unordered_map<std::string, int> bucket;
  for (std::size_t i = 0; i < patients.size(); ++i) {
    bucket[patients[i]] = i < train_end ? 0 : (i < val_end ? 1 : 2);
  }
  DatasetSplit split;
  for (const Exam& e : exams) {
    switch (bucket.at(e.patient_id)) {
      case 0: split.train.push_back(e); break;
      case 1: split.validation.push_back(e); break;
      default: split.test.push_back(e); break;
    }
  }
  return split;
}

std::vector<Exam> latest_exam_per_patient(const std::vector<Exam>& exams) {
  std::unordered_map<std::string, std::size_t> best;
  std::vector<std::string> order;
  for (std::size_t i = 0; i < exams.size(); ++i) {
    auto [it, inserted] = best.emplace(exams[i].patient_id, i);
    if (inserted) {
      order.push_back(exams[i].patient_id);
    } else if (exams[i].exam_date > exams[it->second].exam_date) {
      it->second = i;
    }
  }
  std::vector<Exam> out;
  out.reserve(order.size());
  for (const auto& p : order) out.push_back(exams[best.at(p)]);
  return out;
}

double PipelineConfig::downscale_factor() const {
  if (target_scale.denominator() < native_scale.denominator()) {
    throw DataError("cannot upscale data stored at scale " + native_scale.str() + " to " +
                    target_scale.str());
  }
  return static_cast<double>(native_scale.denominator()) / target_scale.denominator();
}

std::array<Image, 4> prepare_views(const Exam& exam, const PipelineConfig& config, Mode mode,
                                   Rng& rng) {
  const auto records = select_image_per_view(exam, mode, rng);
  const double factor = config.downscale_factor();
  const CropRule rule = config.crop_rule();
  std::array<Image, 4> out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    Image pixels = standardize_orientation(records[i]).pixels();
    if (factor < 1.0) pixels = downscale(pixels, factor);
    out[i] = normalize_image(sample_crop(pixels, rule, mode, rng));
  }
  return out;
}

}  // namespace mvscreen::data
