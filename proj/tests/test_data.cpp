#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mvscreen/image.hpp"
#include "mvscreen/manifest.hpp"
#include "mvscreen/synthetic.hpp"
#include "support.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <set>

using namespace mvscreen;
using namespace mvscreen::data;
namespace fs = std::filesystem;

namespace {

Exam exam_with(const std::string& id, const std::string& patient, const std::string& date, int label = 1) {
  Exam e;
  e.exam_id = id;
  e.patient_id = patient;
  e.exam_date = date;
  e.label = label;
  for (View v : kViews) e.views[v].push_back(ImageRecord::in_memory(v, date + "T09:00:00", Image::Zero(4, 4)));
  return e;
}

Image ramp(Index h, Index w) {
  Image img(h, w);
  for (Index r = 0; r < h; ++r)
    for (Index c = 0; c < w; ++c) img(r, c) = static_cast<float>(r * w + c);
  return img;
}

}  // namespace

TEST_CASE("view and mode names") {
  CHECK(view_name(View::RMLO) == "R-MLO");
  CHECK(parse_view("L-CC") == View::LCC);
  CHECK_THROWS_AS(parse_view("LCC"), DataError);
  CHECK(is_right(View::RCC));
  CHECK_FALSE(is_right(View::LMLO));
  CHECK(is_cc(View::LCC));
  CHECK(parse_mode("validation") == Mode::validation);
}

TEST_CASE("scales parse in several spellings") {
  CHECK(Scale::parse("1/8").denominator() == 8);
  CHECK(Scale::parse("0.25").denominator() == 4);
  CHECK(Scale::parse("x1/2").denominator() == 2);
  CHECK(Scale::parse("1").denominator() == 1);
  CHECK(Scale::from_denominator(8).str() == "1/8");
  CHECK_THROWS_AS(Scale::parse("1/3"), DataError);
  CHECK_THROWS_AS(Scale::parse("2"), DataError);
  CHECK_THROWS_AS(Scale::parse("abc"), DataError);
}

TEST_CASE("crop rule per scale") {
  const auto r = CropRule::at(Scale::from_denominator(8));
  CHECK(r.crop_height == 325);
  CHECK(r.crop_width == 250);
  CHECK(CropRule::at(Scale::from_denominator(1)).jitter_cap == 100);
}

TEST_CASE("normalize: two-pixel example, constants, moments") {
  Image two(1, 2);
  two << 0, 2;
  const Image n = normalize_image(two);
  CHECK(n(0, 0) == doctest::Approx(-1.0));
  CHECK(n(0, 1) == doctest::Approx(1.0));
  CHECK(normalize_image(Image::Constant(3, 5, 7.0f)).isZero());

  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    Image img(17, 23);
    for (Index i = 0; i < img.size(); ++i) img.data()[i] = static_cast<float>(1000.0 * uniform_unit(rng) + 30000.0);
    const Image z = normalize_image(img);
    const double mean = z.cast<double>().mean();
    const double sd = std::sqrt((z.cast<double>() - mean).square().mean());
    CHECK(std::abs(mean) < 1e-5);
    CHECK(std::abs(sd - 1.0) < 1e-5);
  }
}

TEST_CASE("orientation: R views mirror, L views unchanged, involution") {
  Image row(1, 3);
  row << 1, 2, 3;
  const auto r = standardize_orientation(ImageRecord::in_memory(View::RCC, "t", row)).pixels();
  CHECK(r(0, 0) == 3);
  CHECK(r(0, 2) == 1);
  const auto l = standardize_orientation(ImageRecord::in_memory(View::LCC, "t", row)).pixels();
  CHECK((l == row).all());
  const Image img = ramp(4, 5);
  CHECK((flip_horizontal(flip_horizontal(img)) == img).all());
}

TEST_CASE("crop: exact-size image has degenerate jitter") {
  Rng rng(3);
  const CropRule rule;
  for (int i = 0; i < 50; ++i) {
    const auto w = sample_crop_window(2600, 2000, rule, Mode::train, rng);
    CHECK(w.top == 0);
    CHECK(w.left == 0);
  }
}

TEST_CASE("crop: validation mode on 2800x2200 takes rows 100..2699, columns 0..1999") {
  Rng rng(3);
  const auto w = sample_crop_window(2800, 2200, CropRule{}, Mode::validation, rng);
  CHECK(w.top == 100);
  CHECK(w.left == 0);
  CHECK(w.top + w.height - 1 == 2699);
  CHECK(w.left + w.width - 1 == 1999);
}

TEST_CASE("crop: jitter intervals on 2800x2200 over 10^4 draws") {
  for (Mode mode : {Mode::train, Mode::test}) {
    Rng rng(17);
    Index vmin = 1000, vmax = -1000, hmin = 1000, hmax = -1000;
    for (int i = 0; i < 10000; ++i) {
      const auto w = sample_crop_window(2800, 2200, CropRule{}, mode, rng);
      REQUIRE(w.top >= 0);
      REQUIRE(w.left >= 0);
      REQUIRE(w.top + w.height <= 2800);
      REQUIRE(w.left + w.width <= 2200);
      vmin = std::min(vmin, w.shift_vertical);
      vmax = std::max(vmax, w.shift_vertical);
      hmin = std::min(hmin, w.shift_horizontal);
      hmax = std::max(hmax, w.shift_horizontal);
    }
    CHECK(vmin >= -100);
    CHECK(vmin <= -95);
    CHECK(vmax <= 100);
    CHECK(vmax >= 95);
    CHECK(hmin == 0);
    CHECK(hmax <= 100);
    CHECK(hmax >= 95);
  }
}

TEST_CASE("crop: image smaller than the crop is rejected") {
  Rng rng(1);
  CHECK_THROWS_AS(sample_crop_window(2599, 2000, CropRule{}, Mode::train, rng), DataError);
  CHECK_THROWS_AS(sample_crop(Image::Zero(10, 10), CropRule{}, Mode::validation, rng), DataError);
}

TEST_CASE("crop copies the window's pixels") {
  const Image img = ramp(6, 5);
  const CropWindow w{1, 2, 3, 2, 0, 0};
  const Image c = crop(img, w);
  CHECK(c.rows() == 3);
  CHECK(c(0, 0) == img(1, 2));
  CHECK(c(2, 1) == img(3, 3));
}

TEST_CASE("downscale: identity, constants, extents") {
  const Image img = ramp(12, 9);
  CHECK((downscale(img, 1.0) == img).all());
  const Image c = downscale(Image::Constant(2600, 2000, 123.0f), 0.125);
  CHECK(c.rows() == 325);
  CHECK(c.cols() == 250);
  CHECK((c - 123.0f).abs().maxCoeff() < 1e-3);
  CHECK(downscale(Image::Zero(100, 60), 0.5).cols() == 30);
  CHECK_THROWS_AS(downscale(img, 0.0), DataError);
  CHECK_THROWS_AS(downscale(img, 1.5), DataError);
}

TEST_CASE("downscale preserves a linear ramp away from the borders") {
  // Bicubic weights reproduce affine functions exactly.
  const Image img = ramp(64, 64);
  const Image d = resize_bicubic(img, 32, 32);
  // Output pixel (r, c) centers on input coordinate 2r + 0.5.
  for (Index r = 4; r < 28; ++r)
    for (Index c = 4; c < 28; ++c) CHECK(d(r, c) == doctest::Approx((2 * r + 0.5) * 64 + (2 * c + 0.5)).epsilon(1e-5));
}

TEST_CASE("select: single image, earliest timestamp, uniform choice") {
  Exam e = exam_with("E1", "P1", "2015-01-01");
  Rng rng(5);
  for (Mode m : {Mode::train, Mode::validation, Mode::test}) {
    const auto chosen = select_image_per_view(e, m, rng);
    CHECK(chosen[0].timestamp == "2015-01-01T09:00:00");
  }
  e.views[View::LCC] = {ImageRecord::in_memory(View::LCC, "2015-01-01T10:00:00", Image::Zero(2, 2)),
                        ImageRecord::in_memory(View::LCC, "2015-01-01T09:30:00", Image::Ones(2, 2))};
  CHECK(select_image_per_view(e, Mode::validation, rng)[0].timestamp == "2015-01-01T09:30:00");
  int first = 0;
  for (int i = 0; i < 10000; ++i) {
    if (select_image_per_view(e, Mode::train, rng)[0].timestamp == "2015-01-01T10:00:00") ++first;
  }
  CHECK(std::abs(first / 10000.0 - 0.5) < 0.05);
  e.views[View::RCC].clear();
  CHECK_THROWS_AS(select_image_per_view(e, Mode::train, rng), DataError);
}

TEST_CASE("exam validation") {
  Exam e = exam_with("E1", "P1", "2015-01-01");
  CHECK_NOTHROW(e.validate());
  e.label = 3;
  CHECK_THROWS_AS(e.validate(), DataError);
  e.label = 0;
  e.views.erase(View::LMLO);
  CHECK_THROWS_AS(e.validate(), DataError);
}

TEST_CASE("split: ten patients give 8/1/1, ordered by latest exam") {
  std::vector<Exam> exams;
  for (int p = 0; p < 10; ++p) {
    char date[16];
    std::snprintf(date, sizeof date, "2015-01-%02d", 10 - p);  // patient 9 is earliest
    exams.push_back(exam_with("E" + std::to_string(p), "P" + std::to_string(p), date));
  }
  const auto s = split_by_patient(exams);
  CHECK(s.train.size() == 8);
  CHECK(s.validation.size() == 1);
  CHECK(s.test.size() == 1);
  CHECK(s.test[0].patient_id == "P0");
  CHECK(s.validation[0].patient_id == "P1");
  exams.pop_back();
  CHECK_THROWS_AS(split_by_patient(exams), DataError);
}

TEST_CASE("split: patients never straddle, union is everyone, test uses latest exams") {
  SyntheticDatasetSpec spec;
  spec.n_exams = 300;
  spec.seed = 9;
  spec.repeat_patient_rate = 0.3;
  spec.image.scale = Scale::from_denominator(8);
  const auto exams = generate_synthetic_dataset(spec);
  const auto s = split_by_patient(exams);
  std::set<std::string> tr, va, te;
  for (const auto& e : s.train) tr.insert(e.patient_id);
  for (const auto& e : s.validation) va.insert(e.patient_id);
  for (const auto& e : s.test) te.insert(e.patient_id);
  for (const auto& p : va) CHECK(tr.count(p) == 0);
  for (const auto& p : te) CHECK((tr.count(p) + va.count(p)) == 0);
  CHECK(s.train.size() + s.validation.size() + s.test.size() == exams.size());

  const auto latest = latest_exam_per_patient(s.test);
  CHECK(latest.size() == te.size());
  for (const auto& l : latest) {
    for (const auto& e : s.test) {
      if (e.patient_id == l.patient_id) CHECK(e.exam_date <= l.exam_date);
    }
  }
}

TEST_CASE("synthetic: extents and class counts") {
  SyntheticConfig c{Scale::from_denominator(8), 0};
  CHECK(synthetic_extent(c) == std::array<Index, 2>{325, 250});
  c.margin = 400;
  CHECK(synthetic_extent(c) == std::array<Index, 2>{375, 300});
  CHECK(class_counts(1000, {0.13, 0.46, 0.41}) == std::array<int, 3>{130, 460, 410});
  const auto counts = class_counts(101, {0.13, 0.46, 0.41});
  CHECK(counts[0] + counts[1] + counts[2] == 101);
}

TEST_CASE("synthetic: deterministic, label 1 carries no blobs") {
  const SyntheticConfig c{Scale::from_denominator(8), 0};
  const Exam a = generate_synthetic_exam(42, 2, c);
  const Exam b = generate_synthetic_exam(42, 2, c);
  for (View v : kViews) {
    const Image pa = a.views.at(v)[0].pixels();
    CHECK(pa.rows() == 325);
    CHECK((pa == b.views.at(v)[0].pixels()).all());
  }
  CHECK(synthetic_blobs(42, 1, c).empty());
  CHECK(synthetic_blobs(42, 0, c).size() == 2);
  CHECK(synthetic_blobs(42, 2, c).size() == 4);
  CHECK_THROWS_AS(generate_synthetic_exam(1, 3, c), DataError);
}

TEST_CASE("synthetic: a linear probe on raw pixels separates label 1 from the rest") {
  // Logistic regression on block-averaged raw pixels of all four views;
  // trained on 150 exams, scored on 50 held-out ones.
  const SyntheticConfig c{Scale::from_denominator(8), 0};
  constexpr Index block = 25;
  const Index fh = 325 / block, fw = 250 / block;
  const Index dims = 4 * fh * fw;
  Eigen::MatrixXd x(200, dims);
  Eigen::VectorXd y(200);
  for (int i = 0; i < 200; ++i) {
    const int label = i % 3;
    const Exam e = generate_synthetic_exam(derive_seed(77, "probe", static_cast<std::uint64_t>(i)), label, c);
    Index k = 0;
    for (View v : kViews) {
      const Image p = standardize_orientation(e.views.at(v)[0]).pixels();
      for (Index r = 0; r < fh; ++r)
        for (Index q = 0; q < fw; ++q) x(i, k++) = p.block(r * block, q * block, block, block).cast<double>().mean();
    }
    y[i] = label == 1 ? 1.0 : 0.0;
  }
  const Eigen::RowVectorXd mu = x.topRows(150).colwise().mean();
  const Eigen::RowVectorXd sd =
      ((x.topRows(150).rowwise() - mu).array().square().colwise().mean()).sqrt().max(1e-9).matrix();
  x = ((x.rowwise() - mu).array().rowwise() / sd.array()).matrix();

  Eigen::VectorXd w = Eigen::VectorXd::Zero(dims);
  double b = 0;
  for (int it = 0; it < 3000; ++it) {
    const Eigen::VectorXd prob = (1.0 + (-(x.topRows(150) * w).array() - b).exp()).inverse().matrix();
    const Eigen::VectorXd g = prob - y.head(150);
    w -= 0.05 * (x.topRows(150).transpose() * g / 150.0 + 1e-2 * w);
    b -= 0.05 * g.mean();
  }
  int correct = 0;
  for (int i = 150; i < 200; ++i) {
    const double score = x.row(i).dot(w) + b;
    correct += ((score > 0) == (y[i] > 0.5)) ? 1 : 0;
  }
  MESSAGE("held-out probe accuracy " << correct / 50.0);
  CHECK(correct / 50.0 > 0.8);
}

TEST_CASE("prepare_views: shapes, mirrored input symmetry, determinism") {
  const SyntheticConfig c{Scale::from_denominator(8), 0};
  const Exam e = generate_synthetic_exam(5, 0, c);
  const PipelineConfig pipeline{Scale::from_denominator(8), Scale::from_denominator(8)};
  Rng a(1), b(1);
  const auto va = prepare_views(e, pipeline, Mode::train, a);
  const auto vb = prepare_views(e, pipeline, Mode::train, b);
  for (int v = 0; v < 4; ++v) {
    CHECK(va[v].rows() == 325);
    CHECK(va[v].cols() == 250);
    CHECK((va[v] == vb[v]).all());
    CHECK(std::abs(va[v].cast<double>().mean()) < 1e-5);
  }
  const PipelineConfig down{Scale::from_denominator(4), Scale::from_denominator(8)};
  const Exam big = generate_synthetic_exam(5, 0, SyntheticConfig{Scale::from_denominator(4), 0});
  Rng r(2);
  CHECK(prepare_views(big, down, Mode::validation, r)[0].rows() == 325);
  const PipelineConfig up{Scale::from_denominator(8), Scale::from_denominator(4)};
  CHECK_THROWS(prepare_views(e, up, Mode::validation, r));
}

TEST_CASE("PGM round trip, 16 and 8 bit") {
  const auto dir = test::scratch_dir("pgm");
  Image img(3, 4);
  img << 0, 1, 255, 256, 1000, 65535, 7, 8, 9, 10, 11, 12;
  write_pgm16(dir / "a.pgm", img);
  CHECK((read_pgm(dir / "a.pgm") == img).all());
  const auto h = read_pgm_header(dir / "a.pgm");
  CHECK(h.height == 3);
  CHECK(h.width == 4);
  CHECK(h.maxval == 65535);
  Image8 small(2, 2);
  small << 0, 50, 200, 255;
  write_pgm8(dir / "b.pgm", small);
  CHECK((read_pgm(dir / "b.pgm") == small.cast<float>()).all());
  CHECK_THROWS_AS(read_pgm(dir / "missing.pgm"), ImageError);
  std::ofstream(dir / "bad.pgm") << "P2\n1 1\n255\n0\n";
  CHECK_THROWS_AS(read_pgm(dir / "bad.pgm"), ImageError);
}

TEST_CASE("manifest round trip and error kinds") {
  const auto dir = test::scratch_dir("manifest");
  SyntheticDatasetSpec spec;
  spec.n_exams = 5;
  spec.seed = 3;
  spec.extra_image_rate = 0.5;
  spec.image.scale = Scale::from_denominator(8);
  const auto written = write_dataset(generate_synthetic_dataset(spec), dir);
  const auto loaded = load_manifest(dir / "manifest.jsonl");
  REQUIRE(loaded.size() == written.size());
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    CHECK(loaded[i].exam_id == written[i].exam_id);
    CHECK(loaded[i].patient_id == written[i].patient_id);
    CHECK(loaded[i].exam_date == written[i].exam_date);
    CHECK(loaded[i].label == written[i].label);
    for (View v : kViews) {
      REQUIRE(loaded[i].views.at(v).size() == written[i].views.at(v).size());
      for (std::size_t k = 0; k < loaded[i].views.at(v).size(); ++k) {
        CHECK(loaded[i].views.at(v)[k].timestamp == written[i].views.at(v)[k].timestamp);
        CHECK(fs::equivalent(loaded[i].views.at(v)[k].path, written[i].views.at(v)[k].path));
      }
    }
  }
  CHECK((loaded[0].views.at(View::LCC)[0].pixels() == written[0].views.at(View::LCC)[0].pixels()).all());

  std::ofstream(dir / "empty.jsonl").close();
  CHECK(load_manifest(dir / "empty.jsonl").empty());

  auto kind_of = [](const fs::path& p) {
    try {
      load_manifest(p);
    } catch (const ManifestError& e) {
      return std::pair{e.kind(), std::string(e.what())};
    }
    FAIL("expected a manifest error");
    return std::pair{ManifestError::Kind::syntax, std::string()};
  };
  CHECK(kind_of(dir / "nope.jsonl").first == ManifestError::Kind::missing_file);
  std::ofstream(dir / "syntax.jsonl") << "{not json\n";
  CHECK(kind_of(dir / "syntax.jsonl").first == ManifestError::Kind::syntax);

  const std::string first_line = [&] {
    std::ifstream in(dir / "manifest.jsonl");
    std::string l;
    std::getline(in, l);
    return l;
  }();
  auto variant = [&](const std::string& name, std::string line) {
    std::ofstream(dir / name) << line << '\n';
    return dir / name;
  };
  std::string no_view = first_line;
  no_view.replace(no_view.find("\"L-CC\""), 6, "\"X-CC\"");
  CHECK(kind_of(variant("view.jsonl", no_view)).first != ManifestError::Kind::missing_file);

  auto bad_label = first_line;
  bad_label.replace(bad_label.find("\"label\":") + 8, 1, "7");
  CHECK(kind_of(variant("label.jsonl", bad_label)).first == ManifestError::Kind::invalid_label);

  fs::remove(written[0].views.at(View::RMLO)[0].path);
  const auto [kind, message] = kind_of(dir / "manifest.jsonl");
  CHECK(kind == ManifestError::Kind::unreadable_image);
  CHECK(message.find(fs::path(written[0].views.at(View::RMLO)[0].path).filename().string()) != std::string::npos);
}

TEST_CASE("dataset info") {
  const auto dir = test::scratch_dir("info");
  CHECK(read_dataset_info(dir).scale.denominator() == 1);
  write_dataset_info({Scale::from_denominator(8), 4, 30}, dir);
  const auto info = read_dataset_info(dir);
  CHECK(info.scale.denominator() == 8);
  CHECK(info.seed == 4);
  CHECK(info.n_exams == 30);
}
