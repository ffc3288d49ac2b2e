#include "mvscreen/image.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

namespace mvscreen {

namespace {

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string next_token(std::istream& in) {
  std::string token;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!token.empty()) break;
      continue;
    }
    token.push_back(static_cast<char>(c));
  }
  return token;
}

Eigen::Index parse_positive(const std::string& token, const std::filesystem::path& path,
                            const char* field) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(token, &used);
    if (used == token.size() && v > 0) return static_cast<Eigen::Index>(v);
  } catch (const std::exception&) {
  }
  throw ImageError(path.string() + ": invalid PGM " + field + " '" + token + "'");
}

PgmHeader parse_header(std::istream& in, const std::filesystem::path& path) {
  if (next_token(in) != "P5") throw ImageError(path.string() + ": not a binary PGM (P5) file");
  PgmHeader h;
  h.width = parse_positive(next_token(in), path, "width");
  h.height = parse_positive(next_token(in), path, "height");
  const Eigen::Index maxval = parse_positive(next_token(in), path, "maxval");
  if (maxval > 65535) throw ImageError(path.string() + ": PGM maxval above 65535");
  h.maxval = static_cast<int>(maxval);
  return h;
}

std::ifstream open_for_read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageError(path.string() + ": cannot open image");
  return in;
}

}  // namespace

PgmHeader read_pgm_header(const std::filesystem::path& path) {
  std::ifstream in = open_for_read(path);
  return parse_header(in, path);
}

Image read_pgm(const std::filesystem::path& path) {
  std::ifstream in = open_for_read(path);
  const PgmHeader h = parse_header(in, path);
  const std::size_t bytes_per_sample = h.maxval > 255 ? 2 : 1;
  const std::size_t count = static_cast<std::size_t>(h.width * h.height);
  std::vector<unsigned char> raw(count * bytes_per_sample);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
    throw ImageError(path.string() + ": truncated PGM pixel data");
  }
  Image image(h.height, h.width);
  float* out = image.data();
  if (bytes_per_sample == 2) {
    for (std::size_t i = 0; i < count; ++i) {
      out[i] = static_cast<float>((raw[2 * i] << 8) | raw[2 * i + 1]);
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) out[i] = static_cast<float>(raw[i]);
  }
  return image;
}

void write_pgm16(const std::filesystem::path& path, const Image& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ImageError(path.string() + ": cannot open for writing");
  out << "P5\n" << image.cols() << ' ' << image.rows() << "\n65535\n";
  std::vector<unsigned char> raw(static_cast<std::size_t>(image.size()) * 2);
  const float* in = image.data();
  for (Eigen::Index i = 0; i < image.size(); ++i) {
    const float clamped = std::min(65535.0f, std::max(0.0f, std::nearbyint(in[i])));
    const auto v = static_cast<std::uint16_t>(clamped);
    raw[2 * static_cast<std::size_t>(i)] = static_cast<unsigned char>(v >> 8);
    raw[2 * static_cast<std::size_t>(i) + 1] = static_cast<unsigned char>(v & 0xff);
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw ImageError(path.string() + ": write failed");
}

void write_pgm8(const std::filesystem::path& path, const Image8& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ImageError(path.string() + ": cannot open for writing");
  out << "P5\n" << image.cols() << ' ' << image.rows() << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.data()), static_cast<std::streamsize>(image.size()));
  if (!out) throw ImageError(path.string() + ": write failed");
}

}  // namespace mvscreen
