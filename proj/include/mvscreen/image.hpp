#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <stdexcept>

namespace mvscreen {

/// Grayscale image, row-major, one float per pixel.
using Image = Eigen::Array<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Image8 = Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class ImageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PgmHeader {
  Eigen::Index width = 0;
  Eigen::Index height = 0;
  int maxval = 0;
};

/// Parses only the header of a binary (P5) PGM file.
PgmHeader read_pgm_header(const std::filesystem::path& path);

/// Reads an 8- or 16-bit P5 PGM. 16-bit samples are big-endian.
Image read_pgm(const std::filesystem::path& path);

/// Writes a 16-bit P5 PGM. Pixels are rounded and clamped to [0, 65535].
void write_pgm16(const std::filesystem::path& path, const Image& image);

void write_pgm8(const std::filesystem::path& path, const Image8& image);

}  // namespace mvscreen
