#include "mvscreen/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

namespace mvscreen::model {

namespace {

constexpr std::array<char, 4> kMagic{'M', 'V', 'D', 'C'};

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path) : out_(path, std::ios::binary) {
    if (!out_) throw CheckpointError("path", path.string() + ": cannot open for writing");
  }
  void u32(std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v >> 16),
                                static_cast<unsigned char>(v >> 24)};
    out_.write(reinterpret_cast<const char*>(b), 4);
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void bytes(const char* data, std::size_t n) { out_.write(data, static_cast<std::streamsize>(n)); }
  void finish(const std::filesystem::path& path) {
    out_.flush();
    if (!out_) throw CheckpointError("path", path.string() + ": write failed");
  }

 private:
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw CheckpointError("path", path.string() + ": cannot open checkpoint");
  }
  void bytes(char* data, std::size_t n, const std::string& field) {
    in_.read(data, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      throw CheckpointError(field, path_.string() + ": truncated checkpoint while reading " + field);
    }
  }
  std::uint32_t u32(const std::string& field) {
    unsigned char b[4];
    bytes(reinterpret_cast<char*>(b), 4, field);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  }
  float f32(const std::string& field) { return std::bit_cast<float>(u32(field)); }
  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
};

std::uint32_t checked_u32(Index v) { return static_cast<std::uint32_t>(v); }

}  // namespace

void save_checkpoint(const ModelParams<float>& params, const std::filesystem::path& path) {
  Writer w(path);
  w.bytes(kMagic.data(), kMagic.size());
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(params.config.scale.denominator()));
  w.u32(checked_u32(params.config.input_height));
  w.u32(checked_u32(params.config.input_width));
  w.u32(static_cast<std::uint32_t>(params.config.width_divisor));
  w.u32(checked_u32(params.config.hidden_units));
  w.u32(static_cast<std::uint32_t>(params.plan.layers.size()));
  w.u32(static_cast<std::uint32_t>(params.plan.full_depth));
  const auto named = params.named();
  w.u32(static_cast<std::uint32_t>(named.size()));
  for (const auto& [name, tensor] : named) {
    w.u32(static_cast<std::uint32_t>(name.size()));
    w.bytes(name.data(), name.size());
    w.u32(static_cast<std::uint32_t>(tensor.rank()));
    for (Index d : tensor.shape()) w.u32(checked_u32(d));
    for (Index i = 0; i < tensor.size(); ++i) w.f32(tensor[i]);
  }
  w.finish(path);
}

ModelParams<float> load_checkpoint(const std::filesystem::path& path) {
  Reader r(path);
  const std::string where = path.string() + ": ";
  std::array<char, 4> magic{};
  r.bytes(magic.data(), magic.size(), "magic");
  if (magic != kMagic) throw CheckpointError("magic", where + "bad magic bytes (not an MVDC checkpoint)");
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion) {
    throw CheckpointError("version", where + "unsupported checkpoint version " +
                                         std::to_string(version));
  }

  ModelConfig config;
  try {
    config.scale = data::Scale::from_denominator(static_cast<int>(r.u32("scale")));
  } catch (const data::DataError& e) {
    throw CheckpointError("scale", where + e.what());
  }
  config.input_height = r.u32("input_height");
  config.input_width = r.u32("input_width");
  config.width_divisor = static_cast<int>(r.u32("width_divisor"));
  config.hidden_units = r.u32("hidden_units");
  const std::uint32_t retained = r.u32("retained_layers");
  const std::uint32_t depth = r.u32("full_depth");

  // Rebuild the architecture, then fill it from the table.
  ModelParams<float> params;
  try {
    Rng rng(0);
    params = build_model<float>(config, rng);
  } catch (const std::exception& e) {
    throw CheckpointError("config", where + "invalid model configuration: " + e.what());
  }
  if (params.plan.layers.size() != retained || params.plan.full_depth != depth) {
    throw CheckpointError("retained_layers",
                          where + "layer plan mismatch: file keeps " + std::to_string(retained) +
                              " of " + std::to_string(depth) + " layers, configuration implies " +
                              std::to_string(params.plan.layers.size()) + " of " +
                              std::to_string(params.plan.full_depth));
  }

  const auto expected = params.named();
  const std::uint32_t count = r.u32("parameter_count");
  if (count != expected.size()) {
    throw CheckpointError("parameter_count", where + "expected " + std::to_string(expected.size()) +
                                                 " parameter tensors, file has " + std::to_string(count));
  }
  for (const auto& [name, tensor] : expected) {
    const std::uint32_t len = r.u32("name_length");
    if (len > 4096) throw CheckpointError("name_length", where + "implausible parameter name length");
    std::string stored(len, '\0');
    r.bytes(stored.data(), len, "name");
    if (stored != name) {
      throw CheckpointError(name, where + "expected parameter '" + name + "', found '" + stored + "'");
    }
    const std::uint32_t rank = r.u32(name + ".rank");
    Shape shape(rank);
    for (auto& d : shape) d = r.u32(name + ".shape");
    if (shape != tensor.shape()) {
      throw CheckpointError(name, where + "parameter '" + name + "' has shape " + to_string(shape) +
                                      ", expected " + to_string(tensor.shape()));
    }
    TensorF target = tensor;
    auto& values = target.values_mut();
    for (Index i = 0; i < values.size(); ++i) values[i] = r.f32(name);
  }
  if (!r.at_end()) throw CheckpointError("trailer", where + "unexpected bytes after parameter table");
  return params;
}

void require_checkpoint_scale(const ModelParams<float>& params, data::Scale scale) {
  if (!(params.config.scale == scale)) {
    throw CheckpointError("scale", "checkpoint was trained at scale " + params.config.scale.str() +
                                       " and cannot evaluate at scale " + scale.str());
  }
}

}  // namespace mvscreen::model
