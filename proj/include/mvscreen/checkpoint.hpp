#pragma once

#include "mvscreen/model.hpp"

#include <filesystem>
#include <stdexcept>

namespace mvscreen::model {

class CheckpointError : public std::runtime_error {
 public:
  CheckpointError(std::string field, const std::string& message)
      : std::runtime_error(message), field_(std::move(field)) {}
  /// Header field or parameter name the failure refers to.
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Single-file layout, all integers little-endian u32:
///   "MVDC" | version | scale denominator | input height | input width |
///   width divisor | hidden units | retained layers | full depth |
///   parameter count | { name length | name | rank | dims... | f32 data }
void save_checkpoint(const ModelParams<float>& params, const std::filesystem::path& path);
ModelParams<float> load_checkpoint(const std::filesystem::path& path);

/// Rejects a checkpoint whose scale differs from the requested evaluation.
void require_checkpoint_scale(const ModelParams<float>& params, data::Scale scale);

}  // namespace mvscreen::model
