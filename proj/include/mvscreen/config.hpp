#pragma once

#include "mvscreen/sweep.hpp"
#include "mvscreen/trainer.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace mvscreen {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Everything a command needs. Precedence, lowest first: built-in
/// defaults, the config file, command-line flags.
struct RunConfig {
  train::TrainConfig train;
  std::filesystem::path data_dir;
  std::filesystem::path out_dir;
  int tta_crops = 10;
  double hc_percent = 30.0;
  metrics::HcSubset hc_subset = metrics::HcSubset::union_of_kept;
  data::SplitSpec split;
  /// Which split drives checkpoint selection: "validation" or "train"
  /// (the latter for deliberate overfitting runs).
  std::string validate_on = "validation";
  std::vector<double> sweep_fractions{0.1, 0.5, 1.0};
  std::vector<data::Scale> sweep_scales{data::supported_scales().begin(), data::supported_scales().end()};

  /// Applies one key=value assignment; unknown keys and bad values throw.
  void set(const std::string& key, const std::string& value);
  void validate() const;
  train::EvaluationConfig evaluation() const;
  /// key=value lines that parse back to an equal config.
  std::string to_text() const;
};

RunConfig parse_config_text(const std::string& text, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});
void save_config(const RunConfig& config, const std::filesystem::path& path);

std::vector<std::string> config_keys();

}  // namespace mvscreen
