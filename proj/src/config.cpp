#include "mvscreen/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace mvscreen {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw ConfigError(key + ": expected a number, got '" + v + "'");
}

template <typename Int>
Int to_int(const std::string& key, const std::string& v) {
  Int out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  }
  return out;
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::istringstream in(v);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::vector<std::string> config_keys() {
  return {"learning_rate", "batch_size", "max_epochs", "input_noise_std", "dropout", "seed",
          "scale", "data_fraction", "width_divisor", "hidden_units", "stop_at_val_macauc",
          "data_dir", "out_dir", "tta_crops", "hc_percent", "hc_subset", "split_train", "split_validation",
          "split_test", "validate_on", "sweep_fractions", "sweep_scales"};
}

void RunConfig::set(const std::string& key, const std::string& raw) {
  const std::string value = trim(raw);
  auto& t = train;
  if (key == "learning_rate") t.learning_rate = to_double(key, value);
  else if (key == "batch_size") t.batch_size = to_int<int>(key, value);
  else if (key == "max_epochs") t.max_epochs = to_int<int>(key, value);
  else if (key == "input_noise_std") t.input_noise_std = to_double(key, value);
  else if (key == "dropout") t.dropout = to_double(key, value);
  else if (key == "seed") t.seed = to_int<std::uint64_t>(key, value);
  else if (key == "scale") {
    try {
      t.scale = data::Scale::parse(value);
    } catch (const std::exception& e) {
      throw ConfigError(key + ": " + e.what());
    }
  } else if (key == "data_fraction" || key == "fraction") t.data_fraction = to_double(key, value);
  else if (key == "width_divisor") t.width_divisor = to_int<int>(key, value);
  else if (key == "hidden_units") t.hidden_units = to_int<Index>(key, value);
  else if (key == "stop_at_val_macauc") t.stop_at_val_macauc = to_double(key, value);
  else if (key == "data_dir") data_dir = value;
  else if (key == "out_dir") out_dir = value;
  else if (key == "tta_crops") tta_crops = to_int<int>(key, value);
  else if (key == "hc_percent") hc_percent = to_double(key, value);
  else if (key == "hc_subset") {
    if (value == "union") hc_subset = metrics::HcSubset::union_of_kept;
    else if (value == "per-class") hc_subset = metrics::HcSubset::per_class;
    else throw ConfigError(key + ": expected 'union' or 'per-class', got '" + value + "'");
  } else if (key == "split_train") split.train_fraction = to_double(key, value);
  else if (key == "split_validation") split.validation_fraction = to_double(key, value);
  else if (key == "split_test") split.test_fraction = to_double(key, value);
  else if (key == "validate_on") {
    if (value != "validation" && value != "train") {
      throw ConfigError(key + ": expected 'validation' or 'train', got '" + value + "'");
    }
    validate_on = value;
  } else if (key == "sweep_fractions") {
    sweep_fractions.clear();
    for (const auto& item : split_list(value)) sweep_fractions.push_back(to_double(key, item));
  } else if (key == "sweep_scales") {
    sweep_scales.clear();
    for (const auto& item : split_list(value)) {
      try {
        sweep_scales.push_back(data::Scale::parse(item));
      } catch (const std::exception& e) {
        throw ConfigError(key + ": " + e.what());
      }
    }
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

void RunConfig::validate() const {
  try {
    train.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (train.width_divisor < 1) throw ConfigError("width_divisor must be >= 1");
  if (tta_crops < 1) throw ConfigError("tta_crops must be >= 1");
  if (!(hc_percent > 0) || hc_percent > 100) throw ConfigError("hc_percent must lie in (0, 100]");
  if (sweep_fractions.empty()) throw ConfigError("sweep_fractions is empty");
  for (double f : sweep_fractions) {
    if (!(f > 0) || f > 1) throw ConfigError("sweep_fractions must lie in (0, 1]");
  }
  if (sweep_scales.empty()) throw ConfigError("sweep_scales is empty");
  const double shares = split.train_fraction + split.validation_fraction + split.test_fraction;
  if (split.train_fraction <= 0 || split.validation_fraction <= 0 || split.test_fraction <= 0 ||
      std::abs(shares - 1.0) > 1e-9) {
    throw ConfigError("split shares must be positive and sum to 1");
  }
}

train::EvaluationConfig RunConfig::evaluation() const {
  return {tta_crops, hc_percent, hc_subset, train.seed, false};
}

std::string RunConfig::to_text() const {
  std::ostringstream os;
  const auto& t = train;
  os << "learning_rate=" << number(t.learning_rate) << '\n'
     << "batch_size=" << t.batch_size << '\n'
     << "max_epochs=" << t.max_epochs << '\n'
     << "input_noise_std=" << number(t.input_noise_std) << '\n'
     << "dropout=" << number(t.dropout) << '\n'
     << "seed=" << t.seed << '\n'
     << "scale=" << t.scale.str() << '\n'
     << "data_fraction=" << number(t.data_fraction) << '\n'
     << "width_divisor=" << t.width_divisor << '\n'
     << "hidden_units=" << t.hidden_units << '\n'
     << "stop_at_val_macauc=" << number(t.stop_at_val_macauc) << '\n'
     << "data_dir=" << data_dir.string() << '\n'
     << "out_dir=" << out_dir.string() << '\n'
     << "tta_crops=" << tta_crops << '\n'
     << "hc_percent=" << number(hc_percent) << '\n'
     << "hc_subset=" << (hc_subset == metrics::HcSubset::union_of_kept ? "union" : "per-class") << '\n'
     << "split_train=" << number(split.train_fraction) << '\n'
     << "split_validation=" << number(split.validation_fraction) << '\n'
     << "split_test=" << number(split.test_fraction) << '\n'
     << "validate_on=" << validate_on << '\n';
  os << "sweep_fractions=";
  for (std::size_t i = 0; i < sweep_fractions.size(); ++i) os << (i ? "," : "") << number(sweep_fractions[i]);
  os << "\nsweep_scales=";
  for (std::size_t i = 0; i < sweep_scales.size(); ++i) os << (i ? "," : "") << sweep_scales[i].str();
  os << '\n';
  return os.str();
}

RunConfig parse_config_text(const std::string& text, RunConfig base) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected key=value");
    }
    try {
      base.set(trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return base;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config file");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config_text(ss.str(), std::move(base));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void save_config(const RunConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  out << config.to_text();
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

}  // namespace mvscreen
