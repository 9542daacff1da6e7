#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ppgscreen/dsp.hpp"
#include "ppgscreen/models.hpp"

namespace ppgscreen {

struct PipelineConfig {
  FilterSpec filter;
  FswOptions fsw;
  CycleOptions cycle;
  bool impute_missing = true;
  LogRegOptions logreg;
  GbtOptions gbt;
  int folds = 5;
  double threshold = 0.5;
  int permutation_repeats = 10;
  std::uint64_t seed = 42;
  double sample_rate = 1000.0;
  int max_segments = 3;
  std::vector<std::string> exclude_ids;
  std::string metadata_path;
  std::string signals_dir;

  friend bool operator==(const PipelineConfig&, const PipelineConfig&);
};

/// Every accepted key, dotted form ("filter.order", "seed", ...).
const std::vector<std::string>& config_keys();

/// Sets one key from its textual value. `exclude_ids` takes a comma-separated
/// list or a ["a", "b"] array. Throws Error{ConfigError} for an unknown key or
/// a value that does not parse or is out of range.
void set_config_value(PipelineConfig& config, std::string_view key, std::string_view value);

/// Canonical text of one key; doubles use 17 significant digits.
std::string get_config_value(const PipelineConfig& config, std::string_view key);

/// TOML-style document: `key = value` lines, `[section]` headers that prefix
/// the keys below them, `#` comments. Starts from defaults.
PipelineConfig parse_config(std::string_view text);
PipelineConfig load_config(const std::filesystem::path& path);

/// Inverse of parse_config: parse_config(format_config(c)) == c.
std::string format_config(const PipelineConfig& config);

nlohmann::json config_to_json(const PipelineConfig& config);

/// Range checks that span several keys (cutoff below Nyquist, min < max, ...).
void validate_config(const PipelineConfig& config);

}  // namespace ppgscreen
