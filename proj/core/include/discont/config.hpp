#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "discont/trainer.hpp"

namespace discont {

struct EvalConfig {
  std::size_t pca_dims = 32;
  std::size_t k_neighbors = 3;
  std::size_t eval_samples = 512;
  std::size_t viz_samples = 64;
  std::size_t swap_pairs = 8;
};

struct RunConfig {
  TrainConfig train;
  EvalConfig eval;
};

struct ConfigKey {
  std::string_view name;
  std::string_view type;  // "int", "float", "bool", "path", "list"
  std::string_view description;
};

// Every accepted key in documentation order.
const std::vector<ConfigKey>& config_keys();

// Effective value of `key` in `config`, formatted as it would be written.
std::string config_value(const RunConfig& config, std::string_view key);

// `key = value` lines, `#` comments, blank lines ignored. Missing keys keep
// their defaults; unknown keys, malformed lines, duplicates and type
// mismatches are ConfigErrors that cite the line number.
RunConfig parse_config_text(std::string_view text);
RunConfig parse_config(const std::filesystem::path& path);

// Every effective value, one `key = value` line each, in key order.
std::string format_config(const RunConfig& config);
void write_resolved_config(const RunConfig& config, const std::filesystem::path& dir);

}  // namespace discont
