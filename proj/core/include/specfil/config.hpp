#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "specfil/contrastive.hpp"
#include "specfil/head.hpp"

namespace specfil {

/// Minimal TOML reader covering what run configs need: comments, [section]
/// headers, and `key = value` lines with strings, booleans, integers, floats,
/// and single-line scalar arrays. Keys are returned dotted ("train.patience").
struct TomlValue {
  enum class Type { Bool, Int, Float, String, Array };
  Type type = Type::Int;
  bool b = false;
  std::int64_t i = 0;
  double f = 0.0;
  std::string s;
  std::vector<TomlValue> arr;

  bool as_bool(const std::string& key) const;
  std::int64_t as_int(const std::string& key) const;
  double as_float(const std::string& key) const;  // accepts Int
  const std::string& as_string(const std::string& key) const;
  std::vector<double> as_float_array(const std::string& key) const;
  std::vector<std::string> as_string_array(const std::string& key) const;

  std::string render() const;  // TOML literal
};

using TomlTable = std::map<std::string, TomlValue>;

TomlTable parse_toml(const std::string& text, const std::string& origin = "<string>");
TomlTable parse_toml_file(const std::filesystem::path& file);
/// Parses the value part of a `--set key=value` override.
TomlValue parse_toml_scalar(const std::string& text);

/// The resolved run configuration. Defaults match the reference protocol;
/// every field is echoed back by to_toml() so runs are reproducible from the
/// persisted config alone.
struct RunConfig {
  std::string dataset;       // bundle directory
  std::string output = "out";  // all artifacts land under this directory
  std::uint64_t seed = 0;

  bool row_normalize = false;  // L1-normalize feature rows at load

  std::string filter_kind = "gprgnn";
  int filter_order = 4;

  Index embed_dim = 512;
  Index sample_size = 2000;
  int batch_size = 2;
  double learning_rate = 0.001;
  int max_epochs = 30000;
  int patience = 20;
  bool per_channel_slope = false;
  bool independent_encoders = false;

  bool rff_enabled = false;
  Index rff_out_dim = 512;
  double rff_gamma = 0.5;
  std::string rff_stage = "pre";  // "pre" | "post"
  bool rff_standardize = false;

  int head_budget = 60;
  int head_max_epochs = 10000;
  int head_patience = 200;
  std::vector<double> head_lr_grid = {1e-5, 1e-4, 1e-3, 1.5e-3, 0.01, 0.015, 0.1, 0.5, 1.0, 2.0};
  std::vector<double> head_alpha_lr_grid = {1e-5, 1e-4, 1e-3, 1.5e-3, 0.01, 0.015, 0.1, 0.5, 1.0, 2.0};
  std::vector<double> head_wd_grid = {1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 0.0, 0.5, 1.0, 3.0};
  std::vector<std::string> head_activation_grid = {"none", "exp"};
  std::vector<double> head_gamma_grid = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2};

  std::string eval_checkpoint;  // checkpoint consumed by evaluate/embed

  int bench_warmup = 3;
  int bench_epochs = 20;

  /// Applies a parsed table; rejects unknown keys and wrong types.
  void apply(const TomlTable& table);

  /// Loads a config file (optional) and applies `key=value` overrides.
  static RunConfig load(const std::filesystem::path* file,
                        const std::vector<std::string>& overrides);

  std::string to_toml() const;

  TrainConfig train_config() const;
  RffSettings rff_settings() const;
  SweepSettings sweep_settings() const;
  FilterBank bank() const;

  /// One line per key with its default, for --help.
  static std::string describe_keys();
};

}  // namespace specfil
