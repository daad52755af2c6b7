#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "plastic/baseline/lstm_lm.hpp"
#include "plastic/net/network.hpp"
#include "plastic/train/sampling.hpp"

namespace plastic::harness {

enum class ModelKind { kPlastic, kLstm };

struct ExperimentConfig {
  ModelKind model = ModelKind::kPlastic;
  std::string corpus_path;
  net::NetworkConfig network;
  train::TrainConfig train;
  baseline::BaselineConfig lstm;
  std::string out_dir = "runs";

  ExperimentConfig();
  void validate() const;
};

// Environment variables with this prefix override config keys, e.g.
// PLASTIC_DELAY=80 sets `delay`.
inline constexpr std::string_view kEnvPrefix = "PLASTIC_";

using Overrides = std::vector<std::pair<std::string, std::string>>;

// Sets one key. Throws std::invalid_argument whose message names the key.
void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value);

// Parses `key = value` lines ('#' starts a comment), then applies
// environment overrides, then `overrides` in order, then validates.
ExperimentConfig parse_config(std::string_view text, const Overrides& overrides = {},
                              const Overrides& env = {});

// PLASTIC_* variables from the process environment, as config keys.
Overrides environment_overrides();

// Every key with its current value, one `key=value` line each, fixed order.
std::string render_config(const ExperimentConfig& cfg);

// Stable 64-bit FNV-1a digest of the rendered config minus seed and out_dir.
std::string cell_hash(const ExperimentConfig& cfg);

std::string_view model_name(ModelKind kind);

}  // namespace plastic::harness
