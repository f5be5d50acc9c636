#pragma once

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cegcl {

class ConfigError : public std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Training hyperparameters. The JSON key of each field is given alongside;
/// the first block is required in every config file.
struct TrainConfig {
  int epochs = 0;                // "epochs"
  double learning_rate = 0.0;    // "lr"
  int hidden_gcn = 0;            // "hidden_gcn"
  int gcn_layers = 0;            // "layers"
  double tau = 0.0;              // "tau"
  int n_neg = 0;                 // "N_neg"
  int sample_period = 0;         // "t"
  int mlp_hidden = 0;            // "d"
  double gamma_st = 0.0;         // "gamma_st"
  double gamma_al = 0.0;         // "gamma_al"

  double gamma_clus = 1.0;       // "gamma_clus"
  double mask_rate = 0.3;        // "mask_rate"
  std::uint64_t seed = 0;        // "seed"
  int pretrain_epochs = 200;     // "pretrain_epochs"
  int target_refresh = 1;        // "target_refresh"
  bool normalize_similarity = true;   // "normalize_similarity"
  bool symmetric_contrast = false;    // "symmetric_contrast"
  bool align_updates_centers = true;  // "align_updates_centers"
  std::string nmi_normalization = "arithmetic";  // "nmi_normalization": arithmetic | geometric

  /// Throws ConfigError naming the first offending key.
  void validate() const;
};

nlohmann::json to_json(const TrainConfig& config);
/// Strict: unknown keys, wrong types and missing required keys are errors.
TrainConfig config_from_json(const nlohmann::json& json);

/// Applies one `key=value` override.
void apply_override(nlohmann::json& json, std::string_view assignment);

/// Reads a JSON config file and overlays `key=value` overrides.
TrainConfig parse_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

/// Every accepted key, required ones first.
const std::vector<std::string>& config_keys();

}  // namespace cegcl
