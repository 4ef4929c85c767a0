#pragma once

// Run configuration: a YAML tree read with defaults filled in place, so the
// same tree echoed to the output directory is the resolved configuration.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "mfcal/data.hpp"
#include "mfcal/netcore.hpp"
#include "mfcal/transfer.hpp"

namespace mfcal::cli {

/// Anything wrong with the configuration itself (exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Optional value; a missing key is set to `fallback` in the tree.
template <typename T>
T opt(YAML::Node node, const std::string& key, const T& fallback) {
  if (!node[key]) node[key] = fallback;
  try {
    return node[key].as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type");
  }
}

template <typename T>
T req(const YAML::Node& node, const std::string& key, const std::string& where) {
  if (!node[key]) throw ConfigError(where + ": missing key '" + key + "'");
  try {
    return node[key].as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(where + ": key '" + key + "' has the wrong type");
  }
}

/// Child map, created empty when absent.
YAML::Node child(YAML::Node node, const std::string& key);

struct RunContext {
  YAML::Node root;
  std::filesystem::path data_dir;  // relative dataset paths resolve here
  std::filesystem::path out_dir;
  std::uint64_t seed = 0;
  int threads = 1;

  std::filesystem::path resolve(const std::string& path) const;
  /// Writes config.resolved.yaml into out_dir (threads are not recorded).
  void echo() const;
};

net::TrainConfig read_train_config(YAML::Node node, const net::TrainConfig& defaults);

/// `hidden: [..]` widths; input and output widths come from the data.
std::vector<net::LayerSpec> read_architecture(YAML::Node node, const data::Dataset& data);

/// Loads `dataset`, optionally cut to `rows` by a seeded subsample.
data::Dataset read_stage_dataset(YAML::Node node, const RunContext& ctx, const std::string& where);

/// name, dataset, rows, train, retrained_layers, train_fraction, mask.
transfer::FidelityStage read_stage(YAML::Node node, const RunContext& ctx, const std::string& where,
                                   const net::TrainConfig& defaults);

/// Built-in configuration text for `command`/`name`; throws ConfigError
/// when unknown.
std::string preset_text(const std::string& command, const std::string& name);
std::vector<std::string> preset_names(const std::string& command);

}  // namespace mfcal::cli
