#pragma once

// Model checkpoint files: a YAML document with layer specs, row-major
// weights and biases written with 17 significant digits, the init seed,
// training provenance and (optionally) the scaling ranges the model expects.
// load(save(net)) reproduces every parameter bit for bit.

#include <filesystem>
#include <optional>
#include <string>

#include "mfcal/data.hpp"
#include "mfcal/netcore.hpp"

namespace mfcal {

struct Checkpoint {
  net::Network network;
  std::optional<data::ScalingRanges> scaling;
};

std::string format_checkpoint(const net::Network& network, const data::ScalingRanges* scaling = nullptr);
Checkpoint parse_checkpoint(const std::string& text);

void save_checkpoint(const std::filesystem::path& path, const net::Network& network,
                     const data::ScalingRanges* scaling = nullptr);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace mfcal
