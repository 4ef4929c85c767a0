#include "mfcal/checkpoint.hpp"

#include <yaml-cpp/yaml.h>

#include "mfcal/errors.hpp"
#include "mfcal/tables.hpp"

namespace mfcal {

namespace {

constexpr const char* kFormat = "mfcal-network/1";

void emit_ranges(YAML::Emitter& out, const std::vector<std::string>& names,
                 const std::vector<data::ColumnRange>& ranges) {
  out << YAML::BeginSeq;
  for (std::size_t i = 0; i < ranges.size(); ++i) {
    out << YAML::Flow << YAML::BeginMap << YAML::Key << "name" << YAML::Value << names[i] << YAML::Key
        << "min" << YAML::Value << ranges[i].min << YAML::Key << "max" << YAML::Value << ranges[i].max
        << YAML::Key << "degenerate" << YAML::Value << ranges[i].degenerate << YAML::EndMap;
  }
  out << YAML::EndSeq;
}

void read_ranges(const YAML::Node& node, std::vector<std::string>& names, std::vector<data::ColumnRange>& ranges) {
  if (!node || !node.IsSequence()) throw ParseError(0, "checkpoint scaling block must list column ranges");
  for (const auto& c : node) {
    names.push_back(c["name"].as<std::string>());
    ranges.push_back({c["min"].as<double>(), c["max"].as<double>(), c["degenerate"].as<bool>()});
  }
}

}  // namespace

std::string format_checkpoint(const net::Network& network, const data::ScalingRanges* scaling) {
  network.validate();
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "format" << YAML::Value << kFormat;
  out << YAML::Key << "seed" << YAML::Value << network.rng_seed;
  out << YAML::Key << "provenance" << YAML::Value << YAML::Flow << network.provenance;
  out << YAML::Key << "layers" << YAML::Value << YAML::BeginSeq;
  for (const auto& l : network.layers) {
    out << YAML::BeginMap;
    out << YAML::Key << "input_width" << YAML::Value << l.spec.input_width;
    out << YAML::Key << "output_width" << YAML::Value << l.spec.output_width;
    out << YAML::Key << "activation" << YAML::Value << net::to_string(l.spec.activation);
    out << YAML::Key << "weights" << YAML::Value << YAML::Flow << YAML::BeginSeq;
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) out << l.weights(r, c);
    out << YAML::EndSeq;
    out << YAML::Key << "biases" << YAML::Value << YAML::Flow << YAML::BeginSeq;
    for (Eigen::Index r = 0; r < l.biases.size(); ++r) out << l.biases(r);
    out << YAML::EndSeq;
    out << YAML::EndMap;
  }
  out << YAML::EndSeq;
  if (scaling) {
    out << YAML::Key << "scaling" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "inputs" << YAML::Value;
    emit_ranges(out, scaling->input_names, scaling->inputs);
    out << YAML::Key << "outputs" << YAML::Value;
    emit_ranges(out, scaling->output_names, scaling->outputs);
    out << YAML::EndMap;
  }
  out << YAML::EndMap;
  if (!out.good()) throw IoError(std::string("checkpoint emit failed: ") + out.GetLastError());
  return std::string(out.c_str()) + "\n";
}

Checkpoint parse_checkpoint(const std::string& text) {
  Checkpoint cp;
  try {
    const YAML::Node root = YAML::Load(text);
    if (!root["format"] || root["format"].as<std::string>() != kFormat)
      throw ParseError(0, std::string("not a checkpoint (expected format ") + kFormat + ")");
    cp.network.rng_seed = root["seed"].as<std::uint64_t>();
    if (root["provenance"]) cp.network.provenance = root["provenance"].as<std::vector<std::string>>();
    for (const auto& ln : root["layers"]) {
      net::Layer l;
      l.spec.input_width = ln["input_width"].as<int>();
      l.spec.output_width = ln["output_width"].as<int>();
      l.spec.activation = net::activation_from_string(ln["activation"].as<std::string>());
      const auto w = ln["weights"].as<std::vector<double>>();
      const auto b = ln["biases"].as<std::vector<double>>();
      if (w.size() != static_cast<std::size_t>(l.spec.input_width) * static_cast<std::size_t>(l.spec.output_width) ||
          b.size() != static_cast<std::size_t>(l.spec.output_width))
        throw ParseError(0, "checkpoint layer parameter count disagrees with its widths");
      l.weights.resize(l.spec.output_width, l.spec.input_width);
      std::size_t k = 0;
      for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
        for (Eigen::Index c = 0; c < l.weights.cols(); ++c) l.weights(r, c) = w[k++];
      l.biases = Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
      cp.network.layers.push_back(std::move(l));
    }
    if (const auto s = root["scaling"]) {
      data::ScalingRanges r;
      read_ranges(s["inputs"], r.input_names, r.inputs);
      read_ranges(s["outputs"], r.output_names, r.outputs);
      cp.scaling = std::move(r);
    }
  } catch (const YAML::Exception& e) {
    throw ParseError(static_cast<std::size_t>(e.mark.line + 1), std::string("checkpoint: ") + e.msg);
  }
  try {
    cp.network.validate();
  } catch (const Error& e) {
    throw ParseError(0, std::string("checkpoint: ") + e.what());
  }
  return cp;
}

void save_checkpoint(const std::filesystem::path& path, const net::Network& network,
                     const data::ScalingRanges* scaling) {
  write_text_file(path, format_checkpoint(network, scaling));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return parse_checkpoint(read_text_file(path)); }

}  // namespace mfcal
