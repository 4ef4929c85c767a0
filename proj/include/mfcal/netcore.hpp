#pragma once

// Dense feed-forward networks: evaluation, masked loss, backpropagation,
// Adam updates and per-layer freezing.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mfcal::data {
struct Dataset;
}

namespace mfcal::net {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation { rectifier, identity };

const char* to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct LayerSpec {
  int input_width = 1;
  int output_width = 1;
  Activation activation = Activation::rectifier;

  bool operator==(const LayerSpec&) const = default;
};

/// One weight matrix (output_width x input_width) plus its bias vector.
struct Layer {
  LayerSpec spec;
  Matrix weights;
  Vector biases;
};

struct Network {
  std::vector<Layer> layers;
  std::uint64_t rng_seed = 0;
  /// Training history, one entry per completed training call ("stage:name").
  std::vector<std::string> provenance;

  std::size_t layer_count() const { return layers.size(); }
  int input_width() const { return layers.front().spec.input_width; }
  int output_width() const { return layers.back().spec.output_width; }
  std::vector<LayerSpec> specs() const;

  /// Throws ShapeError / DomainError if shapes disagree with the specs or
  /// any parameter is non-finite.
  void validate() const;
};

/// Exact equality of every weight and bias bit pattern (and the specs).
bool bitwise_equal(const Layer& a, const Layer& b);
bool bitwise_equal(const Network& a, const Network& b);

/// Hidden layers use the rectifier, the output layer is identity.
std::vector<LayerSpec> make_architecture(int inputs, std::span<const int> hidden_widths, int outputs);

/// Throws ShapeError unless widths are positive, chain, and the last layer is identity.
void check_specs(std::span<const LayerSpec> specs);

struct FreezePlan {
  std::vector<bool> trainable;

  static FreezePlan all_trainable(std::size_t layers) { return {std::vector<bool>(layers, true)}; }
  std::size_t trainable_count() const;
  /// Index of the earliest trainable layer; layer_count when none.
  std::size_t first_trainable() const;
};

/// Per-output loss weight, each 0 or 1.
struct OutputMask {
  std::vector<double> weights;

  static OutputMask ones(std::size_t outputs) { return {std::vector<double>(outputs, 1.0)}; }
  static OutputMask from_observed(const std::vector<bool>& observed);
  std::size_t observed_count() const;
  bool observed(std::size_t j) const { return weights[j] != 0.0; }
};

struct TrainConfig {
  double learning_rate = 0.001;
  std::size_t batch_size = 1;
  std::size_t epochs = 1;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 0;

  /// Checks ranges. A zero learning rate is accepted (it is a valid no-op stage).
  void validate() const;
};

/// Xavier-uniform weights in [-sqrt(6/(fan_in+fan_out)), +bound), zero biases.
Network init_network(std::span<const LayerSpec> specs, std::uint64_t seed);

/// True when, for some row of `inputs`, every pre-activation of a hidden
/// layer is negative. On such a row the output is locally constant and no
/// gradient reaches the layers below.
bool has_dead_layer(const Network& net, const Matrix& inputs);

/// init_network(seed), redrawn with init_network(derive_seed(seed, {i}))
/// for i = 1, 2, ... while has_dead_layer(net, inputs). Throws
/// DegenerateError after max_attempts draws.
Network init_live_network(std::span<const LayerSpec> specs, std::uint64_t seed, const Matrix& inputs,
                          std::size_t max_attempts = 64);

/// Evaluates one input vector. Throws DomainError on non-finite input,
/// ShapeError on a width mismatch.
Vector forward(const Network& net, const Vector& x);

/// Row-wise prediction (rows are samples). threads <= 1 is the serial
/// reference; any thread count gives bitwise-identical output.
Matrix predict_rows(const Network& net, const Matrix& inputs, int threads = 1);

/// Mean squared error over the outputs with mask weight 1, averaged over the
/// batch rows. Entries with mask weight 0 are never read.
double masked_mse(const Matrix& pred, const Matrix& target, const OutputMask& mask);

struct LayerGradient {
  Matrix weights;
  Vector biases;
};

struct Gradients {
  std::vector<LayerGradient> layers;
  double loss = 0.0;  // masked_mse of the batch at the evaluated parameters
};

/// Gradient of masked_mse for every layer; frozen layers get zero blocks.
Gradients gradients(const Network& net, const Matrix& inputs, const Matrix& targets,
                    const OutputMask& mask, const FreezePlan& plan);

/// First and second moment accumulators, shaped like the network.
struct AdamState {
  std::vector<LayerGradient> first;
  std::vector<LayerGradient> second;

  static AdamState zeros_like(const Network& net);
};

/// One bias-corrected Adam update of the trainable layers. t is the 1-based
/// step index. Frozen layers and their moments are left untouched.
void adam_step(Network& net, const Gradients& grads, const TrainConfig& config,
               AdamState& state, std::size_t t, const FreezePlan& plan);

struct TrainResult {
  Network network;
  std::vector<double> loss_history;  // mean batch loss per epoch
  std::size_t steps = 0;
};

/// Fixed-epoch mini-batch Adam with a seeded reshuffle each epoch. The last
/// batch of an epoch may be short.
TrainResult train(Network net, const Matrix& inputs, const Matrix& targets, const OutputMask& mask,
                  const FreezePlan& plan, const TrainConfig& config);

/// Dataset overload; `data` must already be scaled.
TrainResult train(Network net, const data::Dataset& data, const OutputMask& mask,
                  const FreezePlan& plan, const TrainConfig& config);

}  // namespace mfcal::net
