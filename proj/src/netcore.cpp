#include "mfcal/netcore.hpp"

#include <cmath>
#include <cstring>

#include "mfcal/data.hpp"
#include "mfcal/errors.hpp"
#include "mfcal/parallel.hpp"
#include "mfcal/rng.hpp"

namespace mfcal::net {

const char* to_string(Activation a) {
  return a == Activation::rectifier ? "rectifier" : "identity";
}

Activation activation_from_string(const std::string& s) {
  if (s == "rectifier" || s == "relu") return Activation::rectifier;
  if (s == "identity" || s == "linear") return Activation::identity;
  throw ArgumentError("unknown activation '" + s + "'");
}

std::vector<LayerSpec> Network::specs() const {
  std::vector<LayerSpec> out;
  out.reserve(layers.size());
  for (const auto& l : layers) out.push_back(l.spec);
  return out;
}

void check_specs(std::span<const LayerSpec> specs) {
  if (specs.empty()) throw ShapeError("network needs at least one layer");
  for (std::size_t k = 0; k < specs.size(); ++k) {
    const auto& s = specs[k];
    if (s.input_width < 1 || s.output_width < 1)
      throw ShapeError("layer " + std::to_string(k) + " has a non-positive width");
    if (k > 0 && specs[k - 1].output_width != s.input_width)
      throw ShapeError("layer " + std::to_string(k - 1) + " output width " +
                       std::to_string(specs[k - 1].output_width) + " does not match layer " +
                       std::to_string(k) + " input width " + std::to_string(s.input_width));
  }
  if (specs.back().activation != Activation::identity)
    throw ShapeError("final layer activation must be identity");
}

void Network::validate() const {
  check_specs(specs());
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto& l = layers[k];
    if (l.weights.rows() != l.spec.output_width || l.weights.cols() != l.spec.input_width ||
        l.biases.size() != l.spec.output_width)
      throw ShapeError("layer " + std::to_string(k) + " parameter shape disagrees with its spec");
    if (!l.weights.allFinite() || !l.biases.allFinite())
      throw DomainError("layer " + std::to_string(k) + " has non-finite parameters");
  }
}

namespace {

bool same_bits(const double* a, const double* b, Eigen::Index n) {
  return std::memcmp(a, b, static_cast<std::size_t>(n) * sizeof(double)) == 0;
}

}  // namespace

bool bitwise_equal(const Layer& a, const Layer& b) {
  return a.spec == b.spec && a.weights.rows() == b.weights.rows() &&
         a.weights.cols() == b.weights.cols() && a.biases.size() == b.biases.size() &&
         same_bits(a.weights.data(), b.weights.data(), a.weights.size()) &&
         same_bits(a.biases.data(), b.biases.data(), a.biases.size());
}

bool bitwise_equal(const Network& a, const Network& b) {
  if (a.layers.size() != b.layers.size()) return false;
  for (std::size_t k = 0; k < a.layers.size(); ++k)
    if (!bitwise_equal(a.layers[k], b.layers[k])) return false;
  return true;
}

std::vector<LayerSpec> make_architecture(int inputs, std::span<const int> hidden_widths, int outputs) {
  std::vector<LayerSpec> specs;
  int prev = inputs;
  for (const int w : hidden_widths) {
    specs.push_back({prev, w, Activation::rectifier});
    prev = w;
  }
  specs.push_back({prev, outputs, Activation::identity});
  check_specs(specs);
  return specs;
}

std::size_t FreezePlan::trainable_count() const {
  std::size_t n = 0;
  for (const bool t : trainable) n += t ? 1 : 0;
  return n;
}

std::size_t FreezePlan::first_trainable() const {
  for (std::size_t k = 0; k < trainable.size(); ++k)
    if (trainable[k]) return k;
  return trainable.size();
}

OutputMask OutputMask::from_observed(const std::vector<bool>& observed) {
  OutputMask m;
  m.weights.reserve(observed.size());
  for (const bool o : observed) m.weights.push_back(o ? 1.0 : 0.0);
  return m;
}

std::size_t OutputMask::observed_count() const {
  std::size_t n = 0;
  for (const double w : weights) n += w != 0.0 ? 1 : 0;
  return n;
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw ArgumentError("learning_rate must be a finite non-negative number");
  if (batch_size < 1) throw ArgumentError("batch_size must be at least 1");
  if (epochs < 1) throw ArgumentError("epochs must be at least 1");
  if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0) || !(adam_beta2 > 0.0 && adam_beta2 < 1.0))
    throw ArgumentError("Adam betas must lie in (0, 1)");
  if (!(adam_epsilon > 0.0)) throw ArgumentError("adam_epsilon must be positive");
}

Network init_network(std::span<const LayerSpec> specs, std::uint64_t seed) {
  check_specs(specs);
  Rng rng(derive_seed(seed, {stream::init}));
  Network net;
  net.rng_seed = seed;
  for (const auto& s : specs) {
    Layer l{s, Matrix(s.output_width, s.input_width), Vector::Zero(s.output_width)};
    const double bound = std::sqrt(6.0 / static_cast<double>(s.input_width + s.output_width));
    for (int r = 0; r < s.output_width; ++r)
      for (int c = 0; c < s.input_width; ++c) l.weights(r, c) = bound * (2.0 * rng.uniform() - 1.0);
    net.layers.push_back(std::move(l));
  }
  return net;
}

namespace {

void apply_activation(Matrix& z, Activation a) {
  if (a == Activation::rectifier) z = z.cwiseMax(0.0);
}

}  // namespace

bool has_dead_layer(const Network& net, const Matrix& inputs) {
  if (inputs.cols() != net.input_width()) throw ShapeError("has_dead_layer: input width mismatch");
  Matrix a = inputs.transpose();
  for (std::size_t k = 0; k + 1 < net.layers.size(); ++k) {
    const auto& l = net.layers[k];
    Matrix z = (l.weights * a).colwise() + l.biases;
    if (((z.array() < 0.0).colwise().all()).any()) return true;
    apply_activation(z, l.spec.activation);
    a = std::move(z);
  }
  return false;
}

Network init_live_network(std::span<const LayerSpec> specs, std::uint64_t seed, const Matrix& inputs,
                          std::size_t max_attempts) {
  for (std::size_t i = 0; i < max_attempts; ++i) {
    auto net = init_network(specs, i == 0 ? seed : derive_seed(seed, {i}));
    if (!has_dead_layer(net, inputs)) return net;
  }
  throw DegenerateError("init_live_network: every draw left a hidden layer inactive");
}

namespace {

// Batch forward pass keeping every layer's pre-activation and activation.
// acts[0] is the input, acts[k+1] the output of layer k.
void forward_cache(const Network& net, const Matrix& inputs, std::vector<Matrix>& pre,
                   std::vector<Matrix>& acts) {
  const std::size_t L = net.layers.size();
  pre.resize(L);
  acts.resize(L + 1);
  acts[0] = inputs;
  for (std::size_t k = 0; k < L; ++k) {
    const auto& layer = net.layers[k];
    pre[k] = acts[k] * layer.weights.transpose();
    pre[k].rowwise() += layer.biases.transpose();
    acts[k + 1] = pre[k];
    apply_activation(acts[k + 1], layer.spec.activation);
  }
}

void check_batch(const Network& net, const Matrix& inputs, const Matrix& targets,
                 const OutputMask& mask) {
  if (inputs.rows() < 1) throw ArgumentError("batch must be nonempty");
  if (inputs.cols() != net.input_width())
    throw ShapeError("input width " + std::to_string(inputs.cols()) + " != network input width " +
                     std::to_string(net.input_width()));
  if (targets.rows() != inputs.rows() || targets.cols() != net.output_width())
    throw ShapeError("target shape does not match batch and network output width");
  if (mask.weights.size() != static_cast<std::size_t>(net.output_width()))
    throw ShapeError("mask length does not match network output width");
}

}  // namespace

Vector forward(const Network& net, const Vector& x) {
  if (x.size() != net.input_width())
    throw ShapeError("input length " + std::to_string(x.size()) + " != network input width " +
                     std::to_string(net.input_width()));
  if (!x.allFinite()) throw DomainError("forward: non-finite input");
  Vector a = x;
  for (const auto& layer : net.layers) {
    Vector z = layer.weights * a + layer.biases;
    if (layer.spec.activation == Activation::rectifier) z = z.cwiseMax(0.0);
    a = std::move(z);
  }
  return a;
}

Matrix predict_rows(const Network& net, const Matrix& inputs, int threads) {
  if (inputs.cols() != net.input_width())
    throw ShapeError("input width " + std::to_string(inputs.cols()) + " != network input width " +
                     std::to_string(net.input_width()));
  Matrix out(inputs.rows(), net.output_width());
  parallel_for(static_cast<std::size_t>(inputs.rows()), threads, [&](std::size_t i) {
    const auto r = static_cast<Eigen::Index>(i);
    out.row(r) = forward(net, inputs.row(r).transpose()).transpose();
  });
  return out;
}

double masked_mse(const Matrix& pred, const Matrix& target, const OutputMask& mask) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    throw ShapeError("masked_mse: prediction and target shapes differ");
  if (mask.weights.size() != static_cast<std::size_t>(pred.cols()))
    throw ShapeError("masked_mse: mask length does not match output width");
  if (pred.rows() < 1) throw ArgumentError("masked_mse: empty batch");
  const std::size_t observed = mask.observed_count();
  if (observed == 0) throw DegenerateError("masked_mse: mask has no observed outputs");
  double total = 0.0;
  for (Eigen::Index b = 0; b < pred.rows(); ++b) {
    double row = 0.0;
    for (Eigen::Index j = 0; j < pred.cols(); ++j) {
      if (!mask.observed(static_cast<std::size_t>(j))) continue;
      const double d = pred(b, j) - target(b, j);
      row += d * d;
    }
    total += row / static_cast<double>(observed);
  }
  return total / static_cast<double>(pred.rows());
}

Gradients gradients(const Network& net, const Matrix& inputs, const Matrix& targets,
                    const OutputMask& mask, const FreezePlan& plan) {
  check_batch(net, inputs, targets, mask);
  const std::size_t L = net.layers.size();
  if (plan.trainable.size() != L) throw ShapeError("freeze plan length does not match layer count");
  const std::size_t observed = mask.observed_count();
  if (observed == 0) throw DegenerateError("gradients: mask has no observed outputs");

  std::vector<Matrix> pre, acts;
  forward_cache(net, inputs, pre, acts);
  const Matrix& pred = acts[L];
  if (!pred.allFinite()) throw NumericOverflowError("non-finite network output during backpropagation");

  Gradients g;
  g.layers.resize(L);
  for (std::size_t k = 0; k < L; ++k) {
    g.layers[k].weights = Matrix::Zero(net.layers[k].weights.rows(), net.layers[k].weights.cols());
    g.layers[k].biases = Vector::Zero(net.layers[k].biases.size());
  }

  // dLoss/dPred; masked columns stay exactly zero and their targets are never read.
  const double B = static_cast<double>(inputs.rows());
  const double scale = 2.0 / (B * static_cast<double>(observed));
  Matrix delta = Matrix::Zero(pred.rows(), pred.cols());
  double loss = 0.0;
  for (Eigen::Index b = 0; b < pred.rows(); ++b) {
    double row = 0.0;
    for (Eigen::Index j = 0; j < pred.cols(); ++j) {
      if (!mask.observed(static_cast<std::size_t>(j))) continue;
      const double d = pred(b, j) - targets(b, j);
      row += d * d;
      delta(b, j) = scale * d;
    }
    loss += row / static_cast<double>(observed);
  }
  g.loss = loss / B;
  if (!std::isfinite(g.loss)) throw NumericOverflowError("non-finite loss during backpropagation");

  const std::size_t stop = plan.first_trainable();
  for (std::size_t k = L; k-- > stop;) {
    const auto& layer = net.layers[k];
    if (layer.spec.activation == Activation::rectifier)
      delta = (pre[k].array() > 0.0).select(delta.array(), 0.0).matrix();
    if (plan.trainable[k]) {
      g.layers[k].weights = delta.transpose() * acts[k];
      g.layers[k].biases = delta.colwise().sum().transpose();
      if (!g.layers[k].weights.allFinite() || !g.layers[k].biases.allFinite())
        throw NumericOverflowError("non-finite gradient in layer " + std::to_string(k));
    }
    if (k > stop) delta = delta * layer.weights;
  }
  return g;
}

AdamState AdamState::zeros_like(const Network& net) {
  AdamState s;
  for (const auto& l : net.layers) {
    s.first.push_back({Matrix::Zero(l.weights.rows(), l.weights.cols()), Vector::Zero(l.biases.size())});
    s.second.push_back({Matrix::Zero(l.weights.rows(), l.weights.cols()), Vector::Zero(l.biases.size())});
  }
  return s;
}

namespace {

template <typename P, typename G>
void adam_update(P& param, const G& grad, G& m, G& v, double beta1, double beta2, double lr,
                 double eps, double correction1, double correction2) {
  m = beta1 * m + (1.0 - beta1) * grad;
  v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
  param.array() -= lr * (m.array() / correction1) / ((v.array() / correction2).sqrt() + eps);
}

}  // namespace

void adam_step(Network& net, const Gradients& grads, const TrainConfig& config, AdamState& state,
               std::size_t t, const FreezePlan& plan) {
  const std::size_t L = net.layers.size();
  if (t < 1) throw ArgumentError("adam_step: step index t must be >= 1");
  if (grads.layers.size() != L || state.first.size() != L || state.second.size() != L ||
      plan.trainable.size() != L)
    throw ShapeError("adam_step: gradient/state/plan layer count mismatch");
  const double c1 = 1.0 - std::pow(config.adam_beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(config.adam_beta2, static_cast<double>(t));
  for (std::size_t k = 0; k < L; ++k) {
    if (!plan.trainable[k]) continue;
    auto& layer = net.layers[k];
    const auto& g = grads.layers[k];
    if (g.weights.rows() != layer.weights.rows() || g.weights.cols() != layer.weights.cols() ||
        g.biases.size() != layer.biases.size() ||
        state.first[k].weights.rows() != layer.weights.rows() ||
        state.first[k].weights.cols() != layer.weights.cols())
      throw ShapeError("adam_step: shape mismatch in layer " + std::to_string(k));
    adam_update(layer.weights, g.weights, state.first[k].weights, state.second[k].weights,
                config.adam_beta1, config.adam_beta2, config.learning_rate, config.adam_epsilon, c1, c2);
    adam_update(layer.biases, g.biases, state.first[k].biases, state.second[k].biases,
                config.adam_beta1, config.adam_beta2, config.learning_rate, config.adam_epsilon, c1, c2);
  }
}

TrainResult train(Network net, const Matrix& inputs, const Matrix& targets, const OutputMask& mask,
                  const FreezePlan& plan, const TrainConfig& config) {
  config.validate();
  const auto n = static_cast<std::size_t>(inputs.rows());
  if (n == 0) throw ArgumentError("train: empty dataset");
  check_batch(net, inputs, targets, mask);
  if (plan.trainable.size() != net.layer_count())
    throw ShapeError("freeze plan length does not match layer count");
  if (plan.trainable_count() == 0) throw DegenerateError("train: freeze plan leaves no trainable layer");
  if (mask.observed_count() == 0) throw DegenerateError("train: mask has no observed outputs");
  if (config.batch_size > n)
    throw ArgumentError("batch_size " + std::to_string(config.batch_size) +
                        " exceeds training-set size " + std::to_string(n));

  Rng rng(derive_seed(config.seed, {stream::train}));
  AdamState state = AdamState::zeros_like(net);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  TrainResult result;
  result.loss_history.reserve(config.epochs);
  Matrix batch_x, batch_y;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t len = std::min(config.batch_size, n - start);
      batch_x.resize(static_cast<Eigen::Index>(len), inputs.cols());
      batch_y.resize(static_cast<Eigen::Index>(len), targets.cols());
      for (std::size_t i = 0; i < len; ++i) {
        batch_x.row(static_cast<Eigen::Index>(i)) = inputs.row(static_cast<Eigen::Index>(order[start + i]));
        batch_y.row(static_cast<Eigen::Index>(i)) = targets.row(static_cast<Eigen::Index>(order[start + i]));
      }
      Gradients g;
      try {
        g = gradients(net, batch_x, batch_y, mask, plan);
      } catch (const NumericOverflowError& e) {
        throw TrainingDivergedError(epoch, "training diverged in epoch " + std::to_string(epoch) + ": " + e.what());
      }
      adam_step(net, g, config, state, ++result.steps, plan);
      epoch_loss += g.loss * static_cast<double>(len);
    }
    epoch_loss /= static_cast<double>(n);
    if (!std::isfinite(epoch_loss))
      throw TrainingDivergedError(epoch, "training diverged in epoch " + std::to_string(epoch));
    result.loss_history.push_back(epoch_loss);
  }
  for (std::size_t k = 0; k < net.layer_count(); ++k)
    if (plan.trainable[k] && (!net.layers[k].weights.allFinite() || !net.layers[k].biases.allFinite()))
      throw TrainingDivergedError(config.epochs - 1, "training produced non-finite parameters");
  result.network = std::move(net);
  return result;
}

TrainResult train(Network net, const data::Dataset& data, const OutputMask& mask,
                  const FreezePlan& plan, const TrainConfig& config) {
  return train(std::move(net), data.inputs, data.outputs, mask, plan, config);
}

}  // namespace mfcal::net
