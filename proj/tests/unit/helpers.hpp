#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mfcal/netcore.hpp"
#include "mfcal/rng.hpp"

namespace testutil {

using mfcal::net::Matrix;
using mfcal::net::Network;

// Independent loop-based forward pass, rows are samples.
inline Matrix naive_forward(const Network& net, const Matrix& x) {
  Matrix out(x.rows(), net.output_width());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    std::vector<double> a(x.cols());
    for (Eigen::Index c = 0; c < x.cols(); ++c) a[c] = x(r, c);
    for (const auto& l : net.layers) {
      std::vector<double> z(l.spec.output_width);
      for (int i = 0; i < l.spec.output_width; ++i) {
        double s = l.biases(i);
        for (int j = 0; j < l.spec.input_width; ++j) s += l.weights(i, j) * a[j];
        if (l.spec.activation == mfcal::net::Activation::rectifier && s < 0.0) s = 0.0;
        z[i] = s;
      }
      a = std::move(z);
    }
    for (Eigen::Index c = 0; c < out.cols(); ++c) out(r, c) = a[c];
  }
  return out;
}

// Small random architecture: 1..3 hidden layers of width 1..6.
inline std::vector<mfcal::net::LayerSpec> random_specs(mfcal::Rng& rng, int max_in = 4, int max_out = 3) {
  const int in = 1 + static_cast<int>(rng.below(max_in));
  const int out = 1 + static_cast<int>(rng.below(max_out));
  std::vector<int> hidden(1 + rng.below(3));
  for (auto& h : hidden) h = 1 + static_cast<int>(rng.below(6));
  return mfcal::net::make_architecture(in, hidden, out);
}

inline Matrix random_matrix(mfcal::Rng& rng, Eigen::Index r, Eigen::Index c, double lo = 0.0, double hi = 1.0) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.uniform(lo, hi);
  return m;
}

inline void randomize_biases(Network& net, mfcal::Rng& rng, double scale = 0.5) {
  for (auto& l : net.layers)
    for (Eigen::Index i = 0; i < l.biases.size(); ++i) l.biases(i) = rng.uniform(-scale, scale);
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("mfcal_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testutil
