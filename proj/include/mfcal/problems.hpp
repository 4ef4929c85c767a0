#pragma once

// Built-in fidelity ladders: the Taylor-expansion toy and a synthetic
// 9-input / 19-output campaign with 5 observed outputs.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mfcal/data.hpp"

namespace mfcal::problems {

struct TaylorPoint {
  double x = 0.0;  // [-1, 1]
  double a = 0.0;  // [0, 1]
};

/// x * exp(a * x)
double taylor_true(const TaylorPoint& p);
/// First-order expansion: x
double taylor_low(const TaylorPoint& p);
/// Second-order expansion: x + a * x^2
double taylor_high(const TaylorPoint& p);

struct Ladder {
  data::Dataset low;
  data::Dataset high;
  data::Dataset experiment;
};

/// Inputs (x, a) drawn by Latin hypercube, one output "f", fully observed.
Ladder generate_taylor_datasets(std::size_t n_low, std::size_t n_high, std::size_t n_exp, std::uint64_t seed);

struct SyntheticCampaignSpec {
  std::size_t input_dim = 9;
  std::size_t output_dim = 19;
  std::size_t observed_count = 5;
  std::uint64_t seed = 0;
  double fidelity_gap = 0.3;           // amplitude of the high-fidelity correction
  double experiment_distortion = 0.2;  // amplitude of the experiment distortion
  double noise_sd = 0.0;               // observation noise, relative to each output's scale
  /// Experiment inputs are drawn from [margin, 1 - margin]^d in unit space.
  double experiment_margin = 0.1;

  void validate() const;
};

/// Deterministic analytic output family behind a campaign. Every output is
/// scale_j * (2 + g_j(u)) with |g_j| <= 1 on the unit box, so outputs stay
/// positive as long as fidelity_gap + experiment_distortion (+ noise) < 1.
class CampaignModel {
 public:
  explicit CampaignModel(const SyntheticCampaignSpec& spec);

  const SyntheticCampaignSpec& spec() const { return spec_; }
  const std::vector<std::string>& input_names() const { return input_names_; }
  const std::vector<std::string>& output_names() const { return output_names_; }
  const std::vector<bool>& observed() const { return observed_; }
  /// Typical magnitude of each output; noise and gaps are relative to it.
  const std::vector<double>& output_scales() const { return output_scale_; }

  /// Maps unit-box coordinates to physical input units and back.
  Eigen::VectorXd to_physical(const Eigen::VectorXd& unit) const;

  Eigen::VectorXd low(const Eigen::VectorXd& unit) const;
  Eigen::VectorXd high(const Eigen::VectorXd& unit) const;
  /// Noise-free experiment response.
  Eigen::VectorXd experiment(const Eigen::VectorXd& unit) const;

 private:
  struct Term {
    Eigen::VectorXd linear;
    Eigen::VectorXd quadratic;
    std::vector<Eigen::VectorXd> freq;
    std::vector<double> amp;
    std::vector<double> phase;
    double offset = 0.0;
    double eval(const Eigen::VectorXd& u) const;
  };
  static Term make_term(std::size_t d, std::uint64_t seed);
  // Systematic offset plus a linear trend, |eval| <= 1.
  static Term make_trend(std::size_t d, std::uint64_t seed);

  SyntheticCampaignSpec spec_;
  std::vector<std::string> input_names_;
  std::vector<std::string> output_names_;
  std::vector<bool> observed_;
  std::vector<std::pair<double, double>> input_ranges_;
  std::vector<double> output_scale_;
  std::vector<Term> base_, gap_, distortion_;
};

/// Low/high fidelity rows are fully observed Latin hypercube designs; the
/// experiment marks only `observed_count` outputs observed (the others are NA)
/// and its rows are ordered by one drifting input, with recency = row order.
Ladder generate_campaign(const SyntheticCampaignSpec& spec, std::size_t n_low, std::size_t n_high, std::size_t n_exp);

}  // namespace mfcal::problems
