#pragma once

// Surrogate design search over the scaled input box: Latin hypercube seeding
// followed by compass search from the best seed.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mfcal/transfer.hpp"

namespace mfcal::optimize {

/// yield * rhor^2. Throws ArgumentError unless both are positive.
double itfx(double yield, double rhor);

/// A scalar objective over named outputs (physical units).
struct Objective {
  std::string name;
  std::vector<std::string> outputs;
  /// Receives the referenced outputs in the order of `outputs`.
  std::function<double(std::span<const double>)> combine;

  /// itfx of the two named outputs; nonpositive predictions score -inf.
  static Objective itfx(const std::string& yield_name, const std::string& rhor_name);
  /// The named output itself.
  static Objective single(const std::string& output_name);
  /// This objective times a positive constant.
  Objective scaled(double factor) const;

  /// Column of each referenced output in `names`; throws ArgumentError when one is missing.
  std::vector<std::size_t> resolve(const std::vector<std::string>& names) const;
};

struct OutputPrediction {
  std::string name;
  double mean = 0.0;
  std::optional<double> sd;  // empty for a single-member ensemble
};

/// Forward pass of every member at a scaled input, unscaled to physical
/// units; mean and sample SD per output. Needs at least 2 members.
std::vector<OutputPrediction> predict_with_uncertainty(const transfer::CalibratedEnsemble& ensemble,
                                                        const Eigen::VectorXd& scaled_x);

struct SearchOptions {
  int threads = 1;            // seed-phase evaluations only
  bool record_points = false;
  double initial_step = 0.1;
  double min_step = 1e-4;
};

struct SearchTrace {
  /// Incumbent objective after each evaluation, seeding then refinement.
  std::vector<double> incumbent;
  std::size_t seed_evaluations = 0;
  std::vector<Eigen::VectorXd> points;  // every evaluated point, when recorded
  double final_step = 0.0;
};

struct BoxResult {
  Eigen::VectorXd x;
  double value = 0.0;
  std::size_t evaluations = 0;
  SearchTrace trace;
};

/// Maximizes f over [0,1]^d. Requires budget >= 10 d. Half the budget goes
/// to Latin hypercube seeding; the rest to compass search with a halving step.
/// Ties are broken toward the lexicographically lowest point.
BoxResult maximize_box(const std::function<double(const Eigen::VectorXd&)>& f, std::size_t d, std::size_t budget,
                       std::uint64_t seed, const SearchOptions& options = {});

struct DesignResult {
  std::string objective;
  Eigen::VectorXd scaled;
  Eigen::VectorXd physical;
  double value = 0.0;
  std::vector<OutputPrediction> outputs;  // every output at the optimum
  std::size_t budget = 0;
  std::size_t evaluations = 0;
  SearchTrace trace;
};

/// maximize_box over the ensemble-mean objective.
DesignResult maximize(const transfer::CalibratedEnsemble& ensemble, const Objective& objective, std::size_t budget,
                      std::uint64_t seed, const SearchOptions& options = {});

/// Smallest Euclidean distance from a scaled point to any row of scaled_rows.
double nearest_distance(const Eigen::VectorXd& scaled_x, const Eigen::MatrixXd& scaled_rows);

}  // namespace mfcal::optimize
