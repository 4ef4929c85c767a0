#pragma once

// Layer-freezing transfer learning and hierarchical calibration cascades
// (low fidelity -> high fidelity -> experiment) over seeded ensembles.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mfcal/data.hpp"
#include "mfcal/metrics.hpp"
#include "mfcal/netcore.hpp"

namespace mfcal::transfer {

/// Layers 0..k-1 frozen, the rest trainable. Requires k <= layer count; a
/// plan with k == layer count is rejected later by any training call.
net::FreezePlan freeze_first_k(const net::Network& net, std::size_t k);

/// Retrain the last `retrained_layers` weight layers, freeze the rest.
net::FreezePlan freeze_for_retraining(const net::Network& net, std::size_t retrained_layers);

struct FidelityStage {
  std::string name;
  data::Dataset dataset;
  /// Loss mask; when empty, derived from dataset.observed.
  std::optional<net::OutputMask> mask;
  net::TrainConfig config;
  /// Layers retrained, counted from the output side. Ignored for the base
  /// stage, which trains every layer.
  std::size_t retrained_layers = 2;
  /// When empty: 0.9 for datasets tagged "experiment", 0.8 otherwise.
  std::optional<double> train_fraction;

  net::OutputMask effective_mask() const;
  double effective_train_fraction() const;
};

struct CascadePlan {
  std::vector<net::LayerSpec> architecture;
  FidelityStage base_stage;
  std::vector<FidelityStage> calibration_stages;

  /// Throws ArgumentError on dimension mismatches between stages and the
  /// architecture, or an out-of-range retrained_layers.
  void validate() const;
};

struct CalibratedEnsemble {
  std::vector<net::Network> members;
  std::vector<std::vector<std::uint64_t>> split_seeds;  // [member][stage]
  std::vector<std::string> lineage;                     // stage names, base first
  data::ScalingRanges scaling;                          // fitted on the base stage

  std::size_t size() const { return members.size(); }
  void validate() const;
};

/// Trains the trainable layers of `net` on `stage.dataset`, which must
/// already be scaled with the base ranges. Frozen layers come back
/// bitwise identical.
net::Network transfer_learn(const net::Network& net, const FidelityStage& stage);

struct StageResult {
  std::string name;
  metrics::EvalReport train;
  metrics::EvalReport test;
  /// Incoming (previous-stage) models scored on this stage's test rows;
  /// absent for the base stage.
  std::optional<metrics::EvalReport> test_uncalibrated;
};

/// Per-member record of a cascade: the network after each stage and the
/// split used at each stage (indices into that stage's dataset).
struct MemberTrace {
  std::vector<net::Network> stage_networks;
  std::vector<data::SplitIndices> splits;
  std::vector<std::vector<double>> loss_histories;
};

struct CascadeResult {
  CalibratedEnsemble ensemble;
  std::vector<StageResult> stages;
  std::vector<MemberTrace> traces;
};

struct RunOptions {
  std::uint64_t seed = 0;
  int threads = 1;
};

/// Trains `ensemble_size` members through the base stage and every
/// calibration stage in order. Each member draws its own split per stage
/// from (seed, member, stage). Results do not depend on options.threads.
CascadeResult run_cascade(const CascadePlan& plan, std::size_t ensemble_size, const RunOptions& options);

/// One calibration stage applied to every member of an existing ensemble
/// (warm start). stage_index keys the per-member seeds; it defaults to the
/// ensemble's lineage length.
struct CalibrationOutcome {
  CalibratedEnsemble ensemble;
  StageResult result;
  std::vector<data::SplitIndices> splits;
};
CalibrationOutcome calibrate_ensemble(const CalibratedEnsemble& ensemble, const FidelityStage& stage,
                                      const RunOptions& options, std::optional<std::size_t> stage_index = {});

/// Scaled-space predictions of every member, [member](rows x outputs), in
/// physical output units.
std::vector<Eigen::MatrixXd> member_predictions(const CalibratedEnsemble& ensemble, const Eigen::MatrixXd& physical_inputs,
                                                int threads = 1);

struct RecencyRow {
  long long recency = 0;
  std::vector<double> truth;        // observed outputs only
  std::vector<double> mean;         // calibrated ensemble mean
  std::vector<double> sd;           // calibrated ensemble sample SD
  std::vector<double> uncalibrated; // incoming ensemble mean
};

struct RecencyReport {
  std::vector<std::string> outputs;  // observed output names
  std::vector<RecencyRow> rows;      // held-out rows, oldest first
  metrics::EvalReport calibrated;
  metrics::EvalReport uncalibrated;
  /// Mean |relative error| of the ensemble-mean prediction over held-out
  /// rows and observed outputs.
  double calibrated_error = 0.0;
  double uncalibrated_error = 0.0;
  CalibratedEnsemble calibrated_ensemble;
};

/// Calibrates on the oldest N - holdout_count rows (all of them, no random
/// split) and evaluates on the newest holdout_count rows.
RecencyReport recency_holdout(const CalibratedEnsemble& ensemble, const FidelityStage& experiment,
                              std::size_t holdout_count, const RunOptions& options);

/// Directory layout: ensemble.yaml (lineage, split seeds, member files) and
/// member_<k>.yaml checkpoints carrying the scaling ranges.
void save_ensemble(const CalibratedEnsemble& ensemble, const std::filesystem::path& dir);
CalibratedEnsemble load_ensemble(const std::filesystem::path& dir);

}  // namespace mfcal::transfer
