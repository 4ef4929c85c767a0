#pragma once

// Dataset-size sweeps: how the final-stage test score of a cascade changes
// as one stage's dataset grows.

#include <cstdint>
#include <optional>
#include <vector>

#include "mfcal/metrics.hpp"
#include "mfcal/tables.hpp"
#include "mfcal/transfer.hpp"

namespace mfcal::metrics {

struct SweepPoint {
  std::size_t size = 0;
  double mean_ev = 0.0;
  std::optional<double> sd_ev;     // empty with a single replicate
  std::vector<double> replicate_ev;
  transfer::StageResult final_stage;  // train/test reports, one member per replicate
};

struct SweepResult {
  std::size_t varied_stage = 0;  // 0 = base stage, k = k-th calibration stage
  std::vector<SweepPoint> points;  // sizes strictly increasing

  void validate() const;
};

struct SweepOptions {
  std::uint64_t seed = 0;
  int threads = 1;
};

/// For each size, the varied stage's dataset is cut to a seeded subsample
/// (nested: smaller sizes are prefixes of larger ones), the plan runs with
/// `replicates` members, and the last stage's test EV is averaged over
/// members. Replicate r keeps the same base-stage split and init at every
/// size. Throws ArgumentError when sizes are not strictly increasing or
/// exceed the stage's rows; cascade errors propagate.
SweepResult sweep_stage_size(const transfer::CascadePlan& plan, std::size_t varied_stage,
                             const std::vector<std::size_t>& sizes, std::size_t replicates,
                             const SweepOptions& options);

/// Report schema plus `size` and `replicate` columns.
std::vector<std::string> sweep_header();
void append_sweep(CsvTable& table, const SweepResult& result);

/// One row per size: size, mean EV, SD EV (NA with one replicate).
CsvTable sweep_summary(const SweepResult& result);

}  // namespace mfcal::metrics
