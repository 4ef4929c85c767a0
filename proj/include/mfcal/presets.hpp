#pragma once

// Stock hyper-parameters and cascade plans for the built-in ladders.

#include <string>
#include <vector>

#include "mfcal/problems.hpp"
#include "mfcal/transfer.hpp"

namespace mfcal::presets {

// Taylor toy: 2 -> 4-8-14 -> 1, base lr 0.004 / batch 50 / 300 epochs,
// transfer lr 1e-4 / batch 1 / 300 epochs on the final 2 layers, 80/20 splits.
std::vector<net::LayerSpec> taylor_architecture();
net::TrainConfig taylor_base_config();
net::TrainConfig taylor_transfer_config();

// Campaign: 9 -> 11-13-22-16 -> 19, base lr 0.004 / batch 1500 / 400 epochs,
// transfer lr 3e-4 / batch 1 with 2300 epochs on the experiment stage.
std::vector<net::LayerSpec> campaign_architecture();
net::TrainConfig campaign_base_config();
net::TrainConfig campaign_high_config();
net::TrainConfig campaign_experiment_config();

transfer::FidelityStage taylor_stage(const std::string& name, data::Dataset dataset, bool base);

/// base dataset first, calibration datasets in order.
transfer::CascadePlan taylor_plan(const data::Dataset& base, const std::vector<data::Dataset>& calibration);
transfer::CascadePlan campaign_plan(const data::Dataset& base, const std::vector<data::Dataset>& calibration);

}  // namespace mfcal::presets
