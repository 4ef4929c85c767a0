#include "mfcal/presets.hpp"

#include <array>

namespace mfcal::presets {

namespace {

net::TrainConfig make_config(double lr, std::size_t batch, std::size_t epochs) {
  net::TrainConfig c;
  c.learning_rate = lr;
  c.batch_size = batch;
  c.epochs = epochs;
  return c;
}

std::string stage_name(const data::Dataset& d, std::size_t index) {
  return (d.fidelity_tag.empty() ? std::string("stage") : d.fidelity_tag) + "_" + std::to_string(index);
}

}  // namespace

std::vector<net::LayerSpec> taylor_architecture() {
  constexpr std::array<int, 3> hidden{4, 8, 14};
  return net::make_architecture(2, hidden, 1);
}

net::TrainConfig taylor_base_config() { return make_config(0.004, 50, 300); }
net::TrainConfig taylor_transfer_config() { return make_config(1e-4, 1, 300); }

std::vector<net::LayerSpec> campaign_architecture() {
  constexpr std::array<int, 4> hidden{11, 13, 22, 16};
  return net::make_architecture(9, hidden, 19);
}

net::TrainConfig campaign_base_config() { return make_config(0.004, 1500, 400); }
net::TrainConfig campaign_high_config() { return make_config(3e-4, 1, 300); }
net::TrainConfig campaign_experiment_config() { return make_config(3e-4, 1, 2300); }

transfer::FidelityStage taylor_stage(const std::string& name, data::Dataset dataset, bool base) {
  transfer::FidelityStage s;
  s.name = name;
  s.dataset = std::move(dataset);
  s.config = base ? taylor_base_config() : taylor_transfer_config();
  s.retrained_layers = 2;
  s.train_fraction = 0.8;
  return s;
}

transfer::CascadePlan taylor_plan(const data::Dataset& base, const std::vector<data::Dataset>& calibration) {
  transfer::CascadePlan plan;
  plan.architecture = taylor_architecture();
  plan.base_stage = taylor_stage(stage_name(base, 0), base, true);
  for (std::size_t i = 0; i < calibration.size(); ++i)
    plan.calibration_stages.push_back(taylor_stage(stage_name(calibration[i], i + 1), calibration[i], false));
  return plan;
}

transfer::CascadePlan campaign_plan(const data::Dataset& base, const std::vector<data::Dataset>& calibration) {
  transfer::CascadePlan plan;
  plan.architecture = campaign_architecture();
  plan.base_stage.name = stage_name(base, 0);
  plan.base_stage.dataset = base;
  plan.base_stage.config = campaign_base_config();
  for (std::size_t i = 0; i < calibration.size(); ++i) {
    transfer::FidelityStage s;
    s.name = stage_name(calibration[i], i + 1);
    s.dataset = calibration[i];
    s.config = calibration[i].fidelity_tag == "experiment" ? campaign_experiment_config() : campaign_high_config();
    s.retrained_layers = 2;
    plan.calibration_stages.push_back(std::move(s));
  }
  return plan;
}

}  // namespace mfcal::presets
