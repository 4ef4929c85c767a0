#include "mfcal/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <yaml-cpp/yaml.h>

#include "mfcal/checkpoint.hpp"
#include "mfcal/errors.hpp"
#include "mfcal/parallel.hpp"
#include "mfcal/rng.hpp"
#include "mfcal/tables.hpp"

namespace mfcal::transfer {

net::FreezePlan freeze_first_k(const net::Network& net, std::size_t k) {
  const std::size_t L = net.layer_count();
  if (k > L) throw ArgumentError("freeze_first_k: k=" + std::to_string(k) + " exceeds layer count " + std::to_string(L));
  net::FreezePlan plan{std::vector<bool>(L, true)};
  for (std::size_t i = 0; i < k; ++i) plan.trainable[i] = false;
  return plan;
}

net::FreezePlan freeze_for_retraining(const net::Network& net, std::size_t retrained_layers) {
  const std::size_t L = net.layer_count();
  if (retrained_layers < 1 || retrained_layers > L)
    throw ArgumentError("retrained_layers=" + std::to_string(retrained_layers) + " must lie in [1, " +
                        std::to_string(L) + "]");
  return freeze_first_k(net, L - retrained_layers);
}

net::OutputMask FidelityStage::effective_mask() const {
  return mask ? *mask : net::OutputMask::from_observed(dataset.observed);
}

double FidelityStage::effective_train_fraction() const {
  if (train_fraction) return *train_fraction;
  return dataset.fidelity_tag == "experiment" ? 0.9 : 0.8;
}

namespace {

void check_stage_dims(const FidelityStage& s, int in, int out) {
  if (s.dataset.input_dim() != static_cast<std::size_t>(in) || s.dataset.output_dim() != static_cast<std::size_t>(out))
    throw ArgumentError("stage '" + s.name + "' has " + std::to_string(s.dataset.input_dim()) + " inputs / " +
                        std::to_string(s.dataset.output_dim()) + " outputs; the network expects " +
                        std::to_string(in) + " / " + std::to_string(out));
  const auto m = s.effective_mask();
  if (m.weights.size() != s.dataset.output_dim())
    throw ArgumentError("stage '" + s.name + "' mask length does not match its outputs");
  for (std::size_t j = 0; j < m.weights.size(); ++j) {
    if (m.weights[j] != 0.0 && m.weights[j] != 1.0)
      throw ArgumentError("stage '" + s.name + "' mask weights must be 0 or 1");
    if (m.weights[j] != 0.0 && !s.dataset.observed[j])
      throw ArgumentError("stage '" + s.name + "' mask selects unobserved output '" + s.dataset.output_names[j] + "'");
  }
  if (m.observed_count() == 0) throw ArgumentError("stage '" + s.name + "' mask observes no outputs");
}

void check_same_columns(const FidelityStage& s, const data::ScalingRanges& r) {
  if (s.dataset.input_names != r.input_names || s.dataset.output_names != r.output_names)
    throw ArgumentError("stage '" + s.name + "' column names differ from the base stage");
}

double effective_fraction(const FidelityStage& s) { return s.effective_train_fraction(); }

void check_retrained(const FidelityStage& s, std::size_t layers) {
  if (s.retrained_layers < 1 || s.retrained_layers >= layers)
    throw ArgumentError("stage '" + s.name + "': retrained_layers=" + std::to_string(s.retrained_layers) +
                        " must lie in [1, " + std::to_string(layers - 1) + "] so at least one layer stays frozen");
}

}  // namespace

void CascadePlan::validate() const {
  net::check_specs(architecture);
  const int in = architecture.front().input_width, out = architecture.back().output_width;
  base_stage.dataset.validate();
  check_stage_dims(base_stage, in, out);
  for (const auto& s : calibration_stages) {
    s.dataset.validate();
    check_stage_dims(s, in, out);
    if (s.dataset.input_names != base_stage.dataset.input_names ||
        s.dataset.output_names != base_stage.dataset.output_names)
      throw ArgumentError("stage '" + s.name + "' column names differ from the base stage");
    check_retrained(s, architecture.size());
  }
}

void CalibratedEnsemble::validate() const {
  if (members.empty()) throw ArgumentError("ensemble has no members");
  for (const auto& m : members) {
    m.validate();
    if (m.specs() != members.front().specs()) throw ArgumentError("ensemble members have different layer specs");
  }
  if (split_seeds.size() != members.size()) throw ArgumentError("ensemble split seed table has the wrong size");
  for (const auto& s : split_seeds)
    if (s.size() != lineage.size()) throw ArgumentError("ensemble split seeds disagree with the lineage length");
}

namespace {

net::TrainResult train_stage(const net::Network& net, const FidelityStage& stage, std::size_t retrained) {
  const auto plan = freeze_for_retraining(net, retrained);
  auto result = net::train(net, stage.dataset, stage.effective_mask(), plan, stage.config);
  result.network.provenance.push_back("stage:" + stage.name);
  return result;
}

metrics::MemberScore score_member(const net::Network& net, const data::Dataset& physical,
                                  const data::ScalingRanges& ranges, std::size_t member) {
  const Eigen::MatrixXd xs = data::scale_inputs(physical.inputs, ranges);
  const Eigen::MatrixXd pred = data::unscale_outputs(net::predict_rows(net, xs), ranges);
  return metrics::score_predictions(pred, physical, member);
}

struct MemberStage {
  net::Network network;
  data::SplitIndices split;
  std::vector<double> loss_history;
  metrics::MemberScore train, test;
  std::optional<metrics::MemberScore> test_uncalibrated;
  std::uint64_t split_seed = 0;
};

MemberStage run_base(const std::vector<net::LayerSpec>& arch, const FidelityStage& stage,
                     const data::ScalingRanges& ranges, std::size_t member, std::uint64_t seed) {
  MemberStage out;
  out.split_seed = derive_seed(seed, {stream::split, member, 0});
  out.split = data::split_indices(stage.dataset.rows(), {effective_fraction(stage), out.split_seed});
  const auto train_phys = stage.dataset.select_rows(out.split.train);
  const auto test_phys = stage.dataset.select_rows(out.split.test);
  FidelityStage local = stage;
  local.dataset = data::scale(train_phys, ranges);
  local.config.seed = derive_seed(seed, {stream::train, member, 0});
  auto net0 = net::init_live_network(arch, derive_seed(seed, {stream::init, member}), local.dataset.inputs);
  auto result = train_stage(net0, local, arch.size());
  out.network = std::move(result.network);
  out.loss_history = std::move(result.loss_history);
  out.train = score_member(out.network, train_phys, ranges, member);
  out.test = score_member(out.network, test_phys, ranges, member);
  return out;
}

MemberStage run_calibration(const net::Network& incoming, const FidelityStage& stage,
                            const data::ScalingRanges& ranges, std::size_t member, std::size_t stage_index,
                            std::uint64_t seed) {
  MemberStage out;
  out.split_seed = derive_seed(seed, {stream::split, member, stage_index});
  out.split = data::split_indices(stage.dataset.rows(), {effective_fraction(stage), out.split_seed});
  const auto train_phys = stage.dataset.select_rows(out.split.train);
  const auto test_phys = stage.dataset.select_rows(out.split.test);
  out.test_uncalibrated = score_member(incoming, test_phys, ranges, member);
  FidelityStage local = stage;
  local.dataset = data::scale(train_phys, ranges);
  local.config.seed = derive_seed(seed, {stream::train, member, stage_index});
  auto result = train_stage(incoming, local, stage.retrained_layers);
  out.network = std::move(result.network);
  out.loss_history = std::move(result.loss_history);
  out.train = score_member(out.network, train_phys, ranges, member);
  out.test = score_member(out.network, test_phys, ranges, member);
  return out;
}

template <typename Fn>
auto guarded(std::size_t member, const std::string& stage, Fn&& fn) {
  try {
    return fn();
  } catch (const CascadeError&) {
    throw;
  } catch (const Error& e) {
    throw CascadeError(member, stage, "member " + std::to_string(member) + ", stage '" + stage + "': " + e.what());
  }
}

StageResult assemble(const FidelityStage& stage, const std::vector<MemberStage>& runs) {
  StageResult r;
  r.name = stage.name;
  r.train = {stage.name, stage.dataset.fidelity_tag, "train", {}};
  r.test = {stage.name, stage.dataset.fidelity_tag, "test", {}};
  for (const auto& m : runs) {
    r.train.members.push_back(m.train);
    r.test.members.push_back(m.test);
  }
  if (!runs.empty() && runs.front().test_uncalibrated) {
    r.test_uncalibrated = metrics::EvalReport{stage.name, stage.dataset.fidelity_tag, "test_uncalibrated", {}};
    for (const auto& m : runs) r.test_uncalibrated->members.push_back(*m.test_uncalibrated);
  }
  return r;
}

}  // namespace

net::Network transfer_learn(const net::Network& net, const FidelityStage& stage) {
  check_stage_dims(stage, net.input_width(), net.output_width());
  check_retrained(stage, net.layer_count());
  return train_stage(net, stage, stage.retrained_layers).network;
}

CascadeResult run_cascade(const CascadePlan& plan, std::size_t ensemble_size, const RunOptions& options) {
  if (ensemble_size < 1) throw ArgumentError("run_cascade: ensemble_size must be at least 1");
  plan.validate();
  const auto ranges = data::fit_scaling(plan.base_stage.dataset);
  const std::size_t n_stages = 1 + plan.calibration_stages.size();

  // runs[member][stage]
  std::vector<std::vector<MemberStage>> runs(ensemble_size);
  parallel_for(ensemble_size, options.threads, [&](std::size_t k) {
    auto& mine = runs[k];
    mine.reserve(n_stages);
    mine.push_back(guarded(k, plan.base_stage.name,
                           [&] { return run_base(plan.architecture, plan.base_stage, ranges, k, options.seed); }));
    for (std::size_t s = 0; s < plan.calibration_stages.size(); ++s) {
      const auto& stage = plan.calibration_stages[s];
      mine.push_back(guarded(k, stage.name, [&] {
        return run_calibration(mine.back().network, stage, ranges, k, s + 1, options.seed);
      }));
    }
  });

  CascadeResult result;
  auto& ens = result.ensemble;
  ens.scaling = ranges;
  ens.lineage.push_back(plan.base_stage.name);
  for (const auto& s : plan.calibration_stages) ens.lineage.push_back(s.name);
  for (std::size_t s = 0; s < n_stages; ++s) {
    std::vector<MemberStage> column;
    for (std::size_t k = 0; k < ensemble_size; ++k) column.push_back(runs[k][s]);
    result.stages.push_back(assemble(s == 0 ? plan.base_stage : plan.calibration_stages[s - 1], column));
  }
  for (std::size_t k = 0; k < ensemble_size; ++k) {
    MemberTrace trace;
    std::vector<std::uint64_t> seeds;
    for (auto& st : runs[k]) {
      trace.stage_networks.push_back(st.network);
      trace.splits.push_back(std::move(st.split));
      trace.loss_histories.push_back(std::move(st.loss_history));
      seeds.push_back(st.split_seed);
    }
    ens.members.push_back(runs[k].back().network);
    ens.split_seeds.push_back(std::move(seeds));
    result.traces.push_back(std::move(trace));
  }
  return result;
}

CalibrationOutcome calibrate_ensemble(const CalibratedEnsemble& ensemble, const FidelityStage& stage,
                                      const RunOptions& options, std::optional<std::size_t> stage_index) {
  ensemble.validate();
  const auto& first = ensemble.members.front();
  stage.dataset.validate();
  check_stage_dims(stage, first.input_width(), first.output_width());
  check_same_columns(stage, ensemble.scaling);
  check_retrained(stage, first.layer_count());
  const std::size_t s = stage_index.value_or(ensemble.lineage.size());

  std::vector<MemberStage> runs(ensemble.size());
  parallel_for(ensemble.size(), options.threads, [&](std::size_t k) {
    runs[k] = guarded(k, stage.name, [&] {
      return run_calibration(ensemble.members[k], stage, ensemble.scaling, k, s, options.seed);
    });
  });

  CalibrationOutcome out;
  out.ensemble = ensemble;
  out.ensemble.lineage.push_back(stage.name);
  for (std::size_t k = 0; k < runs.size(); ++k) {
    out.ensemble.members[k] = runs[k].network;
    out.ensemble.split_seeds[k].push_back(runs[k].split_seed);
    out.splits.push_back(runs[k].split);
  }
  out.result = assemble(stage, runs);
  return out;
}

std::vector<Eigen::MatrixXd> member_predictions(const CalibratedEnsemble& ensemble, const Eigen::MatrixXd& physical_inputs,
                                                int threads) {
  const Eigen::MatrixXd xs = data::scale_inputs(physical_inputs, ensemble.scaling);
  std::vector<Eigen::MatrixXd> out(ensemble.size());
  parallel_for(ensemble.size(), threads, [&](std::size_t k) {
    out[k] = data::unscale_outputs(net::predict_rows(ensemble.members[k], xs), ensemble.scaling);
  });
  return out;
}

RecencyReport recency_holdout(const CalibratedEnsemble& ensemble, const FidelityStage& experiment,
                              std::size_t holdout_count, const RunOptions& options) {
  ensemble.validate();
  if (ensemble.size() < 2) throw ArgumentError("recency_holdout: needs an ensemble of at least 2 members");
  const auto& ds = experiment.dataset;
  if (!ds.recency) throw ArgumentError("recency_holdout: dataset rows carry no recency tags");
  if (holdout_count < 1 || holdout_count >= ds.rows())
    throw ArgumentError("recency_holdout: holdout_count must lie in [1, " + std::to_string(ds.rows() - 1) + "]");
  const auto& first = ensemble.members.front();
  ds.validate();
  check_stage_dims(experiment, first.input_width(), first.output_width());
  check_same_columns(experiment, ensemble.scaling);
  check_retrained(experiment, first.layer_count());

  std::vector<std::size_t> order(ds.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return (*ds.recency)[a] < (*ds.recency)[b]; });
  const std::size_t n_train = ds.rows() - holdout_count;
  const std::vector<std::size_t> train_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  const std::vector<std::size_t> test_idx(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  const auto train_phys = ds.select_rows(train_idx);
  const auto test_phys = ds.select_rows(test_idx);
  const auto train_scaled = data::scale(train_phys, ensemble.scaling);
  const std::size_t s = ensemble.lineage.size();

  RecencyReport rep;
  rep.calibrated_ensemble = ensemble;
  rep.calibrated_ensemble.lineage.push_back(experiment.name + "@recency");
  std::vector<net::Network> calibrated(ensemble.size());
  parallel_for(ensemble.size(), options.threads, [&](std::size_t k) {
    calibrated[k] = guarded(k, experiment.name, [&] {
      FidelityStage local = experiment;
      local.dataset = train_scaled;
      local.config.seed = derive_seed(options.seed, {stream::train, k, s});
      return train_stage(ensemble.members[k], local, experiment.retrained_layers).network;
    });
  });
  for (std::size_t k = 0; k < ensemble.size(); ++k) {
    rep.calibrated_ensemble.members[k] = calibrated[k];
    rep.calibrated_ensemble.split_seeds[k].push_back(0);
  }

  const auto before = member_predictions(ensemble, test_phys.inputs, 1);
  const auto after = member_predictions(rep.calibrated_ensemble, test_phys.inputs, 1);
  rep.calibrated = {experiment.name, ds.fidelity_tag, "recency_holdout", {}};
  rep.uncalibrated = {experiment.name, ds.fidelity_tag, "recency_holdout_uncalibrated", {}};
  for (std::size_t k = 0; k < ensemble.size(); ++k) {
    rep.calibrated.members.push_back(metrics::score_predictions(after[k], test_phys, k));
    rep.uncalibrated.members.push_back(metrics::score_predictions(before[k], test_phys, k));
  }

  std::vector<std::size_t> obs;
  for (std::size_t j = 0; j < ds.output_dim(); ++j)
    if (ds.observed[j]) {
      obs.push_back(j);
      rep.outputs.push_back(ds.output_names[j]);
    }
  double err_after = 0.0, err_before = 0.0;
  std::size_t n_err = 0;
  const auto M = static_cast<double>(ensemble.size());
  for (std::size_t i = 0; i < test_phys.rows(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    RecencyRow row;
    row.recency = (*test_phys.recency)[i];
    for (const auto j : obs) {
      const auto c = static_cast<Eigen::Index>(j);
      std::vector<double> vals;
      double mb = 0.0;
      for (std::size_t k = 0; k < ensemble.size(); ++k) {
        vals.push_back(after[k](r, c));
        mb += before[k](r, c);
      }
      mb /= M;
      const auto stats = metrics::ensemble_stats(vals);
      const double truth = test_phys.outputs(r, c);
      row.truth.push_back(truth);
      row.mean.push_back(stats.mean);
      row.sd.push_back(stats.sd);
      row.uncalibrated.push_back(mb);
      if (truth != 0.0) {
        err_after += std::abs(metrics::relative_error(stats.mean, truth));
        err_before += std::abs(metrics::relative_error(mb, truth));
        ++n_err;
      }
    }
    rep.rows.push_back(std::move(row));
  }
  rep.calibrated_error = n_err ? err_after / static_cast<double>(n_err) : std::nan("");
  rep.uncalibrated_error = n_err ? err_before / static_cast<double>(n_err) : std::nan("");
  return rep;
}

// ---- persistence -------------------------------------------------------------

void save_ensemble(const CalibratedEnsemble& ensemble, const std::filesystem::path& dir) {
  ensemble.validate();
  std::filesystem::create_directories(dir);
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "format" << YAML::Value << "mfcal-ensemble/1";
  out << YAML::Key << "lineage" << YAML::Value << YAML::Flow << ensemble.lineage;
  out << YAML::Key << "members" << YAML::Value << YAML::BeginSeq;
  for (std::size_t k = 0; k < ensemble.size(); ++k) {
    const std::string file = "member_" + std::to_string(k) + ".yaml";
    save_checkpoint(dir / file, ensemble.members[k], &ensemble.scaling);
    out << YAML::BeginMap << YAML::Key << "checkpoint" << YAML::Value << file << YAML::Key << "split_seeds"
        << YAML::Value << YAML::Flow << ensemble.split_seeds[k] << YAML::EndMap;
  }
  out << YAML::EndSeq << YAML::EndMap;
  write_text_file(dir / "ensemble.yaml", std::string(out.c_str()) + "\n");
}

CalibratedEnsemble load_ensemble(const std::filesystem::path& dir) {
  CalibratedEnsemble ens;
  try {
    const YAML::Node root = YAML::Load(read_text_file(dir / "ensemble.yaml"));
    if (!root["format"] || root["format"].as<std::string>() != "mfcal-ensemble/1")
      throw ParseError(0, (dir / "ensemble.yaml").string() + ": not an ensemble manifest");
    ens.lineage = root["lineage"].as<std::vector<std::string>>();
    bool have_scaling = false;
    for (const auto& m : root["members"]) {
      auto cp = load_checkpoint(dir / m["checkpoint"].as<std::string>());
      if (!cp.scaling) throw ParseError(0, "ensemble member checkpoint lacks scaling ranges");
      if (!have_scaling) {
        ens.scaling = *cp.scaling;
        have_scaling = true;
      }
      ens.members.push_back(std::move(cp.network));
      ens.split_seeds.push_back(m["split_seeds"].as<std::vector<std::uint64_t>>());
    }
  } catch (const YAML::Exception& e) {
    throw ParseError(static_cast<std::size_t>(e.mark.line + 1), (dir / "ensemble.yaml").string() + ": " + e.msg);
  }
  ens.validate();
  return ens;
}

}  // namespace mfcal::transfer
