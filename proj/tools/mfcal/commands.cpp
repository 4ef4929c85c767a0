#include "commands.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include "mfcal/checkpoint.hpp"
#include "mfcal/errors.hpp"
#include "mfcal/metrics.hpp"
#include "mfcal/optimize.hpp"
#include "mfcal/problems.hpp"
#include "mfcal/sweep.hpp"
#include "mfcal/tables.hpp"
#include "mfcal/transfer.hpp"

namespace mfcal::cli {

namespace {

namespace fs = std::filesystem;

std::vector<std::string> g_positional;

constexpr const char* kNa = "NA";

std::string fmt_opt(const std::optional<double>& v) { return v ? format_double(*v) : kNa; }

// ---- shared writers ---------------------------------------------------------

void append_stage(CsvTable& t, const transfer::StageResult& st) {
  metrics::append_report(t, st.train);
  metrics::append_report(t, st.test);
  if (st.test_uncalibrated) metrics::append_report(t, *st.test_uncalibrated);
}

void append_summary(CsvTable& t, const metrics::EvalReport& r) {
  const auto ev = r.member_mean_ev();
  std::optional<double> sd;
  if (ev.size() >= 2) sd = metrics::ensemble_stats(ev).sd;
  double err = 0.0;
  for (const auto& m : r.members) err += m.mean_abs_rel_error();
  t.add_row({r.stage, r.split, std::to_string(r.members.size()), format_double(r.mean_ev()), fmt_opt(sd),
             format_double(err / static_cast<double>(r.members.size()))});
}

CsvTable summary_table() {
  return CsvTable({"stage", "split", "members", "mean_explained_variance", "sd_explained_variance",
                   "mean_abs_rel_error"});
}

void append_stage_summary(CsvTable& t, const transfer::StageResult& st) {
  append_summary(t, st.train);
  append_summary(t, st.test);
  if (st.test_uncalibrated) append_summary(t, *st.test_uncalibrated);
}

void write_cascade(const RunContext& ctx, const transfer::CascadePlan& plan, const transfer::CascadeResult& r) {
  // The rows each stage actually used, so later commands can refer to them.
  data::save_dataset(plan.base_stage.dataset, ctx.out_dir / "data" / (plan.base_stage.name + ".csv"));
  for (const auto& s : plan.calibration_stages) data::save_dataset(s.dataset, ctx.out_dir / "data" / (s.name + ".csv"));

  CsvTable report(metrics::report_header());
  CsvTable summary = summary_table();
  for (const auto& st : r.stages) {
    append_stage(report, st);
    append_stage_summary(summary, st);
  }
  report.write(ctx.out_dir / "report.csv");
  summary.write(ctx.out_dir / "summary.csv");

  CsvTable loss({"stage", "member", "epoch", "loss"});
  for (std::size_t k = 0; k < r.traces.size(); ++k)
    for (std::size_t s = 0; s < r.stages.size(); ++s) {
      const auto& h = r.traces[k].loss_histories[s];
      for (std::size_t e = 0; e < h.size(); ++e)
        loss.add_row({r.stages[s].name, std::to_string(k), std::to_string(e + 1), format_double(h[e])});
    }
  loss.write(ctx.out_dir / "loss_history.csv");

  transfer::save_ensemble(r.ensemble, ctx.out_dir / "ensemble");
  for (std::size_t s = 0; s < r.stages.size(); ++s) {
    transfer::CalibratedEnsemble e;
    e.scaling = r.ensemble.scaling;
    e.lineage.assign(r.ensemble.lineage.begin(), r.ensemble.lineage.begin() + static_cast<std::ptrdiff_t>(s + 1));
    for (std::size_t k = 0; k < r.traces.size(); ++k) {
      e.members.push_back(r.traces[k].stage_networks[s]);
      const auto& seeds = r.ensemble.split_seeds[k];
      e.split_seeds.emplace_back(seeds.begin(), seeds.begin() + static_cast<std::ptrdiff_t>(s + 1));
    }
    transfer::save_ensemble(e, ctx.out_dir / "ensembles" / r.stages[s].name);
  }
}

// ---- plans ------------------------------------------------------------------

struct PlanRun {
  transfer::CascadePlan plan;
  std::size_t ensemble_size = 5;
};

void validate_plan(const transfer::CascadePlan& plan) {
  try {
    plan.validate();
  } catch (const ArgumentError& e) {
    throw ConfigError(e.what());
  }
  std::vector<std::string> names{plan.base_stage.name};
  for (const auto& s : plan.calibration_stages) {
    if (std::find(names.begin(), names.end(), s.name) != names.end())
      throw ConfigError("stage name '" + s.name + "' is used twice");
    names.push_back(s.name);
  }
}

std::size_t read_ensemble_size(YAML::Node root) {
  const auto n = opt<std::size_t>(root, "ensemble_size", 5);
  if (n < 1) throw ConfigError("ensemble_size must be at least 1");
  return n;
}

PlanRun read_cascade(RunContext& ctx) {
  auto root = ctx.root;
  PlanRun pr;
  pr.ensemble_size = read_ensemble_size(root);
  pr.plan.base_stage = read_stage(child(root, "base"), ctx, "base", net::TrainConfig{});
  if (root["stages"]) {
    if (!root["stages"].IsSequence()) throw ConfigError("'stages' must be a list");
    for (std::size_t i = 0; i < root["stages"].size(); ++i)
      pr.plan.calibration_stages.push_back(
          read_stage(root["stages"][i], ctx, "stages[" + std::to_string(i) + "]", net::TrainConfig{}));
  } else {
    root["stages"] = YAML::Node(YAML::NodeType::Sequence);
  }
  pr.plan.architecture = read_architecture(child(root, "architecture"), pr.plan.base_stage.dataset);
  validate_plan(pr.plan);
  return pr;
}

// ---- commands ---------------------------------------------------------------

Job prepare_gen_data(RunContext& ctx) {
  auto root = ctx.root;
  const auto problem = opt<std::string>(root, "problem", "taylor");
  auto sizes = child(root, "sizes");
  const auto nl = opt<std::size_t>(sizes, "low", 100);
  const auto nh = opt<std::size_t>(sizes, "high", 50);
  const auto ne = opt<std::size_t>(sizes, "experiment", 25);
  if (nl < 1 || nh < 1 || ne < 1) throw ConfigError("dataset sizes must be at least 1");
  if (problem == "taylor") {
    return [&ctx, nl, nh, ne] {
      const auto l = problems::generate_taylor_datasets(nl, nh, ne, ctx.seed);
      data::save_dataset(l.low, ctx.out_dir / "low.csv");
      data::save_dataset(l.high, ctx.out_dir / "high.csv");
      data::save_dataset(l.experiment, ctx.out_dir / "experiment.csv");
    };
  }
  if (problem != "campaign") throw ConfigError("problem must be 'taylor' or 'campaign', not '" + problem + "'");
  auto c = child(root, "campaign");
  problems::SyntheticCampaignSpec spec;
  spec.seed = ctx.seed;
  spec.fidelity_gap = opt(c, "fidelity_gap", spec.fidelity_gap);
  spec.experiment_distortion = opt(c, "experiment_distortion", spec.experiment_distortion);
  spec.noise_sd = opt(c, "noise_sd", spec.noise_sd);
  spec.experiment_margin = opt(c, "experiment_margin", spec.experiment_margin);
  spec.validate();
  return [&ctx, spec, nl, nh, ne] {
    const auto l = problems::generate_campaign(spec, nl, nh, ne);
    data::save_dataset(l.low, ctx.out_dir / "low.csv");
    data::save_dataset(l.high, ctx.out_dir / "high.csv");
    data::save_dataset(l.experiment, ctx.out_dir / "experiment.csv");
  };
}

Job prepare_train(RunContext& ctx) {
  auto root = ctx.root;
  PlanRun pr;
  pr.ensemble_size = read_ensemble_size(root);
  pr.plan.base_stage = read_stage(root, ctx, "train", net::TrainConfig{});
  pr.plan.architecture = read_architecture(child(root, "architecture"), pr.plan.base_stage.dataset);
  validate_plan(pr.plan);
  return [&ctx, pr] { write_cascade(ctx, pr.plan, transfer::run_cascade(pr.plan, pr.ensemble_size, {ctx.seed, ctx.threads})); };
}

Job prepare_cascade(RunContext& ctx) {
  const auto pr = read_cascade(ctx);
  return [&ctx, pr] { write_cascade(ctx, pr.plan, transfer::run_cascade(pr.plan, pr.ensemble_size, {ctx.seed, ctx.threads})); };
}

Job prepare_transfer(RunContext& ctx) {
  auto root = ctx.root;
  const auto ens = transfer::load_ensemble(ctx.resolve(req<std::string>(root, "ensemble", "transfer")));
  const auto stage = read_stage(child(root, "stage"), ctx, "stage", net::TrainConfig{});
  std::optional<std::size_t> stage_index;
  if (root["stage_index"]) stage_index = req<std::size_t>(root, "stage_index", "transfer");
  std::optional<std::size_t> holdout;
  if (root["recency_holdout"]) holdout = req<std::size_t>(root, "recency_holdout", "transfer");
  if (stage.dataset.input_names != ens.scaling.input_names || stage.dataset.output_names != ens.scaling.output_names)
    throw ConfigError("stage dataset columns differ from the ensemble's scaling ranges");
  // Dimension and layer checks up front so a bad stage exits with code 2.
  {
    auto incoming = stage;
    incoming.name = ens.lineage.empty() ? std::string("incoming") : ens.lineage.back();
    if (incoming.name == stage.name) incoming.name += "@incoming";
    validate_plan(transfer::CascadePlan{ens.members.front().specs(), incoming, {stage}});
  }
  if (holdout && (!stage.dataset.recency || *holdout < 1 || *holdout >= stage.dataset.rows()))
    throw ConfigError("recency_holdout needs a recency column and 1 <= count < rows");
  return [&ctx, ens, stage, stage_index, holdout] {
    const transfer::RunOptions o{ctx.seed, ctx.threads};
    CsvTable report(metrics::report_header());
    CsvTable summary = summary_table();
    if (holdout) {
      const auto rep = transfer::recency_holdout(ens, stage, *holdout, o);
      metrics::append_report(report, rep.calibrated);
      metrics::append_report(report, rep.uncalibrated);
      append_summary(summary, rep.calibrated);
      append_summary(summary, rep.uncalibrated);
      CsvTable rows({"recency", "output_name", "truth", "mean", "sd", "uncalibrated"});
      for (const auto& r : rep.rows)
        for (std::size_t j = 0; j < rep.outputs.size(); ++j)
          rows.add_row({std::to_string(r.recency), rep.outputs[j], format_double(r.truth[j]), format_double(r.mean[j]),
                        format_double(r.sd[j]), format_double(r.uncalibrated[j])});
      rows.write(ctx.out_dir / "recency.csv");
      CsvTable err({"calibrated_mean_abs_rel_error", "uncalibrated_mean_abs_rel_error"});
      err.add_row({format_double(rep.calibrated_error), format_double(rep.uncalibrated_error)});
      err.write(ctx.out_dir / "recency_summary.csv");
      transfer::save_ensemble(rep.calibrated_ensemble, ctx.out_dir / "ensemble");
    } else {
      const auto out = transfer::calibrate_ensemble(ens, stage, o, stage_index);
      append_stage(report, out.result);
      append_stage_summary(summary, out.result);
      transfer::save_ensemble(out.ensemble, ctx.out_dir / "ensemble");
    }
    report.write(ctx.out_dir / "report.csv");
    summary.write(ctx.out_dir / "summary.csv");
  };
}

Job prepare_sweep(RunContext& ctx) {
  const auto pr = read_cascade(ctx);
  auto sw = child(ctx.root, "sweep");
  std::size_t stage = 0;
  const auto& st = sw["stage"];
  if (!st) throw ConfigError("sweep: missing key 'stage'");
  try {
    stage = st.as<std::size_t>();
  } catch (const YAML::Exception&) {
    const auto name = st.as<std::string>();
    bool found = pr.plan.base_stage.name == name;
    for (std::size_t i = 0; !found && i < pr.plan.calibration_stages.size(); ++i)
      if (pr.plan.calibration_stages[i].name == name) {
        stage = i + 1;
        found = true;
      }
    if (!found) throw ConfigError("sweep: unknown stage '" + name + "'");
  }
  const auto sizes = req<std::vector<std::size_t>>(sw, "sizes", "sweep");
  const auto replicates = opt<std::size_t>(sw, "replicates", pr.ensemble_size);
  if (stage > pr.plan.calibration_stages.size()) throw ConfigError("sweep: stage index out of range");
  const auto& ds = stage == 0 ? pr.plan.base_stage.dataset : pr.plan.calibration_stages[stage - 1].dataset;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (i > 0 && sizes[i] <= sizes[i - 1]) throw ConfigError("sweep: sizes must be strictly increasing");
    if (sizes[i] < 1 || sizes[i] > ds.rows())
      throw ConfigError("sweep: size " + std::to_string(sizes[i]) + " exceeds the stage's " +
                        std::to_string(ds.rows()) + " rows");
  }
  if (sizes.empty() || replicates < 1) throw ConfigError("sweep: needs sizes and at least one replicate");
  return [&ctx, pr, stage, sizes, replicates] {
    const auto r = metrics::sweep_stage_size(pr.plan, stage, sizes, replicates, {ctx.seed, ctx.threads});
    CsvTable cells(metrics::sweep_header());
    metrics::append_sweep(cells, r);
    cells.write(ctx.out_dir / "sweep.csv");
    metrics::sweep_summary(r).write(ctx.out_dir / "sweep_summary.csv");
  };
}

struct EnsembleInput {
  std::string name;
  transfer::CalibratedEnsemble ensemble;
  std::optional<data::Dataset> data;
};

optimize::Objective read_objective(YAML::Node node) {
  const auto type = opt<std::string>(node, "type", "itfx");
  if (type == "itfx")
    return optimize::Objective::itfx(opt<std::string>(node, "yield", "Yield"), opt<std::string>(node, "rhor", "RhoR"));
  if (type == "output") return optimize::Objective::single(req<std::string>(node, "output", "objective"));
  throw ConfigError("objective type must be 'itfx' or 'output'");
}

Job prepare_optimize(RunContext& ctx) {
  auto root = ctx.root;
  const auto objective = read_objective(child(root, "objective"));
  const auto budget = opt<std::size_t>(root, "budget", 400);
  if (!root["ensembles"] || !root["ensembles"].IsSequence() || root["ensembles"].size() == 0)
    throw ConfigError("optimize: 'ensembles' must list at least one ensemble");
  std::vector<EnsembleInput> inputs;
  for (std::size_t i = 0; i < root["ensembles"].size(); ++i) {
    auto e = root["ensembles"][i];
    const std::string where = "ensembles[" + std::to_string(i) + "]";
    const auto path = req<std::string>(e, "path", where);
    EnsembleInput in{opt<std::string>(e, "name", path), transfer::load_ensemble(ctx.resolve(path)), std::nullopt};
    if (e["data"]) in.data = data::load_dataset(ctx.resolve(req<std::string>(e, "data", where)));
    try {
      objective.resolve(in.ensemble.scaling.output_names);
    } catch (const ArgumentError& err) {
      throw ConfigError(where + ": " + err.what());
    }
    const auto d = static_cast<std::size_t>(in.ensemble.members.front().input_width());
    if (budget < 10 * d)
      throw ConfigError("optimize: budget " + std::to_string(budget) + " is below 10*d = " + std::to_string(10 * d));
    inputs.push_back(std::move(in));
  }
  return [&ctx, objective, budget, inputs] {
    optimize::SearchOptions so;
    so.threads = ctx.threads;
    std::vector<optimize::DesignResult> designs;
    std::ostringstream txt;
    const auto& in_names = inputs.front().ensemble.scaling.input_names;
    std::vector<std::string> header{"ensemble", "objective", "value", "evaluations", "nearest_data_distance"};
    for (const auto& n : in_names) header.push_back(n);
    for (const auto& n : in_names) header.push_back("scaled:" + n);
    CsvTable table(header);
    for (const auto& in : inputs) {
      auto r = optimize::maximize(in.ensemble, objective, budget, ctx.seed, so);
      std::optional<double> dist;
      if (in.data) dist = optimize::nearest_distance(r.scaled, data::scale_inputs(in.data->inputs, in.ensemble.scaling));
      std::vector<std::string> row{in.name, r.objective, format_double(r.value), std::to_string(r.evaluations),
                                   fmt_opt(dist)};
      for (Eigen::Index i = 0; i < r.physical.size(); ++i) row.push_back(format_double(r.physical(i)));
      for (Eigen::Index i = 0; i < r.scaled.size(); ++i) row.push_back(format_double(r.scaled(i)));
      table.add_row(row);

      txt << "[design " << in.name << "]\n";
      txt << "objective = " << r.objective << "\n";
      txt << "value = " << format_double(r.value) << "\n";
      txt << "evaluations = " << r.evaluations << " of " << r.budget << "\n";
      txt << "nearest_data_distance = " << fmt_opt(dist) << "\n";
      txt << "inputs:\n";
      for (Eigen::Index i = 0; i < r.physical.size(); ++i)
        txt << "  " << in.ensemble.scaling.input_names[static_cast<std::size_t>(i)] << " = "
            << format_double(r.physical(i)) << "  (scaled " << format_double(r.scaled(i)) << ")\n";
      txt << "outputs (mean +- sd):\n";
      for (const auto& o : r.outputs)
        txt << "  " << o.name << " = " << format_double(o.mean) << " +- " << fmt_opt(o.sd) << "\n";
      txt << "\n";
      designs.push_back(std::move(r));
    }
    if (designs.size() > 1) {
      txt << "[pairwise scaled distance between designs]\n";
      for (std::size_t a = 0; a < designs.size(); ++a)
        for (std::size_t b = a + 1; b < designs.size(); ++b)
          txt << "  " << inputs[a].name << " - " << inputs[b].name << " = "
              << format_double((designs[a].scaled - designs[b].scaled).norm()) << "\n";
    }
    table.write(ctx.out_dir / "designs.csv");
    write_text_file(ctx.out_dir / "designs.txt", txt.str());
  };
}

struct RunScores {
  std::string name;
  std::string stage;
  std::vector<double> member_ev;
};

RunScores read_run(const std::string& name, const fs::path& path, const std::optional<std::string>& stage) {
  const fs::path file = fs::is_directory(path) ? path / "report.csv" : path;
  const auto t = read_csv(file);
  const auto& h = t.header();
  if (h != metrics::report_header()) throw ParseError(1, file.string() + ": not a report table");
  RunScores rs{name, stage.value_or(""), {}};
  if (!stage)
    for (const auto& r : t.rows())
      if (r[3] == "test") rs.stage = r[0];
  std::vector<std::pair<std::size_t, std::vector<double>>> members;
  for (const auto& r : t.rows()) {
    if (r[0] != rs.stage || r[3] != "test") continue;
    const auto m = static_cast<std::size_t>(std::stoul(r[1]));
    double ev = 0.0;
    if (r[4] == kNa || !parse_double(r[4], ev)) continue;
    auto it = std::find_if(members.begin(), members.end(), [&](const auto& p) { return p.first == m; });
    if (it == members.end()) {
      members.push_back({m, {}});
      it = members.end() - 1;
    }
    it->second.push_back(ev);
  }
  if (members.empty()) throw ParseError(0, file.string() + ": no test rows for stage '" + rs.stage + "'");
  for (const auto& [m, evs] : members) {
    double s = 0.0;
    for (const double v : evs) s += v;
    rs.member_ev.push_back(s / static_cast<double>(evs.size()));
  }
  return rs;
}

Job prepare_report(RunContext& ctx) {
  auto root = ctx.root;
  std::vector<std::pair<std::string, fs::path>> runs;
  if (root["runs"]) {
    for (std::size_t i = 0; i < root["runs"].size(); ++i) {
      auto r = root["runs"][i];
      const auto path = req<std::string>(r, "path", "runs[" + std::to_string(i) + "]");
      runs.emplace_back(opt<std::string>(r, "name", path), ctx.resolve(path));
    }
  }
  for (const auto& p : g_positional) runs.emplace_back(fs::path(p).filename().string(), fs::path(p));
  if (runs.empty()) throw ConfigError("report: no runs given (config 'runs' or positional paths)");
  const auto baseline = opt<std::string>(root, "baseline", runs.front().first);
  std::optional<std::string> stage;
  if (root["stage"]) stage = req<std::string>(root, "stage", "report");
  if (std::none_of(runs.begin(), runs.end(), [&](const auto& r) { return r.first == baseline; }))
    throw ConfigError("report: baseline '" + baseline + "' is not among the runs");
  return [&ctx, runs, baseline, stage] {
    std::vector<RunScores> scores;
    for (const auto& [name, path] : runs) scores.push_back(read_run(name, path, stage));
    const auto& base = *std::find_if(scores.begin(), scores.end(), [&](const auto& s) { return s.name == baseline; });
    // t, df, p of a against b; NA when undefined.
    auto welch_cells = [](const RunScores& a, const RunScores& b) -> std::array<std::string, 3> {
      if (a.member_ev.size() < 2 || b.member_ev.size() < 2) return {kNa, kNa, kNa};
      try {
        const auto w = metrics::welch_test(a.member_ev, b.member_ev);
        return {format_double(w.t), format_double(w.df), format_double(w.p)};
      } catch (const DegenerateError&) {
        return {kNa, kNa, kNa};
      }
    };
    CsvTable pairs({"run_a", "run_b", "t", "df", "p_value"});
    for (std::size_t i = 0; i < scores.size(); ++i)
      for (std::size_t j = i + 1; j < scores.size(); ++j) {
        const auto w = welch_cells(scores[i], scores[j]);
        pairs.add_row({scores[i].name, scores[j].name, w[0], w[1], w[2]});
      }
    pairs.write(ctx.out_dir / "pairwise.csv");
    CsvTable t({"run", "stage", "members", "mean_explained_variance", "sd_explained_variance", "t", "df",
                "p_value_vs_baseline"});
    for (const auto& s : scores) {
      double mean = 0.0;
      for (const double v : s.member_ev) mean += v;
      mean /= static_cast<double>(s.member_ev.size());
      std::optional<double> sd;
      if (s.member_ev.size() >= 2) sd = metrics::ensemble_stats(s.member_ev).sd;
      const auto w = s.name == baseline ? std::array<std::string, 3>{kNa, kNa, kNa} : welch_cells(s, base);
      t.add_row({s.name, s.stage, std::to_string(s.member_ev.size()), format_double(mean), fmt_opt(sd), w[0], w[1], w[2]});
    }
    t.write(ctx.out_dir / "comparison.csv");
  };
}

}  // namespace

void set_positional(std::vector<std::string> args) { g_positional = std::move(args); }

const std::vector<std::pair<std::string, Prepare>>& commands() {
  static const std::vector<std::pair<std::string, Prepare>> table{
      {"gen-data", prepare_gen_data}, {"train", prepare_train},       {"transfer", prepare_transfer},
      {"cascade", prepare_cascade},   {"sweep", prepare_sweep},       {"optimize", prepare_optimize},
      {"report", prepare_report},
  };
  return table;
}

}  // namespace mfcal::cli
