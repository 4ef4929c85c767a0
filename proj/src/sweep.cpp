#include "mfcal/sweep.hpp"

#include <cmath>

#include "mfcal/errors.hpp"
#include "mfcal/parallel.hpp"
#include "mfcal/rng.hpp"

namespace mfcal::metrics {

void SweepResult::validate() const {
  for (std::size_t i = 1; i < points.size(); ++i)
    if (points[i].size <= points[i - 1].size) throw ArgumentError("sweep sizes must be strictly increasing");
}

SweepResult sweep_stage_size(const transfer::CascadePlan& plan, std::size_t varied_stage,
                             const std::vector<std::size_t>& sizes, std::size_t replicates,
                             const SweepOptions& options) {
  if (varied_stage > plan.calibration_stages.size())
    throw ArgumentError("sweep: varied stage " + std::to_string(varied_stage) + " does not exist");
  if (sizes.empty()) throw ArgumentError("sweep: no sizes given");
  if (replicates < 1) throw ArgumentError("sweep: replicates must be at least 1");
  const auto& stage = varied_stage == 0 ? plan.base_stage : plan.calibration_stages[varied_stage - 1];
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (i > 0 && sizes[i] <= sizes[i - 1]) throw ArgumentError("sweep: sizes must be strictly increasing");
    if (sizes[i] < 1 || sizes[i] > stage.dataset.rows())
      throw ArgumentError("sweep: size " + std::to_string(sizes[i]) + " exceeds the " +
                          std::to_string(stage.dataset.rows()) + " rows of stage '" + stage.name + "'");
  }
  plan.validate();

  const std::uint64_t sample_seed = derive_seed(options.seed, {stream::sample, varied_stage});
  SweepResult result;
  result.varied_stage = varied_stage;
  result.points.resize(sizes.size());
  parallel_for(sizes.size(), options.threads, [&](std::size_t i) {
    transfer::CascadePlan cell = plan;
    auto& target = varied_stage == 0 ? cell.base_stage : cell.calibration_stages[varied_stage - 1];
    target.dataset = data::subsample(stage.dataset, sizes[i], sample_seed);
    const auto run = transfer::run_cascade(cell, replicates, {options.seed, 1});
    SweepPoint& p = result.points[i];
    p.size = sizes[i];
    p.final_stage = run.stages.back();
    p.replicate_ev = p.final_stage.test.member_mean_ev();
    double s = 0.0;
    for (const double v : p.replicate_ev) s += v;
    p.mean_ev = s / static_cast<double>(p.replicate_ev.size());
    if (p.replicate_ev.size() >= 2) p.sd_ev = ensemble_stats(p.replicate_ev).sd;
  });
  return result;
}

std::vector<std::string> sweep_header() {
  auto h = report_header();
  h.push_back("size");
  h.push_back("replicate");
  return h;
}

void append_sweep(CsvTable& table, const SweepResult& result) {
  for (const auto& p : result.points) {
    for (const auto* rep : {&p.final_stage.train, &p.final_stage.test}) {
      CsvTable part(report_header());
      append_report(part, *rep);
      for (std::size_t r = 0; r < part.rows().size(); ++r) {
        auto row = part.rows()[r];
        const std::string member = row[1];
        row.push_back(std::to_string(p.size));
        row.push_back(member);
        table.add_row(std::move(row));
      }
    }
  }
}

CsvTable sweep_summary(const SweepResult& result) {
  CsvTable t({"size", "replicates", "mean_explained_variance", "sd_explained_variance"});
  for (const auto& p : result.points)
    t.add_row({std::to_string(p.size), std::to_string(p.replicate_ev.size()), format_double(p.mean_ev),
               p.sd_ev ? format_double(*p.sd_ev) : "NA"});
  return t;
}

}  // namespace mfcal::metrics
