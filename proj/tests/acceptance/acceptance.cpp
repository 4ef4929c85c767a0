// Acceptance suite: one PASS/FAIL line per criterion, then a summary line.
// Exits 1 when any criterion fails.

#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "mfcal/data.hpp"
#include "mfcal/metrics.hpp"
#include "mfcal/netcore.hpp"
#include "mfcal/optimize.hpp"
#include "mfcal/presets.hpp"
#include "mfcal/problems.hpp"
#include "mfcal/rng.hpp"
#include "mfcal/sweep.hpp"
#include "mfcal/tables.hpp"
#include "mfcal/transfer.hpp"

namespace fs = std::filesystem;
using namespace mfcal;
using net::Matrix;
using net::Vector;

namespace {

int g_failed = 0, g_total = 0;

void report(const std::string& id, bool ok, const std::string& detail) {
  ++g_total;
  if (!ok) ++g_failed;
  std::printf("%s %s: %s\n", ok ? "PASS" : "FAIL", id.c_str(), detail.c_str());
  std::fflush(stdout);
}

std::string num(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

constexpr std::size_t kMembers = 5;

// ---- Taylor ladder ---------------------------------------------------------

struct TaylorRuns {
  double baseline = 0, high_exp = 0, low_exp = 0, hier = 0;
};

// Same datasets and subsamples as the cascade presets run on `gen-data --preset taylor-full`.
problems::Ladder taylor_data(std::uint64_t seed) { return problems::generate_taylor_datasets(100, 100, 100, seed); }

double final_test_ev(const transfer::CascadePlan& plan, std::uint64_t seed) {
  return transfer::run_cascade(plan, kMembers, {seed, 1}).stages.back().test.mean_ev();
}

void criterion_1() {
  const std::uint64_t seed = 1;
  const auto l = taylor_data(seed);
  const auto exp25 = data::subsample(l.experiment, 25, seed);
  const auto high50 = data::subsample(l.high, 50, seed);
  TaylorRuns r;
  r.baseline = final_test_ev(presets::taylor_plan(l.experiment, {}), seed);
  r.high_exp = final_test_ev(presets::taylor_plan(l.high, {exp25}), seed);
  r.low_exp = final_test_ev(presets::taylor_plan(l.low, {exp25}), seed);
  r.hier = final_test_ev(presets::taylor_plan(l.low, {high50, exp25}), seed);
  report("1a", r.baseline >= 0.98, "train with 100 exp, mean test EV " + num(r.baseline) + " (need >= 0.98)");
  report("1b", r.high_exp >= 0.97, "100 high + TL 25 exp, mean test EV " + num(r.high_exp) + " (need >= 0.97)");
  report("1c", r.low_exp >= 0.90 && r.low_exp <= 0.99,
         "100 low + TL 25 exp, mean test EV " + num(r.low_exp) + " (need in [0.90, 0.99])");
  std::printf("     info: 100 low + 50 high + TL 25 exp (independent exp split), mean test EV %s\n",
              num(r.hier).c_str());

  // Paired over global seeds: the experiment stage keeps the same split and
  // seeds on both routes, so only the incoming model differs.
  int wins = 0;
  std::string detail;
  for (std::uint64_t s = 1; s <= 5; ++s) {
    const auto ls = taylor_data(s);
    const auto e25 = data::subsample(ls.experiment, 25, s);
    const auto h50 = data::subsample(ls.high, 50, s);
    const auto direct_plan = presets::taylor_plan(ls.low, {e25});
    const double direct = transfer::run_cascade(direct_plan, kMembers, {s, 1}).stages.back().test.mean_ev();
    const auto via_high = transfer::run_cascade(presets::taylor_plan(ls.low, {h50}), kMembers, {s, 1});
    const double hier =
        transfer::calibrate_ensemble(via_high.ensemble, direct_plan.calibration_stages[0], {s, 1}, 1).result.test.mean_ev();
    if (hier > direct) ++wins;
    detail += " seed" + std::to_string(s) + "=" + num(hier) + "/" + num(direct);
  }
  report("1d", wins >= 4, "hierarchical beats direct low->exp in " + std::to_string(wins) + "/5 seeds (need >= 4);" + detail);
}

void criterion_2() {
  const std::uint64_t seed = 1;
  const auto l = taylor_data(seed);
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<std::size_t> sizes{10, 20, 30, 40, 60, 80, 100};
  const auto sw = metrics::sweep_stage_size(presets::taylor_plan(l.low, {l.high}), 1, sizes, kMembers, {seed, 1});
  const double elapsed = seconds_since(t0);
  const double ref = final_test_ev(presets::taylor_plan(l.high, {}), seed);
  std::string curve;
  double ev30 = 0, ev40 = 0;
  for (const auto& p : sw.points) {
    curve += " " + std::to_string(p.size) + ":" + num(p.mean_ev);
    if (p.size == 30) ev30 = p.mean_ev;
    if (p.size == 40) ev40 = p.mean_ev;
  }
  const bool ok = std::abs(ev30 - ref) <= 0.02 && std::abs(ev40 - ref) <= 0.02;
  report("2", ok && elapsed < 600,
         "high-size sweep EV at 30/40 = " + num(ev30) + "/" + num(ev40) + " vs 100-high-only " + num(ref) +
             " (need |diff| <= 0.02), sweep " + num(elapsed, 1) + " s (need < 600);" + curve);
}

void criterion_3() {
  const std::uint64_t seed = 1;
  const auto l = taylor_data(seed);
  const auto high30 = data::subsample(l.high, 30, seed);
  const std::vector<std::size_t> sizes{10, 15, 20, 25, 40, 60, 80, 100};
  const auto sw =
      metrics::sweep_stage_size(presets::taylor_plan(l.low, {high30, l.experiment}), 2, sizes, kMembers, {seed, 1});
  double ev25 = 0, ev100 = 0;
  std::string curve;
  for (const auto& p : sw.points) {
    curve += " " + std::to_string(p.size) + ":" + num(p.mean_ev);
    if (p.size == 25) ev25 = p.mean_ev;
    if (p.size == 100) ev100 = p.mean_ev;
  }
  report("3", ev100 - ev25 < 0.02, "EV gain 25 -> 100 exp = " + num(ev100 - ev25) + " (need < 0.02);" + curve);
}

// ---- synthetic campaign ----------------------------------------------------

transfer::CalibratedEnsemble after_stage(const transfer::CascadeResult& r, std::size_t stage) {
  transfer::CalibratedEnsemble e;
  e.scaling = r.ensemble.scaling;
  e.lineage.assign(r.ensemble.lineage.begin(), r.ensemble.lineage.begin() + static_cast<long>(stage) + 1);
  for (std::size_t k = 0; k < r.traces.size(); ++k) {
    e.members.push_back(r.traces[k].stage_networks[stage]);
    const auto& s = r.ensemble.split_seeds[k];
    e.split_seeds.emplace_back(s.begin(), s.begin() + static_cast<long>(stage) + 1);
  }
  return e;
}

double loss_of(const net::Network& n, const Matrix& x, const Matrix& y, const net::OutputMask& m) {
  return net::masked_mse(net::predict_rows(n, x), y, m);
}

bool smooth_point(const net::Network& n, const Matrix& x, double margin) {
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    Vector a = x.row(r).transpose();
    for (std::size_t k = 0; k + 1 < n.layers.size(); ++k) {
      Vector z = n.layers[k].weights * a + n.layers[k].biases;
      if ((z.array().abs() < margin).any()) return false;
      a = z.cwiseMax(0.0);
    }
  }
  return true;
}

Matrix uniform_matrix(Rng& rng, Eigen::Index r, Eigen::Index c) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-1.0, 1.0);
  return m;
}

double worst_gradient_error(int nets) {
  Rng rng(2024);
  double worst = 0.0;
  const double h = 1e-5;
  auto rel = [](double a, double n) { return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-6}); };
  for (int done = 0; done < nets;) {
    std::vector<int> hidden(1 + rng.below(3));
    for (auto& w : hidden) w = 1 + static_cast<int>(rng.below(6));
    auto n = net::init_network(net::make_architecture(1 + static_cast<int>(rng.below(4)), hidden,
                                                      1 + static_cast<int>(rng.below(3))),
                               rng.next_u64());
    for (auto& l : n.layers)
      for (Eigen::Index i = 0; i < l.biases.size(); ++i) l.biases(i) = rng.uniform(-0.5, 0.5);
    const Matrix x = uniform_matrix(rng, 4, n.input_width());
    if (!smooth_point(n, x, 1e-3)) continue;
    const Matrix y = uniform_matrix(rng, 4, n.output_width());
    const auto mask = net::OutputMask::ones(static_cast<std::size_t>(n.output_width()));
    const auto g = net::gradients(n, x, y, mask, net::FreezePlan::all_trainable(n.layer_count()));
    auto probe = [&](double& p, double analytic) {
      const double v = p;
      p = v + h;
      const double up = loss_of(n, x, y, mask);
      p = v - h;
      const double dn = loss_of(n, x, y, mask);
      p = v;
      worst = std::max(worst, rel(analytic, (up - dn) / (2 * h)));
    };
    for (std::size_t k = 0; k < n.layer_count(); ++k) {
      auto& l = n.layers[k];
      for (Eigen::Index i = 0; i < l.weights.size(); ++i) probe(l.weights.data()[i], g.layers[k].weights.data()[i]);
      for (Eigen::Index i = 0; i < l.biases.size(); ++i) probe(l.biases(i), g.layers[k].biases(i));
    }
    ++done;
  }
  return worst;
}

void criterion_4() {
  const std::uint64_t seed = 1;
  problems::SyntheticCampaignSpec spec;
  spec.seed = seed;
  const auto l = problems::generate_campaign(spec, 2000, 200, 23);
  const auto plan = presets::campaign_plan(l.low, {l.high, l.experiment});
  const auto r = transfer::run_cascade(plan, kMembers, {seed, 1});

  // 4a: every member improves on the experiment test rows.
  const auto& exp = r.stages.back();
  std::size_t improved = 0;
  std::string detail;
  for (std::size_t k = 0; k < exp.test.members.size(); ++k) {
    const double after = exp.test.members[k].mean_abs_rel_error();
    const double before = exp.test_uncalibrated->members[k].mean_abs_rel_error();
    if (after < before) ++improved;
    detail += " m" + std::to_string(k) + "=" + num(after) + "/" + num(before);
  }
  report("4a", improved == exp.test.members.size(),
         "masked calibration lowers mean |rel error| for " + std::to_string(improved) + "/" +
             std::to_string(exp.test.members.size()) + " members (calibrated/uncalibrated);" + detail);

  // 4b: frozen layers of every stage equal the previous stage's bit for bit.
  std::size_t frozen_params = 0, unchanged = 0;
  for (const auto& t : r.traces)
    for (std::size_t s = 1; s < t.stage_networks.size(); ++s) {
      const auto& stage = plan.calibration_stages[s - 1];
      const std::size_t frozen = t.stage_networks[s].layer_count() - stage.retrained_layers;
      for (std::size_t k = 0; k < frozen; ++k) {
        const auto& a = t.stage_networks[s].layers[k];
        const auto& b = t.stage_networks[s - 1].layers[k];
        const auto count = static_cast<std::size_t>(a.weights.size() + a.biases.size());
        frozen_params += count;
        if (net::bitwise_equal(a, b)) unchanged += count;
      }
    }
  report("4b", frozen_params > 0 && unchanged == frozen_params,
         std::to_string(unchanged) + "/" + std::to_string(frozen_params) + " frozen parameters bitwise unchanged");

  // 4c: rerun with garbage in every unobserved experiment column.
  auto perturbed = plan;
  auto& ds = perturbed.calibration_stages.back().dataset;
  Rng rng(99);
  for (std::size_t j = 0; j < ds.observed.size(); ++j)
    if (!ds.observed[j])
      for (Eigen::Index i = 0; i < ds.outputs.rows(); ++i)
        ds.outputs(i, static_cast<Eigen::Index>(j)) = rng.uniform(-1e6, 1e6);
  const auto q = transfer::run_cascade(perturbed, kMembers, {seed, 1});
  std::size_t same = 0;
  for (std::size_t k = 0; k < kMembers; ++k) same += net::bitwise_equal(q.ensemble.members[k], r.ensemble.members[k]);
  report("4c", same == kMembers,
         "perturbed unobserved targets: " + std::to_string(same) + "/" + std::to_string(kMembers) +
             " members bitwise identical");

  const double worst = worst_gradient_error(100);
  report("4d", worst < 1e-4, "max relative gradient error vs central differences over 100 nets " +
                                 sci(worst) + " (need < 1e-4)");

  const auto rec = transfer::recency_holdout(after_stage(r, 1), plan.calibration_stages.back(), 4, {seed, 1});
  report("4e", rec.calibrated_error < rec.uncalibrated_error,
         "recency holdout (train " + std::to_string(l.experiment.rows() - 4) + " / test 4): calibrated " +
             num(rec.calibrated_error) + " vs uncalibrated " + num(rec.uncalibrated_error));
}

// ---- metrics, optimizer ----------------------------------------------------

double t_density(double t, double df) {
  const double c = std::exp(std::lgamma((df + 1) / 2) - std::lgamma(df / 2)) / std::sqrt(df * std::numbers::pi);
  return c * std::pow(1.0 + t * t / df, -(df + 1) / 2);
}

// Two-sided p from Simpson quadrature of the t density.
double two_sided_p(double t, double df) {
  const int n = 20000;
  const double a = std::abs(t), h = a / n;
  double s = t_density(0, df) + t_density(a, df);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * t_density(i * h, df);
  return 1.0 - 2.0 * s * h / 3.0;
}

void criterion_5() {
  using V = std::vector<double>;
  const V y{1, 2, 3};
  const std::array<std::pair<V, double>, 4> cases{
      {{V{1, 2, 3}, 1.0}, {V{2, 2, 2}, 0.0}, {V{4, 5, 6}, 1.0}, {V{0.5, 2.5, 3}, 0.75}}};
  double worst = 0.0;
  for (const auto& [pred, want] : cases) worst = std::max(worst, std::abs(metrics::explained_variance(y, pred) - want));
  report("5a", worst <= 1e-12, "explained_variance hand cases, max error " + sci(worst) + " (need <= 1e-12)");

  const auto w = metrics::welch_test(V{1, 2, 3, 4, 5}, V{2, 3, 4, 5, 6});
  const double oracle = two_sided_p(-1.0, 8.0);
  report("5b", std::abs(w.t + 1.0) < 1e-12 && std::abs(w.df - 8.0) < 1e-9 && std::abs(w.p - 0.3466) <= 5e-4 &&
                   std::abs(w.p - oracle) <= 5e-4,
         "Welch t=" + num(w.t) + " df=" + num(w.df) + " p=" + num(w.p, 6) + " (t-table 0.3466, quadrature " +
             num(oracle, 6) + ", need +-5e-4)");

  net::Network n;
  n.layers.push_back({{1, 1, net::Activation::identity}, Matrix::Zero(1, 1), Vector::Zero(1)});
  net::Gradients g;
  g.layers.push_back({Matrix::Constant(1, 1, 1.0), Vector::Zero(1)});
  net::TrainConfig c;
  c.learning_rate = 0.1;
  auto state = net::AdamState::zeros_like(n);
  net::adam_step(n, g, c, state, 1, net::FreezePlan::all_trainable(1));
  const double step_err = std::abs(n.layers[0].weights(0, 0) + 0.1);
  report("5c", step_err < 1e-7, "Adam first step with g=1, lr=0.1 moves w to " + num(n.layers[0].weights(0, 0), 9) +
                                    " (need -0.1 within 1e-7)");
}

void criterion_6() {
  data::Dataset d;
  d.inputs = data::latin_hypercube(200, 1, 5);
  d.outputs = -(d.inputs.array() - 0.3).square().matrix();
  d.input_names = {"x0"};
  d.output_names = {"f"};
  d.observed = {true};
  d.fidelity_tag = "low";
  transfer::CascadePlan plan;
  const std::array<int, 2> hidden{16, 16};
  plan.architecture = net::make_architecture(1, hidden, 1);
  plan.base_stage.name = "low";
  plan.base_stage.dataset = d;
  plan.base_stage.config.learning_rate = 0.004;
  plan.base_stage.config.batch_size = 10;
  plan.base_stage.config.epochs = 1000;
  const auto ens = transfer::run_cascade(plan, 3, {1, 1}).ensemble;
  const auto best = optimize::maximize(ens, optimize::Objective::single("f"), 40, 7);
  report("6a", std::abs(best.physical(0) - 0.3) <= 0.05,
         "surrogate of -(x-0.3)^2 maximised at x=" + num(best.physical(0)) + " (need 0.3 +- 0.05)");

  Rng meta(17);
  int monotone_runs = 0, feasible_runs = 0;
  for (std::uint64_t run = 0; run < 1000; ++run) {
    const std::size_t dim = 1 + meta.below(4);
    const std::size_t budget = 10 * dim + meta.below(40);
    Eigen::VectorXd centre(dim);
    for (Eigen::Index i = 0; i < centre.size(); ++i) centre(i) = meta.uniform(-0.3, 1.3);
    const double freq = meta.uniform(1, 12);
    auto f = [&](const Eigen::VectorXd& x) { return -(x - centre).squaredNorm() + 0.05 * std::sin(freq * x.sum()); };
    optimize::SearchOptions o;
    o.record_points = true;
    const auto r = optimize::maximize_box(f, dim, budget, run, o);
    bool inside = r.evaluations <= budget, mono = r.value == r.trace.incumbent.back();
    for (const auto& p : r.trace.points) inside = inside && (p.array() >= 0.0).all() && (p.array() <= 1.0).all();
    for (std::size_t i = 1; i < r.trace.incumbent.size(); ++i) mono = mono && r.trace.incumbent[i] >= r.trace.incumbent[i - 1];
    feasible_runs += inside;
    monotone_runs += mono;
  }
  report("6b", monotone_runs == 1000 && feasible_runs == 1000,
         "1000 seeded searches: " + std::to_string(monotone_runs) + " monotone incumbents, " +
             std::to_string(feasible_runs) + " box-feasible with budget respected");
}

// ---- CLI determinism -------------------------------------------------------

fs::path g_work;

int run_cli(const std::string& args) {
  const std::string cmd = std::string(MFCAL_CLI_PATH) + " " + args + " >>" + (g_work / "log.txt").string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  if (!fs::exists(dir)) return files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = read_text_file(e.path());
  return files;
}

// "identical", "DIFFERENT" or "exit=<code>".
std::string reproducible(const std::string& command, const std::string& args, const std::string& tag) {
  const auto a = g_work / (tag + "_t1"), b = g_work / (tag + "_t4");
  for (const auto& [dir, threads] : {std::pair{a, 1}, std::pair{b, 4}})
    if (const int code = run_cli(command + " " + args + " --threads " + std::to_string(threads) + " --out " + dir.string());
        code != 0)
      return "exit=" + std::to_string(code);
  const auto sa = snapshot(a);
  return sa.size() > 1 && sa == snapshot(b) ? "identical" : "DIFFERENT";
}

void criterion_7() {
  g_work = fs::temp_directory_path() / "mfcal_acceptance_cli";
  fs::remove_all(g_work);
  fs::create_directories(g_work);
  auto cfg = [](const std::string& name, const std::string& text) {
    write_text_file(g_work / name, text);
    return "--config " + (g_work / name).string();
  };
  const std::string cascade =
      "seed: 3\nensemble_size: 3\narchitecture: {hidden: [4, 8, 14]}\n"
      "base: {name: low, dataset: data/low.csv, train: {learning_rate: 0.004, batch_size: 20, epochs: 30}}\n"
      "stages:\n"
      "  - {name: high, dataset: data/high.csv, rows: 20, retrained_layers: 2, train: {learning_rate: 0.0001, "
      "batch_size: 1, epochs: 10}}\n"
      "  - {name: experiment, dataset: data/experiment.csv, retrained_layers: 2, train: {learning_rate: 0.0001, "
      "batch_size: 1, epochs: 10}}\n";
  std::vector<std::pair<std::string, std::string>> results;
  const auto gen = cfg("gen.yaml", "problem: taylor\nseed: 2\nsizes: {low: 80, high: 40, experiment: 20}\n");
  results.emplace_back("gen-data", reproducible("gen-data", gen, "gen"));
  if (run_cli("gen-data " + gen + " --out " + (g_work / "data").string()) != 0) results.back().second = "exit";
  results.emplace_back("cascade", reproducible("cascade", cfg("cascade.yaml", cascade), "cascade"));
  results.emplace_back("train", reproducible("train",
                                             cfg("train.yaml", "seed: 1\nensemble_size: 2\ndataset: data/experiment.csv\n"
                                                               "architecture: {hidden: [4, 4]}\n"
                                                               "train: {learning_rate: 0.004, batch_size: 4, epochs: 20}\n"),
                                             "train"));
  results.emplace_back(
      "transfer", reproducible("transfer",
                               cfg("transfer.yaml", "seed: 1\nensemble: cascade_t1/ensembles/high\n"
                                                    "stage: {name: exp, dataset: data/experiment.csv, train: "
                                                    "{learning_rate: 0.0001, batch_size: 1, epochs: 10}}\n"),
                               "transfer"));
  results.emplace_back(
      "sweep", reproducible("sweep", cfg("sweep.yaml", cascade + "sweep: {stage: high, sizes: [5, 10, 20], replicates: 2}\n"),
                            "sweep"));
  results.emplace_back(
      "optimize",
      reproducible("optimize",
                   cfg("optimize.yaml", "seed: 1\nbudget: 60\nobjective: {type: output, output: f}\nensembles:\n"
                                        "  - {name: low, path: cascade_t1/ensembles/low, data: cascade_t1/data/low.csv}\n"
                                        "  - {name: exp, path: cascade_t1/ensemble, data: cascade_t1/data/experiment.csv}\n"),
                   "optimize"));
  results.emplace_back(
      "report", reproducible("report",
                             cfg("report.yaml", "baseline: a\nruns:\n  - {name: a, path: cascade_t1}\n"
                                                "  - {name: b, path: transfer_t1}\n"),
                             "report"));
  std::size_t ok = 0;
  std::string detail;
  for (const auto& [name, status] : results) {
    ok += status == "identical";
    detail += " " + name + "=" + status;
  }
  report("7", ok == results.size(),
         std::to_string(ok) + "/" + std::to_string(results.size()) + " commands byte-identical at threads 1 and 4;" +
             detail);
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<void()>>> groups{
      {"1", criterion_1}, {"2", criterion_2}, {"3", criterion_3}, {"4", criterion_4},
      {"5", criterion_5}, {"6", criterion_6}, {"7", criterion_7}};
  const auto start = std::chrono::steady_clock::now();
  for (const auto& [id, run] : groups) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      run();
    } catch (const std::exception& e) {
      report(id, false, std::string("error: ") + e.what());
    }
    std::printf("     (%s s)\n", num(seconds_since(t0), 1).c_str());
  }
  std::printf("acceptance: %d/%d criteria pass in %s s\n", g_total - g_failed, g_total,
              num(seconds_since(start), 1).c_str());
  return g_failed == 0 ? 0 : 1;
}
