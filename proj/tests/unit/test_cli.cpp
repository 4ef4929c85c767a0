#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <map>

#include "helpers.hpp"
#include "mfcal/tables.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path& work() {
  static const fs::path dir = testutil::scratch_dir("cli");
  return dir;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(MFCAL_CLI_PATH) + " " + args + " >>" + (work() / "log.txt").string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void write(const fs::path& p, const std::string& text) { mfcal::write_text_file(p, text); }

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = mfcal::read_text_file(e.path());
  return files;
}

// Runs `command` twice (threads 1 and 4) and returns whether outputs match byte for byte.
bool reproducible(const std::string& command, const std::string& args, const std::string& tag) {
  const auto a = work() / (tag + "_t1"), b = work() / (tag + "_t4");
  REQUIRE(run_cli(command + " " + args + " --threads 1 --out " + a.string()) == 0);
  REQUIRE(run_cli(command + " " + args + " --threads 4 --out " + b.string()) == 0);
  const auto sa = snapshot(a), sb = snapshot(b);
  CHECK(sa.size() > 1);
  return sa == sb;
}

const std::string kCascade = R"(seed: 3
ensemble_size: 3
architecture: {hidden: [4, 8, 14]}
base: {name: low, dataset: data/low.csv, train: {learning_rate: 0.004, batch_size: 20, epochs: 15}}
stages:
  - {name: high, dataset: data/high.csv, rows: 20, retrained_layers: 2, train: {learning_rate: 0.0001, batch_size: 1, epochs: 5}}
  - {name: experiment, dataset: data/experiment.csv, retrained_layers: 2, train: {learning_rate: 0.0001, batch_size: 1, epochs: 5}}
)";

void ensure_data() {
  static bool done = false;
  if (done) return;
  write(work() / "gen.yaml", "problem: taylor\nseed: 2\nsizes: {low: 60, high: 30, experiment: 15}\n");
  REQUIRE(run_cli("gen-data --config " + (work() / "gen.yaml").string() + " --out " + (work() / "data").string()) == 0);
  write(work() / "cascade.yaml", kCascade);
  done = true;
}

std::string cfg(const std::string& name) { return "--config " + (work() / name).string(); }

}  // namespace

TEST_CASE("gen-data writes the requested datasets reproducibly") {
  ensure_data();
  const auto d = snapshot(work() / "data");
  CHECK(d.count("low.csv"));
  CHECK(d.count("config.resolved.yaml"));
  CHECK(reproducible("gen-data", cfg("gen.yaml"), "gen"));
  CHECK(reproducible("gen-data", "--preset campaign", "gen_campaign"));
  CHECK(run_cli("gen-data --preset taylor --seed 9 --out " + (work() / "seeded").string()) == 0);
  CHECK(snapshot(work() / "seeded").at("low.csv") != snapshot(work() / "gen_campaign_t1").at("low.csv"));
}

TEST_CASE("cascade, train, transfer, sweep, optimize and report are reproducible") {
  ensure_data();
  CHECK(reproducible("cascade", cfg("cascade.yaml"), "cascade"));
  const auto out = snapshot(work() / "cascade_t1");
  CHECK(out.count("report.csv"));
  CHECK(out.count("summary.csv"));
  CHECK(out.count("loss_history.csv"));
  CHECK(out.count("ensemble/ensemble.yaml"));
  CHECK(out.count("ensembles/high/member_0.yaml"));
  CHECK(out.at("report.csv").rfind("stage,member,output_name,split,explained_variance,mean_rel_error\n", 0) == 0);

  write(work() / "train.yaml",
        "seed: 1\nensemble_size: 2\ndataset: data/experiment.csv\narchitecture: {hidden: [4, 4]}\n"
        "train: {learning_rate: 0.004, batch_size: 4, epochs: 10}\n");
  CHECK(reproducible("train", cfg("train.yaml"), "train"));

  write(work() / "transfer.yaml",
        "seed: 1\nensemble: cascade_t1/ensembles/low\n"
        "stage: {name: exp, dataset: data/experiment.csv, train: {learning_rate: 0.0001, batch_size: 1, epochs: 5}}\n");
  CHECK(reproducible("transfer", cfg("transfer.yaml"), "transfer"));

  write(work() / "sweep.yaml", kCascade + "sweep: {stage: high, sizes: [10, 20], replicates: 2}\n");
  CHECK(reproducible("sweep", cfg("sweep.yaml"), "sweep"));
  CHECK(snapshot(work() / "sweep_t1").count("sweep_summary.csv"));

  write(work() / "optimize.yaml",
        "seed: 1\nbudget: 40\nobjective: {type: output, output: f}\nensembles:\n"
        "  - {name: low, path: cascade_t1/ensembles/low, data: cascade_t1/data/low.csv}\n"
        "  - {name: exp, path: cascade_t1/ensemble}\n");
  CHECK(reproducible("optimize", cfg("optimize.yaml"), "optimize"));
  const auto designs = mfcal::read_csv(work() / "optimize_t1" / "designs.csv");
  CHECK(designs.rows().size() == 2);
  CHECK(designs.rows()[1][4] == "NA");

  write(work() / "report.yaml",
        "baseline: a\nruns:\n  - {name: a, path: cascade_t1}\n  - {name: b, path: transfer_t1}\n");
  CHECK(reproducible("report", cfg("report.yaml"), "report"));
  const auto cmp = mfcal::read_csv(work() / "report_t1" / "comparison.csv");
  REQUIRE(cmp.rows().size() == 2);
  CHECK(cmp.rows()[0][7] == "NA");
  CHECK(cmp.rows()[1][7] != "NA");
  const auto pairs = mfcal::read_csv(work() / "report_t1" / "pairwise.csv");
  REQUIRE(pairs.rows().size() == 1);
  CHECK(pairs.rows()[0][4] == cmp.rows()[1][7]);  // Welch p is symmetric
}

TEST_CASE("the resolved config reproduces the run") {
  ensure_data();
  const auto first = work() / "echo_a";
  REQUIRE(run_cli("cascade " + cfg("cascade.yaml") + " --out " + first.string()) == 0);
  const auto second = work() / "echo_b";
  REQUIRE(run_cli("cascade --config " + (first / "config.resolved.yaml").string() + " --out " + second.string()) == 0);
  CHECK(snapshot(first) == snapshot(second));
}

TEST_CASE("exit codes") {
  ensure_data();
  std::string bad = kCascade;
  bad.replace(bad.find("retrained_layers: 2"), 19, "retrained_layers: 4");
  write(work() / "bad_layers.yaml", bad);
  CHECK(run_cli("cascade " + cfg("bad_layers.yaml") + " --out " + (work() / "x").string()) == 2);
  write(work() / "bad_yaml.yaml", "seed: [1,\n");
  CHECK(run_cli("cascade " + cfg("bad_yaml.yaml") + " --out " + (work() / "x").string()) == 2);
  write(work() / "bad_type.yaml", "seed: 1\nensemble_size: many\n");
  CHECK(run_cli("cascade " + cfg("bad_type.yaml") + " --out " + (work() / "x").string()) == 2);
  CHECK(run_cli("cascade --preset nope --out " + (work() / "x").string()) == 2);
  CHECK(run_cli("cascade " + cfg("cascade.yaml") + " --threads 0 --out " + (work() / "x").string()) == 2);
  CHECK(run_cli("frobnicate --out x") == 2);
  CHECK(run_cli("cascade " + cfg("cascade.yaml")) == 2);  // --out is required

  // A missing dataset is a runtime failure, not a config error.
  write(work() / "missing.yaml", "base: {dataset: data/none.csv}\n");
  CHECK(run_cli("cascade " + cfg("missing.yaml") + " --out " + (work() / "x").string()) == 1);
  // Diverging training fails at run time.
  std::string diverge = kCascade;
  diverge.replace(diverge.find("learning_rate: 0.004"), 20, "learning_rate: 1e300");
  write(work() / "diverge.yaml", diverge);
  CHECK(run_cli("cascade " + cfg("diverge.yaml") + " --out " + (work() / "x").string()) == 1);
}
