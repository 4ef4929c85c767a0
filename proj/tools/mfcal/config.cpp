#include "config.hpp"

#include <algorithm>
#include <map>
#include <utility>

#include "mfcal/errors.hpp"
#include "mfcal/tables.hpp"

namespace mfcal::cli {

YAML::Node child(YAML::Node node, const std::string& key) {
  if (!node[key]) node[key] = YAML::Node(YAML::NodeType::Map);
  if (!node[key].IsMap()) throw ConfigError("config key '" + key + "' must be a map");
  return node[key];
}

std::filesystem::path RunContext::resolve(const std::string& path) const {
  const std::filesystem::path p(path);
  return p.is_absolute() ? p : data_dir / p;
}

void RunContext::echo() const {
  YAML::Node copy = YAML::Clone(root);
  copy["seed"] = seed;
  copy["data_dir"] = std::filesystem::absolute(data_dir).lexically_normal().string();
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << copy;
  write_text_file(out_dir / "config.resolved.yaml", std::string(out.c_str()) + "\n");
}

net::TrainConfig read_train_config(YAML::Node node, const net::TrainConfig& defaults) {
  net::TrainConfig c = defaults;
  c.learning_rate = opt(node, "learning_rate", defaults.learning_rate);
  c.batch_size = opt(node, "batch_size", defaults.batch_size);
  c.epochs = opt(node, "epochs", defaults.epochs);
  c.adam_beta1 = opt(node, "beta1", defaults.adam_beta1);
  c.adam_beta2 = opt(node, "beta2", defaults.adam_beta2);
  c.adam_epsilon = opt(node, "epsilon", defaults.adam_epsilon);
  try {
    c.validate();
  } catch (const ArgumentError& e) {
    throw ConfigError(e.what());
  }
  return c;
}

std::vector<net::LayerSpec> read_architecture(YAML::Node node, const data::Dataset& data) {
  const auto hidden = opt(node, "hidden", std::vector<int>{4, 8, 14});
  try {
    return net::make_architecture(static_cast<int>(data.input_dim()), hidden, static_cast<int>(data.output_dim()));
  } catch (const ArgumentError& e) {
    throw ConfigError(std::string("architecture: ") + e.what());
  }
}

data::Dataset read_stage_dataset(YAML::Node node, const RunContext& ctx, const std::string& where) {
  const auto path = req<std::string>(node, "dataset", where);
  auto ds = data::load_dataset(ctx.resolve(path));
  if (node["rows"]) {
    const auto rows = req<std::size_t>(node, "rows", where);
    if (rows < 1 || rows > ds.rows())
      throw ConfigError(where + ": rows=" + std::to_string(rows) + " but '" + path + "' has " +
                        std::to_string(ds.rows()));
    ds = data::subsample(ds, rows, ctx.seed);
  }
  return ds;
}

transfer::FidelityStage read_stage(YAML::Node node, const RunContext& ctx, const std::string& where,
                                   const net::TrainConfig& defaults) {
  if (!node.IsMap()) throw ConfigError(where + " must be a map");
  transfer::FidelityStage s;
  s.dataset = read_stage_dataset(node, ctx, where);
  s.name = opt(node, "name", s.dataset.fidelity_tag.empty() ? where : s.dataset.fidelity_tag);
  s.config = read_train_config(child(node, "train"), defaults);
  s.retrained_layers = opt<std::size_t>(node, "retrained_layers", 2);
  if (node["train_fraction"]) {
    const auto f = req<double>(node, "train_fraction", where);
    if (!(f > 0.0 && f < 1.0)) throw ConfigError(where + ": train_fraction must lie in (0, 1)");
    s.train_fraction = f;
  }
  if (node["mask"]) {
    const auto names = req<std::vector<std::string>>(node, "mask", where);
    net::OutputMask m{std::vector<double>(s.dataset.output_dim(), 0.0)};
    for (const auto& n : names) {
      const auto j = s.dataset.output_index(n);
      if (!j) throw ConfigError(where + ": mask names unknown output '" + n + "'");
      m.weights[*j] = 1.0;
    }
    s.mask = m;
  }
  return s;
}

// ---- presets ---------------------------------------------------------------

namespace {

// Taylor toy base / transfer settings.
constexpr const char* kTaylorBase = "{learning_rate: 0.004, batch_size: 50, epochs: 300}";
constexpr const char* kTaylorTl = "{learning_rate: 0.0001, batch_size: 1, epochs: 300}";

std::string taylor_stage(const std::string& name, const std::string& file, int rows, bool base) {
  std::string s = "{name: " + name + ", dataset: " + file + ", train_fraction: 0.8";
  if (rows > 0) s += ", rows: " + std::to_string(rows);
  s += std::string(", train: ") + (base ? kTaylorBase : kTaylorTl);
  if (!base) s += ", retrained_layers: 2";
  return s + "}";
}

std::string taylor_run(const std::string& base, const std::vector<std::string>& stages) {
  std::string s = "seed: 1\nensemble_size: 5\narchitecture: {hidden: [4, 8, 14]}\nbase: " + base + "\nstages:";
  if (stages.empty()) return s + " []\n";
  for (const auto& st : stages) s += "\n  - " + st;
  return s + "\n";
}

std::string campaign_run() {
  return "seed: 1\n"
         "ensemble_size: 5\n"
         "architecture: {hidden: [11, 13, 22, 16]}\n"
         "base: {name: low, dataset: low.csv, train: {learning_rate: 0.004, batch_size: 1500, epochs: 400}}\n"
         "stages:\n"
         "  - {name: high, dataset: high.csv, retrained_layers: 2, train: {learning_rate: 0.0003, batch_size: 1, "
         "epochs: 300}}\n"
         "  - {name: experiment, dataset: experiment.csv, retrained_layers: 2, train_fraction: 0.9, train: "
         "{learning_rate: 0.0003, batch_size: 1, epochs: 2300}}\n";
}

const std::map<std::pair<std::string, std::string>, std::string>& presets() {
  static const std::map<std::pair<std::string, std::string>, std::string> table = [] {
    std::map<std::pair<std::string, std::string>, std::string> t;
    t[{"gen-data", "taylor"}] = "problem: taylor\nseed: 1\nsizes: {low: 100, high: 50, experiment: 25}\n";
    t[{"gen-data", "taylor-full"}] = "problem: taylor\nseed: 1\nsizes: {low: 100, high: 100, experiment: 100}\n";
    t[{"gen-data", "campaign"}] =
        "problem: campaign\nseed: 1\nsizes: {low: 2000, high: 200, experiment: 23}\n"
        "campaign: {fidelity_gap: 0.3, experiment_distortion: 0.2, noise_sd: 0.0, experiment_margin: 0.1}\n";
    t[{"train", "taylor"}] = "seed: 1\nensemble_size: 5\narchitecture: {hidden: [4, 8, 14]}\n"
                             "dataset: experiment.csv\ntrain_fraction: 0.8\ntrain: " +
                             std::string(kTaylorBase) + "\n";
    t[{"cascade", "taylor-exp-only"}] = taylor_run(taylor_stage("experiment", "experiment.csv", 0, true), {});
    t[{"cascade", "taylor-high-exp"}] = taylor_run(taylor_stage("high", "high.csv", 0, true),
                                               {taylor_stage("experiment", "experiment.csv", 25, false)});
    t[{"cascade", "taylor-low-exp"}] = taylor_run(taylor_stage("low", "low.csv", 0, true),
                                              {taylor_stage("experiment", "experiment.csv", 25, false)});
    t[{"cascade", "taylor-hier"}] =
        taylor_run(taylor_stage("low", "low.csv", 0, true), {taylor_stage("high", "high.csv", 50, false),
                                                             taylor_stage("experiment", "experiment.csv", 25, false)});
    t[{"cascade", "campaign"}] = campaign_run();
    t[{"sweep", "high-size"}] = taylor_run(taylor_stage("low", "low.csv", 0, true),
                                      {taylor_stage("high", "high.csv", 0, false)}) +
                           "sweep: {stage: 1, sizes: [10, 20, 30, 40, 60, 80, 100], replicates: 5}\n";
    t[{"sweep", "exp-size"}] =
        taylor_run(taylor_stage("low", "low.csv", 0, true), {taylor_stage("high", "high.csv", 30, false),
                                                             taylor_stage("experiment", "experiment.csv", 0, false)}) +
        "sweep: {stage: 2, sizes: [10, 15, 20, 25, 40, 60, 80, 100], replicates: 5}\n";
    t[{"optimize", "campaign"}] =
        "seed: 1\nbudget: 400\nobjective: {type: itfx, yield: Yield, rhor: RhoR}\n"
        "ensembles:\n"
        "  - {name: low, path: ensembles/low, data: data/low.csv}\n"
        "  - {name: high, path: ensembles/high, data: data/high.csv}\n"
        "  - {name: experiment, path: ensembles/experiment, data: data/experiment.csv}\n";
    t[{"report", "taylor"}] =
        "baseline: baseline\nruns:\n  - {name: baseline, path: taylor-exp-only}\n"
        "  - {name: high, path: taylor-high-exp}\n  - {name: low, path: taylor-low-exp}\n"
        "  - {name: hier, path: taylor-hier}\n";
    return t;
  }();
  return table;
}

}  // namespace

std::string preset_text(const std::string& command, const std::string& name) {
  const auto& t = presets();
  const auto it = t.find({command, name});
  if (it == t.end()) {
    std::string known;
    for (const auto& n : preset_names(command)) known += (known.empty() ? "" : ", ") + n;
    throw ConfigError("unknown preset '" + name + "' for " + command + (known.empty() ? "" : " (known: " + known + ")"));
  }
  return it->second;
}

std::vector<std::string> preset_names(const std::string& command) {
  std::vector<std::string> names;
  for (const auto& [key, text] : presets())
    if (key.first == command) names.push_back(key.second);
  return names;
}

}  // namespace mfcal::cli
