// mfcal: command-line front end. Every subcommand takes a YAML config (or a
// built-in preset), writes its outputs under --out and exits with 0 on
// success, 1 on a runtime failure and 2 on an invalid configuration.

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <yaml-cpp/yaml.h>

#include "commands.hpp"
#include "mfcal/errors.hpp"

namespace {

namespace fs = std::filesystem;
using namespace mfcal::cli;

struct Flags {
  std::string config;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::string out;
  int threads = 1;
  std::string data_dir;
  std::vector<std::string> positional;
};

int fail(int code, const std::string& what) {
  std::cerr << "mfcal: " << what << "\n";
  return code;
}

int run(const std::string& command, const Prepare& prepare, const Flags& f) {
  RunContext ctx;
  Job job;
  try {
    if (!f.config.empty() && !f.preset.empty()) throw ConfigError("--config and --preset are exclusive");
    if (f.threads < 1) throw ConfigError("--threads must be at least 1");
    if (!f.config.empty()) {
      if (!fs::exists(f.config)) throw ConfigError("config file '" + f.config + "' does not exist");
      ctx.root = YAML::LoadFile(f.config);
    } else if (!f.preset.empty()) {
      ctx.root = YAML::Load(preset_text(command, f.preset));
    }
    if (!ctx.root || ctx.root.IsNull()) ctx.root = YAML::Node(YAML::NodeType::Map);
    if (!ctx.root.IsMap()) throw ConfigError("config must be a YAML map");

    if (!f.data_dir.empty())
      ctx.data_dir = f.data_dir;
    else if (ctx.root["data_dir"])
      ctx.data_dir = req<std::string>(ctx.root, "data_dir", "config");
    else if (!f.config.empty())
      ctx.data_dir = fs::path(f.config).parent_path();
    if (ctx.data_dir.empty()) ctx.data_dir = ".";
    ctx.seed = f.seed ? *f.seed : opt<std::uint64_t>(ctx.root, "seed", 0);
    ctx.threads = f.threads;
    ctx.out_dir = f.out;
    set_positional(f.positional);
    job = prepare(ctx);
  } catch (const ConfigError& e) {
    return fail(2, std::string("invalid config: ") + e.what());
  } catch (const YAML::Exception& e) {
    return fail(2, std::string("invalid config: ") + e.what());
  } catch (const mfcal::ArgumentError& e) {
    return fail(2, std::string("invalid config: ") + e.what());
  } catch (const std::exception& e) {
    return fail(1, e.what());
  }
  try {
    fs::create_directories(ctx.out_dir);
    ctx.echo();
    job();
  } catch (const std::exception& e) {
    return fail(1, e.what());
  }
  return 0;
}

const char* describe(const std::string& command) {
  static const std::map<std::string, const char*> text{
      {"gen-data", "write Taylor or synthetic-campaign datasets"},
      {"train", "train an ensemble on one dataset"},
      {"transfer", "calibrate a saved ensemble on a new stage"},
      {"cascade", "run a low -> high -> experiment calibration cascade"},
      {"sweep", "score a cascade while one stage's dataset grows"},
      {"optimize", "search the input box for the best predicted design"},
      {"report", "compare run directories with Welch tests"},
  };
  const auto it = text.find(command);
  return it == text.end() ? "" : it->second;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-fidelity surrogate calibration"};
  app.require_subcommand(1);
  Flags flags;
  std::string chosen;
  for (const auto& [name, prepare] : commands()) {
    auto* sub = app.add_subcommand(name, describe(name));
    sub->add_option("--config", flags.config, "YAML configuration file");
    sub->add_option("--preset", flags.preset, "built-in configuration");
    sub->add_option("--seed", flags.seed, "master seed (overrides the config)");
    sub->add_option("--out", flags.out, "output directory")->required();
    sub->add_option("--threads", flags.threads, "worker threads")->capture_default_str();
    sub->add_option("--data-dir", flags.data_dir, "base directory for relative paths in the config");
    if (name == "report") sub->add_option("runs", flags.positional, "run directories or report.csv files");
    sub->callback([&chosen, n = name] { chosen = n; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  for (const auto& [name, prepare] : commands())
    if (name == chosen) return run(name, prepare, flags);
  return 2;
}
