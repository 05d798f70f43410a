// emos: calibrate ensemble wind-speed forecasts and verify the result.
//
//   emos synth     --config synth.cfg --out data/
//   emos distances --config run.cfg --out cache/
//   emos run       --config run.cfg --set regime=cluster --set k=5 --out results/
//   emos sweep     --config run.cfg --set sweep_k=1,2,5,10 --out sweep/
//   emos verify    --set predictions=results/predictions.csv --out verify/
//
// Exit codes: 0 success, 2 config/usage, 3 data, 4 estimation.
#include <CLI11.hpp>

#include <filesystem>
#include <functional>
#include <tuple>
#include <iostream>
#include <string>
#include <vector>

#include "emos/error.hpp"
#include "emos/kv_config.hpp"
#include "emos/pipeline.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitEstimation = 4;

struct CommandArgs {
  std::string config;
  std::vector<std::string> overrides;
  std::string out = ".";
};

emos::KeyValueConfig load(const CommandArgs& args) {
  auto cfg = args.config.empty() ? emos::KeyValueConfig{} : emos::KeyValueConfig::from_file(args.config);
  for (const auto& o : args.overrides) cfg.apply_override(o);
  return cfg;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ensemble model output statistics for wind speed"};
  app.require_subcommand(1);

  using Command = std::function<int(const emos::KeyValueConfig&, const std::filesystem::path&)>;
  const std::vector<std::tuple<std::string, std::string, Command>> commands = {
      {"synth", "generate a synthetic dataset", emos::cmd_synth},
      {"distances", "compute and cache a station distance matrix", emos::cmd_distances},
      {"run", "fit, predict and verify over the verification period", emos::cmd_run},
      {"sweep", "run a grid of tuning parameters", emos::cmd_sweep},
      {"verify", "score an existing predictions file", emos::cmd_verify},
  };

  std::vector<CommandArgs> args(commands.size());
  std::vector<CLI::App*> subs;
  for (std::size_t i = 0; i < commands.size(); ++i) {
    auto* sub = app.add_subcommand(std::get<0>(commands[i]), std::get<1>(commands[i]));
    sub->add_option("-c,--config", args[i].config, "key = value config file");
    sub->add_option("-s,--set", args[i].overrides, "override a config key (key=value), repeatable");
    sub->add_option("-o,--out", args[i].out, "output directory");
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  for (std::size_t i = 0; i < subs.size(); ++i) {
    if (!subs[i]->parsed()) continue;
    try {
      return std::get<2>(commands[i])(load(args[i]), args[i].out);
    } catch (const emos::ConfigError& e) {
      std::cerr << "emos: config error: " << e.what() << "\n";
      return kExitConfig;
    } catch (const emos::DataError& e) {
      std::cerr << "emos: data error: " << e.what() << "\n";
      return kExitData;
    } catch (const std::filesystem::filesystem_error& e) {
      std::cerr << "emos: I/O error: " << e.what() << "\n";
      return kExitData;
    } catch (const std::exception& e) {
      std::cerr << "emos: " << e.what() << "\n";
      return kExitEstimation;
    }
  }
  return kExitConfig;
}
