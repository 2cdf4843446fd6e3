#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "windloss/app/config.hpp"
#include "windloss/app/pipeline.hpp"

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> out;
};

const std::vector<std::string> kRunSequence{"ingest", "label", "tune", "train", "evaluate", "importance", "report"};

windloss::app::RunConfig resolve_config(const Flags& flags, bool config_required) {
  using namespace windloss::app;
  RunConfig config;
  if (!flags.config.empty()) {
    config = load_config(flags.config);
  } else if (config_required) {
    throw ConfigError("--config is required");
  } else {
    config.grid = default_grid();
  }
  apply(config, Overrides{flags.seed, flags.threads, flags.out});
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Windstorm loss-level classification pipeline"};
  app.require_subcommand(1);

  Flags flags;
  const auto add_flags = [&](CLI::App* cmd) {
    cmd->add_option("--config", flags.config, "Run configuration (JSON)");
    cmd->add_option("--seed", flags.seed, "Override the configured seed");
    cmd->add_option("--threads", flags.threads, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
    cmd->add_option("--out", flags.out, "Override the output directory");
  };

  const std::vector<std::pair<std::string, std::string>> commands{
      {"ingest", "Validate, clean and join the input tables"},
      {"label", "Keep top-quartile losses, assign loss levels, split train/test"},
      {"train", "Fit the configured random forest on the training partition"},
      {"tune", "Cross-validated grid search, then one held-out evaluation"},
      {"evaluate", "Score the trained model on the test partition"},
      {"importance", "Impurity-based feature importance of the trained model"},
      {"report", "Consolidated JSON and text report"},
      {"synth", "Write synthetic events/meteo/resilience CSVs"},
      {"run", "ingest, label, tune, train, evaluate, importance, report"}};
  for (const auto& [name, help] : commands) add_flags(app.add_subcommand(name, help));

  CLI11_PARSE(app, argc, argv);

  const auto* chosen = app.get_subcommands().front();
  const auto name = chosen->get_name();
  try {
    const auto config = resolve_config(flags, name != "synth");
    const auto stages = name == "run" ? kRunSequence : std::vector<std::string>{name};
    for (const auto& stage : stages) {
      const auto result = windloss::app::run_stage(stage, config);
      std::cout << result.summary << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "windloss " << name << ": error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
