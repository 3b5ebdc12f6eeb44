#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pgp/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Prescription-aware pill detection pipeline"};
  app.require_subcommand(1);
  std::string config_path;
  std::vector<std::string> overrides;
  const std::vector<std::pair<const char*, const char*>> commands{
      {"gen-world", "Sample a synthetic world, prescriptions and scenes"},
      {"build-graphs", "Build the co-occurrence and size graphs"},
      {"train", "Train the detector head and write a checkpoint"},
      {"eval", "Evaluate a checkpoint on the test scenes"},
      {"ablate", "Perturb the co-occurrence graph, retrain and compare"},
      {"report", "Collect evaluation and ablation results into report.md"}};
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "JSON config file")->required();
    sub->add_option("--set", overrides, "Override a config key, e.g. --set training.steps=50")->take_all();
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? pgp::commands::kOk : pgp::commands::kUsageError;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  return pgp::commands::run(command, config_path, overrides, std::cout, std::cerr);
}
