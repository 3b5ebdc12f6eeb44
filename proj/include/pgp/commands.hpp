#pragma once

#include <exception>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "pgp/config.hpp"

namespace pgp::commands {

/// Exit codes of the command-line tool.
inline constexpr int kOk = 0;
inline constexpr int kRuntimeFailure = 1;
inline constexpr int kUsageError = 2;

/// gen-world: world.json, the prescription corpus, and train/test annotations
/// with their feature sidecars.
void gen_world(const config::RunConfig& cfg, std::ostream& out);
/// build-graphs: co-graph from the corpus, size graph from the training annotations.
void build_graphs(const config::RunConfig& cfg, std::ostream& out, std::ostream& err);
/// train: checkpoint and loss curve.
void train(const config::RunConfig& cfg, std::ostream& out);
/// eval: overall, hard-group and occlusion reports plus summary.json.
void eval(const config::RunConfig& cfg, std::ostream& out);
/// ablate: perturbs the co-graph per `cfg.ablation`, retrains both models with
/// the same seed, and writes the comparison.
void ablate(const config::RunConfig& cfg, std::ostream& out, std::ostream& err);
/// report: collects summary, loss curve and ablation comparisons into report.md.
void report(const config::RunConfig& cfg, std::ostream& out);

std::vector<std::string_view> names();

/// Runs the named command. Throws ConfigError for an unknown name.
void dispatch(std::string_view command, const config::RunConfig& cfg, std::ostream& out, std::ostream& err);

/// Maps an exception to an exit code: configuration problems (including
/// missing inputs) are usage errors, everything else a runtime failure.
int exit_code_for(const std::exception& e);

/// Loads the config, runs the command, reports errors on `err`. Returns the exit code.
int run(std::string_view command, const std::string& config_path, const std::vector<std::string>& overrides,
        std::ostream& out, std::ostream& err);

}  // namespace pgp::commands
