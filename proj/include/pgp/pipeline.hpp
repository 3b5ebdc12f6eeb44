#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "pgp/config.hpp"
#include "pgp/evaluate.hpp"
#include "pgp/graphs.hpp"
#include "pgp/train.hpp"
#include "pgp/world.hpp"

namespace pgp::pipeline {

/// Everything `gen-world` produces, held in memory.
struct WorldData {
  world::World world;
  graphs::PrescriptionCorpus corpus;
  std::vector<world::Scene> train;
  std::vector<world::Scene> test;
};

/// Corpus stream 0; training scenes stream 1 ("train_"), test scenes stream 2 ("test_").
WorldData generate(const config::RunConfig& cfg);

struct ClassGraphs {
  graphs::CoGraph co;
  graphs::SizeGraph size;
  std::vector<std::string> warnings;
};
/// Co-graph from the corpus; size graph from the training annotations.
ClassGraphs build_graphs(const graphs::PrescriptionCorpus& corpus, const std::vector<world::Scene>& train,
                         std::size_t classes);

model::ModelSpec spec_for(const config::RunConfig& cfg, const std::vector<world::Scene>& scenes, std::size_t classes);

struct RunResult {
  model::ModelSpec spec;
  train::TrainResult trained;
  evaluate::Evaluation eval;
};

/// Train on `train`, evaluate on `test`. `co` replaces the co-graph weights
/// (ablations); `classes` restricts evaluation means.
RunResult train_and_evaluate(const config::RunConfig& cfg, const WorldData& data, const num::Matrix& co,
                             const num::Matrix& size, const std::vector<std::size_t>& classes = {},
                             std::ostream* progress = nullptr);

}  // namespace pgp::pipeline
