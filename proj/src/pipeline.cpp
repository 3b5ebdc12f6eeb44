#include "pgp/pipeline.hpp"

#include "pgp/error.hpp"

namespace pgp::pipeline {

WorldData generate(const config::RunConfig& cfg) {
  WorldData d;
  d.world = world::sample_world(cfg.world);
  d.corpus = world::sample_prescriptions(d.world, cfg.data.prescriptions, 0);
  const unsigned threads = std::max(1u, cfg.training.workers);
  d.train = world::render_scenes(d.world, d.corpus, cfg.data.train_scenes, 1, "train_", threads);
  d.test = world::render_scenes(d.world, d.corpus, cfg.data.test_scenes, 2, "test_", threads);
  return d;
}

ClassGraphs build_graphs(const graphs::PrescriptionCorpus& corpus, const std::vector<world::Scene>& train,
                         std::size_t classes) {
  const auto catalog = graphs::PillCatalog::numbered(classes);
  ClassGraphs g;
  graphs::GraphWarnings w;
  g.co = graphs::build_co_graph(corpus, catalog, &w);
  g.size = graphs::build_size_graph(world::annotations_of(train), catalog);
  g.warnings = std::move(w.messages);
  return g;
}

model::ModelSpec spec_for(const config::RunConfig& cfg, const std::vector<world::Scene>& scenes,
                          std::size_t classes) {
  if (scenes.empty()) throw ValidationError("no scenes");
  return model::ModelSpec::from_config(cfg, scenes.front().features.cols(), classes);
}

RunResult train_and_evaluate(const config::RunConfig& cfg, const WorldData& data, const num::Matrix& co,
                             const num::Matrix& size, const std::vector<std::size_t>& classes,
                             std::ostream* progress) {
  const std::size_t n = data.world.classes();
  RunResult r;
  r.spec = spec_for(cfg, data.train, n);
  const auto inputs = train::make_graph_inputs(co, size, cfg.training.k);
  r.trained = train::fit(r.spec, inputs, train::prepare(data.train), cfg.training, {}, progress);
  const auto preds = evaluate::predict(r.spec, r.trained.params, inputs, data.test);
  r.eval = evaluate::evaluate(preds, data.test, n, data.world.hard_classes(), cfg.eval.bins, classes);
  return r;
}

}  // namespace pgp::pipeline
