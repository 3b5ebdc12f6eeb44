#include "pgp/commands.hpp"

#include <algorithm>
#include <filesystem>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "pgp/ablation.hpp"
#include "pgp/checkpoint.hpp"
#include "pgp/dataset.hpp"
#include "pgp/error.hpp"
#include "pgp/graphs.hpp"
#include "pgp/pipeline.hpp"

namespace pgp::commands {

namespace fs = std::filesystem;

namespace {

void require_file(const fs::path& p, const char* key) {
  if (!fs::is_regular_file(p)) throw ConfigError(std::string("paths.") + key + ": file not found: " + p.string());
}

graphs::PillCatalog catalog_for(const config::RunConfig& cfg) {
  if (cfg.paths.catalog.empty()) return graphs::PillCatalog::numbered(cfg.world.classes);
  require_file(cfg.paths.catalog, "catalog");
  auto cat = graphs::PillCatalog::load(cfg.paths.catalog);
  if (cat.size() != cfg.world.classes) {
    throw ConfigError("paths.catalog has " + std::to_string(cat.size()) + " classes but world.classes is " +
                      std::to_string(cfg.world.classes));
  }
  return cat;
}

std::vector<world::Scene> load_split(const config::RunConfig& cfg, bool train_split) {
  const auto& ann = train_split ? cfg.paths.train_annotations : cfg.paths.test_annotations;
  const auto& feat = train_split ? cfg.paths.train_features : cfg.paths.test_features;
  require_file(ann, train_split ? "train_annotations" : "test_annotations");
  require_file(feat, train_split ? "train_features" : "test_features");
  auto scenes = dataset::load_scenes(ann, feat, catalog_for(cfg));
  if (scenes.empty()) throw ValidationError(ann.string() + ": no images");
  return scenes;
}

struct LoadedGraphs {
  num::Matrix co;
  num::Matrix size;
};

LoadedGraphs load_graphs(const config::RunConfig& cfg) {
  require_file(cfg.paths.co_graph, "co_graph");
  require_file(cfg.paths.size_graph, "size_graph");
  LoadedGraphs g{graphs::load_co_graph(cfg.paths.co_graph).weights,
                 graphs::size_weights_for_pipeline(graphs::load_size_graph(cfg.paths.size_graph))};
  if (g.co.rows() != cfg.world.classes || g.size.rows() != cfg.world.classes) {
    throw ValidationError("graphs cover " + std::to_string(g.co.rows()) + " classes but world.classes is " +
                          std::to_string(cfg.world.classes));
  }
  return g;
}

world::World load_world(const config::RunConfig& cfg) {
  require_file(cfg.paths.world, "world");
  auto w = dataset::load_world(cfg.paths.world);
  if (w.classes() != cfg.world.classes) throw ValidationError("world file class count disagrees with the config");
  return w;
}

std::string fixed(double v, int digits = 4) {
  if (v < 0) return "n/a";
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

void print_warnings(const std::vector<std::string>& warnings, std::ostream& err) {
  for (const auto& w : warnings) err << "warning: " << w << "\n";
}

std::string fraction_tag(double f) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(2) << f;
  return s.str();
}

}  // namespace

void gen_world(const config::RunConfig& cfg, std::ostream& out) {
  const auto data = pipeline::generate(cfg);
  dataset::save_world(cfg.paths.world, data.world);
  dataset::write_text(cfg.paths.corpus, graphs::serialize_corpus(data.corpus));
  dataset::write_text(cfg.paths.train_annotations, graphs::serialize_annotations(world::annotations_of(data.train)));
  dataset::write_text(cfg.paths.train_features, dataset::serialize_features(data.train));
  dataset::write_text(cfg.paths.test_annotations, graphs::serialize_annotations(world::annotations_of(data.test)));
  dataset::write_text(cfg.paths.test_features, dataset::serialize_features(data.test));
  std::size_t occluded = 0;
  for (const auto& s : data.test) occluded += world::has_heavy_overlap(s.boxes);
  out << "world: " << data.world.classes() << " classes, " << data.world.spec.diagnoses << " diagnoses, "
      << data.world.hard_classes().size() << " hard-group classes\n"
      << "corpus: " << data.corpus.size() << " prescriptions -> " << cfg.paths.corpus.string() << "\n"
      << "scenes: " << data.train.size() << " train, " << data.test.size() << " test (" << occluded
      << " test scenes with IoU > 0.3 pairs)\n";
}

void build_graphs(const config::RunConfig& cfg, std::ostream& out, std::ostream& err) {
  require_file(cfg.paths.corpus, "corpus");
  require_file(cfg.paths.train_annotations, "train_annotations");
  const auto catalog = catalog_for(cfg);
  const auto corpus = graphs::parse_corpus_file(cfg.paths.corpus, catalog);
  const auto annotations = graphs::parse_annotations_file(cfg.paths.train_annotations, catalog);
  graphs::GraphWarnings warnings;
  const auto co = graphs::build_co_graph(corpus, catalog, &warnings);
  const auto size = graphs::build_size_graph(annotations, catalog);
  dataset::write_text(cfg.paths.co_graph, graphs::export_co_graph(co));
  dataset::write_text(cfg.paths.size_graph, graphs::export_size_graph(size));
  print_warnings(warnings.messages, err);
  const auto cs = graphs::co_graph_stats(co);
  const auto ss = graphs::size_graph_stats(size);
  out << "co-graph: " << co.n() << " nodes, " << cs.edges << " edges, density " << fixed(cs.density) << " -> "
      << cfg.paths.co_graph.string() << "\n"
      << "size-graph: " << size.n() << " nodes, " << ss.edges << " edges, density " << fixed(ss.density) << " -> "
      << cfg.paths.size_graph.string() << "\n";
}

void train(const config::RunConfig& cfg, std::ostream& out) {
  const auto g = load_graphs(cfg);
  const auto scenes = load_split(cfg, true);
  const auto spec = pipeline::spec_for(cfg, scenes, cfg.world.classes);
  const auto inputs = train::make_graph_inputs(g.co, g.size, cfg.training.k);
  const fs::path dump = cfg.paths.checkpoint.parent_path() / "nan_dump.json";
  const auto res = train::fit(spec, inputs, train::prepare(scenes), cfg.training, dump, &out);
  checkpoint::save(cfg.paths.checkpoint, spec, res.params);
  dataset::write_text(cfg.paths.loss_csv, train::loss_csv(res.curve));
  if (!res.curve.empty()) {
    const auto& first = res.curve.front();
    const auto& last = res.curve.back();
    out << "cls loss " << fixed(first.cls) << " -> " << fixed(last.cls) << " over " << res.curve.size()
        << " steps\n";
  }
  out << "checkpoint -> " << cfg.paths.checkpoint.string() << "\n";
}

void eval(const config::RunConfig& cfg, std::ostream& out) {
  const auto g = load_graphs(cfg);
  const auto w = load_world(cfg);
  const auto scenes = load_split(cfg, false);
  require_file(cfg.paths.checkpoint, "checkpoint");
  const auto spec = pipeline::spec_for(cfg, scenes, cfg.world.classes);
  const auto params = checkpoint::load(cfg.paths.checkpoint, spec);
  const auto inputs = train::make_graph_inputs(g.co, g.size, cfg.training.k);
  const auto preds = evaluate::predict(spec, params, inputs, scenes);
  const auto e = evaluate::evaluate(preds, scenes, cfg.world.classes, w.hard_classes(), cfg.eval.bins);
  evaluate::write_reports(cfg.paths.report_dir, e);
  out << "mAP " << fixed(e.overall.map) << "  AP50 " << fixed(e.overall.ap50) << "  AP75 " << fixed(e.overall.ap75)
      << "\nhard-class AP50 " << fixed(e.hard_ap50) << "  occlusion AP50 "
      << fixed(e.occlusion ? e.occlusion->ap50 : -1.0) << " (" << e.occlusion_images << " images)  ECE "
      << fixed(e.ece) << "\nreports -> " << cfg.paths.report_dir.string() << "\n";
}

void ablate(const config::RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const auto g = load_graphs(cfg);
  const auto w = load_world(cfg);
  pipeline::WorldData data;
  data.world = w;
  data.train = load_split(cfg, true);
  data.test = load_split(cfg, false);
  const auto perturbed = ablation::perturb(g.co, cfg.ablation);
  print_warnings(perturbed.warnings, err);
  out << "baseline: training with the unmodified co-graph\n";
  const auto base = pipeline::train_and_evaluate(cfg, data, g.co, g.size);
  out << "ablated: " << config::ablation_name(cfg.ablation.mode) << " fraction " << cfg.ablation.fraction << ", "
      << perturbed.changed << " changed, " << perturbed.edges_after << " edges remain\n";
  const auto abl = pipeline::train_and_evaluate(cfg, data, perturbed.co, g.size);
  const auto cmp = ablation::compare(cfg.ablation, perturbed, base.eval, abl.eval);
  const fs::path dir =
      cfg.paths.ablation_dir / (std::string(config::ablation_name(cfg.ablation.mode)) + "_" +
                                fraction_tag(cfg.ablation.fraction));
  dataset::write_text(dir / "comparison.json", ablation::comparison_json(cmp));
  dataset::write_text(dir / "base_summary.json", evaluate::summary_json(base.eval));
  dataset::write_text(dir / "ablated_summary.json", evaluate::summary_json(abl.eval));
  out << "hard-class AP50 " << fixed(cmp.base_hard_ap50) << " -> " << fixed(cmp.ablated_hard_ap50)
      << "\nretained-class AP50 " << fixed(cmp.base_retained_ap50) << " -> " << fixed(cmp.ablated_retained_ap50);
  if (!perturbed.removed_classes.empty()) {
    out << "\nremoved-class AP50 " << fixed(cmp.base_removed_ap50) << " -> " << fixed(cmp.ablated_removed_ap50);
  }
  out << "\ncomparison -> " << (dir / "comparison.json").string() << "\n";
}

void report(const config::RunConfig& cfg, std::ostream& out) {
  const fs::path summary_path = cfg.paths.report_dir / "summary.json";
  require_file(summary_path, "report_dir/summary.json");
  nlohmann::json s;
  try {
    s = nlohmann::json::parse(dataset::read_text(summary_path));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(1, summary_path.string() + ": " + e.what());
  }
  std::ostringstream md;
  md << "# Detection report\n\n| metric | value |\n|---|---|\n";
  for (const char* key : {"map", "ap50", "ap75", "aps", "apm", "apl", "hard_map", "hard_ap50", "occlusion_map",
                          "occlusion_ap50", "ece"}) {
    md << "| " << key << " | " << fixed(s.value(key, -1.0)) << " |\n";
  }
  md << "\nImages: " << s.value("images", 0) << ", detections: " << s.value("detections", 0)
     << ", occluded images: " << s.value("occlusion_images", 0) << "\n";

  if (fs::is_regular_file(cfg.paths.loss_csv)) {
    std::istringstream csv(dataset::read_text(cfg.paths.loss_csv));
    std::string line, first, last;
    std::getline(csv, line);
    while (std::getline(csv, line)) {
      if (line.empty()) continue;
      if (first.empty()) first = line;
      last = line;
    }
    if (!first.empty()) md << "\nLoss curve (step,total,cls,box,aux,pseudo): first `" << first << "`, last `" << last << "`\n";
  }

  if (fs::is_directory(cfg.paths.ablation_dir)) {
    std::vector<fs::path> runs;
    for (const auto& entry : fs::directory_iterator(cfg.paths.ablation_dir))
      if (fs::is_regular_file(entry.path() / "comparison.json")) runs.push_back(entry.path());
    std::sort(runs.begin(), runs.end());
    if (!runs.empty()) {
      md << "\n## Co-graph ablations\n\n| run | hard AP50 base | hard AP50 ablated | retained AP50 base | retained AP50 "
            "ablated |\n|---|---|---|---|---|\n";
      for (const auto& r : runs) {
        const auto c = nlohmann::json::parse(dataset::read_text(r / "comparison.json"));
        md << "| " << r.filename().string() << " | " << fixed(c["base"]["hard_ap50"].get<double>()) << " | "
           << fixed(c["ablated"]["hard_ap50"].get<double>()) << " | "
           << fixed(c["base"]["retained_ap50"].get<double>()) << " | "
           << fixed(c["ablated"]["retained_ap50"].get<double>()) << " |\n";
      }
    }
  }
  dataset::write_text(cfg.paths.report_dir / "report.md", md.str());
  out << md.str();
}

std::vector<std::string_view> names() { return {"gen-world", "build-graphs", "train", "eval", "ablate", "report"}; }

void dispatch(std::string_view command, const config::RunConfig& cfg, std::ostream& out, std::ostream& err) {
  if (command == "gen-world") return gen_world(cfg, out);
  if (command == "build-graphs") return build_graphs(cfg, out, err);
  if (command == "train") return train(cfg, out);
  if (command == "eval") return eval(cfg, out);
  if (command == "ablate") return ablate(cfg, out, err);
  if (command == "report") return report(cfg, out);
  throw ConfigError("unknown command '" + std::string(command) + "'");
}

int exit_code_for(const std::exception& e) {
  return dynamic_cast<const ConfigError*>(&e) ? kUsageError : kRuntimeFailure;
}

int run(std::string_view command, const std::string& config_path, const std::vector<std::string>& overrides,
        std::ostream& out, std::ostream& err) {
  try {
    const auto cfg = config::load_config(config_path, overrides);
    dispatch(command, cfg, out, err);
    return kOk;
  } catch (const std::exception& e) {
    err << "pgp " << command << ": error: " << e.what() << "\n";
    return exit_code_for(e);
  }
}

}  // namespace pgp::commands
