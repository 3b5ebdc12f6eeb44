#include "pgp/evaluate.hpp"

#include <algorithm>

#include "json.hpp"
#include "pgp/dataset.hpp"
#include "pgp/error.hpp"

namespace pgp::evaluate {

using num::Matrix;

Predictions predict(const model::ModelSpec& spec, const model::Params& params, const model::GraphInputs& graphs,
                    const std::vector<world::Scene>& scenes) {
  Predictions out;
  for (const auto& s : scenes) {
    num::Tape tape;
    const auto pv = model::bind(tape, params, false);
    const auto fo = model::forward(spec, pv, s.features, graphs);
    const Matrix& scores = fo.scores.value();
    const Matrix& deltas = fo.deltas.value();
    for (std::size_t i = 0; i < s.size(); ++i) {
      const auto row = scores.row(i);
      const std::size_t best = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
      double z = 0;
      for (double v : row) z += std::exp(v - row[best]);
      const Box b = apply_deltas(s.proposals[i], {deltas(i, 0), deltas(i, 1), deltas(i, 2), deltas(i, 3)});
      out.detections.push_back({s.image, b, best, 1.0 / z});
      out.correct.push_back(best == s.labels[i] ? 1 : 0);
    }
  }
  return out;
}

Predictions oracle_predictions(const std::vector<world::Scene>& scenes) {
  Predictions out;
  for (const auto& s : scenes) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      out.detections.push_back({s.image, s.boxes[i], s.labels[i], 1.0});
      out.correct.push_back(1);
    }
  }
  return out;
}

namespace {

metrics::EvalReport report_for(const Predictions& p, const std::vector<metrics::GroundTruth>& gts, std::size_t n,
                               std::span<const std::size_t> subset, std::size_t bins) {
  metrics::EvalReport r = metrics::map_report(p.detections, gts, n, subset, p.correct);
  std::vector<double> conf;
  conf.reserve(p.detections.size());
  for (const auto& d : p.detections) conf.push_back(d.confidence);
  r.reliability = metrics::reliability_bins(conf, p.correct, bins);
  return r;
}

}  // namespace

Evaluation evaluate(const Predictions& preds, const std::vector<world::Scene>& scenes, std::size_t num_classes,
                    const std::vector<std::size_t>& hard_classes, std::size_t bins,
                    const std::vector<std::size_t>& classes) {
  if (preds.detections.size() != preds.correct.size()) throw ContractError("evaluate: correctness flags misaligned");
  std::vector<metrics::GroundTruth> gts;
  std::vector<std::string> occluded_images;
  for (const auto& s : scenes) {
    for (std::size_t i = 0; i < s.size(); ++i) gts.push_back({s.image, s.boxes[i], s.labels[i]});
    if (world::has_heavy_overlap(s.boxes)) occluded_images.push_back(s.image);
  }
  Evaluation e;
  e.hard_classes = hard_classes;
  e.overall = report_for(preds, gts, num_classes, classes, bins);
  e.ece = e.overall.reliability.ece;
  std::vector<std::size_t> hard = hard_classes;
  if (!classes.empty()) {
    std::erase_if(hard, [&](std::size_t c) { return std::find(classes.begin(), classes.end(), c) == classes.end(); });
  }
  if (!hard.empty()) {
    e.hard = report_for(preds, gts, num_classes, hard, bins);
    e.hard_ap50 = e.hard.ap50;
  }
  std::sort(occluded_images.begin(), occluded_images.end());
  e.occlusion_images = occluded_images.size();
  if (!occluded_images.empty()) {
    auto in_subset = [&](const std::string& im) {
      return std::binary_search(occluded_images.begin(), occluded_images.end(), im);
    };
    Predictions sub;
    for (std::size_t i = 0; i < preds.detections.size(); ++i) {
      if (!in_subset(preds.detections[i].image)) continue;
      sub.detections.push_back(preds.detections[i]);
      sub.correct.push_back(preds.correct[i]);
    }
    std::vector<metrics::GroundTruth> sub_gts;
    for (const auto& g : gts)
      if (in_subset(g.image)) sub_gts.push_back(g);
    e.occlusion = report_for(sub, sub_gts, num_classes, classes, bins);
  }
  return e;
}

std::string summary_json(const Evaluation& e) {
  nlohmann::ordered_json j;
  j["map"] = e.overall.map;
  j["ap50"] = e.overall.ap50;
  j["ap75"] = e.overall.ap75;
  j["aps"] = e.overall.aps;
  j["apm"] = e.overall.apm;
  j["apl"] = e.overall.apl;
  j["ece"] = e.ece;
  j["hard_classes"] = e.hard_classes;
  j["hard_map"] = e.hard_classes.empty() ? -1.0 : e.hard.map;
  j["hard_ap50"] = e.hard_ap50;
  j["occlusion_images"] = e.occlusion_images;
  j["occlusion_map"] = e.occlusion ? e.occlusion->map : -1.0;
  j["occlusion_ap50"] = e.occlusion ? e.occlusion->ap50 : -1.0;
  j["images"] = e.overall.images;
  j["detections"] = e.overall.detections;
  return j.dump(2) + "\n";
}

void write_reports(const std::filesystem::path& dir, const Evaluation& e) {
  dataset::write_text(dir / "overall.json", metrics::report_json(e.overall));
  dataset::write_text(dir / "overall.csv", metrics::report_csv(e.overall));
  if (!e.hard_classes.empty()) dataset::write_text(dir / "hard.json", metrics::report_json(e.hard));
  if (e.occlusion) dataset::write_text(dir / "occlusion.json", metrics::report_json(*e.occlusion));
  dataset::write_text(dir / "summary.json", summary_json(e));
}

}  // namespace pgp::evaluate
