#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pgp/metrics.hpp"
#include "pgp/model.hpp"
#include "pgp/world.hpp"

namespace pgp::evaluate {

/// Detections in scene order; `correct[i]` says whether detection i carries
/// the label of the ground truth its proposal was generated from.
struct Predictions {
  std::vector<metrics::Detection> detections;
  std::vector<int> correct;
};

/// One detection per proposal: the top-scoring class, its softmax probability
/// as confidence, and the proposal moved by the predicted deltas.
Predictions predict(const model::ModelSpec& spec, const model::Params& params, const model::GraphInputs& graphs,
                    const std::vector<world::Scene>& scenes);

/// Ground truth echoed back as confidence-1 detections.
Predictions oracle_predictions(const std::vector<world::Scene>& scenes);

struct Evaluation {
  metrics::EvalReport overall;
  metrics::EvalReport hard;                      // means over hard-group classes
  std::optional<metrics::EvalReport> occlusion;  // images with a ground-truth pair at IoU > 0.3
  std::vector<std::size_t> hard_classes;
  std::size_t occlusion_images = 0;
  double hard_ap50 = -1;  // mean AP50 over hard classes with ground truth
  double ece = 0;
};

/// `classes` restricts the overall mean when nonempty (used for node-removal runs).
Evaluation evaluate(const Predictions& preds, const std::vector<world::Scene>& scenes, std::size_t num_classes,
                    const std::vector<std::size_t>& hard_classes, std::size_t bins,
                    const std::vector<std::size_t>& classes = {});

/// Compact headline numbers, fixed key order.
std::string summary_json(const Evaluation& e);

/// overall.json/.csv, hard.json, occlusion.json (when defined), summary.json.
void write_reports(const std::filesystem::path& dir, const Evaluation& e);

}  // namespace pgp::evaluate
