#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pgp/box.hpp"

namespace pgp::metrics {

using pgp::iou;

struct Detection {
  std::string image;
  Box box;
  std::size_t label = 0;
  double confidence = 0.0;  // [0, 1]
};

struct GroundTruth {
  std::string image;
  Box box;
  std::size_t label = 0;
};

/// IoU thresholds 0.50, 0.55, ..., 0.95.
std::vector<double> coco_thresholds();

/// Area range [lo, hi) of ground truth that counts; the rest is ignored
/// (neither a hit nor a miss), as are unmatched detections outside the range.
struct AreaRange {
  double lo = 0.0;
  double hi = 1e300;
};

/// All-point interpolated AP for one class at one IoU threshold. Detections
/// are ranked by descending confidence (stable), each claims the unmatched
/// ground truth of its image with the highest IoU >= threshold. nullopt when
/// the class has no (non-ignored) ground truth.
std::optional<double> average_precision(std::span<const Detection> detections, std::span<const GroundTruth> truth,
                                        std::size_t cls, double iou_threshold, AreaRange range = {});

struct ReliabilityBin {
  double lower = 0.0;
  double upper = 0.0;
  double mean_confidence = 0.0;
  double accuracy = 0.0;
  std::size_t count = 0;
};

struct Reliability {
  std::vector<ReliabilityBin> bins;
  double ece = 0.0;
};

/// Equal-width bins on [0, 1]; confidence 1 falls in the last bin.
Reliability reliability_bins(std::span<const double> confidences, std::span<const int> correct, std::size_t bins = 10);

/// AP values use -1 for "undefined" (no ground truth in scope), as COCO does.
struct EvalReport {
  double map = -1, ap50 = -1, ap75 = -1, aps = -1, apm = -1, apl = -1;
  std::vector<double> thresholds;
  /// classes x thresholds; row of -1 for classes without ground truth.
  std::vector<std::vector<double>> per_class;
  Reliability reliability;
  std::size_t images = 0;
  std::size_t detections = 0;
  std::size_t ground_truth = 0;

  std::size_t classes() const noexcept { return per_class.size(); }
  /// Mean AP at threshold index `t` over `subset` classes that have ground truth; -1 if none.
  double mean_ap_at(std::size_t t, std::span<const std::size_t> subset) const;
};

/// Full report over `num_classes` classes. `subset`, when nonempty, restricts
/// every mean to those classes. Throws ValidationError on empty ground truth,
/// out-of-range labels, confidences outside [0, 1] or malformed boxes.
EvalReport map_report(std::span<const Detection> detections, std::span<const GroundTruth> truth,
                      std::size_t num_classes, std::span<const std::size_t> subset = {},
                      std::span<const int> correct = {});

/// One row per class x threshold: class,threshold,ap.
std::string report_csv(const EvalReport& r);
std::string report_json(const EvalReport& r);
EvalReport parse_report_json(const std::string& text);

}  // namespace pgp::metrics
