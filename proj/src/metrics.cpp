#include "pgp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "pgp/error.hpp"
#include "pgp/prescription.hpp"

namespace pgp::metrics {

namespace {

bool in_range(const Box& b, const AreaRange& r) { return b.area() >= r.lo && b.area() < r.hi; }

double area_under_pr(const std::vector<int>& hits, std::size_t positives) {
  const std::size_t n = hits.size();
  std::vector<double> precision(n), recall(n);
  double tp = 0, fp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    (hits[i] ? tp : fp) += 1.0;
    precision[i] = tp / (tp + fp);
    recall[i] = tp / static_cast<double>(positives);
  }
  for (std::size_t i = n; i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double ap = 0.0, prev_recall = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ap += (recall[i] - prev_recall) * precision[i];
    prev_recall = recall[i];
  }
  return ap;
}

const std::array<AreaRange, 3>& size_buckets() {
  static const std::array<AreaRange, 3> b{AreaRange{0.0, 32.0 * 32.0}, AreaRange{32.0 * 32.0, 96.0 * 96.0},
                                          AreaRange{96.0 * 96.0, 1e300}};
  return b;
}

}  // namespace

std::vector<double> coco_thresholds() {
  std::vector<double> t;
  for (int i = 0; i < 10; ++i) t.push_back(0.5 + 0.05 * i);
  return t;
}

std::optional<double> average_precision(std::span<const Detection> detections, std::span<const GroundTruth> truth,
                                        std::size_t cls, double iou_threshold, AreaRange range) {
  std::map<std::string, std::vector<std::size_t>> gt_by_image;
  std::size_t positives = 0;
  for (std::size_t g = 0; g < truth.size(); ++g) {
    if (truth[g].label != cls) continue;
    gt_by_image[truth[g].image].push_back(g);
    if (in_range(truth[g].box, range)) ++positives;
  }
  if (positives == 0) return std::nullopt;

  std::vector<std::size_t> order;
  for (std::size_t d = 0; d < detections.size(); ++d)
    if (detections[d].label == cls) order.push_back(d);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return detections[a].confidence > detections[b].confidence;
  });

  std::vector<bool> taken(truth.size(), false);
  std::vector<int> hits;
  for (std::size_t d : order) {
    const Detection& det = detections[d];
    const auto it = gt_by_image.find(det.image);
    // Prefer in-range ground truth; a match to out-of-range truth is ignored.
    std::ptrdiff_t best = -1, best_ignored = -1;
    double best_iou = iou_threshold, best_ignored_iou = iou_threshold;
    if (it != gt_by_image.end()) {
      for (std::size_t g : it->second) {
        if (taken[g]) continue;
        const double o = iou(det.box, truth[g].box);
        if (in_range(truth[g].box, range)) {
          if (o >= best_iou && (best < 0 || o > best_iou)) {
            best = static_cast<std::ptrdiff_t>(g);
            best_iou = o;
          }
        } else if (o >= best_ignored_iou && (best_ignored < 0 || o > best_ignored_iou)) {
          best_ignored = static_cast<std::ptrdiff_t>(g);
          best_ignored_iou = o;
        }
      }
    }
    if (best >= 0) {
      taken[static_cast<std::size_t>(best)] = true;
      hits.push_back(1);
    } else if (best_ignored >= 0) {
      taken[static_cast<std::size_t>(best_ignored)] = true;
    } else if (in_range(det.box, range)) {
      hits.push_back(0);
    }
  }
  return area_under_pr(hits, positives);
}

Reliability reliability_bins(std::span<const double> confidences, std::span<const int> correct, std::size_t bins) {
  if (bins == 0) throw ValidationError("reliability_bins: need at least one bin");
  if (confidences.size() != correct.size()) {
    throw DimensionError("reliability_bins: " + std::to_string(confidences.size()) + " confidences vs " +
                         std::to_string(correct.size()) + " flags");
  }
  Reliability r;
  r.bins.resize(bins);
  std::vector<double> conf_sum(bins, 0.0), hit_sum(bins, 0.0);
  for (std::size_t b = 0; b < bins; ++b) {
    r.bins[b].lower = static_cast<double>(b) / static_cast<double>(bins);
    r.bins[b].upper = static_cast<double>(b + 1) / static_cast<double>(bins);
  }
  for (std::size_t i = 0; i < confidences.size(); ++i) {
    const double c = confidences[i];
    if (!(c >= 0.0 && c <= 1.0)) throw ValidationError("reliability_bins: confidence outside [0, 1]");
    const std::size_t b = std::min(bins - 1, static_cast<std::size_t>(c * static_cast<double>(bins)));
    conf_sum[b] += c;
    hit_sum[b] += correct[i] ? 1.0 : 0.0;
    ++r.bins[b].count;
  }
  const double total = static_cast<double>(confidences.size());
  for (std::size_t b = 0; b < bins; ++b) {
    ReliabilityBin& bin = r.bins[b];
    if (bin.count == 0) continue;
    const double n = static_cast<double>(bin.count);
    bin.mean_confidence = conf_sum[b] / n;
    bin.accuracy = hit_sum[b] / n;
    r.ece += n / total * std::abs(bin.mean_confidence - bin.accuracy);
  }
  return r;
}

double EvalReport::mean_ap_at(std::size_t t, std::span<const std::size_t> subset) const {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t c : subset) {
    if (c >= per_class.size() || per_class[c][t] < 0.0) continue;
    sum += per_class[c][t];
    ++n;
  }
  return n == 0 ? -1.0 : sum / static_cast<double>(n);
}

EvalReport map_report(std::span<const Detection> detections, std::span<const GroundTruth> truth,
                      std::size_t num_classes, std::span<const std::size_t> subset, std::span<const int> correct) {
  if (truth.empty()) throw ValidationError("map_report: empty ground truth");
  for (const GroundTruth& g : truth) {
    if (g.label >= num_classes) throw ValidationError("map_report: ground-truth label out of range in " + g.image);
    if (!g.box.well_formed()) throw ValidationError("map_report: malformed ground-truth box in " + g.image);
  }
  for (const Detection& d : detections) {
    if (d.label >= num_classes) throw ValidationError("map_report: detection label out of range in " + d.image);
    if (!(d.confidence >= 0.0 && d.confidence <= 1.0)) {
      throw ValidationError("map_report: confidence outside [0, 1] in " + d.image);
    }
    if (!d.box.well_formed()) throw ValidationError("map_report: malformed detection box in " + d.image);
  }
  std::vector<std::size_t> scope;
  if (subset.empty()) {
    scope.resize(num_classes);
    std::iota(scope.begin(), scope.end(), std::size_t{0});
  } else {
    scope.assign(subset.begin(), subset.end());
  }

  EvalReport r;
  r.thresholds = coco_thresholds();
  r.per_class.assign(num_classes, std::vector<double>(r.thresholds.size(), -1.0));
  r.detections = detections.size();
  r.ground_truth = truth.size();
  {
    std::vector<std::string> images;
    for (const GroundTruth& g : truth) images.push_back(g.image);
    std::sort(images.begin(), images.end());
    r.images = static_cast<std::size_t>(std::unique(images.begin(), images.end()) - images.begin());
  }
  for (std::size_t c : scope) {
    if (c >= num_classes) throw ValidationError("map_report: subset class out of range");
    for (std::size_t t = 0; t < r.thresholds.size(); ++t) {
      if (auto ap = average_precision(detections, truth, c, r.thresholds[t])) r.per_class[c][t] = *ap;
    }
  }
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t t = 0; t < r.thresholds.size(); ++t) {
    for (std::size_t c : scope) {
      if (r.per_class[c][t] < 0.0) continue;
      total += r.per_class[c][t];
      ++n;
    }
  }
  r.map = n == 0 ? -1.0 : total / static_cast<double>(n);
  r.ap50 = r.mean_ap_at(0, scope);
  r.ap75 = r.mean_ap_at(5, scope);

  double* bucket_out[3] = {&r.aps, &r.apm, &r.apl};
  for (std::size_t b = 0; b < 3; ++b) {
    double sum = 0.0;
    std::size_t cnt = 0;
    for (std::size_t c : scope)
      for (double thr : r.thresholds)
        if (auto ap = average_precision(detections, truth, c, thr, size_buckets()[b])) {
          sum += *ap;
          ++cnt;
        }
    *bucket_out[b] = cnt == 0 ? -1.0 : sum / static_cast<double>(cnt);
  }
  if (!correct.empty()) {
    std::vector<double> conf;
    for (const Detection& d : detections) conf.push_back(d.confidence);
    r.reliability = reliability_bins(conf, correct);
  }
  return r;
}

std::string report_csv(const EvalReport& r) {
  std::ostringstream out;
  out << "class,threshold,ap\n";
  for (std::size_t c = 0; c < r.per_class.size(); ++c)
    for (std::size_t t = 0; t < r.thresholds.size(); ++t)
      out << c << ',' << graphs::format_double(r.thresholds[t]) << ',' << graphs::format_double(r.per_class[c][t])
          << '\n';
  return out.str();
}

std::string report_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["map"] = r.map;
  j["ap50"] = r.ap50;
  j["ap75"] = r.ap75;
  j["aps"] = r.aps;
  j["apm"] = r.apm;
  j["apl"] = r.apl;
  j["images"] = r.images;
  j["detections"] = r.detections;
  j["ground_truth"] = r.ground_truth;
  j["thresholds"] = r.thresholds;
  j["per_class"] = r.per_class;
  nlohmann::ordered_json bins = nlohmann::ordered_json::array();
  for (const ReliabilityBin& b : r.reliability.bins) {
    bins.push_back({{"lower", b.lower},
                    {"upper", b.upper},
                    {"mean_confidence", b.mean_confidence},
                    {"accuracy", b.accuracy},
                    {"count", b.count}});
  }
  j["reliability"] = {{"ece", r.reliability.ece}, {"bins", bins}};
  return j.dump(2) + "\n";
}

EvalReport parse_report_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(1, std::string("report: ") + e.what());
  }
  try {
    EvalReport r;
    r.map = j.at("map").get<double>();
    r.ap50 = j.at("ap50").get<double>();
    r.ap75 = j.at("ap75").get<double>();
    r.aps = j.at("aps").get<double>();
    r.apm = j.at("apm").get<double>();
    r.apl = j.at("apl").get<double>();
    r.images = j.at("images").get<std::size_t>();
    r.detections = j.at("detections").get<std::size_t>();
    r.ground_truth = j.at("ground_truth").get<std::size_t>();
    r.thresholds = j.at("thresholds").get<std::vector<double>>();
    r.per_class = j.at("per_class").get<std::vector<std::vector<double>>>();
    const auto& rel = j.at("reliability");
    r.reliability.ece = rel.at("ece").get<double>();
    for (const auto& b : rel.at("bins")) {
      r.reliability.bins.push_back({b.at("lower").get<double>(), b.at("upper").get<double>(),
                                    b.at("mean_confidence").get<double>(), b.at("accuracy").get<double>(),
                                    b.at("count").get<std::size_t>()});
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("report: ") + e.what());
  }
}

}  // namespace pgp::metrics
