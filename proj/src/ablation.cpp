#include "pgp/ablation.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "pgp/error.hpp"
#include "pgp/rng.hpp"

namespace pgp::ablation {

using num::Matrix;

namespace {

constexpr std::uint64_t kAblationStream = 0x61626c61ULL;

std::vector<std::pair<std::size_t, std::size_t>> pairs_where(const Matrix& co, bool nonzero) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < co.rows(); ++i)
    for (std::size_t j = i + 1; j < co.cols(); ++j)
      if ((co(i, j) != 0.0) == nonzero) out.emplace_back(i, j);
  return out;
}

std::size_t share(double fraction, std::size_t total) {
  return static_cast<std::size_t>(std::llround(fraction * static_cast<double>(total)));
}

}  // namespace

Perturbed perturb(const Matrix& co, const config::AblationConfig& spec) {
  if (co.rows() != co.cols()) throw DimensionError("perturb: co-graph must be square");
  if (!(spec.fraction >= 0.0 && spec.fraction < 1.0)) throw ConfigError("ablation.fraction must be in [0, 1)");
  Perturbed p;
  p.co = co;
  const auto edges = pairs_where(co, true);
  p.edges_before = edges.size();
  Rng rng(spec.seed, kAblationStream);

  switch (spec.mode) {
    case config::AblationMode::kEdgeRemove: {
      const std::size_t k = share(spec.fraction, edges.size());
      if (k > 0 && k == edges.size()) {
        throw ConfigError("ablation: edge_remove fraction " + std::to_string(spec.fraction) + " removes all " +
                          std::to_string(edges.size()) + " edges");
      }
      auto pick = edges;
      rng.shuffle(pick.begin(), pick.end());
      for (std::size_t e = 0; e < k; ++e) {
        const auto [i, j] = pick[e];
        p.co(i, j) = p.co(j, i) = 0.0;
      }
      p.changed = k;
      break;
    }
    case config::AblationMode::kEdgeAdd: {
      std::size_t k = share(spec.fraction, edges.size());
      if (k == 0) break;
      if (edges.empty()) throw ConfigError("ablation: edge_add needs existing edges to draw weights from");
      auto zeros = pairs_where(co, false);
      if (k > zeros.size()) {
        p.warnings.push_back("edge_add: only " + std::to_string(zeros.size()) + " empty pairs for " +
                             std::to_string(k) + " requested edges");
        k = zeros.size();
      }
      rng.shuffle(zeros.begin(), zeros.end());
      for (std::size_t e = 0; e < k; ++e) {
        const auto [si, sj] = edges[rng.below(edges.size())];
        const auto [i, j] = zeros[e];
        p.co(i, j) = p.co(j, i) = co(si, sj);
      }
      p.changed = k;
      break;
    }
    case config::AblationMode::kNodeRemove: {
      const std::size_t n = co.rows();
      const std::size_t k = share(spec.fraction, n);
      std::vector<std::size_t> order(n);
      for (std::size_t i = 0; i < n; ++i) order[i] = i;
      rng.shuffle(order.begin(), order.end());
      p.removed_classes.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
      std::sort(p.removed_classes.begin(), p.removed_classes.end());
      for (std::size_t c : p.removed_classes)
        for (std::size_t j = 0; j < n; ++j) p.co(c, j) = p.co(j, c) = 0.0;
      p.changed = k;
      break;
    }
  }
  p.edges_after = pairs_where(p.co, true).size();
  if (p.edges_before > 0 && p.edges_after == 0) {
    throw ConfigError("ablation: " + std::string(config::ablation_name(spec.mode)) + " at fraction " +
                      std::to_string(spec.fraction) + " leaves no edges");
  }
  return p;
}

double mean_ap(const metrics::EvalReport& r, const std::vector<std::size_t>& classes, std::size_t t) {
  double sum = 0;
  std::size_t n = 0;
  for (std::size_t c : classes) {
    if (c >= r.per_class.size() || r.per_class[c][t] < 0) continue;
    sum += r.per_class[c][t];
    ++n;
  }
  return n == 0 ? -1.0 : sum / static_cast<double>(n);
}

namespace {

double mean_all_thresholds(const metrics::EvalReport& r, const std::vector<std::size_t>& classes) {
  double sum = 0;
  std::size_t n = 0;
  for (std::size_t t = 0; t < r.thresholds.size(); ++t) {
    const double v = mean_ap(r, classes, t);
    if (v < 0) return -1.0;
    sum += v;
    ++n;
  }
  return n == 0 ? -1.0 : sum / static_cast<double>(n);
}

}  // namespace

Comparison compare(const config::AblationConfig& spec, const Perturbed& perturbed, const evaluate::Evaluation& base,
                   const evaluate::Evaluation& ablated) {
  const std::size_t n = base.overall.classes();
  if (ablated.overall.classes() != n) throw ContractError("compare: class counts differ");
  Comparison c;
  c.spec = spec;
  c.perturbed = perturbed;
  auto removed = [&](std::size_t cls) {
    return std::binary_search(perturbed.removed_classes.begin(), perturbed.removed_classes.end(), cls);
  };
  for (std::size_t cls = 0; cls < n; ++cls) {
    ClassDelta d{cls, base.overall.per_class[cls][0], ablated.overall.per_class[cls][0], 0.0, removed(cls)};
    if (d.base_ap50 >= 0 && d.ablated_ap50 >= 0) d.delta = d.ablated_ap50 - d.base_ap50;
    c.per_class.push_back(d);
    if (!d.removed) c.retained_classes.push_back(cls);
  }
  for (std::size_t h : base.hard_classes)
    if (!removed(h)) c.hard_classes.push_back(h);
  c.base_hard_ap50 = mean_ap(base.overall, c.hard_classes, 0);
  c.ablated_hard_ap50 = mean_ap(ablated.overall, c.hard_classes, 0);
  c.base_retained_ap50 = mean_ap(base.overall, c.retained_classes, 0);
  c.ablated_retained_ap50 = mean_ap(ablated.overall, c.retained_classes, 0);
  c.base_retained_map = mean_all_thresholds(base.overall, c.retained_classes);
  c.ablated_retained_map = mean_all_thresholds(ablated.overall, c.retained_classes);
  c.base_removed_ap50 = mean_ap(base.overall, perturbed.removed_classes, 0);
  c.ablated_removed_ap50 = mean_ap(ablated.overall, perturbed.removed_classes, 0);
  return c;
}

std::string comparison_json(const Comparison& c) {
  nlohmann::ordered_json j;
  j["mode"] = config::ablation_name(c.spec.mode);
  j["fraction"] = c.spec.fraction;
  j["seed"] = c.spec.seed;
  j["edges_before"] = c.perturbed.edges_before;
  j["edges_after"] = c.perturbed.edges_after;
  j["changed"] = c.perturbed.changed;
  j["removed_classes"] = c.perturbed.removed_classes;
  j["retained_classes"] = c.retained_classes;
  j["hard_classes"] = c.hard_classes;
  j["warnings"] = c.perturbed.warnings;
  j["base"] = {{"hard_ap50", c.base_hard_ap50},
               {"retained_ap50", c.base_retained_ap50},
               {"retained_map", c.base_retained_map},
               {"removed_ap50", c.base_removed_ap50}};
  j["ablated"] = {{"hard_ap50", c.ablated_hard_ap50},
                  {"retained_ap50", c.ablated_retained_ap50},
                  {"retained_map", c.ablated_retained_map},
                  {"removed_ap50", c.ablated_removed_ap50}};
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& d : c.per_class) {
    rows.push_back({{"class", d.cls},
                    {"base_ap50", d.base_ap50},
                    {"ablated_ap50", d.ablated_ap50},
                    {"delta", d.delta},
                    {"removed", d.removed}});
  }
  j["per_class"] = rows;
  return j.dump(2) + "\n";
}

}  // namespace pgp::ablation
