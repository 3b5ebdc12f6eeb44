#pragma once

#include <string>
#include <vector>

#include "pgp/config.hpp"
#include "pgp/evaluate.hpp"
#include "pgp/matrix.hpp"

namespace pgp::ablation {

struct Perturbed {
  num::Matrix co;
  std::size_t edges_before = 0;  // undirected off-diagonal nonzero edges
  std::size_t edges_after = 0;
  std::size_t changed = 0;       // edges removed or added, or nodes removed
  std::vector<std::size_t> removed_classes;
  std::vector<std::string> warnings;
};

/// Co-graph perturbation, symmetric and seeded by `spec.seed`:
///   edge_remove: zero round(f * E) random edges;
///   edge_add:    give round(f * E) random zero pairs a weight resampled from
///                the existing edge weights (capped by the zero pairs available);
///   node_remove: zero the rows and columns of round(f * N) random classes.
/// Throws ConfigError when the result would have no edges left, or when
/// edge_add has no weights to draw from.
Perturbed perturb(const num::Matrix& co, const config::AblationConfig& spec);

struct ClassDelta {
  std::size_t cls = 0;
  double base_ap50 = -1;
  double ablated_ap50 = -1;
  double delta = 0;  // ablated - base; 0 when either is undefined
  bool removed = false;
};

struct Comparison {
  config::AblationConfig spec;
  Perturbed perturbed;
  std::vector<ClassDelta> per_class;
  std::vector<std::size_t> hard_classes;
  std::vector<std::size_t> retained_classes;
  // Means of per-class AP50 over classes with ground truth; -1 when empty.
  double base_hard_ap50 = -1, ablated_hard_ap50 = -1;
  double base_retained_ap50 = -1, ablated_retained_ap50 = -1;
  double base_removed_ap50 = -1, ablated_removed_ap50 = -1;
  double base_retained_map = -1, ablated_retained_map = -1;
};

/// Per-class AP50 deltas and subset means between two evaluations of the
/// same test set. Hard and retained means exclude removed classes.
Comparison compare(const config::AblationConfig& spec, const Perturbed& perturbed,
                   const evaluate::Evaluation& base, const evaluate::Evaluation& ablated);

/// Mean of per-class AP at threshold index `t` over `classes` with ground truth.
double mean_ap(const metrics::EvalReport& r, const std::vector<std::size_t>& classes, std::size_t t);

std::string comparison_json(const Comparison& c);

}  // namespace pgp::ablation
