#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "pgp/matrix.hpp"
#include "pgp/tape.hpp"

namespace pgp::losses {

/// 0.5 x^2 for |x| < 1, |x| - 0.5 otherwise.
double smooth_l1(double x);

/// Per-region supervision. box_targets rows are only read where objectness is 1.
struct DetectionTargets {
  std::vector<int> objectness;       // p*_i in {0, 1}
  num::Matrix box_targets;           // M x 4 encoded deltas
  std::vector<std::size_t> labels;   // class per region

  /// Throws DimensionError/ValidationError if sizes disagree with `regions`.
  void validate(std::size_t regions) const;
};

/// Binary log loss averaged over n_cls plus lambda / n_box times the gated
/// smooth-L1 box term. Probabilities are clipped to [1e-12, 1 - 1e-12].
/// n_cls / n_box of 0 mean "number of regions".
num::Var rpn_loss(num::Var objectness_prob, num::Var box_deltas, const DetectionTargets& targets, double lambda,
                  std::size_t n_cls = 0, std::size_t n_box = 0);
double rpn_loss(const num::Matrix& objectness_prob, const num::Matrix& box_deltas, const DetectionTargets& targets,
                double lambda, std::size_t n_cls = 0, std::size_t n_box = 0);

/// The box term alone: lambda / n_box * sum_i p*_i sum_c smoothL1(t_ic - t*_ic).
num::Var box_loss(num::Var box_deltas, const num::Matrix& box_targets, std::span<const int> objectness, double lambda,
                  std::size_t n_box = 0);

/// Mean softmax cross-entropy of M x N scores.
num::Var output_cls_loss(num::Var scores, std::span<const std::size_t> labels);
double output_cls_loss(const num::Matrix& scores, std::span<const std::size_t> labels);

/// Per anchor label: the k+1 strongest and k+1 weakest co-graph neighbors,
/// never including the label itself. Ties go to the lower class index.
struct NeighborSets {
  std::size_t k = 0;
  std::vector<std::vector<std::size_t>> positives;
  std::vector<std::vector<std::size_t>> negatives;

  std::size_t classes() const noexcept { return positives.size(); }
};

/// Sets shrink to N - 1 labels when k + 1 > N - 1; a warning is appended then.
NeighborSets build_neighbor_sets(const num::Matrix& co_graph, std::size_t k,
                                 std::vector<std::string>* warnings = nullptr);

/// Sum over anchors i of
///   p_i(l_i) * sum_{pos} [1 - prod_m (1 - p_m(l_pos))]
///   - (1 - p_i(l_i)) * sum_{neg} [1 - prod_m (1 - p_m(l_neg))],
/// products over every region of the image, the anchor included.
/// This is the quantity to maximize; training adds -lambda_aux times it.
num::Var aux_loss(num::Var probs, std::span<const std::size_t> labels, const NeighborSets& sets);
double aux_loss(const num::Matrix& probs, std::span<const std::size_t> labels, const NeighborSets& sets);

}  // namespace pgp::losses
