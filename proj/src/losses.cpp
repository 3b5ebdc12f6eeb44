#include "pgp/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pgp/error.hpp"

namespace pgp::losses {

using num::Matrix;
using num::Tape;
using num::Var;

namespace {

constexpr double kClip = 1e-12;

std::size_t or_default(std::size_t n, std::size_t fallback) { return n == 0 ? fallback : n; }

// Sum over regions of binary log loss; no gradient where the input was clipped.
Var binary_log_loss_sum(Var prob, std::span<const int> target) {
  const Matrix& p = prob.value();
  if (p.cols() != 1 || p.rows() != target.size()) {
    throw DimensionError("binary log loss: probabilities " + num::shape_str(p) + " for " +
                         std::to_string(target.size()) + " targets");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < p.rows(); ++i) {
    const double q = std::clamp(p(i, 0), kClip, 1.0 - kClip);
    total -= target[i] ? std::log(q) : std::log(1.0 - q);
  }
  std::vector<int> tgt(target.begin(), target.end());
  Tape& t = prob.tape();
  return t.push(Matrix::scalar(total), {prob.id()},
                [tgt = std::move(tgt)](Tape& t, std::uint32_t self) {
                  const auto in = t.input(self, 0);
                  const double g = t.grad(self).item();
                  const Matrix& pv = t.value(in);
                  Matrix d(pv.rows(), 1);
                  for (std::size_t i = 0; i < pv.rows(); ++i) {
                    const double x = pv(i, 0);
                    if (x < kClip || x > 1.0 - kClip) continue;
                    d(i, 0) = g * (tgt[i] ? -1.0 / x : 1.0 / (1.0 - x));
                  }
                  t.accumulate(in, d);
                },
                "binary_log_loss");
}

void check_labels(std::span<const std::size_t> labels, std::size_t regions, std::size_t classes, const char* who) {
  if (labels.size() != regions) {
    throw DimensionError(std::string(who) + ": " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(regions) + " regions");
  }
  for (std::size_t l : labels) {
    if (l >= classes) throw ValidationError(std::string(who) + ": label " + std::to_string(l) + " out of range");
  }
}

}  // namespace

double smooth_l1(double x) {
  const double a = std::abs(x);
  return a < 1.0 ? 0.5 * x * x : a - 0.5;
}

void DetectionTargets::validate(std::size_t regions) const {
  if (objectness.size() != regions) {
    throw DimensionError("DetectionTargets: objectness size " + std::to_string(objectness.size()) + " vs " +
                         std::to_string(regions) + " regions");
  }
  for (int o : objectness) {
    if (o != 0 && o != 1) throw ValidationError("DetectionTargets: objectness must be 0 or 1");
  }
  const bool any_positive = std::any_of(objectness.begin(), objectness.end(), [](int o) { return o == 1; });
  if (any_positive && (box_targets.rows() != regions || box_targets.cols() != 4)) {
    throw DimensionError("DetectionTargets: box targets " + num::shape_str(box_targets) + ", expected " +
                         std::to_string(regions) + "x4");
  }
  if (!labels.empty() && labels.size() != regions) {
    throw DimensionError("DetectionTargets: label count does not match regions");
  }
}

Var box_loss(Var box_deltas, const Matrix& box_targets, std::span<const int> objectness, double lambda,
             std::size_t n_box) {
  const std::size_t m = box_deltas.rows();
  if (box_deltas.cols() != 4 || objectness.size() != m) {
    throw DimensionError("box_loss: deltas " + num::shape_str(box_deltas.value()) + " for " +
                         std::to_string(objectness.size()) + " regions");
  }
  Tape& t = box_deltas.tape();
  Matrix gate(m, 4);
  Matrix target(m, 4);
  for (std::size_t i = 0; i < m; ++i) {
    if (!objectness[i]) continue;
    for (std::size_t c = 0; c < 4; ++c) {
      gate(i, c) = 1.0;
      target(i, c) = box_targets(i, c);
    }
  }
  const Var diff = num::mul(num::sub(box_deltas, t.constant(std::move(target))), t.constant(std::move(gate)));
  return num::scale(num::sum(num::smooth_l1(diff)), lambda / static_cast<double>(or_default(n_box, m)));
}

Var rpn_loss(Var objectness_prob, Var box_deltas, const DetectionTargets& targets, double lambda, std::size_t n_cls,
             std::size_t n_box) {
  const std::size_t m = objectness_prob.rows();
  targets.validate(m);
  const Var cls = num::scale(binary_log_loss_sum(objectness_prob, targets.objectness),
                             1.0 / static_cast<double>(or_default(n_cls, m)));
  const bool any_positive =
      std::any_of(targets.objectness.begin(), targets.objectness.end(), [](int o) { return o == 1; });
  if (!any_positive) return cls;
  return num::add(cls, box_loss(box_deltas, targets.box_targets, targets.objectness, lambda, n_box));
}

double rpn_loss(const Matrix& objectness_prob, const Matrix& box_deltas, const DetectionTargets& targets,
                double lambda, std::size_t n_cls, std::size_t n_box) {
  Tape t;
  return rpn_loss(t.constant(objectness_prob), t.constant(box_deltas), targets, lambda, n_cls, n_box).value().item();
}

Var output_cls_loss(Var scores, std::span<const std::size_t> labels) {
  check_labels(labels, scores.rows(), scores.cols(), "output_cls_loss");
  return num::softmax_cross_entropy(scores, labels);
}

double output_cls_loss(const Matrix& scores, std::span<const std::size_t> labels) {
  Tape t;
  return output_cls_loss(t.constant(scores), labels).value().item();
}

NeighborSets build_neighbor_sets(const Matrix& co_graph, std::size_t k, std::vector<std::string>* warnings) {
  const std::size_t n = co_graph.rows();
  if (co_graph.cols() != n || n == 0) throw DimensionError("build_neighbor_sets: co-graph " + num::shape_str(co_graph));
  NeighborSets sets;
  sets.k = k;
  sets.positives.resize(n);
  sets.negatives.resize(n);
  const std::size_t want = k + 1;
  const std::size_t take = std::min(want, n - 1);
  if (take < want && warnings) {
    warnings->push_back("neighbor sets truncated to " + std::to_string(take) + " labels (k+1=" +
                        std::to_string(want) + ", N=" + std::to_string(n) + ")");
  }
  for (std::size_t l = 0; l < n; ++l) {
    std::vector<std::size_t> others;
    for (std::size_t j = 0; j < n; ++j)
      if (j != l) others.push_back(j);
    std::vector<std::size_t> desc = others;
    std::stable_sort(desc.begin(), desc.end(),
                     [&](std::size_t a, std::size_t b) { return co_graph(l, a) > co_graph(l, b); });
    std::vector<std::size_t> asc = others;
    std::stable_sort(asc.begin(), asc.end(),
                     [&](std::size_t a, std::size_t b) { return co_graph(l, a) < co_graph(l, b); });
    sets.positives[l].assign(desc.begin(), desc.begin() + static_cast<std::ptrdiff_t>(take));
    sets.negatives[l].assign(asc.begin(), asc.begin() + static_cast<std::ptrdiff_t>(take));
  }
  return sets;
}

Var aux_loss(Var probs, std::span<const std::size_t> labels, const NeighborSets& sets) {
  const std::size_t m = probs.rows();
  const std::size_t n = probs.cols();
  if (sets.classes() != n) {
    throw DimensionError("aux_loss: neighbor sets cover " + std::to_string(sets.classes()) + " classes, probs have " +
                         std::to_string(n));
  }
  check_labels(labels, m, n, "aux_loss");
  Tape& t = probs.tape();
  // presence(l) = 1 - prod_m (1 - p_m(l)): probability label l is detected somewhere.
  const Var presence = num::one_minus(num::col_prod(num::one_minus(probs)));
  Matrix pos_sel(n, m);
  Matrix neg_sel(n, m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t l : sets.positives[labels[i]]) pos_sel(l, i) += 1.0;
    for (std::size_t l : sets.negatives[labels[i]]) neg_sel(l, i) += 1.0;
  }
  const Var s_pos = num::matmul(presence, t.constant(std::move(pos_sel)));
  const Var s_neg = num::matmul(presence, t.constant(std::move(neg_sel)));
  const Var anchor = num::transpose(num::pick(probs, labels));
  return num::sub(num::sum(num::mul(anchor, s_pos)), num::sum(num::mul(num::one_minus(anchor), s_neg)));
}

double aux_loss(const Matrix& probs, std::span<const std::size_t> labels, const NeighborSets& sets) {
  Tape t;
  return aux_loss(t.constant(probs), labels, sets).value().item();
}

}  // namespace pgp::losses
