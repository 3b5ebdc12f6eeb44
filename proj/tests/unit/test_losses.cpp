#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "pgp/error.hpp"
#include "pgp/losses.hpp"
#include "test_support.hpp"

using pgp::num::Matrix;
using pgp::num::Tape;
using pgp::num::Var;
namespace num = pgp::num;
namespace lo = pgp::losses;
namespace pt = pgp::testing;

namespace {

double oracle_smooth_l1(double x) { return std::abs(x) < 1.0 ? 0.5 * x * x : std::abs(x) - 0.5; }

// Independent summation of the RPN objective.
double rpn_oracle(const Matrix& p, const Matrix& t, const lo::DetectionTargets& tg, double lambda) {
  const std::size_t m = p.rows();
  double cls = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double q = std::min(std::max(p(i, 0), 1e-12), 1.0 - 1e-12);
    cls += tg.objectness[i] ? -std::log(q) : -std::log(1.0 - q);
  }
  double box = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (!tg.objectness[i]) continue;
    for (std::size_t c = 0; c < 4; ++c) box += oracle_smooth_l1(t(i, c) - tg.box_targets(i, c));
  }
  return cls / static_cast<double>(m) + lambda * box / static_cast<double>(m);
}

double ce_oracle(const Matrix& s, const std::vector<std::size_t>& labels) {
  double total = 0.0;
  for (std::size_t i = 0; i < s.rows(); ++i) {
    double z = 0.0;
    for (std::size_t j = 0; j < s.cols(); ++j) z += std::exp(s(i, j));
    total -= std::log(std::exp(s(i, labels[i])) / z);
  }
  return total / static_cast<double>(s.rows());
}

Matrix random_probs(std::size_t m, std::size_t n, std::mt19937_64& rng) {
  return num::softmax_rows(pt::random_matrix(m, n, rng, -2, 2));
}

}  // namespace

TEST_CASE("smooth_l1: plug-in values and continuity") {
  CHECK(lo::smooth_l1(0.5) == 0.125);
  CHECK(lo::smooth_l1(2.0) == 1.5);
  CHECK(lo::smooth_l1(-2.0) == 1.5);
  CHECK(lo::smooth_l1(1.0) == 0.5);
  CHECK(lo::smooth_l1(-1.0) == 0.5);
  CHECK(std::abs(lo::smooth_l1(1.0 - 1e-12) - 0.5) < 1e-11);
  // C1 at the kink: one-sided slopes agree
  const double h = 1e-7;
  const double left = (lo::smooth_l1(1.0) - lo::smooth_l1(1.0 - h)) / h;
  const double right = (lo::smooth_l1(1.0 + h) - lo::smooth_l1(1.0)) / h;
  CHECK(std::abs(left - right) < 1e-6);
}

TEST_CASE("rpn_loss: perfect predictions, lone negative, oracle") {
  lo::DetectionTargets tg;
  tg.objectness = {1, 0, 1};
  tg.box_targets = Matrix::from_rows({{0.1, -0.2, 0.3, 0.0}, {9, 9, 9, 9}, {-1.5, 2.0, 0.0, 0.4}});
  const Matrix perfect_p = Matrix::from_rows({{1.0}, {0.0}, {1.0}});
  Matrix perfect_t = tg.box_targets;
  CHECK(lo::rpn_loss(perfect_p, perfect_t, tg, 1.0) <= 1e-10);

  lo::DetectionTargets neg;
  neg.objectness = {0};
  CHECK(lo::rpn_loss(Matrix::from_rows({{0.5}}), Matrix(1, 4), neg, 1.0) == doctest::Approx(std::log(2.0)));
  CHECK(lo::rpn_loss(Matrix::from_rows({{0.5}}), Matrix(1, 4), neg, 1.0, 4) ==
        doctest::Approx(std::log(2.0) / 4.0));

  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t m = 2 + trial % 6;
    lo::DetectionTargets r;
    for (std::size_t i = 0; i < m; ++i) r.objectness.push_back(static_cast<int>(rng() % 2));
    r.box_targets = pt::random_matrix(m, 4, rng, -2, 2);
    const Matrix p = pt::random_matrix(m, 1, rng, 0.01, 0.99);
    const Matrix t = pt::random_matrix(m, 4, rng, -2, 2);
    CHECK(std::abs(lo::rpn_loss(p, t, r, 0.7) - rpn_oracle(p, t, r, 0.7)) < 1e-10);
  }
}

TEST_CASE("rpn_loss: box term vanishes without positives; clipping keeps it finite") {
  std::mt19937_64 rng(2);
  lo::DetectionTargets tg;
  tg.objectness = {0, 0};
  const Matrix p = Matrix::from_rows({{0.3}, {0.6}});
  const double base = lo::rpn_loss(p, Matrix(2, 4), tg, 1.0);
  CHECK(lo::rpn_loss(p, pt::random_matrix(2, 4, rng, -5, 5), tg, 1.0) == base);
  Tape t;
  const Var d = t.leaf(pt::random_matrix(2, 4, rng));
  CHECK(lo::box_loss(d, Matrix(2, 4), tg.objectness, 1.0).value().item() == 0.0);

  lo::DetectionTargets wrong;
  wrong.objectness = {1};
  wrong.box_targets = Matrix(1, 4);
  const double clipped = lo::rpn_loss(Matrix::from_rows({{0.0}}), Matrix(1, 4), wrong, 1.0);
  CHECK(std::isfinite(clipped));
  CHECK(clipped == doctest::Approx(-std::log(1e-12)));

  lo::DetectionTargets bad;
  bad.objectness = {2};
  CHECK_THROWS_AS(lo::rpn_loss(Matrix(1, 1, 0.5), Matrix(1, 4), bad, 1.0), pgp::ValidationError);
}

TEST_CASE("rpn_loss: gradient matches finite differences") {
  std::mt19937_64 rng(17);
  lo::DetectionTargets tg;
  tg.objectness = {1, 0, 1, 1};
  tg.box_targets = pt::random_matrix(4, 4, rng, -2, 2);
  const Matrix p0 = pt::random_matrix(4, 1, rng, 0.1, 0.9);
  const Matrix d0 = pt::random_matrix(4, 4, rng, -2, 2);
  Tape t;
  const Var p = t.leaf(p0);
  const Var d = t.leaf(d0);
  t.backward(lo::rpn_loss(p, d, tg, 1.3));
  CHECK(pt::relative_error(p.grad(), pt::finite_diff([&](const Matrix& x) { return lo::rpn_loss(x, d0, tg, 1.3); },
                                                     p0)) < 1e-6);
  CHECK(pt::relative_error(d.grad(), pt::finite_diff([&](const Matrix& x) { return lo::rpn_loss(p0, x, tg, 1.3); },
                                                     d0)) < 1e-6);
}

TEST_CASE("output_cls_loss: forced, plug-in, oracle") {
  const std::vector<std::size_t> labels{1, 0};
  Matrix onehot(2, 3, -30.0);
  onehot(0, 1) = 30.0;
  onehot(1, 0) = 30.0;
  CHECK(lo::output_cls_loss(onehot, labels) < 1e-20);
  CHECK(lo::output_cls_loss(Matrix(3, 4, 0.2), std::vector<std::size_t>{0, 3, 2}) ==
        doctest::Approx(std::log(4.0)).epsilon(1e-14));

  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix s = pt::random_matrix(5, 6, rng, -4, 4);
    std::vector<std::size_t> l;
    for (int i = 0; i < 5; ++i) l.push_back(rng() % 6);
    CHECK(std::abs(lo::output_cls_loss(s, l) - ce_oracle(s, l)) < 1e-10);
  }
  CHECK_THROWS_AS(lo::output_cls_loss(Matrix(2, 3), std::vector<std::size_t>{0, 3}), pgp::ValidationError);
  CHECK_THROWS_AS(lo::output_cls_loss(Matrix(2, 3), std::vector<std::size_t>{0}), pgp::DimensionError);
}

TEST_CASE("neighbor sets: ranking, ties, self exclusion, truncation") {
  const Matrix w = Matrix::from_rows({{5.0, 0.9, 0.1, 0.0, 0.0},
                                      {0.9, 5.0, 0.2, 0.3, 0.3},
                                      {0.1, 0.2, 5.0, 0.8, 0.0},
                                      {0.0, 0.3, 0.8, 5.0, 0.0},
                                      {0.0, 0.3, 0.0, 0.0, 5.0}});
  const lo::NeighborSets s = lo::build_neighbor_sets(w, 1);
  CHECK(s.positives[0] == std::vector<std::size_t>{1, 2});
  CHECK(s.negatives[0] == std::vector<std::size_t>{3, 4});
  CHECK(s.positives[1] == std::vector<std::size_t>{0, 3});
  CHECK(s.negatives[1] == std::vector<std::size_t>{2, 3});
  CHECK(s.positives[4] == std::vector<std::size_t>{1, 0});
  CHECK(s.negatives[4] == std::vector<std::size_t>{0, 2});
  for (std::size_t l = 0; l < 5; ++l) {
    for (std::size_t j : s.positives[l]) CHECK(j != l);
    for (std::size_t j : s.negatives[l]) CHECK(j != l);
  }

  std::vector<std::string> warnings;
  const lo::NeighborSets t = lo::build_neighbor_sets(w, 6, &warnings);
  CHECK(warnings.size() == 1);
  CHECK(t.positives[2].size() == 4);
  CHECK(lo::build_neighbor_sets(Matrix(1, 1, 1.0), 2, &warnings).positives[0].empty());
}

TEST_CASE("aux_loss: forced extremes") {
  // strongest neighbors of label i are i+1, i+2 (cyclic); weakest are i-1, i-2.
  const std::size_t n = 6, k = 1;
  Matrix w(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) w(i, j) = static_cast<double>((j + n - i) % n == 0 ? 10 : n - (j + n - i) % n);
  const lo::NeighborSets s = lo::build_neighbor_sets(w, k);
  REQUIRE(s.positives[0] == std::vector<std::size_t>{1, 2});

  // anchor region 0 (label 0) certain; regions 1 and 2 certainly show its positives
  const std::vector<std::size_t> labels{0, 1, 2};
  Matrix p(3, n);
  p(0, 0) = 1.0;
  p(1, 1) = 1.0;
  p(2, 2) = 1.0;
  // per-anchor: label 0 -> k+1; label 1 positives {2,3}: only 2 present -> 1; label 2 positives {3,4}: 0
  CHECK(lo::aux_loss(p, labels, s) == doctest::Approx(2.0 + 1.0 + 0.0));

  // anchor with p_i(l_i) = 0 and every negative present
  const std::vector<std::size_t> one{0};
  Matrix q1(1, n);
  for (std::size_t l : s.negatives[0]) q1(0, l) = 1.0;
  CHECK(lo::aux_loss(q1, one, s) == doctest::Approx(-static_cast<double>(k + 1)));
}

TEST_CASE("aux_loss: M=2, N=4, k=0 symbolic expansion") {
  const Matrix w = Matrix::from_rows({{7.0, 0.9, 0.1, 0.0},
                                      {0.9, 7.0, 0.2, 0.3},
                                      {0.1, 0.2, 7.0, 0.8},
                                      {0.0, 0.3, 0.8, 7.0}});
  const lo::NeighborSets s = lo::build_neighbor_sets(w, 0);
  // pos(0)={1}, neg(0)={3}, pos(2)={3}, neg(2)={0}
  const Matrix p = Matrix::from_rows({{0.6, 0.2, 0.1, 0.1}, {0.1, 0.3, 0.5, 0.1}});
  const std::vector<std::size_t> labels{0, 2};
  const double a0 = 0.6, a1 = 0.5;
  const double r1 = 1.0 - (1.0 - 0.2) * (1.0 - 0.3);
  const double r3 = 1.0 - (1.0 - 0.1) * (1.0 - 0.1);
  const double r0 = 1.0 - (1.0 - 0.6) * (1.0 - 0.1);
  const double expect = a0 * r1 - (1.0 - a0) * r3 + a1 * r3 - (1.0 - a1) * r0;
  CHECK(std::abs(lo::aux_loss(p, labels, s) - expect) < 1e-15);
}

TEST_CASE("aux_loss: gradient and directional monotonicity") {
  std::mt19937_64 rng(23);
  const std::size_t n = 8;
  Matrix w = pt::random_matrix(n, n, rng, 0, 1);
  w = num::add(w, num::transpose(w));
  const lo::NeighborSets s = lo::build_neighbor_sets(w, 2);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix p0 = random_probs(4, n, rng);
    std::vector<std::size_t> labels;
    for (int i = 0; i < 4; ++i) labels.push_back(rng() % n);
    Tape t;
    const Var p = t.leaf(p0);
    t.backward(lo::aux_loss(p, labels, s));
    const Matrix fd = pt::finite_diff([&](const Matrix& x) { return lo::aux_loss(x, labels, s); }, p0);
    CHECK(pt::relative_error(p.grad(), fd) < 1e-6);

    // single anchor label: its positives never overlap its negatives when N-1 >= 2(k+1)
    const std::size_t l = labels[0];
    const std::vector<std::size_t> same(4, l);
    const double base = lo::aux_loss(p0, same, s);
    for (std::size_t pos : s.positives[l]) {
      for (std::size_t m = 0; m < 4; ++m) {
        Matrix bumped = p0;
        bumped(m, pos) = std::min(1.0, bumped(m, pos) + 0.05);
        CHECK(lo::aux_loss(bumped, same, s) >= base - 1e-15);
      }
    }
  }
}
