#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pgp/matrix.hpp"

namespace pgp::num {

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid as long as the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  std::uint32_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

  const Matrix& value() const;
  const Matrix& grad() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  bool requires_grad() const;

 private:
  Tape* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

/// Define-by-run reverse-mode tape. Nodes are appended in evaluation order, so
/// inputs always precede their consumers. Single-owner; not thread-safe.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::uint32_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  /// Tracked leaf: receives a gradient on backward().
  Var leaf(Matrix value, std::string name = {});
  /// Untracked constant.
  Var constant(Matrix value);

  /// Records an op result. The node requires grad iff any input does; `fn` is
  /// dropped otherwise. Throws NumericError on non-finite output.
  Var push(Matrix value, std::vector<std::uint32_t> inputs, BackwardFn fn, const char* op);

  /// Reverse sweep from a 1x1 node. Clears previously accumulated gradients.
  void backward(Var loss);

  const Matrix& value(std::uint32_t id) const { return nodes_[id].value; }
  const Matrix& grad(std::uint32_t id) const;
  bool requires_grad(std::uint32_t id) const { return nodes_[id].requires_grad; }
  std::uint32_t input(std::uint32_t id, std::size_t k) const { return nodes_[id].inputs[k]; }
  const std::string& name(std::uint32_t id) const { return nodes_[id].name; }
  const char* op(std::uint32_t id) const { return nodes_[id].op; }

  /// Gradient accumulator for `id`, allocated (zeroed) on first use.
  Matrix& grad_acc(std::uint32_t id);
  /// Adds `g` into the accumulator of `id` if that node requires grad.
  void accumulate(std::uint32_t id, const Matrix& g);

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::vector<std::uint32_t> inputs;
    BackwardFn backward;
    bool requires_grad = false;
    const char* op = "";
    std::string name;
  };
  std::vector<Node> nodes_;
  Matrix empty_;
};

// Differentiable ops. All inputs must live on the same tape.

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
/// s * a where s is a 1x1 node.
Var scale_by(Var s, Var a);
/// 1 - a elementwise.
Var one_minus(Var a);
/// a + row, broadcasting the 1xC row over every row of a.
Var add_row(Var a, Var row);
Var relu(Var a);
Var sigmoid(Var a);
Var log(Var a);
Var sqrt(Var a);
Var softmax_rows(Var a);
/// Entry (r, c) as a 1x1 node.
Var element(Var a, std::size_t r, std::size_t c);
/// Mx1 vector of a(i, index[i]).
Var pick(Var a, std::span<const std::size_t> index);
/// Columns [begin, begin+count).
Var slice_cols(Var a, std::size_t begin, std::size_t count);
Var concat_cols(Var a, Var b);
/// 1xC product of each column over all rows.
Var col_prod(Var a);
/// Mx1 row sums.
Var row_sums(Var a);
/// a(i, j) / d(i), d an Mx1 column with nonzero entries.
Var div_rows(Var a, Var d);
Var sum(Var a);
Var mean(Var a);
/// Elementwise smooth-L1.
Var smooth_l1(Var a);
/// Mean over rows of -log softmax(logits)(i, labels[i]); per-row probability
/// floored at 1e-12 (no gradient through the floor).
Var softmax_cross_entropy(Var logits, std::span<const std::size_t> labels);

}  // namespace pgp::num
