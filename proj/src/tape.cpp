#include "pgp/tape.hpp"

#include <algorithm>
#include <cmath>

#include "pgp/error.hpp"

namespace pgp::num {

const Matrix& Var::value() const { return tape_->value(id_); }
const Matrix& Var::grad() const { return tape_->grad(id_); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Var Tape::leaf(Matrix value, std::string name) {
  if (!value.all_finite()) throw NumericError("non-finite leaf " + name);
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  n.op = "leaf";
  n.name = std::move(name);
  nodes_.push_back(std::move(n));
  return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::constant(Matrix value) {
  if (!value.all_finite()) throw NumericError("non-finite constant");
  Node n;
  n.value = std::move(value);
  n.op = "const";
  nodes_.push_back(std::move(n));
  return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::push(Matrix value, std::vector<std::uint32_t> inputs, BackwardFn fn, const char* op) {
  if (!value.all_finite()) throw NumericError(std::string("non-finite output from ") + op);
  Node n;
  n.value = std::move(value);
  n.requires_grad = std::any_of(inputs.begin(), inputs.end(),
                                [this](std::uint32_t i) { return nodes_[i].requires_grad; });
  if (n.requires_grad) n.backward = std::move(fn);
  n.inputs = std::move(inputs);
  n.op = op;
  nodes_.push_back(std::move(n));
  return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

const Matrix& Tape::grad(std::uint32_t id) const {
  const Node& n = nodes_[id];
  return n.requires_grad ? n.grad : empty_;
}

Matrix& Tape::grad_acc(std::uint32_t id) {
  Node& n = nodes_[id];
  if (!n.grad.same_shape(n.value)) n.grad = Matrix(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::accumulate(std::uint32_t id, const Matrix& g) {
  if (!nodes_[id].requires_grad) return;
  grad_acc(id) += g;
}

void Tape::backward(Var loss) {
  if (&loss.tape() != this) throw ContractError("backward: loss node belongs to another tape");
  const Matrix& lv = nodes_[loss.id()].value;
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw ContractError("backward: loss must be 1x1, got " + shape_str(lv));
  }
  for (Node& n : nodes_) {
    if (n.requires_grad) n.grad = Matrix(n.value.rows(), n.value.cols());
  }
  if (!nodes_[loss.id()].requires_grad) return;
  nodes_[loss.id()].grad(0, 0) = 1.0;
  for (std::uint32_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.backward) n.backward(*this, i);
  }
}

namespace {

void same_tape(Var a, Var b, const char* op) {
  if (&a.tape() != &b.tape()) throw ContractError(std::string(op) + ": operands on different tapes");
}

}  // namespace

Var matmul(Var a, Var b) {
  same_tape(a, b, "matmul");
  Tape& t = a.tape();
  return t.push(num::matmul(a.value(), b.value()), {a.id(), b.id()},
                [](Tape& t, std::uint32_t self) {
                  const auto ia = t.input(self, 0), ib = t.input(self, 1);
                  const Matrix& g = t.grad(self);
                  if (t.requires_grad(ia)) t.grad_acc(ia) += matmul_nt(g, t.value(ib));
                  if (t.requires_grad(ib)) t.grad_acc(ib) += matmul_tn(t.value(ia), g);
                },
                "matmul");
}

Var transpose(Var a) {
  Tape& t = a.tape();
  return t.push(num::transpose(a.value()), {a.id()},
                [](Tape& t, std::uint32_t self) {
                  t.accumulate(t.input(self, 0), num::transpose(t.grad(self)));
                },
                "transpose");
}

Var add(Var a, Var b) {
  same_tape(a, b, "add");
  Tape& t = a.tape();
  return t.push(num::add(a.value(), b.value()), {a.id(), b.id()},
                [](Tape& t, std::uint32_t self) {
                  t.accumulate(t.input(self, 0), t.grad(self));
                  t.accumulate(t.input(self, 1), t.grad(self));
                },
                "add");
}

Var sub(Var a, Var b) {
  same_tape(a, b, "sub");
  Tape& t = a.tape();
  return t.push(num::sub(a.value(), b.value()), {a.id(), b.id()},
                [](Tape& t, std::uint32_t self) {
                  t.accumulate(t.input(self, 0), t.grad(self));
                  t.accumulate(t.input(self, 1), num::scale(t.grad(self), -1.0));
                },
                "sub");
}

Var mul(Var a, Var b) {
  same_tape(a, b, "mul");
  Tape& t = a.tape();
  return t.push(hadamard(a.value(), b.value()), {a.id(), b.id()},
                [](Tape& t, std::uint32_t self) {
                  const auto ia = t.input(self, 0), ib = t.input(self, 1);
                  if (t.requires_grad(ia)) t.grad_acc(ia) += hadamard(t.grad(self), t.value(ib));
                  if (t.requires_grad(ib)) t.grad_acc(ib) += hadamard(t.grad(self), t.value(ia));
                },
                "mul");
}

Var scale(Var a, double s) {
  Tape& t = a.tape();
  return t.push(num::scale(a.value(), s), {a.id()},
                [s](Tape& t, std::uint32_t self) {
                  t.accumulate(t.input(self, 0), num::scale(t.grad(self), s));
                },
                "scale");
}

Var scale_by(Var s, Var a) {
  same_tape(s, a, "scale_by");
  const double sv = s.value().item();
  Tape& t = a.tape();
  return t.push(num::scale(a.value(), sv), {s.id(), a.id()},
                [](Tape& t, std::uint32_t self) {
                  const auto is = t.input(self, 0), ia = t.input(self, 1);
                  const Matrix& g = t.grad(self);
                  if (t.requires_grad(is)) {
                    double d = 0.0;
                    const auto av = t.value(ia).data();
                    const auto gv = g.data();
                    for (std::size_t i = 0; i < gv.size(); ++i) d += gv[i] * av[i];
                    t.grad_acc(is)(0, 0) += d;
                  }
                  if (t.requires_grad(ia)) t.grad_acc(ia) += num::scale(g, t.value(is).item());
                },
                "scale_by");
}

Var one_minus(Var a) {
  Matrix out = a.value();
  for (double& v : out.data()) v = 1.0 - v;
  Tape& t = a.tape();
  return t.push(std::move(out), {a.id()},
                [](Tape& t, std::uint32_t self) {
                  t.accumulate(t.input(self, 0), num::scale(t.grad(self), -1.0));
                },
                "one_minus");
}

Var add_row(Var a, Var row) {
  same_tape(a, row, "add_row");
  const Matrix& av = a.value();
  const Matrix& rv = row.value();
  if (rv.rows() != 1 || rv.cols() != av.cols()) {
    throw DimensionError("add_row expects 1x" + std::to_string(av.cols()) + " row, got " + shape_str(rv));
  }
  Matrix out = av;
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += rv(0, j);
  Tape& t = a.tape();
  return t.push(std::move(out), {a.id(), row.id()},
                [](Tape& t, std::uint32_t self) {
                  const Matrix& g = t.grad(self);
                  t.accumulate(t.input(self, 0), g);
                  const auto ir = t.input(self, 1);
                  if (t.requires_grad(ir)) {
                    Matrix& gr = t.grad_acc(ir);
                    for (std::size_t i = 0; i < g.rows(); ++i)
                      for (std::size_t j = 0; j < g.cols(); ++j) gr(0, j) += g(i, j);
                  }
                },
                "add_row");
}

Var relu(Var a) {
  Matrix out = a.value();
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  Tape& t = a.tape();
  return t.push(std::move(out), {a.id()},
                [](Tape& t, std::uint32_t self) {
                  const auto ia = t.input(self, 0);
                  Matrix g = t.grad(self);
                  const auto in = t.value(ia).data();
                  auto gd = g.data();
                  for (std::size_t i = 0; i < gd.size(); ++i)
                    if (!(in[i] > 0.0)) gd[i] = 0.0;
                  t.accumulate(ia, g);
                },
                "relu");
}

Var sigmoid(Var a) {
  Matrix out = a.value();
  for (double& v : out.data()) v = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  Tape& t = a.tape();
  return t.push(std::move(out), {a.id()},
                [](Tape& t, std::uint32_t self) {
                  Matrix g = t.grad(self);
                  const auto y = t.value(self).data();
                  auto gd = g.data();
                  for (std::size_t i = 0; i < gd.size(); ++i) gd[i] *= y[i] * (1.0 - y[i]);
                  t.accumulate(t.input(self, 0), g);
                },
                "sigmoid");
}

Var log(Var a) {
  Matrix out = a.value();
  for (double& v : out.data()) v = std::log(v);
  Tape& t = a.tape();
  return t.push(std::move(out), {a.id()},
                [](Tape& t, std::uint32_t self) {
                  const auto ia = t.input(self, 0);
                  Matrix g = t.grad(self);
                  const auto x = t.value(ia).data();
                  auto gd = g.data();
                  for (std::size_t i = 0; i < gd.size(); ++i) gd[i] /= x[i];
                  t.accumulate(ia, g);
                },
                "log");
}

Var sqrt(Var a) {
  Matrix out = a.value();
  for (double& v : out.data()) v = std::sqrt(v);
  Tape& t = a.tape();
  return t.push(std::move(out), {a.id()},
                [](Tape& t, std::uint32_t self) {
                  Matrix g = t.grad(self);
                  const auto y = t.value(self).data();
                  auto gd = g.data();
                  for (std::size_t i = 0; i < gd.size(); ++i) gd[i] *= 0.5 / y[i];
                  t.accumulate(t.input(self, 0), g);
                },
                "sqrt");
}

Var softmax_rows(Var a) {
  Tape& t = a.tape();
  return t.push(num::softmax_rows(a.value()), {a.id()},
                [](Tape& t, std::uint32_t self) {
                  const Matrix& y = t.value(self);
                  const Matrix& g = t.grad(self);
                  Matrix dx(y.rows(), y.cols());
                  for (std::size_t i = 0; i < y.rows(); ++i) {
                    double dot = 0.0;
                    for (std::size_t j = 0; j < y.cols(); ++j) dot += g(i, j) * y(i, j);
                    for (std::size_t j = 0; j < y.cols(); ++j) dx(i, j) = y(i, j) * (g(i, j) - dot);
                  }
                  t.accumulate(t.input(self, 0), dx);
                },
                "softmax_rows");
}

Var element(Var a, std::size_t r, std::size_t c) {
  const Matrix& av = a.value();
  if (r >= av.rows() || c >= av.cols()) {
    throw DimensionError("element(" + std::to_string(r) + "," + std::to_string(c) + ") of " + shape_str(av));
  }
  Tape& t = a.tape();
  return t.push(Matrix::scalar(av(r, c)), {a.id()},
                [r, c](Tape& t, std::uint32_t self) {
                  const auto ia = t.input(self, 0);
                  if (t.requires_grad(ia)) t.grad_acc(ia)(r, c) += t.grad(self)(0, 0);
                },
                "element");
}

Var pick(Var a, std::span<const std::size_t> index) {
  const Matrix& av = a.value();
  if (index.size() != av.rows()) {
    throw DimensionError("pick: " + std::to_string(index.size()) + " indices for " + shape_str(av));
  }
  Matrix out(av.rows(), 1);
  for (std::size_t i = 0; i < av.rows(); ++i) {
    if (index[i] >= av.cols()) throw DimensionError("pick: column index out of range");
    out(i, 0) = av(i, index[i]);
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  Tape& t = a.tape();
  return t.push(std::move(out), {a.id()},
                [idx = std::move(idx)](Tape& t, std::uint32_t self) {
                  const auto ia = t.input(self, 0);
                  if (!t.requires_grad(ia)) return;
                  Matrix& ga = t.grad_acc(ia);
                  const Matrix& g = t.grad(self);
                  for (std::size_t i = 0; i < idx.size(); ++i) ga(i, idx[i]) += g(i, 0);
                },
                "pick");
}

Var slice_cols(Var a, std::size_t begin, std::size_t count) {
  const Matrix& av = a.value();
  if (begin + count > av.cols()) throw DimensionError("slice_cols out of range for " + shape_str(av));
  Matrix out(av.rows(), count);
  for (std::size_t i = 0; i < av.rows(); ++i)
    for (std::size_t j = 0; j < count; ++j) out(i, j) = av(i, begin + j);
  Tape& t = a.tape();
  return t.push(std::move(out), {a.id()},
                [begin](Tape& t, std::uint32_t self) {
                  const auto ia = t.input(self, 0);
                  if (!t.requires_grad(ia)) return;
                  Matrix& ga = t.grad_acc(ia);
                  const Matrix& g = t.grad(self);
                  for (std::size_t i = 0; i < g.rows(); ++i)
                    for (std::size_t j = 0; j < g.cols(); ++j) ga(i, begin + j) += g(i, j);
                },
                "slice_cols");
}

Var concat_cols(Var a, Var b) {
  same_tape(a, b, "concat_cols");
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.rows() != bv.rows()) {
    throw DimensionError("concat_cols row mismatch " + shape_str(av) + " | " + shape_str(bv));
  }
  Matrix out(av.rows(), av.cols() + bv.cols());
  for (std::size_t i = 0; i < av.rows(); ++i) {
    std::copy(av.row(i).begin(), av.row(i).end(), out.row(i).begin());
    std::copy(bv.row(i).begin(), bv.row(i).end(), out.row(i).begin() + static_cast<std::ptrdiff_t>(av.cols()));
  }
  const std::size_t split = av.cols();
  Tape& t = a.tape();
  return t.push(std::move(out), {a.id(), b.id()},
                [split](Tape& t, std::uint32_t self) {
                  const Matrix& g = t.grad(self);
                  const auto ia = t.input(self, 0), ib = t.input(self, 1);
                  if (t.requires_grad(ia)) {
                    Matrix& ga = t.grad_acc(ia);
                    for (std::size_t i = 0; i < g.rows(); ++i)
                      for (std::size_t j = 0; j < split; ++j) ga(i, j) += g(i, j);
                  }
                  if (t.requires_grad(ib)) {
                    Matrix& gb = t.grad_acc(ib);
                    for (std::size_t i = 0; i < g.rows(); ++i)
                      for (std::size_t j = split; j < g.cols(); ++j) gb(i, j - split) += g(i, j);
                  }
                },
                "concat_cols");
}

Var col_prod(Var a) {
  const Matrix& av = a.value();
  Matrix out(1, av.cols(), 1.0);
  for (std::size_t i = 0; i < av.rows(); ++i)
    for (std::size_t j = 0; j < av.cols(); ++j) out(0, j) *= av(i, j);
  Tape& t = a.tape();
  return t.push(std::move(out), {a.id()},
                [](Tape& t, std::uint32_t self) {
                  const auto ia = t.input(self, 0);
                  if (!t.requires_grad(ia)) return;
                  const Matrix& x = t.value(ia);
                  const Matrix& g = t.grad(self);
                  Matrix& ga = t.grad_acc(ia);
                  const std::size_t m = x.rows();
                  // Product of all other rows via prefix/suffix products, so zeros are handled.
                  std::vector<double> prefix(m + 1), suffix(m + 1);
                  for (std::size_t j = 0; j < x.cols(); ++j) {
                    prefix[0] = 1.0;
                    for (std::size_t i = 0; i < m; ++i) prefix[i + 1] = prefix[i] * x(i, j);
                    suffix[m] = 1.0;
                    for (std::size_t i = m; i-- > 0;) suffix[i] = suffix[i + 1] * x(i, j);
                    for (std::size_t i = 0; i < m; ++i) ga(i, j) += g(0, j) * prefix[i] * suffix[i + 1];
                  }
                },
                "col_prod");
}

Var row_sums(Var a) {
  const Matrix& av = a.value();
  Matrix out(av.rows(), 1);
  for (std::size_t i = 0; i < av.rows(); ++i) {
    double s = 0.0;
    for (double v : av.row(i)) s += v;
    out(i, 0) = s;
  }
  Tape& t = a.tape();
  return t.push(std::move(out), {a.id()},
                [](Tape& t, std::uint32_t self) {
                  const auto ia = t.input(self, 0);
                  if (!t.requires_grad(ia)) return;
                  Matrix& ga = t.grad_acc(ia);
                  const Matrix& g = t.grad(self);
                  for (std::size_t i = 0; i < ga.rows(); ++i)
                    for (std::size_t j = 0; j < ga.cols(); ++j) ga(i, j) += g(i, 0);
                },
                "row_sums");
}

Var div_rows(Var a, Var d) {
  same_tape(a, d, "div_rows");
  const Matrix& av = a.value();
  const Matrix& dv = d.value();
  if (dv.rows() != av.rows() || dv.cols() != 1) {
    throw DimensionError("div_rows expects " + std::to_string(av.rows()) + "x1 divisor, got " + shape_str(dv));
  }
  Matrix out = av;
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) /= dv(i, 0);
  Tape& t = a.tape();
  return t.push(std::move(out), {a.id(), d.id()},
                [](Tape& t, std::uint32_t self) {
                  const auto ia = t.input(self, 0), id = t.input(self, 1);
                  const Matrix& g = t.grad(self);
                  const Matrix& dv = t.value(id);
                  const Matrix& y = t.value(self);
                  if (t.requires_grad(ia)) {
                    Matrix& ga = t.grad_acc(ia);
                    for (std::size_t i = 0; i < g.rows(); ++i)
                      for (std::size_t j = 0; j < g.cols(); ++j) ga(i, j) += g(i, j) / dv(i, 0);
                  }
                  if (t.requires_grad(id)) {
                    Matrix& gd = t.grad_acc(id);
                    for (std::size_t i = 0; i < g.rows(); ++i) {
                      double s = 0.0;
                      for (std::size_t j = 0; j < g.cols(); ++j) s += g(i, j) * y(i, j);
                      gd(i, 0) -= s / dv(i, 0);
                    }
                  }
                },
                "div_rows");
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  Tape& t = a.tape();
  return t.push(Matrix::scalar(s), {a.id()},
                [](Tape& t, std::uint32_t self) {
                  const auto ia = t.input(self, 0);
                  if (!t.requires_grad(ia)) return;
                  Matrix& ga = t.grad_acc(ia);
                  const double g = t.grad(self)(0, 0);
                  for (double& v : ga.data()) v += g;
                },
                "sum");
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  return scale(sum(a), 1.0 / n);
}

Var smooth_l1(Var a) {
  Matrix out = a.value();
  for (double& v : out.data()) v = std::abs(v) < 1.0 ? 0.5 * v * v : std::abs(v) - 0.5;
  Tape& t = a.tape();
  return t.push(std::move(out), {a.id()},
                [](Tape& t, std::uint32_t self) {
                  const auto ia = t.input(self, 0);
                  Matrix g = t.grad(self);
                  const auto x = t.value(ia).data();
                  auto gd = g.data();
                  for (std::size_t i = 0; i < gd.size(); ++i) {
                    const double d = std::abs(x[i]) < 1.0 ? x[i] : (x[i] > 0.0 ? 1.0 : -1.0);
                    gd[i] *= d;
                  }
                  t.accumulate(ia, g);
                },
                "smooth_l1");
}

Var softmax_cross_entropy(Var logits, std::span<const std::size_t> labels) {
  constexpr double kFloor = 1e-12;
  const Matrix& z = logits.value();
  if (labels.size() != z.rows()) {
    throw DimensionError("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for " + shape_str(z));
  }
  Matrix p = num::softmax_rows(z);
  std::vector<bool> floored(z.rows(), false);
  double loss = 0.0;
  for (std::size_t i = 0; i < z.rows(); ++i) {
    if (labels[i] >= z.cols()) throw DimensionError("softmax_cross_entropy: label out of range");
    // log-softmax directly for accuracy; equivalent to log(p) away from the floor.
    const auto row = z.row(i);
    const double mx = *std::max_element(row.begin(), row.end());
    double lse = 0.0;
    for (double v : row) lse += std::exp(v - mx);
    double logp = row[labels[i]] - mx - std::log(lse);
    if (logp < std::log(kFloor)) {
      logp = std::log(kFloor);
      floored[i] = true;
    }
    loss -= logp;
  }
  const double m = static_cast<double>(z.rows());
  std::vector<std::size_t> lab(labels.begin(), labels.end());
  Tape& t = logits.tape();
  return t.push(Matrix::scalar(loss / m), {logits.id()},
                [p = std::move(p), floored = std::move(floored), lab = std::move(lab), m](Tape& t, std::uint32_t self) {
                  const auto ia = t.input(self, 0);
                  if (!t.requires_grad(ia)) return;
                  const double g = t.grad(self)(0, 0) / m;
                  Matrix& ga = t.grad_acc(ia);
                  for (std::size_t i = 0; i < p.rows(); ++i) {
                    if (floored[i]) continue;
                    for (std::size_t j = 0; j < p.cols(); ++j) {
                      ga(i, j) += g * (p(i, j) - (j == lab[i] ? 1.0 : 0.0));
                    }
                  }
                },
                "softmax_cross_entropy");
}

}  // namespace pgp::num
