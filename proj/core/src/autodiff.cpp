// Copyright 2026 The LAWM Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "lawm/autodiff.hpp"

#include "lawm/error.hpp"

#include <cmath>
#include <sstream>

namespace lawm::ad {
namespace {

std::string shape(const Matrix& m) {
  std::ostringstream os;
  os << '(' << m.rows() << 'x' << m.cols() << ')';
  return os.str();
}

void require_same_shape(const char* op, const Var& a, const Var& b) {
  if (&a.tape() != &b.tape()) throw ContractError(std::string(op) + ": operands live on different tapes");
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ContractError(std::string(op) + ": shape mismatch " + shape(a.value()) + " vs " +
                        shape(b.value()));
  }
}

inline void accumulate(Tape& t, int id, const Matrix& g) {
  if (t.requires_grad(id)) t.grad(id) += g;
}

template <typename Expr>
inline void accumulate_expr(Tape& t, int id, const Expr& g) {
  if (t.requires_grad(id)) t.grad(id) += g;
}

double stable_softplus(double x) { return std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0); }
double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

const Matrix& Var::value() const { return tape_->value(id_); }

double Var::scalar() const {
  const Matrix& v = value();
  if (v.size() != 1) throw ContractError("Var::scalar: value has shape " + shape(v));
  return v(0, 0);
}

bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Var Tape::make(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  return make(std::move(n));
}

Var Tape::param(const Parameter& p) {
  Node n;
  n.value = p.value;
  if (grad_enabled_ && !frozen_.contains(&p)) {
    n.requires_grad = true;
    n.param = &p;
  }
  return make(std::move(n));
}

Var Tape::push(Matrix value, std::initializer_list<Var> inputs, Backward fn) {
  Node n;
  n.value = std::move(value);
  if (grad_enabled_) {
    for (const Var& v : inputs) {
      if (v.tape_ != this) throw ContractError("Tape::push: input recorded on a different tape");
      if (nodes_[v.id_].requires_grad) n.requires_grad = true;
    }
    if (n.requires_grad) n.backward = std::move(fn);
  }
  return make(std::move(n));
}

Var Tape::push(Matrix value, const std::vector<Var>& inputs, Backward fn) {
  Node n;
  n.value = std::move(value);
  if (grad_enabled_) {
    for (const Var& v : inputs) {
      if (v.tape_ != this) throw ContractError("Tape::push: input recorded on a different tape");
      if (nodes_[v.id_].requires_grad) n.requires_grad = true;
    }
    if (n.requires_grad) n.backward = std::move(fn);
  }
  return make(std::move(n));
}

Matrix& Tape::grad(int id) {
  Node& n = nodes_[id];
  if (!n.has_grad) {
    n.grad.setZero(n.value.rows(), n.value.cols());
    n.has_grad = true;
  }
  return n.grad;
}

void Tape::backward(const Var& root) {
  if (root.tape_ != this) throw ContractError("Tape::backward: root recorded on a different tape");
  if (!grad_enabled_) throw ContractError("Tape::backward: gradients disabled on this tape");
  if (!nodes_[root.id_].requires_grad) return;
  grad(root.id_).setOnes();
  for (int i = root.id_; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.requires_grad || !n.has_grad) continue;
    if (n.backward) n.backward(*this, i);
    if (n.param != nullptr) n.param->grad += n.grad;
  }
}

// --- linear algebra -------------------------------------------------------

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) {
    throw ContractError("matmul: inner dimensions differ " + shape(a.value()) + " * " + shape(b.value()));
  }
  const int ia = a.id(), ib = b.id();
  return a.tape().push(a.value() * b.value(), {a, b}, [ia, ib](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(ia)) t.grad(ia).noalias() += g * t.value(ib).transpose();
    if (t.requires_grad(ib)) t.grad(ib).noalias() += t.value(ia).transpose() * g;
  });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  if (x.cols() != weight.rows() || bias.rows() != 1 || bias.cols() != weight.cols()) {
    throw ContractError("linear: incompatible shapes x" + shape(x.value()) + " W" + shape(weight.value()) +
                        " b" + shape(bias.value()));
  }
  Matrix out = x.value() * weight.value();
  out.rowwise() += bias.value().row(0);
  const int ix = x.id(), iw = weight.id(), ib = bias.id();
  return x.tape().push(std::move(out), {x, weight, bias}, [ix, iw, ib](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(ix)) t.grad(ix).noalias() += g * t.value(iw).transpose();
    if (t.requires_grad(iw)) t.grad(iw).noalias() += t.value(ix).transpose() * g;
    if (t.requires_grad(ib)) t.grad(ib) += g.colwise().sum();
  });
}

// --- elementwise binary ---------------------------------------------------

Var add(const Var& a, const Var& b) {
  require_same_shape("add", a, b);
  const int ia = a.id(), ib = b.id();
  return a.tape().push(a.value() + b.value(), {a, b}, [ia, ib](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    accumulate(t, ia, g);
    accumulate(t, ib, g);
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape("sub", a, b);
  const int ia = a.id(), ib = b.id();
  return a.tape().push(a.value() - b.value(), {a, b}, [ia, ib](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    accumulate(t, ia, g);
    if (t.requires_grad(ib)) t.grad(ib) -= g;
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape("mul", a, b);
  const int ia = a.id(), ib = b.id();
  return a.tape().push(a.value().cwiseProduct(b.value()), {a, b}, [ia, ib](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    accumulate_expr(t, ia, g.cwiseProduct(t.value(ib)));
    accumulate_expr(t, ib, g.cwiseProduct(t.value(ia)));
  });
}

Var minimum(const Var& a, const Var& b) {
  require_same_shape("minimum", a, b);
  const int ia = a.id(), ib = b.id();
  return a.tape().push(a.value().cwiseMin(b.value()), {a, b}, [ia, ib](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    const Matrix& va = t.value(ia);
    const Matrix& vb = t.value(ib);
    // Ties route the gradient to the first operand.
    const auto pick_a = (va.array() <= vb.array()).cast<double>();
    accumulate_expr(t, ia, (g.array() * pick_a).matrix());
    accumulate_expr(t, ib, (g.array() * (1.0 - pick_a)).matrix());
  });
}

Var mul_constant(const Var& a, const Matrix& c) {
  if (a.rows() != c.rows() || a.cols() != c.cols()) {
    throw ContractError("mul_constant: shape mismatch " + shape(a.value()) + " vs " + shape(c));
  }
  const int ia = a.id();
  return a.tape().push(a.value().cwiseProduct(c), {a}, [ia, c](Tape& t, int self) {
    accumulate_expr(t, ia, t.grad(self).cwiseProduct(c));
  });
}

// --- scalar forms ---------------------------------------------------------

Var scale(const Var& a, double c) {
  const int ia = a.id();
  return a.tape().push(a.value() * c, {a}, [ia, c](Tape& t, int self) {
    accumulate_expr(t, ia, t.grad(self) * c);
  });
}

Var add_scalar(const Var& a, double c) {
  const int ia = a.id();
  return a.tape().push((a.value().array() + c).matrix(), {a}, [ia](Tape& t, int self) {
    accumulate(t, ia, t.grad(self));
  });
}

Var clamp_min(const Var& a, double floor) {
  const int ia = a.id();
  return a.tape().push(a.value().cwiseMax(floor), {a}, [ia, floor](Tape& t, int self) {
    const auto pass = (t.value(ia).array() > floor).cast<double>();
    accumulate_expr(t, ia, (t.grad(self).array() * pass).matrix());
  });
}

// --- elementwise unary ----------------------------------------------------

Var neg(const Var& a) {
  const int ia = a.id();
  return a.tape().push(-a.value(), {a}, [ia](Tape& t, int self) {
    if (t.requires_grad(ia)) t.grad(ia) -= t.grad(self);
  });
}

Var square(const Var& a) {
  const int ia = a.id();
  return a.tape().push(a.value().array().square().matrix(), {a}, [ia](Tape& t, int self) {
    accumulate_expr(t, ia, (2.0 * t.grad(self).array() * t.value(ia).array()).matrix());
  });
}

Var exp(const Var& a) {
  const int ia = a.id();
  return a.tape().push(a.value().array().exp().matrix(), {a}, [ia](Tape& t, int self) {
    accumulate_expr(t, ia, t.grad(self).cwiseProduct(t.value(self)));
  });
}

Var log(const Var& a) {
  if ((a.value().array() <= 0.0).any()) throw NumericError("log: non-positive argument");
  const int ia = a.id();
  return a.tape().push(a.value().array().log().matrix(), {a}, [ia](Tape& t, int self) {
    accumulate_expr(t, ia, t.grad(self).cwiseQuotient(t.value(ia)));
  });
}

Var tanh(const Var& a) {
  const int ia = a.id();
  return a.tape().push(a.value().array().tanh().matrix(), {a}, [ia](Tape& t, int self) {
    const auto y = t.value(self).array();
    accumulate_expr(t, ia, (t.grad(self).array() * (1.0 - y.square())).matrix());
  });
}

Var sigmoid(const Var& a) {
  const int ia = a.id();
  return a.tape().push(a.value().unaryExpr(&stable_sigmoid), {a}, [ia](Tape& t, int self) {
    const auto y = t.value(self).array();
    accumulate_expr(t, ia, (t.grad(self).array() * y * (1.0 - y)).matrix());
  });
}

Var softplus(const Var& a) {
  const int ia = a.id();
  return a.tape().push(a.value().unaryExpr(&stable_softplus), {a}, [ia](Tape& t, int self) {
    accumulate_expr(t, ia, t.grad(self).cwiseProduct(t.value(ia).unaryExpr(&stable_sigmoid)));
  });
}

Var swish(const Var& a) {
  const Matrix s = a.value().unaryExpr(&stable_sigmoid);
  Matrix out = a.value().cwiseProduct(s);
  const int ia = a.id();
  return a.tape().push(std::move(out), {a}, [ia, s](Tape& t, int self) {
    const auto x = t.value(ia).array();
    const auto sa = s.array();
    accumulate_expr(t, ia, (t.grad(self).array() * (sa * (1.0 + x * (1.0 - sa)))).matrix());
  });
}

Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps) {
  const Index n = x.cols();
  if (gain.rows() != 1 || gain.cols() != n || bias.rows() != 1 || bias.cols() != n) {
    throw ContractError("layer_norm: gain/bias must be (1x" + std::to_string(n) + ")");
  }
  const Matrix& v = x.value();
  const Eigen::VectorXd mu = v.rowwise().mean();
  Matrix centered = v.colwise() - mu;
  const Eigen::VectorXd inv_std =
      ((centered.array().square().rowwise().sum() / static_cast<double>(n)) + eps).rsqrt().matrix();
  Matrix xhat = centered.array().colwise() * inv_std.array();
  Matrix out = xhat.array().rowwise() * gain.value().row(0).array();
  out.rowwise() += bias.value().row(0);
  const int ix = x.id(), ig = gain.id(), ib = bias.id();
  return x.tape().push(std::move(out), {x, gain, bias},
                       [ix, ig, ib, xhat = std::move(xhat), inv_std](Tape& t, int self) {
                         const Matrix& g = t.grad(self);
                         if (t.requires_grad(ig)) t.grad(ig) += g.cwiseProduct(xhat).colwise().sum();
                         if (t.requires_grad(ib)) t.grad(ib) += g.colwise().sum();
                         if (t.requires_grad(ix)) {
                           const Matrix dxhat = g.array().rowwise() * t.value(ig).row(0).array();
                           const Eigen::VectorXd m1 = dxhat.rowwise().mean();
                           const Eigen::VectorXd m2 = dxhat.cwiseProduct(xhat).rowwise().mean();
                           Matrix dx = dxhat.colwise() - m1;
                           dx -= (xhat.array().colwise() * m2.array()).matrix();
                           t.grad(ix) += (dx.array().colwise() * inv_std.array()).matrix();
                         }
                       });
}

// --- reductions -----------------------------------------------------------

Var sum(const Var& a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  const int ia = a.id();
  return a.tape().push(std::move(out), {a}, [ia](Tape& t, int self) {
    if (t.requires_grad(ia)) t.grad(ia).array() += t.grad(self)(0, 0);
  });
}

Var mean(const Var& a) {
  const double n = static_cast<double>(a.value().size());
  if (n == 0) throw ContractError("mean: empty input");
  Matrix out(1, 1);
  out(0, 0) = a.value().sum() / n;
  const int ia = a.id();
  return a.tape().push(std::move(out), {a}, [ia, n](Tape& t, int self) {
    if (t.requires_grad(ia)) t.grad(ia).array() += t.grad(self)(0, 0) / n;
  });
}

Var row_sum(const Var& a) {
  const int ia = a.id();
  return a.tape().push(a.value().rowwise().sum(), {a}, [ia](Tape& t, int self) {
    if (t.requires_grad(ia)) t.grad(ia).colwise() += t.grad(self).col(0);
  });
}

Var sum_blocks(const Var& a, Index blocks) {
  if (blocks < 1 || a.rows() % blocks != 0) {
    throw ContractError("sum_blocks: " + std::to_string(a.rows()) + " rows not divisible into " +
                        std::to_string(blocks) + " blocks");
  }
  const Index n = a.rows() / blocks;
  Matrix out = Matrix::Zero(n, a.cols());
  for (Index k = 0; k < blocks; ++k) out += a.value().middleRows(k * n, n);
  const int ia = a.id();
  return a.tape().push(std::move(out), {a}, [ia, blocks, n](Tape& t, int self) {
    if (!t.requires_grad(ia)) return;
    const Matrix& g = t.grad(self);
    Matrix& ga = t.grad(ia);
    for (Index k = 0; k < blocks; ++k) ga.middleRows(k * n, n) += g;
  });
}

// --- structure ------------------------------------------------------------

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ContractError("concat_cols: no inputs");
  const Index rows = parts.front().rows();
  Index cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) throw ContractError("concat_cols: row counts differ");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::vector<std::pair<int, Index>> spans;
  spans.reserve(parts.size());
  Index at = 0;
  for (const Var& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    spans.emplace_back(p.id(), at);
    at += p.cols();
  }
  return parts.front().tape().push(std::move(out), parts, [spans](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    for (const auto& [id, start] : spans) {
      if (t.requires_grad(id)) t.grad(id) += g.middleCols(start, t.value(id).cols());
    }
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ContractError("concat_rows: no inputs");
  const Index cols = parts.front().cols();
  Index rows = 0;
  for (const Var& p : parts) {
    if (p.cols() != cols) throw ContractError("concat_rows: column counts differ");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  std::vector<std::pair<int, Index>> spans;
  spans.reserve(parts.size());
  Index at = 0;
  for (const Var& p : parts) {
    out.middleRows(at, p.rows()) = p.value();
    spans.emplace_back(p.id(), at);
    at += p.rows();
  }
  return parts.front().tape().push(std::move(out), parts, [spans](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    for (const auto& [id, start] : spans) {
      if (t.requires_grad(id)) t.grad(id) += g.middleRows(start, t.value(id).rows());
    }
  });
}

Var slice_cols(const Var& a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw ContractError("slice_cols: out of range");
  const int ia = a.id();
  return a.tape().push(a.value().middleCols(start, count), {a}, [ia, start, count](Tape& t, int self) {
    if (t.requires_grad(ia)) t.grad(ia).middleCols(start, count) += t.grad(self);
  });
}

Var slice_rows(const Var& a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) throw ContractError("slice_rows: out of range");
  const int ia = a.id();
  return a.tape().push(a.value().middleRows(start, count), {a}, [ia, start, count](Tape& t, int self) {
    if (t.requires_grad(ia)) t.grad(ia).middleRows(start, count) += t.grad(self);
  });
}

Var detach(const Var& a) { return a.tape().constant(a.value()); }

}  // namespace lawm::ad
