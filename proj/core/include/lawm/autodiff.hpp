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

#ifndef LAWM_AUTODIFF_HPP_
#define LAWM_AUTODIFF_HPP_

// Minimal tape-based reverse-mode differentiation over dense Eigen matrices.
//
// Every value is a 2-D matrix whose rows index the batch. A Tape records
// each operation together with a closure that propagates the output
// gradient to its inputs. Parameters are persistent leaves whose gradients
// accumulate into Parameter::grad when Tape::backward runs. A parameter can
// be frozen on a given tape, in which case it behaves as a constant there:
// gradients still flow *through* the ops that use it, but never *into* it.

#include <Eigen/Core>

#include <deque>
#include <functional>
#include <initializer_list>
#include <string>
#include <unordered_set>
#include <vector>

namespace lawm::ad {

using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

struct Parameter {
  Parameter() = default;
  Parameter(std::string n, Matrix v)
      : name(std::move(n)), value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}

  std::string name;
  Matrix value;
  // Written only by Tape::backward; the owning trainer zeroes it.
  mutable Matrix grad;

  void zero_grad() const { grad.setZero(value.rows(), value.cols()); }
};

class Tape;

class Var {
 public:
  Var() = default;

  bool valid() const { return tape_ != nullptr; }
  const Matrix& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  // Value of a 1x1 result.
  double scalar() const;
  bool requires_grad() const;
  Tape& tape() const { return *tape_; }
  int id() const { return id_; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, int self)>;

  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool grad_enabled() const { return grad_enabled_; }

  Var constant(Matrix value);
  Var param(const Parameter& p);

  void freeze(const Parameter& p) { frozen_.insert(&p); }
  template <typename Range>
  void freeze_all(const Range& params) {
    for (const Parameter* p : params) freeze(*p);
  }

  // Seeds d(root)/d(root) = 1 and propagates to every reachable leaf.
  void backward(const Var& root);

  std::size_t size() const { return nodes_.size(); }

  // Op-authoring interface.
  Var push(Matrix value, std::initializer_list<Var> inputs, Backward fn);
  Var push(Matrix value, const std::vector<Var>& inputs, Backward fn);
  const Matrix& value(int id) const { return nodes_[id].value; }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  // Gradient buffer of node `id`, allocated as zeros on first access.
  Matrix& grad(int id);
  bool has_grad(int id) const { return nodes_[id].has_grad; }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    bool has_grad = false;
    const Parameter* param = nullptr;
    Backward backward;
  };

  Var make(Node node);

  std::deque<Node> nodes_;
  std::unordered_set<const Parameter*> frozen_;
  bool grad_enabled_;
};

// --- linear algebra -------------------------------------------------------
Var matmul(const Var& a, const Var& b);
// x * weight + bias, with bias (1 x out) broadcast over rows.
Var linear(const Var& x, const Var& weight, const Var& bias);

// --- elementwise binary (identical shapes) --------------------------------
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var minimum(const Var& a, const Var& b);
Var mul_constant(const Var& a, const Matrix& c);

// --- scalar forms ---------------------------------------------------------
Var scale(const Var& a, double c);
Var add_scalar(const Var& a, double c);
// max(a, floor) per element; zero gradient where a <= floor.
Var clamp_min(const Var& a, double floor);

// --- elementwise unary ----------------------------------------------------
Var neg(const Var& a);
Var square(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var tanh(const Var& a);
Var sigmoid(const Var& a);
Var softplus(const Var& a);
Var swish(const Var& a);

// Row-wise layer normalization with learned gain and bias (both 1 x cols).
Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps = 1e-5);

// --- reductions -----------------------------------------------------------
Var sum(const Var& a);
Var mean(const Var& a);
// Sum over columns: (rows x cols) -> (rows x 1).
Var row_sum(const Var& a);
// Sums `blocks` stacked row blocks: (blocks*n x c) -> (n x c).
Var sum_blocks(const Var& a, Index blocks);

// --- structure ------------------------------------------------------------
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var slice_cols(const Var& a, Index start, Index count);
Var slice_rows(const Var& a, Index start, Index count);
Var detach(const Var& a);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator-(const Var& a) { return neg(a); }
inline Var operator*(double c, const Var& a) { return scale(a, c); }
inline Var operator*(const Var& a, double c) { return scale(a, c); }
inline Var operator+(const Var& a, double c) { return add_scalar(a, c); }
inline Var operator+(double c, const Var& a) { return add_scalar(a, c); }
inline Var operator-(const Var& a, double c) { return add_scalar(a, -c); }
inline Var operator-(double c, const Var& a) { return add_scalar(neg(a), c); }

}  // namespace lawm::ad

#endif  // LAWM_AUTODIFF_HPP_
