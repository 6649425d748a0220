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

#include "support/support.hpp"

#include <doctest.h>

#include <random>

namespace {

using lawm::ad::Matrix;
using lawm::ad::Parameter;
using lawm::ad::Tape;
using lawm::ad::Var;
namespace ad = lawm::ad;

Matrix random_matrix(lawm::Engine& e, int r, int c, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(r, c);
  for (int i = 0; i < m.size(); ++i) m.data()[i] = u(e);
  return m;
}

// Contracts op(x) with fixed random weights so the whole Jacobian is tested.
double check_unary(const std::function<Var(const Var&)>& op, Matrix x0) {
  lawm::Engine e(7);
  Parameter x("x", std::move(x0));
  Matrix probe;
  auto loss = [&](Tape& t) {
    Var y = op(t.param(x));
    if (probe.size() == 0) probe = random_matrix(e, static_cast<int>(y.rows()), static_cast<int>(y.cols()));
    return ad::sum(ad::mul_constant(y, probe));
  };
  return lawm::testing::check_gradients({&x}, loss).worst_relative_error;
}

double check_binary(const std::function<Var(const Var&, const Var&)>& op, Matrix a0, Matrix b0) {
  lawm::Engine e(11);
  Parameter a("a", std::move(a0)), b("b", std::move(b0));
  Matrix probe;
  auto loss = [&](Tape& t) {
    Var y = op(t.param(a), t.param(b));
    if (probe.size() == 0) probe = random_matrix(e, static_cast<int>(y.rows()), static_cast<int>(y.cols()));
    return ad::sum(ad::mul_constant(y, probe));
  };
  return lawm::testing::check_gradients({&a, &b}, loss).worst_relative_error;
}

}  // namespace

TEST_CASE("elementwise unary ops match finite differences") {
  lawm::Engine e(1);
  const Matrix x = random_matrix(e, 3, 4);
  CHECK(check_unary([](const Var& v) { return ad::neg(v); }, x) < 1e-6);
  CHECK(check_unary([](const Var& v) { return ad::square(v); }, x) < 1e-6);
  CHECK(check_unary([](const Var& v) { return ad::exp(v); }, x) < 1e-6);
  CHECK(check_unary([](const Var& v) { return ad::tanh(v); }, x) < 1e-6);
  CHECK(check_unary([](const Var& v) { return ad::sigmoid(v); }, x) < 1e-6);
  CHECK(check_unary([](const Var& v) { return ad::softplus(v); }, x) < 1e-6);
  CHECK(check_unary([](const Var& v) { return ad::swish(v); }, x) < 1e-6);
  CHECK(check_unary([](const Var& v) { return ad::scale(v, -2.5); }, x) < 1e-6);
  CHECK(check_unary([](const Var& v) { return ad::add_scalar(v, 3.0); }, x) < 1e-6);
  CHECK(check_unary([](const Var& v) { return ad::log(v); }, random_matrix(e, 3, 4, 0.5, 2.0)) < 1e-6);
}

TEST_CASE("reductions and structural ops match finite differences") {
  lawm::Engine e(2);
  const Matrix x = random_matrix(e, 6, 4);
  CHECK(check_unary([](const Var& v) { return ad::sum(v); }, x) < 1e-6);
  CHECK(check_unary([](const Var& v) { return ad::mean(v); }, x) < 1e-6);
  CHECK(check_unary([](const Var& v) { return ad::row_sum(v); }, x) < 1e-6);
  CHECK(check_unary([](const Var& v) { return ad::sum_blocks(v, 3); }, x) < 1e-6);
  CHECK(check_unary([](const Var& v) { return ad::slice_cols(v, 1, 2); }, x) < 1e-6);
  CHECK(check_unary([](const Var& v) { return ad::slice_rows(v, 2, 3); }, x) < 1e-6);
  CHECK(check_unary([](const Var& v) { return ad::concat_cols({v, ad::square(v)}); }, x) < 1e-6);
  CHECK(check_unary([](const Var& v) { return ad::concat_rows({v, ad::tanh(v)}); }, x) < 1e-6);
}

TEST_CASE("binary ops match finite differences") {
  lawm::Engine e(3);
  const Matrix a = random_matrix(e, 3, 4), b = random_matrix(e, 3, 4);
  CHECK(check_binary([](const Var& x, const Var& y) { return x + y; }, a, b) < 1e-6);
  CHECK(check_binary([](const Var& x, const Var& y) { return x - y; }, a, b) < 1e-6);
  CHECK(check_binary([](const Var& x, const Var& y) { return x * y; }, a, b) < 1e-6);
  CHECK(check_binary([](const Var& x, const Var& y) { return ad::minimum(x, y); }, a, b) < 1e-6);
  CHECK(check_binary([](const Var& x, const Var& y) { return ad::matmul(x, y); }, a, random_matrix(e, 4, 2)) <
        1e-6);
}

TEST_CASE("linear and layer norm match finite differences") {
  lawm::Engine e(4);
  Parameter x("x", random_matrix(e, 5, 3)), w("w", random_matrix(e, 3, 4)), b("b", random_matrix(e, 1, 4));
  Parameter g("g", random_matrix(e, 1, 4, 0.5, 1.5)), beta("beta", random_matrix(e, 1, 4));
  const Matrix probe = random_matrix(e, 5, 4);
  auto loss = [&](Tape& t) {
    Var y = ad::linear(t.param(x), t.param(w), t.param(b));
    return ad::sum(ad::mul_constant(ad::layer_norm(y, t.param(g), t.param(beta)), probe));
  };
  const auto r = lawm::testing::check_gradients({&x, &w, &b, &g, &beta}, loss);
  CHECK(r.tensors_checked == 5);
  CHECK(r.worst_relative_error < 1e-6);
}

TEST_CASE("clamp_min passes gradient only above the floor") {
  Parameter x("x", (Matrix(1, 3) << -1.0, 0.5, 2.0).finished());
  Tape t;
  Var y = ad::sum(ad::clamp_min(t.param(x), 0.0));
  t.backward(y);
  CHECK(x.grad(0, 0) == 0.0);
  CHECK(x.grad(0, 1) == 1.0);
  CHECK(x.grad(0, 2) == 1.0);
  CHECK(y.scalar() == doctest::Approx(2.5));
}

TEST_CASE("minimum routes ties to the first operand") {
  Parameter a("a", Matrix::Constant(1, 2, 1.0)), b("b", Matrix::Constant(1, 2, 1.0));
  Tape t;
  t.backward(ad::sum(ad::minimum(t.param(a), t.param(b))));
  CHECK(a.grad.sum() == 2.0);
  CHECK(b.grad.sum() == 0.0);
}

TEST_CASE("frozen parameters receive no gradient but pass it through") {
  Parameter w("w", Matrix::Constant(2, 2, 0.5)), x("x", Matrix::Constant(1, 2, 1.0));
  Tape t;
  t.freeze(w);
  t.backward(ad::sum(ad::matmul(t.param(x), t.param(w))));
  CHECK(w.grad.isZero());
  CHECK(x.grad.isApprox(Matrix::Constant(1, 2, 1.0)));
}

TEST_CASE("detach blocks gradient") {
  Parameter x("x", Matrix::Constant(2, 2, 3.0));
  Tape t;
  Var v = t.param(x);
  t.backward(ad::sum(ad::square(ad::detach(v)) + v));
  CHECK(x.grad.isApprox(Matrix::Ones(2, 2)));
}

TEST_CASE("no-grad tape records values only") {
  Parameter x("x", Matrix::Constant(2, 2, 3.0));
  Tape t(false);
  Var y = ad::sum(ad::square(t.param(x)));
  CHECK_FALSE(y.requires_grad());
  CHECK(y.scalar() == doctest::Approx(36.0));
}

TEST_CASE("gradients accumulate across uses of one parameter") {
  Parameter x("x", Matrix::Constant(1, 1, 2.0));
  Tape t;
  Var a = t.param(x);
  Var b = t.param(x);
  t.backward(a * b);
  CHECK(x.grad(0, 0) == doctest::Approx(4.0));
}

TEST_CASE("shape errors are contract violations") {
  Tape t;
  Var a = t.constant(Matrix::Zero(2, 3));
  Var b = t.constant(Matrix::Zero(3, 2));
  CHECK_THROWS_AS(ad::add(a, b), lawm::ContractError);
  CHECK_THROWS_AS(ad::matmul(a, a), lawm::ContractError);
  CHECK_THROWS_AS(ad::slice_cols(a, 2, 2), lawm::ContractError);
  CHECK_THROWS_AS(ad::sum_blocks(a, 4), lawm::ContractError);
  CHECK_THROWS_AS(a.scalar(), lawm::ContractError);
}

TEST_CASE("log of a non-positive value is a numeric error") {
  Tape t;
  CHECK_THROWS_AS(ad::log(t.constant(Matrix::Zero(1, 1))), lawm::NumericError);
}

TEST_CASE("softplus is stable for large magnitudes") {
  Tape t;
  Var y = ad::softplus(t.constant((Matrix(1, 3) << -800.0, 0.0, 800.0).finished()));
  CHECK(y.value()(0, 0) == doctest::Approx(0.0));
  CHECK(y.value()(0, 1) == doctest::Approx(std::log(2.0)));
  CHECK(y.value()(0, 2) == doctest::Approx(800.0));
}
