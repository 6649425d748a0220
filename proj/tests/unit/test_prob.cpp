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

#include "lawm/prob.hpp"

#include "lawm/error.hpp"
#include "lawm/rng.hpp"

#include "support/support.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

namespace {

namespace prob = lawm::prob;
namespace ad = lawm::ad;
using Eigen::VectorXd;

prob::DiagGaussian random_gaussian(lawm::Engine& e, int d) {
  std::uniform_real_distribution<double> mean(-1.0, 1.0), sd(0.3, 2.0);
  VectorXd m(d), s(d);
  for (int i = 0; i < d; ++i) {
    m(i) = mean(e);
    s(i) = sd(e);
  }
  return prob::DiagGaussian(m, s);
}

// Log-density written out coordinate by coordinate.
double naive_log_density(const prob::DiagGaussian& g, const VectorXd& x) {
  double out = 0.0;
  for (int i = 0; i < g.dim(); ++i) {
    const double z = (x(i) - g.mean()(i)) / g.stddev()(i);
    out += -0.5 * z * z - std::log(g.stddev()(i)) - 0.5 * std::log(2.0 * std::numbers::pi);
  }
  return out;
}

}  // namespace

TEST_CASE("closed-form KL agrees with a Monte Carlo estimate") {
  lawm::Engine e(5);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const int d = 1 + trial % 6;
    const auto p = random_gaussian(e, d);
    const auto q = random_gaussian(e, d);
    const int samples = 200000;
    double acc = 0.0;
    VectorXd eps(d);
    for (int s = 0; s < samples; ++s) {
      for (int i = 0; i < d; ++i) eps(i) = n(e);
      const VectorXd x = prob::reparam_sample(p, eps);
      acc += naive_log_density(p, x) - naive_log_density(q, x);
    }
    const double mc = acc / samples;
    const double kl = prob::kl_diag_gaussian(p, q);
    CHECK(kl >= 0.0);
    CHECK(std::abs(kl - mc) <= 0.05 * std::max(kl, 0.1));
  }
}

TEST_CASE("KL of a distribution with itself is zero") {
  lawm::Engine e(6);
  for (int trial = 0; trial < 100; ++trial) {
    const auto p = random_gaussian(e, 1 + trial % 16);
    CHECK(std::abs(prob::kl_diag_gaussian(p, p)) <= 1e-12);
  }
}

TEST_CASE("Gaussian log density and entropy match the textbook formulas") {
  lawm::Engine e(8);
  const auto g = random_gaussian(e, 5);
  const VectorXd x = VectorXd::LinSpaced(5, -1.0, 2.0);
  CHECK(g.log_prob(x) == doctest::Approx(naive_log_density(g, x)).epsilon(1e-12));
  double entropy = 0.0;
  for (int i = 0; i < 5; ++i) entropy += 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e) + std::log(g.stddev()(i));
  CHECK(g.entropy() == doctest::Approx(entropy).epsilon(1e-12));
  const auto std_normal = prob::DiagGaussian::standard(3);
  CHECK(std_normal.log_prob(VectorXd::Zero(3)) == doctest::Approx(-3.0 * prob::kHalfLog2Pi));
}

TEST_CASE("invalid Gaussian parameters are rejected") {
  CHECK_THROWS_AS(prob::DiagGaussian(VectorXd::Zero(2), VectorXd::Zero(2)), lawm::NumericError);
  CHECK_THROWS_AS(prob::DiagGaussian(VectorXd::Zero(2), -VectorXd::Ones(2)), lawm::NumericError);
  CHECK_THROWS_AS(prob::DiagGaussian(VectorXd::Constant(2, NAN), VectorXd::Ones(2)), lawm::NumericError);
  CHECK_THROWS_AS(prob::DiagGaussian(VectorXd::Zero(2), VectorXd::Ones(3)), lawm::ContractError);
  CHECK_THROWS_AS(prob::kl_diag_gaussian(prob::DiagGaussian::standard(2), prob::DiagGaussian::standard(3)),
                  lawm::ContractError);
}

TEST_CASE("tanh-squashed samples never leave the bound") {
  lawm::Engine e(9);
  std::normal_distribution<double> n(0.0, 1.0);
  const prob::TanhGaussian dist(prob::DiagGaussian(VectorXd::Constant(3, 0.5), VectorXd::Constant(3, 3.0)),
                                VectorXd::Constant(3, 3.0));
  double largest = 0.0;
  VectorXd eps(3);
  for (int s = 0; s < 100000; ++s) {
    for (int i = 0; i < 3; ++i) eps(i) = n(e);
    largest = std::max(largest, prob::tanh_gaussian_sample(dist, eps).cwiseAbs().maxCoeff());
  }
  CHECK(largest < 3.0);
}

TEST_CASE("tanh-squashed log density follows the change of variables") {
  const double bound = 2.0;
  const prob::TanhGaussian dist(prob::DiagGaussian(VectorXd::Constant(1, 0.3), VectorXd::Constant(1, 0.7)),
                                VectorXd::Constant(1, bound));
  for (double x : {-1.5, -0.2, 0.0, 0.9, 1.9}) {
    const double z = std::atanh(x / bound);
    const double base = naive_log_density(dist.base(), VectorXd::Constant(1, z));
    const double jacobian = bound * (1.0 - std::tanh(z) * std::tanh(z));
    CHECK(prob::tanh_gaussian_logprob(dist, VectorXd::Constant(1, x)) ==
          doctest::Approx(base - std::log(jacobian)).epsilon(1e-9));
  }
  CHECK_THROWS_AS(prob::tanh_gaussian_logprob(dist, VectorXd::Constant(1, bound)), lawm::NumericError);
}

TEST_CASE("squashed density integrates to one") {
  const double bound = 3.0;
  const prob::TanhGaussian dist(prob::DiagGaussian(VectorXd::Constant(1, -0.4), VectorXd::Constant(1, 0.9)),
                                VectorXd::Constant(1, bound));
  const int n = 200000;
  double total = 0.0;
  const double h = 2.0 * bound / n;
  for (int i = 0; i < n; ++i) {
    const double x = -bound + (i + 0.5) * h;
    total += std::exp(prob::tanh_gaussian_logprob(dist, VectorXd::Constant(1, x))) * h;
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("log1m_tanh_sq is accurate and finite for large inputs") {
  for (double z : {-5.0, -1.0, 0.0, 0.5, 3.0}) {
    CHECK(prob::log1m_tanh_sq(z) == doctest::Approx(std::log(1.0 - std::tanh(z) * std::tanh(z))).epsilon(1e-9));
  }
  CHECK(std::isfinite(prob::log1m_tanh_sq(400.0)));
  CHECK(prob::log1m_tanh_sq(400.0) == doctest::Approx(2.0 * (std::log(2.0) - 400.0)));
}

TEST_CASE("free-nats clip examples") {
  CHECK(prob::free_nats_clip(0.5, 1.0) == 1.0);
  CHECK(prob::free_nats_clip(2.0, 1.0) == 2.0);
  CHECK(prob::free_nats_clip(0.25, 0.0) == 0.25);
  CHECK(prob::free_nats_clip(7.0, 0.0) == 7.0);
  CHECK_THROWS_AS(prob::free_nats_clip(1.0, -0.1), lawm::ConfigError);
}

TEST_CASE("free-nats clip gradient is zero below and one above the threshold") {
  for (double kl : {0.5, 2.0}) {
    ad::Parameter p("kl", ad::Matrix::Constant(1, 1, kl));
    auto loss = [&](ad::Tape& t) { return ad::sum(prob::free_nats_clip(t.param(p), 1.0)); };
    ad::Tape t;
    t.backward(loss(t));
    const double expected = kl < 1.0 ? 0.0 : 1.0;
    CHECK(p.grad(0, 0) == expected);
    const double h = 1e-6;
    auto at = [&](double v) {
      p.value(0, 0) = v;
      ad::Tape nt(false);
      return loss(nt).scalar();
    };
    const double fd = (at(kl + h) - at(kl - h)) / (2.0 * h);
    p.value(0, 0) = kl;
    CHECK(fd == doctest::Approx(expected).epsilon(1e-6));
  }
}

TEST_CASE("standard deviation parameterization round trips") {
  for (double s : {0.02, 0.5, 1.0, 4.0}) {
    CHECK(prob::std_from_raw(prob::raw_from_std(s)) == doctest::Approx(s).epsilon(1e-12));
  }
  CHECK(prob::std_from_raw(-50.0) >= prob::kDefaultMinStd);
}

TEST_CASE("tape distributions agree with plain distributions") {
  lawm::Engine e(10);
  const auto p = random_gaussian(e, 4);
  const auto q = random_gaussian(e, 4);
  ad::Tape t;
  auto as_var = [&](const prob::DiagGaussian& g) {
    return prob::constant_gaussian(t, g.mean().transpose(), g.stddev().transpose());
  };
  const auto pv = as_var(p);
  const auto qv = as_var(q);
  CHECK(prob::kl_divergence(pv, qv).scalar() == doctest::Approx(prob::kl_diag_gaussian(p, q)).epsilon(1e-12));
  const VectorXd x = VectorXd::LinSpaced(4, -0.5, 0.5);
  CHECK(prob::log_prob(pv, t.constant(x.transpose())).scalar() == doctest::Approx(p.log_prob(x)).epsilon(1e-12));
  const VectorXd pre = VectorXd::LinSpaced(4, -1.0, 1.5);
  const prob::TanhGaussian squashed(p, VectorXd::Constant(4, 3.0));
  const VectorXd squashed_x = 3.0 * pre.array().tanh().matrix();
  CHECK(prob::squashed_log_prob(pv, t.constant(pre.transpose()), 3.0).scalar() ==
        doctest::Approx(prob::tanh_gaussian_logprob(squashed, squashed_x)).epsilon(1e-9));
  CHECK(prob::unit_log_prob(t.constant(x.transpose()), t.constant(x.transpose())).scalar() ==
        doctest::Approx(-4.0 * prob::kHalfLog2Pi));
}

TEST_CASE("gaussian_from_raw splits mean and floored stddev") {
  ad::Tape t;
  ad::Matrix raw(2, 4);
  raw << 1, 2, -100, 0, -1, 0, 0, 100;
  const auto g = prob::gaussian_from_raw(t.constant(raw), 0.01);
  CHECK(g.dim() == 2);
  CHECK(g.mean.value()(0, 1) == 2.0);
  CHECK(g.stddev.value()(0, 0) == doctest::Approx(0.01));
  CHECK(g.stddev.value()(1, 1) == doctest::Approx(100.01));
  CHECK(g.stddev.value()(0, 1) == doctest::Approx(std::log(2.0) + 0.01));
}
