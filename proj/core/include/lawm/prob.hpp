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

#ifndef LAWM_PROB_HPP_
#define LAWM_PROB_HPP_

// Distribution primitives shared by every stochastic head.
//
// Two surfaces are provided. The plain one (DiagGaussian, TanhGaussian)
// operates on single vectors and validates its inputs; it is the reference
// used by tests and tooling. The differentiable one (GaussianVar) operates on
// batched tape variables and is what the models train through.

#include "lawm/autodiff.hpp"

#include <Eigen/Core>

namespace lawm::prob {

inline constexpr double kHalfLog2Pi = 0.91893853320467274178;
inline constexpr double kDefaultMinStd = 0.01;

class DiagGaussian {
 public:
  DiagGaussian(Eigen::VectorXd mean, Eigen::VectorXd stddev);
  static DiagGaussian standard(Eigen::Index dim);

  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::VectorXd& stddev() const { return stddev_; }
  Eigen::Index dim() const { return mean_.size(); }

  double log_prob(const Eigen::VectorXd& x) const;
  double entropy() const;

 private:
  Eigen::VectorXd mean_;
  Eigen::VectorXd stddev_;
};

// tanh-squashed diagonal Gaussian: x = scale * tanh(z), z ~ base.
class TanhGaussian {
 public:
  TanhGaussian(DiagGaussian base, Eigen::VectorXd scale);

  const DiagGaussian& base() const { return base_; }
  const Eigen::VectorXd& scale() const { return scale_; }
  Eigen::Index dim() const { return base_.dim(); }

 private:
  DiagGaussian base_;
  Eigen::VectorXd scale_;
};

// Closed-form KL(p || q), summed over coordinates.
double kl_diag_gaussian(const DiagGaussian& p, const DiagGaussian& q);

// mean + stddev * noise.
Eigen::VectorXd reparam_sample(const DiagGaussian& dist, const Eigen::VectorXd& noise);

Eigen::VectorXd tanh_gaussian_sample(const TanhGaussian& dist, const Eigen::VectorXd& noise);

// Log-density including the change-of-variables term. Throws NumericError
// when any |x_i| >= scale_i.
double tanh_gaussian_logprob(const TanhGaussian& dist, const Eigen::VectorXd& x);

// max(kl, free_nats). Throws ConfigError for negative free_nats.
double free_nats_clip(double kl, double free_nats);

// log(1 - tanh(z)^2) evaluated without cancellation.
double log1m_tanh_sq(double z);

// softplus(raw) + min_std.
double std_from_raw(double raw, double min_std = kDefaultMinStd);
// Inverse of std_from_raw, for initializing heads to a chosen stddev.
double raw_from_std(double stddev, double min_std = kDefaultMinStd);

// --- differentiable, batched ----------------------------------------------

// Batched diagonal Gaussian: mean and stddev are (batch x dim).
struct GaussianVar {
  ad::Var mean;
  ad::Var stddev;

  ad::Index dim() const { return mean.cols(); }
  ad::Index batch() const { return mean.rows(); }
  // Plain copy of row `r`.
  DiagGaussian row(ad::Index r) const;
};

// Splits a raw (batch x 2d) head output into mean and floored stddev.
GaussianVar gaussian_from_raw(const ad::Var& raw, double min_std = kDefaultMinStd);
GaussianVar constant_gaussian(ad::Tape& tape, const ad::Matrix& mean, const ad::Matrix& stddev);
GaussianVar standard_normal(ad::Tape& tape, ad::Index batch, ad::Index dim);

// (batch x 1) closed-form KL per row.
ad::Var kl_divergence(const GaussianVar& p, const GaussianVar& q);
// (batch x 1) log-density per row.
ad::Var log_prob(const GaussianVar& dist, const ad::Var& x);
// Log-density of a unit-stddev Gaussian with the given mean, per row.
ad::Var unit_log_prob(const ad::Var& mean, const ad::Var& x);
ad::Var reparam_sample(const GaussianVar& dist, const ad::Matrix& noise);
// Log-density of scale * tanh(pre) under the squashed distribution, given the
// pre-squash value `pre` (batch x 1). Uses the stable log1m_tanh_sq form.
ad::Var squashed_log_prob(const GaussianVar& base, const ad::Var& pre, double scale);
ad::Var free_nats_clip(const ad::Var& kl, double free_nats);

}  // namespace lawm::prob

#endif  // LAWM_PROB_HPP_
