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

#include <cmath>
#include <string>

namespace lawm::prob {
namespace {

void require_finite(const Eigen::VectorXd& v, const char* what) {
  if (!v.allFinite()) throw NumericError(std::string(what) + " contains non-finite values");
}

void require_dim(Eigen::Index a, Eigen::Index b, const char* op) {
  if (a != b) {
    throw ContractError(std::string(op) + ": dimension mismatch (" + std::to_string(a) + " vs " +
                        std::to_string(b) + ")");
  }
}

}  // namespace

DiagGaussian::DiagGaussian(Eigen::VectorXd mean, Eigen::VectorXd stddev)
    : mean_(std::move(mean)), stddev_(std::move(stddev)) {
  require_dim(mean_.size(), stddev_.size(), "DiagGaussian");
  require_finite(mean_, "DiagGaussian mean");
  require_finite(stddev_, "DiagGaussian stddev");
  if ((stddev_.array() <= 0.0).any()) throw NumericError("DiagGaussian stddev must be strictly positive");
}

DiagGaussian DiagGaussian::standard(Eigen::Index dim) {
  return DiagGaussian(Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Ones(dim));
}

double DiagGaussian::log_prob(const Eigen::VectorXd& x) const {
  require_dim(x.size(), dim(), "DiagGaussian::log_prob");
  const auto z = (x - mean_).array() / stddev_.array();
  return (-0.5 * z.square() - stddev_.array().log() - kHalfLog2Pi).sum();
}

double DiagGaussian::entropy() const {
  return (stddev_.array().log() + 0.5 + kHalfLog2Pi).sum();
}

TanhGaussian::TanhGaussian(DiagGaussian base, Eigen::VectorXd scale) : base_(std::move(base)), scale_(std::move(scale)) {
  require_dim(scale_.size(), base_.dim(), "TanhGaussian");
  if (!scale_.allFinite() || (scale_.array() <= 0.0).any()) throw ContractError("TanhGaussian scale must be positive");
}

double kl_diag_gaussian(const DiagGaussian& p, const DiagGaussian& q) {
  require_dim(p.dim(), q.dim(), "kl_diag_gaussian");
  const auto sp = p.stddev().array();
  const auto sq = q.stddev().array();
  const auto dm = (p.mean() - q.mean()).array();
  const double kl = ((sq / sp).log() + (sp.square() + dm.square()) / (2.0 * sq.square()) - 0.5).sum();
  if (!std::isfinite(kl)) throw NumericError("kl_diag_gaussian: non-finite result");
  // Rounding can leave tiny negative values for identical inputs.
  return std::max(kl, 0.0);
}

Eigen::VectorXd reparam_sample(const DiagGaussian& dist, const Eigen::VectorXd& noise) {
  require_dim(noise.size(), dist.dim(), "reparam_sample");
  return dist.mean() + dist.stddev().cwiseProduct(noise);
}

Eigen::VectorXd tanh_gaussian_sample(const TanhGaussian& dist, const Eigen::VectorXd& noise) {
  const Eigen::VectorXd z = reparam_sample(dist.base(), noise);
  return dist.scale().cwiseProduct(z.array().tanh().matrix());
}

double log1m_tanh_sq(double z) {
  // 1 - tanh(z)^2 = 4 / (e^z + e^-z)^2  =>  2 (log 2 - z - softplus(-2z)).
  const double a = -2.0 * z;
  const double softplus = std::log1p(std::exp(-std::abs(a))) + std::max(a, 0.0);
  return 2.0 * (std::log(2.0) - z - softplus);
}

double tanh_gaussian_logprob(const TanhGaussian& dist, const Eigen::VectorXd& x) {
  require_dim(x.size(), dist.dim(), "tanh_gaussian_logprob");
  require_finite(x, "tanh_gaussian_logprob input");
  const Eigen::ArrayXd y = x.array() / dist.scale().array();
  if ((y.abs() >= 1.0).any()) throw NumericError("tanh_gaussian_logprob: input on or outside the bound");
  const Eigen::VectorXd z = y.atanh().matrix();
  double correction = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) correction += std::log(dist.scale()(i)) + log1m_tanh_sq(z(i));
  return dist.base().log_prob(z) - correction;
}

double free_nats_clip(double kl, double free_nats) {
  if (free_nats < 0.0 || !std::isfinite(free_nats)) throw ConfigError("free_nats must be a finite value >= 0");
  return std::max(kl, free_nats);
}

double std_from_raw(double raw, double min_std) {
  return std::log1p(std::exp(-std::abs(raw))) + std::max(raw, 0.0) + min_std;
}

double raw_from_std(double stddev, double min_std) {
  const double s = stddev - min_std;
  if (s <= 0.0) throw ContractError("raw_from_std: stddev must exceed the floor");
  return s > 30.0 ? s : std::log(std::expm1(s));
}

// --- differentiable -------------------------------------------------------

DiagGaussian GaussianVar::row(ad::Index r) const {
  return DiagGaussian(mean.value().row(r).transpose(), stddev.value().row(r).transpose());
}

GaussianVar gaussian_from_raw(const ad::Var& raw, double min_std) {
  if (raw.cols() % 2 != 0) throw ContractError("gaussian_from_raw: odd number of columns");
  const ad::Index d = raw.cols() / 2;
  return {ad::slice_cols(raw, 0, d), ad::softplus(ad::slice_cols(raw, d, d)) + min_std};
}

GaussianVar constant_gaussian(ad::Tape& tape, const ad::Matrix& mean, const ad::Matrix& stddev) {
  return {tape.constant(mean), tape.constant(stddev)};
}

GaussianVar standard_normal(ad::Tape& tape, ad::Index batch, ad::Index dim) {
  return constant_gaussian(tape, ad::Matrix::Zero(batch, dim), ad::Matrix::Ones(batch, dim));
}

ad::Var kl_divergence(const GaussianVar& p, const GaussianVar& q) {
  if (p.dim() != q.dim() || p.batch() != q.batch()) throw ContractError("kl_divergence: shape mismatch");
  const ad::Var log_ratio = ad::log(q.stddev) - ad::log(p.stddev);
  const ad::Var num = ad::square(p.stddev) + ad::square(p.mean - q.mean);
  const ad::Var den_inv = 0.5 * ad::exp(-2.0 * ad::log(q.stddev));
  return ad::row_sum(log_ratio + num * den_inv - 0.5);
}

ad::Var log_prob(const GaussianVar& dist, const ad::Var& x) {
  if (x.cols() != dist.dim() || x.rows() != dist.batch()) throw ContractError("log_prob: shape mismatch");
  const ad::Var log_std = ad::log(dist.stddev);
  const ad::Var z = (x - dist.mean) * ad::exp(-log_std);
  return ad::row_sum(-0.5 * ad::square(z) - log_std - kHalfLog2Pi);
}

ad::Var unit_log_prob(const ad::Var& mean, const ad::Var& x) {
  if (x.cols() != mean.cols() || x.rows() != mean.rows()) throw ContractError("unit_log_prob: shape mismatch");
  return ad::row_sum((-0.5) * ad::square(x - mean) - kHalfLog2Pi);
}

ad::Var reparam_sample(const GaussianVar& dist, const ad::Matrix& noise) {
  if (noise.rows() != dist.batch() || noise.cols() != dist.dim()) throw ContractError("reparam_sample: noise shape");
  return dist.mean + ad::mul_constant(dist.stddev, noise);
}

ad::Var squashed_log_prob(const GaussianVar& base, const ad::Var& pre, double scale) {
  // log(1 - tanh(z)^2) = 2 (log 2 - z - softplus(-2z)).
  const ad::Var correction = 2.0 * (std::log(2.0) - pre - ad::softplus(-2.0 * pre));
  const double log_scale = std::log(scale) * static_cast<double>(pre.cols());
  return log_prob(base, pre) - ad::row_sum(correction) - log_scale;
}

ad::Var free_nats_clip(const ad::Var& kl, double free_nats) {
  if (free_nats < 0.0 || !std::isfinite(free_nats)) throw ConfigError("free_nats must be a finite value >= 0");
  if (free_nats == 0.0) return kl;
  return ad::clamp_min(kl, free_nats);
}

}  // namespace lawm::prob
