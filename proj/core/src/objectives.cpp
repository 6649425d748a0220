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

#include "lawm/objectives.hpp"

#include "lawm/error.hpp"
#include "lawm/prob.hpp"

#include <cmath>

namespace lawm::objectives {
namespace {

using ad::Index;
using ad::Matrix;
using ad::Var;

// Per-trajectory terms of one homogeneous sub-batch, each B x 1.
struct PathTerms {
  Var obs;
  Var action;  // invalid on the action-free path
  Var state_kl;
  Var action_kl;
  Var reward;  // invalid unless requested
  Index batch = 0;
};

Var time_average(const Var& per_step, Index steps) {
  return ad::sum_blocks(per_step, steps) * (1.0 / static_cast<double>(steps));
}

PathTerms evaluate_path(ad::Tape& tape, const wm::WorldModel& model, const wm::SequenceBatch& seq,
                        wm::FilterMode mode, const LossOptions& options, bool with_reward, NoiseSource& noise,
                        std::vector<wm::FilterResult>& filters) {
  wm::FilterResult f = model.observe(tape, seq, mode, noise);
  const Index T = seq.steps;
  const Index B = seq.batch;
  const double kl_floor = options.free_nats;
  const double action_floor = options.free_nats_action_kl ? options.free_nats : 0.0;

  PathTerms terms;
  terms.batch = B;
  const auto obs_dist = model.decode_obs(tape, f.posterior_stack);
  terms.obs = time_average(-prob::unit_log_prob(obs_dist.mean, tape.constant(seq.obs)), T);
  terms.state_kl =
      prob::free_nats_clip(time_average(prob::kl_divergence(f.posterior_stack.stoch_dist, f.prior_stack), T), kl_floor);

  Var action_kl = prob::kl_divergence(f.latent_action.dist, f.latent_action_prior);
  if (mode == wm::FilterMode::kLabeled) {
    terms.action = time_average(-prob::log_prob(f.decoded_action, tape.constant(*seq.actions)), T);
    terms.action_kl = prob::free_nats_clip(time_average(action_kl, T), action_floor);
  } else {
    const Index K = f.action_steps;
    Matrix inv_count(B, 1);
    for (Index b = 0; b < B; ++b) {
      double count = 0.0;
      for (Index k = 0; k < K; ++k) count += f.action_mask(k * B + b, 0);
      inv_count(b, 0) = 1.0 / count;
    }
    Var summed = ad::sum_blocks(ad::mul_constant(action_kl, f.action_mask), K);
    terms.action_kl = prob::free_nats_clip(ad::mul_constant(summed, inv_count), action_floor);
  }

  if (with_reward) {
    if (!seq.rewards.allFinite()) throw DataError("reward_loss: rewards missing or non-finite");
    const auto reward_dist = model.predict_reward(tape, f.posterior_stack);
    terms.reward = time_average(-prob::unit_log_prob(reward_dist.mean, tape.constant(seq.rewards)), T);
  }
  filters.push_back(std::move(f));
  return terms;
}

double block_sum(const Var& v) { return v.valid() ? v.value().sum() : 0.0; }

Var path_total(const PathTerms& t) {
  Var total = t.obs + t.state_kl + t.action_kl;
  if (t.action.valid()) total = total + t.action;
  if (t.reward.valid()) total = total + t.reward;
  return ad::sum(total);
}

LossResult combine(std::vector<PathTerms> paths, std::vector<wm::FilterResult> filters, Index labeled) {
  LossResult out;
  Index n = 0;
  for (const auto& p : paths) n += p.batch;
  const double inv = 1.0 / static_cast<double>(n);
  LossBreakdown& br = out.breakdown;
  Var total;
  for (const auto& p : paths) {
    br.obs_recon += block_sum(p.obs) * inv;
    br.action_recon += block_sum(p.action) * inv;
    br.state_kl += block_sum(p.state_kl) * inv;
    br.action_kl += block_sum(p.action_kl) * inv;
    br.reward_nll += block_sum(p.reward) * inv;
    Var part = path_total(p);
    total = total.valid() ? total + part : part;
  }
  out.total = total * inv;
  br.total = out.total.scalar();
  br.mask_fraction = static_cast<double>(labeled) * inv;
  out.filters = std::move(filters);
  return out;
}

std::vector<data::Trajectory> copy_subset(std::span<const data::Trajectory> batch, bool labeled) {
  std::vector<data::Trajectory> out;
  for (const auto& t : batch) {
    if (label_mask(t) == labeled) out.push_back(t);
  }
  return out;
}

LossResult single_path(ad::Tape& tape, const wm::WorldModel& model, std::span<const data::Trajectory> batch,
                       wm::FilterMode mode, const LossOptions& options, NoiseSource& noise) {
  if (batch.empty()) throw ContractError("loss: empty batch");
  std::vector<wm::FilterResult> filters;
  const auto seq = wm::SequenceBatch::from(batch);
  std::vector<PathTerms> paths;
  paths.push_back(evaluate_path(tape, model, seq, mode, options, options.include_reward, noise, filters));
  return combine(std::move(paths), std::move(filters), mode == wm::FilterMode::kLabeled ? seq.batch : 0);
}

}  // namespace

bool LossBreakdown::finite() const {
  return std::isfinite(obs_recon) && std::isfinite(action_recon) && std::isfinite(state_kl) &&
         std::isfinite(action_kl) && std::isfinite(reward_nll) && std::isfinite(total) &&
         std::isfinite(mask_fraction);
}

LossOptions loss_options(const ModelConfig& model, double free_nats, bool include_reward) {
  return LossOptions{free_nats, model.free_nats_action_kl, include_reward};
}

bool label_mask(const data::Trajectory& traj) {
  if (!traj.has_actions()) return false;
  const auto& a = *traj.actions;
  const Index missing = a.size() - a.array().isFinite().count();
  if (missing != 0) throw ContractError("trajectory has partially present actions");
  return true;
}

LossResult loss_action_conditioned(ad::Tape& tape, const wm::WorldModel& model,
                                   std::span<const data::Trajectory> batch, const LossOptions& options,
                                   NoiseSource& noise) {
  for (const auto& t : batch) {
    if (!label_mask(t)) throw ContractError("loss_action_conditioned: trajectory without actions");
  }
  return single_path(tape, model, batch, wm::FilterMode::kLabeled, options, noise);
}

LossResult loss_action_free(ad::Tape& tape, const wm::WorldModel& model, std::span<const data::Trajectory> batch,
                            const LossOptions& options, NoiseSource& noise) {
  for (const auto& t : batch) {
    if (t.length() < 2) throw ContractError("loss_action_free: trajectory shorter than 2 steps");
  }
  return single_path(tape, model, batch, wm::FilterMode::kActionFree, options, noise);
}

LossResult unified_loss(ad::Tape& tape, const wm::WorldModel& model, std::span<const data::Trajectory> batch,
                        const LossOptions& options, NoiseSource& noise) {
  if (batch.empty()) throw ContractError("unified_loss: empty batch");
  const auto labeled = copy_subset(batch, true);
  const auto unlabeled = copy_subset(batch, false);
  std::vector<PathTerms> paths;
  std::vector<wm::FilterResult> filters;
  if (!labeled.empty()) {
    paths.push_back(evaluate_path(tape, model, wm::SequenceBatch::from(labeled), wm::FilterMode::kLabeled, options,
                                  options.include_reward, noise, filters));
  }
  if (!unlabeled.empty()) {
    for (const auto& t : unlabeled) {
      if (t.length() < 2) throw ContractError("unified_loss: action-free trajectory shorter than 2 steps");
    }
    paths.push_back(evaluate_path(tape, model, wm::SequenceBatch::from(unlabeled), wm::FilterMode::kActionFree,
                                  options, options.include_reward, noise, filters));
  }
  return combine(std::move(paths), std::move(filters), static_cast<Index>(labeled.size()));
}

ad::Var reward_loss(ad::Tape& tape, const wm::WorldModel& model, const wm::FilterResult& filter,
                    const Eigen::MatrixXd& rewards) {
  if (rewards.rows() != filter.steps * filter.batch || rewards.cols() != 1) {
    throw ContractError("reward_loss: reward shape mismatch");
  }
  if (!rewards.allFinite()) throw DataError("reward_loss: rewards missing or non-finite");
  const auto dist = model.predict_reward(tape, filter.posterior_stack);
  return ad::mean(time_average(-prob::unit_log_prob(dist.mean, tape.constant(rewards)), filter.steps));
}

LossResult reward_loss(ad::Tape& tape, const wm::WorldModel& model, std::span<const data::Trajectory> batch,
                       NoiseSource& noise) {
  if (batch.empty()) throw ContractError("reward_loss: empty batch");
  const auto seq = wm::SequenceBatch::from(batch);
  const auto mode = seq.actions ? wm::FilterMode::kLabeled : wm::FilterMode::kActionFree;
  LossResult out;
  out.filters.push_back(model.observe(tape, seq, mode, noise));
  out.total = reward_loss(tape, model, out.filters.back(), seq.rewards);
  out.breakdown.reward_nll = out.total.scalar();
  out.breakdown.total = out.breakdown.reward_nll;
  out.breakdown.mask_fraction = seq.actions ? 1.0 : 0.0;
  return out;
}

LossResult model_objective(ad::Tape& tape, const wm::WorldModel& model, std::span<const data::Trajectory> batch,
                           const LossOptions& options, NoiseSource& noise) {
  LossOptions with_reward = options;
  with_reward.include_reward = true;
  return unified_loss(tape, model, batch, with_reward, noise);
}

}  // namespace lawm::objectives
