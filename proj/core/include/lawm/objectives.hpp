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

#ifndef LAWM_OBJECTIVES_HPP_
#define LAWM_OBJECTIVES_HPP_

// Training losses for the latent action world model.
//
// Every loss is computed per trajectory first: reconstruction terms are
// summed over time and divided by the length, each KL is summed over its
// latent dimensions, averaged over time and then clipped from below by the
// free-nats threshold. Batch losses are means of the per-trajectory values.

#include "lawm/autodiff.hpp"
#include "lawm/data.hpp"
#include "lawm/rng.hpp"
#include "lawm/world_model.hpp"

#include <span>
#include <vector>

namespace lawm::objectives {

struct LossBreakdown {
  double obs_recon = 0.0;
  double action_recon = 0.0;
  double state_kl = 0.0;
  double action_kl = 0.0;
  double reward_nll = 0.0;
  // obs_recon + action_recon + state_kl + action_kl + reward_nll.
  double total = 0.0;
  double mask_fraction = 0.0;

  bool finite() const;
};

struct LossOptions {
  double free_nats = 0.0;
  bool free_nats_action_kl = true;
  bool include_reward = false;
};

LossOptions loss_options(const ModelConfig& model, double free_nats, bool include_reward);

struct LossResult {
  ad::Var total;  // 1x1, differentiable
  LossBreakdown breakdown;
  // Filtering passes in evaluation order: labeled sub-batch first.
  std::vector<wm::FilterResult> filters;
};

// Fully labeled batch (ContractError otherwise).
LossResult loss_action_conditioned(ad::Tape& tape, const wm::WorldModel& model,
                                   std::span<const data::Trajectory> batch, const LossOptions& options,
                                   NoiseSource& noise);

// Ignores stored actions. Trajectories need at least two observations.
LossResult loss_action_free(ad::Tape& tape, const wm::WorldModel& model, std::span<const data::Trajectory> batch,
                            const LossOptions& options, NoiseSource& noise);

// Routes each trajectory through the loss selected by its label mask and
// averages over the whole batch. Action matrices with missing (non-finite)
// entries are rejected as partially labeled.
LossResult unified_loss(ad::Tape& tape, const wm::WorldModel& model, std::span<const data::Trajectory> batch,
                        const LossOptions& options, NoiseSource& noise);

// Mean per-step reward NLL at the posterior states of `filter`.
ad::Var reward_loss(ad::Tape& tape, const wm::WorldModel& model, const wm::FilterResult& filter,
                    const Eigen::MatrixXd& rewards);
LossResult reward_loss(ad::Tape& tape, const wm::WorldModel& model, std::span<const data::Trajectory> batch,
                       NoiseSource& noise);

// unified_loss with the reward term included.
LossResult model_objective(ad::Tape& tape, const wm::WorldModel& model, std::span<const data::Trajectory> batch,
                           const LossOptions& options, NoiseSource& noise);

// Label mask of one trajectory: 1 when every action is present, 0 when none
// is. Throws ContractError for partial labels.
bool label_mask(const data::Trajectory& traj);

}  // namespace lawm::objectives

#endif  // LAWM_OBJECTIVES_HPP_
