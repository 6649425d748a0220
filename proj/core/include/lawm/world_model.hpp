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

#ifndef LAWM_WORLD_MODEL_HPP_
#define LAWM_WORLD_MODEL_HPP_

// Latent action world model.
//
// The latent state s_t = (deter, stoch) follows a recurrent state-space
// model: a layer-normalized GRU advances `deter` from (deter, stoch, action)
// and Gaussian heads produce the stochastic part from `deter` alone (prior)
// or from `deter` and the observation embedding (posterior). A latent action
// u_t sits between the state and the environment action: a shared decoder
// maps (s_t, u_t) to a_t, and two inference heads infer u_t from the
// recorded action (labeled data) or from the next observation (action-free
// data).

#include "lawm/autodiff.hpp"
#include "lawm/config.hpp"
#include "lawm/data.hpp"
#include "lawm/nn.hpp"
#include "lawm/prob.hpp"
#include "lawm/rng.hpp"

#include <atomic>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace lawm::wm {

using ad::Index;
using ad::Matrix;
using ad::Tape;
using ad::Var;

struct ModelState {
  Var deter;
  Var stoch;
  prob::GaussianVar stoch_dist;

  Var features() const { return ad::concat_cols({deter, stoch}); }
  Index batch() const { return deter.rows(); }
};

struct LatentAction {
  Var sample;
  prob::GaussianVar dist;
  // Set by policies: log-density of `sample` under the policy.
  Var log_prob;
};

enum class FilterMode { kLabeled, kActionFree };

// Time-major view of equal-length trajectories: row t*B + b holds step t of
// trajectory b.
struct SequenceBatch {
  Index steps = 0;
  Index batch = 0;
  Matrix obs;                     // steps*batch x obs_dim
  std::optional<Matrix> actions;  // steps*batch x act_dim
  Matrix rewards;                 // steps*batch x 1
  Matrix next_obs;                // batch x obs_dim
  Eigen::VectorXd has_next;       // batch, 1 where next_obs is a real observation

  static SequenceBatch from(std::span<const data::Trajectory> trajectories);
  bool any_next() const { return has_next.sum() > 0.0; }
};

struct FilterResult {
  FilterMode mode = FilterMode::kLabeled;
  Index steps = 0;
  Index batch = 0;

  std::vector<ModelState> posteriors;     // one per step
  std::vector<prob::GaussianVar> priors;  // state prior at each step
  ModelState posterior_stack;             // all steps, time-major
  prob::GaussianVar prior_stack;

  // Latent-action terms for `action_steps` steps, time-major. Labeled mode
  // covers every step; action-free mode covers steps with a successor
  // observation (mask is zero for rows whose successor is missing).
  Index action_steps = 0;
  LatentAction latent_action;
  prob::GaussianVar latent_action_prior;
  prob::GaussianVar decoded_action;
  Matrix action_mask;  // action_steps*batch x 1
};

struct ImaginedStep {
  ModelState state;  // state reached after the transition
  LatentAction latent;
  Var action;
  Var reward;
};

using LatentPolicy = std::function<LatentAction(Tape&, const ModelState&)>;

struct CallCounters {
  CallCounters() = default;
  CallCounters(const CallCounters& o) : labeled(o.labeled.load()), action_free(o.action_free.load()) {}
  CallCounters& operator=(const CallCounters& o) {
    labeled = o.labeled.load();
    action_free = o.action_free.load();
    return *this;
  }
  std::atomic<std::uint64_t> labeled{0};
  std::atomic<std::uint64_t> action_free{0};
};

class WorldModel {
 public:
  WorldModel(const ModelConfig& config, Index obs_dim, Index act_dim, const Eigen::VectorXd& action_bound,
             std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  Index obs_dim() const { return obs_dim_; }
  Index act_dim() const { return act_dim_; }
  Index feature_size() const { return config_.deter_size + config_.stoch_size; }
  const Eigen::VectorXd& action_bound() const { return bound_; }

  ModelState init_state(Tape& tape, Index batch) const;
  // Wraps plain values as a detached state on `tape`.
  ModelState state_from_values(Tape& tape, const Matrix& deter, const Matrix& stoch) const;

  Var encode_obs(Tape& tape, const Var& obs) const;
  ModelState prior_step(Tape& tape, const ModelState& prev, const Var& prev_action, NoiseSource& noise) const;
  ModelState posterior_step(Tape& tape, const ModelState& prev, const Var& prev_action, const Var& obs_embed,
                            NoiseSource& noise) const;

  prob::GaussianVar latent_action_prior(Tape& tape, const ModelState& s) const;
  LatentAction action_posterior_labeled(Tape& tape, const ModelState& s, const Var& action, NoiseSource& noise) const;
  LatentAction action_posterior_unlabeled(Tape& tape, const ModelState& s, const Var& next_obs_embed,
                                          NoiseSource& noise) const;

  prob::GaussianVar decode_action(Tape& tape, const ModelState& s, const Var& latent) const;
  // Unit-stddev Gaussians: the returned stddev is a constant of ones.
  prob::GaussianVar decode_obs(Tape& tape, const ModelState& s) const;
  prob::GaussianVar predict_reward(Tape& tape, const ModelState& s) const;

  // Left-to-right filtering over a batch of equal-length trajectories.
  FilterResult observe(Tape& tape, std::span<const data::Trajectory> batch, FilterMode mode,
                       NoiseSource& noise) const;
  FilterResult observe(Tape& tape, const SequenceBatch& batch, FilterMode mode, NoiseSource& noise) const;

  // Rolls the prior forward under `policy`. `start` must not require
  // gradients (ContractError otherwise).
  std::vector<ImaginedStep> imagine(Tape& tape, const ModelState& start, const LatentPolicy& policy, int horizon,
                                    NoiseSource& noise) const;

  nn::ParamList parameters() const;
  std::vector<std::pair<std::string, nn::ParamList>> parameter_groups() const;

  const CallCounters& counters() const { return counters_; }
  void reset_counters() { counters_ = CallCounters{}; }

 private:
  Var recurrent(Tape& tape, const ModelState& prev, const Var& prev_action) const;
  // One filtering step sharing the recurrent update: the state prior and the
  // posterior state.
  std::pair<prob::GaussianVar, ModelState> filter_step(Tape& tape, const ModelState& prev, const Var& prev_action,
                                                       const Var& obs_embed, NoiseSource& noise) const;
  Var bound_matrix(Tape& tape, Index rows) const;

  ModelConfig config_;
  Index obs_dim_;
  Index act_dim_;
  Eigen::VectorXd bound_;

  nn::Mlp encoder_;
  nn::Linear img_in_;
  nn::LayerNorm img_norm_;
  nn::GruCell cell_;
  nn::Mlp prior_head_;
  nn::Mlp posterior_head_;
  nn::Mlp action_prior_;  // C-LAP mode only
  nn::Mlp action_posterior_labeled_;
  nn::Mlp action_posterior_unlabeled_;
  nn::Mlp action_decoder_;
  nn::Mlp obs_decoder_;
  nn::Mlp reward_head_;

  mutable CallCounters counters_;
};

// Stacks per-step states row-wise (time-major).
ModelState stack_states(const std::vector<ModelState>& states);

}  // namespace lawm::wm

#endif  // LAWM_WORLD_MODEL_HPP_
