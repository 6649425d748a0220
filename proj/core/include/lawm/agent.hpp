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

#ifndef LAWM_AGENT_HPP_
#define LAWM_AGENT_HPP_

// Offline actor-critic trained on imagined rollouts of a frozen world model.
//
// The policy acts in latent-action space through a tanh-squashed Gaussian,
// so its outputs stay inside the support of the latent action prior. Two
// independent value networks give the bootstrap values; targets use their
// elementwise minimum.

#include "lawm/autodiff.hpp"
#include "lawm/config.hpp"
#include "lawm/envs.hpp"
#include "lawm/nn.hpp"
#include "lawm/world_model.hpp"

#include <span>
#include <string>
#include <vector>

namespace lawm::agent {

using ad::Matrix;
using ad::Tape;
using ad::Var;

// G_t = r_t + gamma ((1 - lambda) V_{t+1} + lambda G_{t+1}), with
// G_{H-1} = r_{H-1} + gamma V_H. `values` has H + 1 entries; values[0] is
// not used.
std::vector<double> lambda_returns(std::span<const double> rewards, std::span<const double> values, double discount,
                                   double lambda);
std::vector<Var> lambda_returns(const std::vector<Var>& rewards, const std::vector<Var>& values, double discount,
                                double lambda);

struct AgentMetrics {
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  double mean_return = 0.0;
  double entropy = 0.0;  // Monte Carlo estimate, minus the mean log-density
  double actor_grad_norm = 0.0;
  double critic_grad_norm = 0.0;
};

// Detached start states for imagination.
struct StartStates {
  Matrix deter;
  Matrix stoch;
};

StartStates detach_states(const wm::ModelState& state);

struct ActorObjective {
  Var loss;  // -mean(G) + eta * mean(log pi)
  Var returns;
  Var mean_log_prob;
  std::vector<wm::ImaginedStep> steps;
};

class Agent {
 public:
  Agent(const AgentConfig& config, const ModelConfig& model, std::uint64_t seed);

  const AgentConfig& config() const { return config_; }

  prob::GaussianVar policy_base(Tape& tape, const wm::ModelState& s) const;
  // Squashed sample, or the squashed mean when `deterministic`. The returned
  // log_prob is the density of the sample under the policy.
  wm::LatentAction act(Tape& tape, const wm::WorldModel& model, const wm::ModelState& s, NoiseSource& noise,
                       bool deterministic) const;

  Var value(Tape& tape, int index, const wm::ModelState& s) const;
  Var min_value(Tape& tape, const wm::ModelState& s) const;

  // Imagines `horizon` steps from `start` and builds the actor loss on
  // `tape`. The caller freezes whatever should not be trained.
  ActorObjective actor_objective(Tape& tape, const wm::WorldModel& model, const StartStates& start,
                                 NoiseSource& noise) const;
  // Twin-critic regression onto fixed targets, one row per state.
  Var critic_loss(Tape& tape, const wm::ModelState& states, const Matrix& targets) const;

  // One actor step and one critic step. World-model parameters are frozen
  // on every tape this builds.
  AgentMetrics update(const wm::WorldModel& model, const StartStates& start, NoiseSource& noise);

  nn::ParamList policy_parameters() const;
  nn::ParamList value_parameters() const;
  nn::ParamList parameters() const;

  nn::Adam& actor_optimizer() { return actor_opt_; }
  nn::Adam& critic_optimizer() { return critic_opt_; }

 private:
  AgentConfig config_;
  PriorMode prior_;
  int latent_size_;
  nn::Mlp policy_;
  nn::Mlp value1_;
  nn::Mlp value2_;
  nn::Adam actor_opt_;
  nn::Adam critic_opt_;
};

// Batched closed-loop controller interface for real-environment rollouts.
class Controller {
 public:
  virtual ~Controller() = default;
  virtual void reset(ad::Index batch) = 0;
  // One row per episode; returns one action row per episode.
  virtual Matrix act(const Matrix& obs) = 0;
};

// Filters the world-model state from the executed history and acts with the
// decoded mean of the deterministic policy output.
class LatentController final : public Controller {
 public:
  LatentController(const wm::WorldModel& model, const Agent& agent) : model_(&model), agent_(&agent) {}
  void reset(ad::Index batch) override;
  Matrix act(const Matrix& obs) override;

 private:
  const wm::WorldModel* model_;
  const Agent* agent_;
  Matrix deter_, stoch_, prev_action_;
};

class ScriptedController final : public Controller {
 public:
  ScriptedController(std::string env, envs::PolicyKind kind, std::uint64_t seed);
  void reset(ad::Index batch) override;
  Matrix act(const Matrix& obs) override;

 private:
  std::string env_;
  envs::PolicyKind kind_;
  Engine engine_;
  std::vector<envs::ScriptedPolicy> policies_;
};

class RandomController final : public Controller {
 public:
  RandomController(const envs::EnvSpec& spec, std::uint64_t seed) : bound_(spec.action_bound), engine_(seed) {}
  void reset(ad::Index) override {}
  Matrix act(const Matrix& obs) override;

 private:
  Eigen::VectorXd bound_;
  Engine engine_;
};

struct EvalResult {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
  std::vector<double> normalized_returns;
};

// Runs `episodes` full-length episodes in lockstep. Episode i resets from a
// seed derived from (`seed`, i).
EvalResult evaluate(const std::string& env, Controller& controller, int episodes, std::uint64_t seed);

EvalResult evaluate_policy(const wm::WorldModel& model, const Agent& agent, const std::string& env, int episodes,
                           std::uint64_t seed);

}  // namespace lawm::agent

#endif  // LAWM_AGENT_HPP_
