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

#ifndef LAWM_ENVS_HPP_
#define LAWM_ENVS_HPP_

// Deterministic continuous-control environments with closed-form dynamics and
// the scripted controllers used to generate offline corpora.

#include "lawm/data.hpp"
#include "lawm/rng.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>

namespace lawm::envs {

struct EnvSpec {
  std::string name;
  Eigen::Index obs_dim = 0;
  Eigen::Index act_dim = 0;
  Eigen::VectorXd action_bound;  // symmetric, per coordinate
  int episode_length = 500;
  double max_step_reward = 1.0;
};

struct StepResult {
  Eigen::VectorXd obs;
  double reward = 0.0;
  bool done = false;
  bool clipped = false;
};

class Environment {
 public:
  virtual ~Environment() = default;

  virtual const EnvSpec& spec() const = 0;
  virtual Eigen::VectorXd reset(std::uint64_t seed) = 0;
  // Actions outside the bounds are clipped and flagged; non-finite actions
  // throw NumericError.
  virtual StepResult step(const Eigen::VectorXd& action) = 0;
  // Reward of the current state.
  virtual double reward() const = 0;
  virtual Eigen::VectorXd observation() const = 0;

  virtual Eigen::VectorXd state() const = 0;
  virtual void set_state(const Eigen::VectorXd& state) = 0;

  int steps() const { return steps_; }

 protected:
  // Clips into bounds, validating finiteness. Returns whether clipping occurred.
  bool clip_action(const Eigen::VectorXd& action, Eigen::VectorXd& clipped) const;
  int steps_ = 0;
};

// 2-D double integrator: state (x, y, vx, vy), force = action, goal at the
// origin, reward exp(-|pos|^2 / (2 w^2)). Semi-implicit Euler with dt = 0.05.
class PointMass final : public Environment {
 public:
  static constexpr double kDt = 0.05;
  // Reward is a Gaussian bump of this width around the origin.
  static constexpr double kRewardWidth = 0.2;
  // Observations report the state in these units. A unit-variance decoder
  // only pays for encoding signals whose variance is well above one.
  static constexpr double kObsScale = 10.0;

  PointMass();
  const EnvSpec& spec() const override { return spec_; }
  Eigen::VectorXd reset(std::uint64_t seed) override;
  StepResult step(const Eigen::VectorXd& action) override;
  double reward() const override;
  Eigen::VectorXd observation() const override { return kObsScale * state_; }
  Eigen::VectorXd state() const override { return state_; }
  void set_state(const Eigen::VectorXd& state) override;

 private:
  EnvSpec spec_;
  Eigen::Vector4d state_ = Eigen::Vector4d::Zero();
};

// Torque-limited swing-up pendulum, theta = 0 upright. Observation
// (s cos theta, s sin theta, theta_dot) with s = kObsScale, reward (1 + cos theta) / 2.
class Pendulum final : public Environment {
 public:
  static constexpr double kDt = 0.05;
  static constexpr double kMaxSpeed = 8.0;
  static constexpr double kMaxTorque = 2.0;
  // Scale of the (cos, sin) observation entries.
  static constexpr double kObsScale = 5.0;

  Pendulum();
  const EnvSpec& spec() const override { return spec_; }
  Eigen::VectorXd reset(std::uint64_t seed) override;
  StepResult step(const Eigen::VectorXd& action) override;
  double reward() const override;
  Eigen::VectorXd observation() const override;
  Eigen::VectorXd state() const override;
  void set_state(const Eigen::VectorXd& state) override;

 private:
  EnvSpec spec_;
  double theta_ = 0.0;
  double theta_dot_ = 0.0;
};

std::unique_ptr<Environment> make_env(std::string_view name);
EnvSpec env_spec(std::string_view name);

// 100 * return / (episode_length * max_step_reward).
double normalized_return(double episode_return, const EnvSpec& spec);

enum class PolicyKind { kExpert, kMedium, kReplayMixture, kExplore };

std::string to_string(PolicyKind kind);
PolicyKind parse_policy_kind(std::string_view name);

// Scripted data-collection controller. `quality` in [0, 1] positions a
// replay-mixture controller on its poor -> medium schedule.
class ScriptedPolicy {
 public:
  ScriptedPolicy(std::string_view env, PolicyKind kind, double quality = 1.0);

  Eigen::VectorXd act(const Eigen::VectorXd& obs, Engine& engine);
  void reset();

  PolicyKind kind() const { return kind_; }
  double noise_scale() const { return noise_; }

 private:
  Eigen::VectorXd controller(const Eigen::VectorXd& obs) const;

  std::string env_;
  PolicyKind kind_;
  Eigen::VectorXd bound_;
  double kp_ = 0.0, kd_ = 0.0, energy_gain_ = 0.0, noise_ = 0.0;
  Eigen::VectorXd ou_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

// Rolls one episode of `policy`, recording (o_t, a_t, r_t) with r_t the
// reward of o_t. Adds the number of clipped actions to `clipped`.
data::Trajectory rollout(Environment& env, ScriptedPolicy& policy, std::uint64_t reset_seed, Engine& noise,
                         std::int64_t* clipped = nullptr);

data::Corpus generate_corpus(std::string_view env, PolicyKind kind, int n_trajectories, std::uint64_t seed);

// Writes `<root>/<env>/<kind>/traj_%06d.lawm` plus meta.json and returns the
// corpus directory.
std::filesystem::path generate_dataset(std::string_view env, PolicyKind kind, int n_trajectories, std::uint64_t seed,
                                       const std::filesystem::path& root);

}  // namespace lawm::envs

#endif  // LAWM_ENVS_HPP_
