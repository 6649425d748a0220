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

#include "lawm/envs.hpp"

#include "lawm/error.hpp"

#include <cmath>
#include <numbers>

#ifndef LAWM_GIT_DESCRIBE
#define LAWM_GIT_DESCRIBE "unknown"
#endif

namespace lawm::envs {
namespace {

double unit_uniform(Engine& e) { return static_cast<double>(e() >> 11) * 0x1.0p-53; }

double lerp(double a, double b, double t) { return a + (b - a) * t; }

double wrap_angle(double a) {
  a = std::fmod(a + std::numbers::pi, 2.0 * std::numbers::pi);
  if (a < 0) a += 2.0 * std::numbers::pi;
  return a - std::numbers::pi;
}

}  // namespace

bool Environment::clip_action(const Eigen::VectorXd& action, Eigen::VectorXd& clipped) const {
  const EnvSpec& s = spec();
  if (action.size() != s.act_dim) {
    throw ContractError(s.name + ": expected action of size " + std::to_string(s.act_dim) + ", got " +
                        std::to_string(action.size()));
  }
  if (!action.allFinite()) throw NumericError(s.name + ": non-finite action");
  clipped = action.cwiseMax(-s.action_bound).cwiseMin(s.action_bound);
  return (clipped.array() != action.array()).any();
}

// --- point mass -----------------------------------------------------------

PointMass::PointMass() {
  spec_.name = "point_mass";
  spec_.obs_dim = 4;
  spec_.act_dim = 2;
  spec_.action_bound = Eigen::VectorXd::Ones(2);
}

Eigen::VectorXd PointMass::reset(std::uint64_t seed) {
  Engine e(substream_seed(seed, "point_mass.reset"));
  state_ << 2.0 * unit_uniform(e) - 1.0, 2.0 * unit_uniform(e) - 1.0, 0.0, 0.0;
  steps_ = 0;
  return observation();
}

StepResult PointMass::step(const Eigen::VectorXd& action) {
  if (steps_ >= spec_.episode_length) throw ContractError("point_mass: step after episode end");
  Eigen::VectorXd a;
  const bool clipped = clip_action(action, a);
  state_(2) += kDt * a(0);
  state_(3) += kDt * a(1);
  state_(0) += kDt * state_(2);
  state_(1) += kDt * state_(3);
  ++steps_;
  return {observation(), reward(), steps_ >= spec_.episode_length, clipped};
}

double PointMass::reward() const {
  const double d2 = state_(0) * state_(0) + state_(1) * state_(1);
  return std::exp(-d2 / (2.0 * kRewardWidth * kRewardWidth));
}

void PointMass::set_state(const Eigen::VectorXd& state) {
  if (state.size() != 4) throw ContractError("point_mass: state must have 4 entries");
  state_ = state;
}

// --- pendulum -------------------------------------------------------------

Pendulum::Pendulum() {
  spec_.name = "pendulum";
  spec_.obs_dim = 3;
  spec_.act_dim = 1;
  spec_.action_bound = Eigen::VectorXd::Constant(1, kMaxTorque);
}

Eigen::VectorXd Pendulum::reset(std::uint64_t seed) {
  Engine e(substream_seed(seed, "pendulum.reset"));
  theta_ = (2.0 * unit_uniform(e) - 1.0) * std::numbers::pi;
  theta_dot_ = 2.0 * unit_uniform(e) - 1.0;
  steps_ = 0;
  return observation();
}

StepResult Pendulum::step(const Eigen::VectorXd& action) {
  if (steps_ >= spec_.episode_length) throw ContractError("pendulum: step after episode end");
  Eigen::VectorXd u;
  const bool clipped = clip_action(action, u);
  // theta'' = 3g/(2l) sin(theta) + 3/(m l^2) u with g = 10, m = l = 1.
  theta_dot_ += kDt * (15.0 * std::sin(theta_) + 3.0 * u(0));
  theta_dot_ = std::clamp(theta_dot_, -kMaxSpeed, kMaxSpeed);
  theta_ = wrap_angle(theta_ + kDt * theta_dot_);
  ++steps_;
  return {observation(), reward(), steps_ >= spec_.episode_length, clipped};
}

double Pendulum::reward() const { return 0.5 * (1.0 + std::cos(theta_)); }

Eigen::VectorXd Pendulum::observation() const {
  Eigen::VectorXd o(3);
  o << kObsScale * std::cos(theta_), kObsScale * std::sin(theta_), theta_dot_;
  return o;
}

Eigen::VectorXd Pendulum::state() const {
  Eigen::VectorXd s(2);
  s << theta_, theta_dot_;
  return s;
}

void Pendulum::set_state(const Eigen::VectorXd& state) {
  if (state.size() != 2) throw ContractError("pendulum: state must have 2 entries");
  theta_ = state(0);
  theta_dot_ = state(1);
}

// --- factory --------------------------------------------------------------

std::unique_ptr<Environment> make_env(std::string_view name) {
  if (name == "point_mass") return std::make_unique<PointMass>();
  if (name == "pendulum") return std::make_unique<Pendulum>();
  throw ConfigError("unknown environment '" + std::string(name) + "'");
}

EnvSpec env_spec(std::string_view name) { return make_env(name)->spec(); }

double normalized_return(double episode_return, const EnvSpec& spec) {
  return 100.0 * episode_return / (static_cast<double>(spec.episode_length) * spec.max_step_reward);
}

std::string to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::kExpert:
      return "expert";
    case PolicyKind::kMedium:
      return "medium";
    case PolicyKind::kReplayMixture:
      return "medium-replay";
    case PolicyKind::kExplore:
      return "explore";
  }
  return "unknown";
}

PolicyKind parse_policy_kind(std::string_view name) {
  if (name == "expert") return PolicyKind::kExpert;
  if (name == "medium") return PolicyKind::kMedium;
  if (name == "medium-replay") return PolicyKind::kReplayMixture;
  if (name == "explore") return PolicyKind::kExplore;
  throw ConfigError("unknown dataset kind '" + std::string(name) + "'");
}

// --- scripted controllers -------------------------------------------------

ScriptedPolicy::ScriptedPolicy(std::string_view env, PolicyKind kind, double quality)
    : env_(env), kind_(kind), bound_(env_spec(env).action_bound) {
  quality = std::clamp(quality, 0.0, 1.0);
  if (env_ == "point_mass") {
    switch (kind) {
      case PolicyKind::kExpert:
        kp_ = 4.0, kd_ = 3.2, noise_ = 0.0;
        break;
      case PolicyKind::kMedium:
        kp_ = 0.3, kd_ = 0.3, noise_ = 0.3;
        break;
      case PolicyKind::kReplayMixture:
        kp_ = lerp(0.02, 0.3, quality), kd_ = lerp(0.02, 0.3, quality), noise_ = lerp(0.8, 0.3, quality);
        break;
      case PolicyKind::kExplore:
        noise_ = 0.3;
        break;
    }
  } else if (env_ == "pendulum") {
    switch (kind) {
      case PolicyKind::kExpert:
        kp_ = 10.0, kd_ = 2.0, energy_gain_ = 0.5, noise_ = 0.0;
        break;
      case PolicyKind::kMedium:
        kp_ = 6.0, kd_ = 0.8, energy_gain_ = 0.06, noise_ = 0.3;
        break;
      case PolicyKind::kReplayMixture:
        kp_ = lerp(0.5, 6.0, quality), kd_ = lerp(0.05, 0.8, quality);
        energy_gain_ = lerp(0.0, 0.06, quality), noise_ = lerp(0.8, 0.3, quality);
        break;
      case PolicyKind::kExplore:
        noise_ = 0.3;
        break;
    }
  } else {
    throw ConfigError("no scripted controller for environment '" + env_ + "'");
  }
  ou_ = Eigen::VectorXd::Zero(bound_.size());
}

void ScriptedPolicy::reset() { ou_.setZero(); }

Eigen::VectorXd ScriptedPolicy::controller(const Eigen::VectorXd& obs) const {
  if (env_ == "point_mass") {
    const Eigen::VectorXd state = obs / PointMass::kObsScale;
    return -kp_ * state.head<2>() - kd_ * state.tail<2>();
  }
  const double theta = std::atan2(obs(1), obs(0));
  const double theta_dot = obs(2);
  Eigen::VectorXd u(1);
  if (std::cos(theta) > 0.85) {
    u(0) = -kp_ * theta - kd_ * theta_dot;
  } else {
    // Energy pumping towards the upright rest energy (zero).
    const double energy = 0.5 * theta_dot * theta_dot + 15.0 * (std::cos(theta) - 1.0);
    const double push = theta_dot == 0.0 ? 1.0 : theta_dot;
    u(0) = -energy_gain_ * energy * push;
  }
  return u;
}

Eigen::VectorXd ScriptedPolicy::act(const Eigen::VectorXd& obs, Engine& engine) {
  Eigen::VectorXd a;
  if (kind_ == PolicyKind::kExplore) {
    // Ornstein-Uhlenbeck noise, temporally correlated across steps.
    for (Eigen::Index i = 0; i < ou_.size(); ++i) ou_(i) += -0.15 * ou_(i) + noise_ * normal_(engine);
    a = ou_.cwiseProduct(bound_);
  } else {
    a = controller(obs);
    for (Eigen::Index i = 0; i < a.size(); ++i) a(i) += noise_ * bound_(i) * normal_(engine);
  }
  return a.cwiseMax(-bound_).cwiseMin(bound_);
}

data::Trajectory rollout(Environment& env, ScriptedPolicy& policy, std::uint64_t reset_seed, Engine& noise,
                         std::int64_t* clipped) {
  const EnvSpec& spec = env.spec();
  const int t_max = spec.episode_length;
  data::Trajectory traj;
  traj.obs.resize(t_max, spec.obs_dim);
  traj.rewards.resize(t_max);
  traj.action_dim = spec.act_dim;
  data::FloatMatrix actions(t_max, spec.act_dim);

  policy.reset();
  Eigen::VectorXd obs = env.reset(reset_seed);
  double reward = env.reward();
  for (int t = 0; t < t_max; ++t) {
    traj.obs.row(t) = obs.cast<float>().transpose();
    traj.rewards(t) = static_cast<float>(reward);
    const Eigen::VectorXd a = policy.act(obs, noise);
    // Execute the float32-rounded action so the stored label is exactly the applied one.
    actions.row(t) = a.cast<float>().transpose();
    const StepResult r = env.step(actions.row(t).cast<double>().transpose());
    if (r.clipped && clipped != nullptr) ++*clipped;
    obs = r.obs;
    reward = r.reward;
  }
  traj.actions = std::move(actions);
  return traj;
}

data::Corpus generate_corpus(std::string_view env_name, PolicyKind kind, int n_trajectories, std::uint64_t seed) {
  if (n_trajectories < 1) throw ContractError("generate_corpus: need at least one trajectory");
  auto env = make_env(env_name);
  const EnvSpec& spec = env->spec();
  data::Corpus corpus;
  corpus.meta.env = spec.name;
  corpus.meta.kind = to_string(kind);
  corpus.meta.seed = seed;
  corpus.meta.generator = LAWM_GIT_DESCRIBE;
  corpus.meta.provenance = {"generated"};
  corpus.meta.obs_dim = spec.obs_dim;
  corpus.meta.act_dim = spec.act_dim;
  corpus.meta.action_bound.assign(spec.action_bound.data(), spec.action_bound.data() + spec.action_bound.size());
  corpus.meta.episode_length = spec.episode_length;
  corpus.meta.max_step_reward = spec.max_step_reward;

  Engine resets(substream_seed(seed, "gen.reset." + corpus.meta.kind));
  Engine noise(substream_seed(seed, "gen.noise." + corpus.meta.kind));
  corpus.trajectories.reserve(static_cast<std::size_t>(n_trajectories));
  for (int i = 0; i < n_trajectories; ++i) {
    const double quality = n_trajectories > 1 ? static_cast<double>(i) / (n_trajectories - 1) : 1.0;
    ScriptedPolicy policy(env_name, kind, quality);
    corpus.trajectories.push_back(rollout(*env, policy, resets(), noise, &corpus.meta.clipped_actions));
  }
  return corpus;
}

std::filesystem::path generate_dataset(std::string_view env, PolicyKind kind, int n_trajectories, std::uint64_t seed,
                                       const std::filesystem::path& root) {
  const data::Corpus corpus = generate_corpus(env, kind, n_trajectories, seed);
  const auto dir = data::corpus_dir(root, corpus.meta.env, corpus.meta.kind);
  data::write_corpus(corpus, dir);
  return dir;
}

}  // namespace lawm::envs
