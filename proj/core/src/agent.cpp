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

#include "lawm/agent.hpp"

#include "lawm/error.hpp"
#include "lawm/prob.hpp"

#include <cmath>
#include <random>

namespace lawm::agent {
namespace {

void check_unit_interval(double v, const char* what) {
  if (!(v >= 0.0 && v <= 1.0)) throw ContractError(std::string(what) + " must lie in [0, 1]");
}

}  // namespace

std::vector<double> lambda_returns(std::span<const double> rewards, std::span<const double> values, double discount,
                                   double lambda) {
  const std::size_t H = rewards.size();
  if (H == 0) throw ContractError("lambda_returns: empty horizon");
  if (values.size() != H + 1) throw ContractError("lambda_returns: values must have one more entry than rewards");
  check_unit_interval(discount, "discount");
  check_unit_interval(lambda, "lambda");
  std::vector<double> out(H);
  out[H - 1] = rewards[H - 1] + discount * values[H];
  for (std::size_t i = H - 1; i-- > 0;) {
    out[i] = rewards[i] + discount * ((1.0 - lambda) * values[i + 1] + lambda * out[i + 1]);
  }
  return out;
}

std::vector<Var> lambda_returns(const std::vector<Var>& rewards, const std::vector<Var>& values, double discount,
                                double lambda) {
  const std::size_t H = rewards.size();
  if (H == 0) throw ContractError("lambda_returns: empty horizon");
  if (values.size() != H + 1) throw ContractError("lambda_returns: values must have one more entry than rewards");
  check_unit_interval(discount, "discount");
  check_unit_interval(lambda, "lambda");
  std::vector<Var> out(H);
  out[H - 1] = rewards[H - 1] + discount * values[H];
  for (std::size_t i = H - 1; i-- > 0;) {
    out[i] = rewards[i] + discount * ((1.0 - lambda) * values[i + 1] + lambda * out[i + 1]);
  }
  return out;
}

StartStates detach_states(const wm::ModelState& state) {
  return StartStates{state.deter.value(), state.stoch.value()};
}

Agent::Agent(const AgentConfig& config, const ModelConfig& model, std::uint64_t seed)
    : config_(config), prior_(model.prior), latent_size_(model.latent_action_size) {
  if (config.latent_bound <= 0.0) throw ConfigError("agent.latent_bound must be positive");
  Engine engine(substream_seed(seed, "agent.init"));
  const ad::Index F = model.deter_size + model.stoch_size;
  policy_ = nn::Mlp("agent.policy", {F, config.policy_units, config.policy_layers, 2 * latent_size_}, engine);
  value1_ = nn::Mlp("agent.value1", {F, config.value_units, config.value_layers, 1}, engine);
  value2_ = nn::Mlp("agent.value2", {F, config.value_units, config.value_layers, 1}, engine);
  nn::Adam::Options opt;
  opt.learning_rate = config.learning_rate;
  opt.clip_norm = config.grad_clip;
  actor_opt_ = nn::Adam(opt);
  critic_opt_ = nn::Adam(opt);
}

prob::GaussianVar Agent::policy_base(Tape& tape, const wm::ModelState& s) const {
  return prob::gaussian_from_raw(policy_(tape, s.features()));
}

wm::LatentAction Agent::act(Tape& tape, const wm::WorldModel& model, const wm::ModelState& s, NoiseSource& noise,
                            bool deterministic) const {
  const double bound = config_.latent_bound;
  prob::GaussianVar base = policy_base(tape, s);
  Var pre = deterministic ? base.mean : prob::reparam_sample(base, noise.standard_normal(s.batch(), latent_size_));
  Var squashed = bound * ad::tanh(pre);
  Var log_prob = prob::squashed_log_prob(base, pre, bound);
  if (prior_ == PriorMode::kLawm) return wm::LatentAction{squashed, base, log_prob};
  // The state-conditioned prior sets the support: u = mu + sigma * squashed.
  prob::GaussianVar p = model.latent_action_prior(tape, s);
  Var u = p.mean + p.stddev * squashed;
  return wm::LatentAction{u, base, log_prob - ad::row_sum(ad::log(p.stddev))};
}

Var Agent::value(Tape& tape, int index, const wm::ModelState& s) const {
  if (index != 0 && index != 1) throw ContractError("value: index must be 0 or 1");
  return (index == 0 ? value1_ : value2_)(tape, s.features());
}

Var Agent::min_value(Tape& tape, const wm::ModelState& s) const {
  return ad::minimum(value(tape, 0, s), value(tape, 1, s));
}

ActorObjective Agent::actor_objective(Tape& tape, const wm::WorldModel& model, const StartStates& start,
                                     NoiseSource& noise) const {
  ActorObjective out;
  wm::ModelState s0 = model.state_from_values(tape, start.deter, start.stoch);
  wm::LatentPolicy policy = [&](Tape& t, const wm::ModelState& s) { return act(t, model, s, noise, false); };
  out.steps = model.imagine(tape, s0, policy, config_.horizon, noise);

  std::vector<Var> rewards, values, log_probs;
  values.push_back(min_value(tape, s0));
  for (const auto& step : out.steps) {
    rewards.push_back(step.reward);
    values.push_back(min_value(tape, step.state));
    log_probs.push_back(step.latent.log_prob);
  }
  out.returns = ad::concat_rows(lambda_returns(rewards, values, config_.discount, config_.lambda));
  out.mean_log_prob = ad::mean(ad::concat_rows(log_probs));
  out.loss = -ad::mean(out.returns) + config_.entropy_weight * out.mean_log_prob;
  return out;
}

Var Agent::critic_loss(Tape& tape, const wm::ModelState& states, const Matrix& targets) const {
  if (targets.rows() != states.batch() || targets.cols() != 1) throw ContractError("critic_loss: target shape mismatch");
  Var target = tape.constant(targets);
  return 0.5 * (ad::mean(ad::square(value(tape, 0, states) - target)) +
                ad::mean(ad::square(value(tape, 1, states) - target)));
}

AgentMetrics Agent::update(const wm::WorldModel& model, const StartStates& start, NoiseSource& noise) {
  AgentMetrics metrics;
  const int H = config_.horizon;
  const auto wm_params = model.parameters();
  const auto policy_params = nn::mutable_params(policy_parameters());
  const auto critic_params = nn::mutable_params(value_parameters());

  // Actor: gradients flow through the frozen dynamics and critics.
  Tape tape;
  tape.freeze_all(wm_params);
  tape.freeze_all(value_parameters());
  const ActorObjective actor = actor_objective(tape, model, start, noise);
  nn::zero_grads(policy_params);
  tape.backward(actor.loss);
  metrics.actor_grad_norm = actor_opt_.step(policy_params);
  metrics.actor_loss = actor.loss.scalar();
  metrics.mean_return = ad::mean(actor.returns).scalar();
  metrics.entropy = -actor.mean_log_prob.scalar();

  // Critics regress onto the detached returns at the states they start from.
  const ad::Index B = start.deter.rows();
  Matrix deter(B * H, start.deter.cols()), stoch(B * H, start.stoch.cols());
  deter.topRows(B) = start.deter;
  stoch.topRows(B) = start.stoch;
  for (int h = 0; h + 1 < H; ++h) {
    deter.middleRows((h + 1) * B, B) = actor.steps[h].state.deter.value();
    stoch.middleRows((h + 1) * B, B) = actor.steps[h].state.stoch.value();
  }
  Tape critic_tape;
  critic_tape.freeze_all(wm_params);
  const wm::ModelState states = model.state_from_values(critic_tape, deter, stoch);
  Var loss = critic_loss(critic_tape, states, actor.returns.value());
  nn::zero_grads(critic_params);
  critic_tape.backward(loss);
  metrics.critic_grad_norm = critic_opt_.step(critic_params);
  metrics.critic_loss = loss.scalar();
  return metrics;
}

nn::ParamList Agent::policy_parameters() const {
  nn::ParamList out;
  policy_.collect(out);
  return out;
}

nn::ParamList Agent::value_parameters() const {
  nn::ParamList out;
  value1_.collect(out);
  value2_.collect(out);
  return out;
}

nn::ParamList Agent::parameters() const {
  nn::ParamList out = policy_parameters();
  const auto v = value_parameters();
  out.insert(out.end(), v.begin(), v.end());
  return out;
}

void LatentController::reset(ad::Index batch) {
  const auto& cfg = model_->config();
  deter_ = Matrix::Zero(batch, cfg.deter_size);
  stoch_ = Matrix::Zero(batch, cfg.stoch_size);
  prev_action_ = Matrix::Zero(batch, model_->act_dim());
}

Matrix LatentController::act(const Matrix& obs) {
  Tape tape(false);
  NoiseSource none(0, true);
  wm::ModelState prev = model_->state_from_values(tape, deter_, stoch_);
  Var embed = model_->encode_obs(tape, tape.constant(obs));
  wm::ModelState s = model_->posterior_step(tape, prev, tape.constant(prev_action_), embed, none);
  wm::LatentAction u = agent_->act(tape, *model_, s, none, true);
  prev_action_ = model_->decode_action(tape, s, u.sample).mean.value();
  deter_ = s.deter.value();
  stoch_ = s.stoch.value();
  return prev_action_;
}

ScriptedController::ScriptedController(std::string env, envs::PolicyKind kind, std::uint64_t seed)
    : env_(std::move(env)), kind_(kind), engine_(substream_seed(seed, "scripted.noise")) {}

void ScriptedController::reset(ad::Index batch) {
  policies_.clear();
  for (ad::Index i = 0; i < batch; ++i) policies_.emplace_back(env_, kind_, 1.0);
}

Matrix ScriptedController::act(const Matrix& obs) {
  Matrix out;
  for (ad::Index r = 0; r < obs.rows(); ++r) {
    Eigen::VectorXd a = policies_[r].act(obs.row(r).transpose(), engine_);
    if (out.size() == 0) out.resize(obs.rows(), a.size());
    out.row(r) = a.transpose();
  }
  return out;
}

Matrix RandomController::act(const Matrix& obs) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix out(obs.rows(), bound_.size());
  for (ad::Index r = 0; r < out.rows(); ++r) {
    for (ad::Index c = 0; c < out.cols(); ++c) out(r, c) = bound_(c) * u(engine_);
  }
  return out;
}

EvalResult evaluate(const std::string& env, Controller& controller, int episodes, std::uint64_t seed) {
  if (episodes < 1) throw ContractError("evaluate: episodes must be >= 1");
  std::vector<std::unique_ptr<envs::Environment>> instances;
  const envs::EnvSpec spec = envs::env_spec(env);
  Matrix obs(episodes, spec.obs_dim);
  for (int i = 0; i < episodes; ++i) {
    instances.push_back(envs::make_env(env));
    obs.row(i) = instances.back()->reset(substream_seed(seed, "eval.episode." + std::to_string(i))).transpose();
  }
  controller.reset(episodes);
  std::vector<double> totals(episodes, 0.0);
  for (int t = 0; t < spec.episode_length; ++t) {
    const Matrix actions = controller.act(obs);
    for (int i = 0; i < episodes; ++i) {
      // Same convention as the datasets: each row earns the current state's reward.
      totals[i] += instances[i]->reward();
      obs.row(i) = instances[i]->step(actions.row(i).transpose()).obs.transpose();
    }
  }
  EvalResult out;
  for (double r : totals) out.normalized_returns.push_back(envs::normalized_return(r, spec));
  double sum = 0.0;
  for (double r : out.normalized_returns) sum += r;
  out.mean = sum / episodes;
  double var = 0.0;
  for (double r : out.normalized_returns) var += (r - out.mean) * (r - out.mean);
  out.std = std::sqrt(var / episodes);
  return out;
}

EvalResult evaluate_policy(const wm::WorldModel& model, const Agent& agent, const std::string& env, int episodes,
                           std::uint64_t seed) {
  LatentController controller(model, agent);
  return evaluate(env, controller, episodes, seed);
}

}  // namespace lawm::agent
