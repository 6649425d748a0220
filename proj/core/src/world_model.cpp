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

#include "lawm/world_model.hpp"

#include "lawm/error.hpp"

#include <string>

namespace lawm::wm {
namespace {

Matrix row_major_to_dense(const data::FloatMatrix& m) { return m.cast<double>(); }

void check_cols(const Var& v, Index expected, const char* what) {
  if (v.cols() != expected) {
    throw ContractError(std::string(what) + ": expected " + std::to_string(expected) + " columns, got " +
                        std::to_string(v.cols()));
  }
}

void check_rows(const Var& v, Index expected, const char* what) {
  if (v.rows() != expected) {
    throw ContractError(std::string(what) + ": expected batch " + std::to_string(expected) + ", got " +
                        std::to_string(v.rows()));
  }
}

void check_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw NumericError(std::string(what) + ": non-finite input");
}

}  // namespace

SequenceBatch SequenceBatch::from(std::span<const data::Trajectory> trajectories) {
  if (trajectories.empty()) throw ContractError("SequenceBatch: empty batch");
  SequenceBatch out;
  out.batch = static_cast<Index>(trajectories.size());
  out.steps = trajectories.front().length();
  const Index obs_dim = trajectories.front().obs_dim();
  const Index act_dim = trajectories.front().action_dim;
  bool all_labeled = true;
  for (const auto& t : trajectories) {
    t.validate();
    if (t.length() != out.steps) throw ContractError("SequenceBatch: trajectories must share a length");
    if (t.obs_dim() != obs_dim) throw ContractError("SequenceBatch: observation dimension mismatch");
    all_labeled = all_labeled && t.has_actions();
  }
  const Index B = out.batch;
  const Index T = out.steps;
  out.obs.resize(T * B, obs_dim);
  out.rewards.resize(T * B, 1);
  out.next_obs = Matrix::Zero(B, obs_dim);
  out.has_next = Eigen::VectorXd::Zero(B);
  if (all_labeled) out.actions = Matrix(T * B, act_dim);
  for (Index b = 0; b < B; ++b) {
    const auto& traj = trajectories[b];
    const Matrix obs = row_major_to_dense(traj.obs);
    for (Index t = 0; t < T; ++t) {
      out.obs.row(t * B + b) = obs.row(t);
      out.rewards(t * B + b, 0) = traj.rewards(t);
      if (all_labeled) out.actions->row(t * B + b) = traj.actions->row(t).cast<double>();
    }
    if (traj.next_obs) {
      out.next_obs.row(b) = traj.next_obs->cast<double>();
      out.has_next(b) = 1.0;
    }
  }
  return out;
}

ModelState stack_states(const std::vector<ModelState>& states) {
  if (states.empty()) throw ContractError("stack_states: no states");
  std::vector<Var> deter, stoch, mean, stddev;
  for (const auto& s : states) {
    deter.push_back(s.deter);
    stoch.push_back(s.stoch);
    mean.push_back(s.stoch_dist.mean);
    stddev.push_back(s.stoch_dist.stddev);
  }
  return ModelState{ad::concat_rows(deter), ad::concat_rows(stoch),
                    prob::GaussianVar{ad::concat_rows(mean), ad::concat_rows(stddev)}};
}

WorldModel::WorldModel(const ModelConfig& config, Index obs_dim, Index act_dim, const Eigen::VectorXd& action_bound,
                       std::uint64_t seed)
    : config_(config), obs_dim_(obs_dim), act_dim_(act_dim), bound_(action_bound) {
  if (obs_dim <= 0 || act_dim <= 0) throw ContractError("WorldModel: dimensions must be positive");
  if (bound_.size() != act_dim) throw ContractError("WorldModel: action bound size must equal act_dim");
  if ((bound_.array() <= 0.0).any()) throw ContractError("WorldModel: action bounds must be positive");

  Engine engine(substream_seed(seed, "wm.init"));
  const Index D = config.deter_size;
  const Index S = config.stoch_size;
  const Index E = config.embed_size;
  const Index U = config.latent_action_size;
  const Index H = config.hidden_units;
  const Index M = config.mlp_units;
  const Index F = D + S;

  encoder_ = nn::Mlp("wm.encoder", {obs_dim, M, config.mlp_layers, E}, engine);
  img_in_ = nn::Linear("wm.img_in", S + act_dim, H, engine);
  img_norm_ = nn::LayerNorm("wm.img_norm", H);
  cell_ = nn::GruCell("wm.gru", H, D, engine);
  prior_head_ = nn::Mlp("wm.prior", {D, H, 1, 2 * S}, engine);
  posterior_head_ = nn::Mlp("wm.posterior", {D + E, H, 1, 2 * S}, engine);
  if (config.prior == PriorMode::kClap) {
    action_prior_ = nn::Mlp("wm.action_prior", {F, config.prior_units, config.prior_layers, 2 * U}, engine);
  }
  action_posterior_labeled_ =
      nn::Mlp("wm.action_posterior_labeled", {F + act_dim, M, config.mlp_layers, 2 * U}, engine);
  action_posterior_unlabeled_ =
      nn::Mlp("wm.action_posterior_unlabeled", {F + E, config.idm_units, config.idm_layers, 2 * U}, engine);
  action_decoder_ = nn::Mlp("wm.action_decoder", {F + U, M, config.mlp_layers, 2 * act_dim}, engine);
  obs_decoder_ = nn::Mlp("wm.obs_decoder", {F, M, config.mlp_layers, obs_dim}, engine);
  reward_head_ = nn::Mlp("wm.reward", {F, M, config.mlp_layers, 1}, engine);
}

ModelState WorldModel::init_state(Tape& tape, Index batch) const {
  if (batch < 1) throw ContractError("init_state: batch must be >= 1");
  const Index D = config_.deter_size;
  const Index S = config_.stoch_size;
  return ModelState{tape.constant(Matrix::Zero(batch, D)), tape.constant(Matrix::Zero(batch, S)),
                    prob::standard_normal(tape, batch, S)};
}

ModelState WorldModel::state_from_values(Tape& tape, const Matrix& deter, const Matrix& stoch) const {
  if (deter.cols() != config_.deter_size || stoch.cols() != config_.stoch_size || deter.rows() != stoch.rows()) {
    throw ContractError("state_from_values: shape mismatch");
  }
  Var s = tape.constant(stoch);
  // The distribution is not tracked for replayed states; a point mass at the
  // sample stands in for it.
  return ModelState{tape.constant(deter), s,
                    prob::constant_gaussian(tape, stoch, Matrix::Constant(stoch.rows(), stoch.cols(), 1e-6))};
}

Var WorldModel::encode_obs(Tape& tape, const Var& obs) const {
  check_cols(obs, obs_dim_, "encode_obs");
  check_finite(obs.value(), "encode_obs");
  return encoder_(tape, obs);
}

Var WorldModel::recurrent(Tape& tape, const ModelState& prev, const Var& prev_action) const {
  check_cols(prev_action, act_dim_, "prev_action");
  check_rows(prev_action, prev.batch(), "prev_action");
  check_finite(prev_action.value(), "prev_action");
  Var x = ad::swish(img_norm_(tape, img_in_(tape, ad::concat_cols({prev.stoch, prev_action}))));
  return cell_(tape, x, prev.deter);
}

ModelState WorldModel::prior_step(Tape& tape, const ModelState& prev, const Var& prev_action,
                                  NoiseSource& noise) const {
  Var deter = recurrent(tape, prev, prev_action);
  auto dist = prob::gaussian_from_raw(prior_head_(tape, deter), config_.min_std);
  Var stoch = prob::reparam_sample(dist, noise.standard_normal(deter.rows(), config_.stoch_size));
  return ModelState{deter, stoch, dist};
}

ModelState WorldModel::posterior_step(Tape& tape, const ModelState& prev, const Var& prev_action,
                                      const Var& obs_embed, NoiseSource& noise) const {
  check_cols(obs_embed, config_.embed_size, "obs_embed");
  check_rows(obs_embed, prev.batch(), "obs_embed");
  Var deter = recurrent(tape, prev, prev_action);
  auto dist = prob::gaussian_from_raw(posterior_head_(tape, ad::concat_cols({deter, obs_embed})), config_.min_std);
  Var stoch = prob::reparam_sample(dist, noise.standard_normal(deter.rows(), config_.stoch_size));
  return ModelState{deter, stoch, dist};
}

std::pair<prob::GaussianVar, ModelState> WorldModel::filter_step(Tape& tape, const ModelState& prev,
                                                                const Var& prev_action, const Var& obs_embed,
                                                                NoiseSource& noise) const {
  check_cols(obs_embed, config_.embed_size, "obs_embed");
  check_rows(obs_embed, prev.batch(), "obs_embed");
  Var deter = recurrent(tape, prev, prev_action);
  auto prior = prob::gaussian_from_raw(prior_head_(tape, deter), config_.min_std);
  auto dist = prob::gaussian_from_raw(posterior_head_(tape, ad::concat_cols({deter, obs_embed})), config_.min_std);
  Var stoch = prob::reparam_sample(dist, noise.standard_normal(deter.rows(), config_.stoch_size));
  return {prior, ModelState{deter, stoch, dist}};
}

prob::GaussianVar WorldModel::latent_action_prior(Tape& tape, const ModelState& s) const {
  if (config_.prior == PriorMode::kLawm) {
    return prob::standard_normal(tape, s.batch(), config_.latent_action_size);
  }
  return prob::gaussian_from_raw(action_prior_(tape, s.features()), config_.min_std);
}

LatentAction WorldModel::action_posterior_labeled(Tape& tape, const ModelState& s, const Var& action,
                                                  NoiseSource& noise) const {
  check_cols(action, act_dim_, "action_posterior_labeled");
  check_rows(action, s.batch(), "action_posterior_labeled");
  check_finite(action.value(), "action_posterior_labeled");
  counters_.labeled.fetch_add(1, std::memory_order_relaxed);
  auto dist = prob::gaussian_from_raw(action_posterior_labeled_(tape, ad::concat_cols({s.features(), action})),
                                      config_.min_std);
  Var sample = prob::reparam_sample(dist, noise.standard_normal(s.batch(), config_.latent_action_size));
  return LatentAction{sample, dist, Var{}};
}

LatentAction WorldModel::action_posterior_unlabeled(Tape& tape, const ModelState& s, const Var& next_obs_embed,
                                                    NoiseSource& noise) const {
  check_cols(next_obs_embed, config_.embed_size, "action_posterior_unlabeled");
  check_rows(next_obs_embed, s.batch(), "action_posterior_unlabeled");
  counters_.action_free.fetch_add(1, std::memory_order_relaxed);
  auto dist = prob::gaussian_from_raw(
      action_posterior_unlabeled_(tape, ad::concat_cols({s.features(), next_obs_embed})), config_.min_std);
  Var sample = prob::reparam_sample(dist, noise.standard_normal(s.batch(), config_.latent_action_size));
  return LatentAction{sample, dist, Var{}};
}

Var WorldModel::bound_matrix(Tape& tape, Index rows) const {
  return tape.constant(bound_.transpose().replicate(rows, 1));
}

prob::GaussianVar WorldModel::decode_action(Tape& tape, const ModelState& s, const Var& latent) const {
  check_cols(latent, config_.latent_action_size, "decode_action");
  check_rows(latent, s.batch(), "decode_action");
  Var raw = action_decoder_(tape, ad::concat_cols({s.features(), latent}));
  Var mean = ad::tanh(ad::slice_cols(raw, 0, act_dim_)) * bound_matrix(tape, s.batch());
  Var stddev = ad::softplus(ad::slice_cols(raw, act_dim_, act_dim_)) + config_.min_std;
  return prob::GaussianVar{mean, stddev};
}

prob::GaussianVar WorldModel::decode_obs(Tape& tape, const ModelState& s) const {
  Var mean = obs_decoder_(tape, s.features());
  return prob::GaussianVar{mean, tape.constant(Matrix::Ones(mean.rows(), mean.cols()))};
}

prob::GaussianVar WorldModel::predict_reward(Tape& tape, const ModelState& s) const {
  Var mean = reward_head_(tape, s.features());
  return prob::GaussianVar{mean, tape.constant(Matrix::Ones(mean.rows(), 1))};
}

FilterResult WorldModel::observe(Tape& tape, std::span<const data::Trajectory> batch, FilterMode mode,
                                 NoiseSource& noise) const {
  return observe(tape, SequenceBatch::from(batch), mode, noise);
}

FilterResult WorldModel::observe(Tape& tape, const SequenceBatch& seq, FilterMode mode, NoiseSource& noise) const {
  const Index B = seq.batch;
  const Index T = seq.steps;
  if (seq.obs.cols() != obs_dim_) throw ContractError("observe: observation dimension mismatch");
  if (mode == FilterMode::kLabeled && !seq.actions) {
    throw ContractError("observe: labeled mode requires recorded actions");
  }
  if (mode == FilterMode::kActionFree && T < 2 && !seq.any_next()) {
    throw ContractError("observe: action-free mode needs at least two observations");
  }
  if (T < 1) throw ContractError("observe: empty trajectory");
  check_finite(seq.obs, "observe");

  FilterResult out;
  out.mode = mode;
  out.steps = T;
  out.batch = B;

  if (mode == FilterMode::kLabeled) {
    if (seq.actions->cols() != act_dim_) throw ContractError("observe: action dimension mismatch");
    Var embed = encode_obs(tape, tape.constant(seq.obs));
    Var actions = tape.constant(*seq.actions);
    ModelState state = init_state(tape, B);
    Var prev_action = tape.constant(Matrix::Zero(B, act_dim_));
    for (Index t = 0; t < T; ++t) {
      Var e_t = ad::slice_rows(embed, t * B, B);
      auto [prior, post] = filter_step(tape, state, prev_action, e_t, noise);
      state = post;
      out.priors.push_back(prior);
      out.posteriors.push_back(state);
      prev_action = ad::slice_rows(actions, t * B, B);
    }
    out.posterior_stack = stack_states(out.posteriors);
    out.action_steps = T;
    out.latent_action = action_posterior_labeled(tape, out.posterior_stack, actions, noise);
    out.latent_action_prior = latent_action_prior(tape, out.posterior_stack);
    out.decoded_action = decode_action(tape, out.posterior_stack, out.latent_action.sample);
    out.action_mask = Matrix::Ones(T * B, 1);
  } else {
    // Stored actions are never read on this path.
    Matrix all_obs(T * B + B, obs_dim_);
    all_obs.topRows(T * B) = seq.obs;
    all_obs.bottomRows(B) = seq.next_obs;
    Var embed = encode_obs(tape, tape.constant(all_obs));
    const bool last_step = seq.any_next();
    const Index K = last_step ? T : T - 1;
    ModelState state = init_state(tape, B);
    Var prev_action = tape.constant(Matrix::Zero(B, act_dim_));
    std::vector<Var> samples, q_mean, q_std, p_mean, p_std, d_mean, d_std;
    for (Index t = 0; t < T; ++t) {
      Var e_t = ad::slice_rows(embed, t * B, B);
      auto [prior, post] = filter_step(tape, state, prev_action, e_t, noise);
      state = post;
      out.priors.push_back(prior);
      out.posteriors.push_back(state);
      if (t >= K) break;
      Var e_next = ad::slice_rows(embed, (t + 1) * B, B);
      LatentAction u = action_posterior_unlabeled(tape, state, e_next, noise);
      prob::GaussianVar u_prior = latent_action_prior(tape, state);
      prob::GaussianVar decoded = decode_action(tape, state, u.sample);
      samples.push_back(u.sample);
      q_mean.push_back(u.dist.mean);
      q_std.push_back(u.dist.stddev);
      p_mean.push_back(u_prior.mean);
      p_std.push_back(u_prior.stddev);
      d_mean.push_back(decoded.mean);
      d_std.push_back(decoded.stddev);
      prev_action = prob::reparam_sample(decoded, noise.standard_normal(B, act_dim_));
    }
    out.posterior_stack = stack_states(out.posteriors);
    out.action_steps = K;
    out.action_mask = Matrix::Ones(K * B, 1);
    if (last_step) {
      for (Index b = 0; b < B; ++b) out.action_mask((T - 1) * B + b, 0) = seq.has_next(b);
    }
    if (K > 0) {
      out.latent_action = LatentAction{ad::concat_rows(samples),
                                       prob::GaussianVar{ad::concat_rows(q_mean), ad::concat_rows(q_std)}, Var{}};
      out.latent_action_prior = prob::GaussianVar{ad::concat_rows(p_mean), ad::concat_rows(p_std)};
      out.decoded_action = prob::GaussianVar{ad::concat_rows(d_mean), ad::concat_rows(d_std)};
    }
  }
  {
    std::vector<Var> mean, stddev;
    for (const auto& p : out.priors) {
      mean.push_back(p.mean);
      stddev.push_back(p.stddev);
    }
    out.prior_stack = prob::GaussianVar{ad::concat_rows(mean), ad::concat_rows(stddev)};
  }
  return out;
}

std::vector<ImaginedStep> WorldModel::imagine(Tape& tape, const ModelState& start, const LatentPolicy& policy,
                                              int horizon, NoiseSource& noise) const {
  if (horizon < 1) throw ContractError("imagine: horizon must be >= 1");
  if (start.deter.requires_grad() || start.stoch.requires_grad()) {
    throw ContractError("imagine: start state must be detached from the filtering graph");
  }
  std::vector<ImaginedStep> out;
  out.reserve(horizon);
  ModelState state = start;
  for (int h = 0; h < horizon; ++h) {
    LatentAction u = policy(tape, state);
    check_cols(u.sample, config_.latent_action_size, "imagine: policy output");
    prob::GaussianVar decoded = decode_action(tape, state, u.sample);
    Var action = config_.imagine_mean_action
                     ? decoded.mean
                     : prob::reparam_sample(decoded, noise.standard_normal(state.batch(), act_dim_));
    ModelState next = prior_step(tape, state, action, noise);
    Var reward = predict_reward(tape, next).mean;
    out.push_back(ImaginedStep{next, u, action, reward});
    state = next;
  }
  return out;
}

std::vector<std::pair<std::string, nn::ParamList>> WorldModel::parameter_groups() const {
  std::vector<std::pair<std::string, nn::ParamList>> groups;
  auto add = [&groups](std::string name, auto&&... modules) {
    nn::ParamList list;
    (modules.collect(list), ...);
    groups.emplace_back(std::move(name), std::move(list));
  };
  add("encoder", encoder_);
  add("recurrent", img_in_, img_norm_, cell_);
  add("state_prior", prior_head_);
  add("state_posterior", posterior_head_);
  if (config_.prior == PriorMode::kClap) add("action_prior", action_prior_);
  add("action_posterior_labeled", action_posterior_labeled_);
  add("action_posterior_unlabeled", action_posterior_unlabeled_);
  add("action_decoder", action_decoder_);
  add("obs_decoder", obs_decoder_);
  add("reward", reward_head_);
  return groups;
}

nn::ParamList WorldModel::parameters() const {
  nn::ParamList all;
  for (auto& [name, list] : parameter_groups()) all.insert(all.end(), list.begin(), list.end());
  return all;
}

}  // namespace lawm::wm
