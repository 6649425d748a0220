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

#include "lawm/idm.hpp"

#include "lawm/archive.hpp"
#include "lawm/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lawm::idm {
namespace {

constexpr double kMinObsStd = 1e-3;

std::vector<const data::Trajectory*> labeled_trajectories(const data::Corpus& corpus) {
  std::vector<const data::Trajectory*> out;
  for (const auto& t : corpus.trajectories) {
    if (t.has_actions()) out.push_back(&t);
  }
  return out;
}

// The final action of a trajectory has no observed consequence, so it is
// neither a training target nor part of the error.
ad::Index observable_steps(const data::Trajectory& t) { return t.length() > 1 ? t.length() - 1 : 1; }

}  // namespace

Idm::Idm(const IdmConfig& config, ad::Index obs_dim, ad::Index act_dim, const Eigen::VectorXd& action_bound,
         std::uint64_t seed)
    : config_(config),
      obs_dim_(obs_dim),
      act_dim_(act_dim),
      bound_(action_bound),
      mean_(Eigen::RowVectorXd::Zero(obs_dim)),
      std_(Eigen::RowVectorXd::Ones(obs_dim)) {
  if (config.window < 1 || config.window % 2 == 0) throw ConfigError("idm.window must be a positive odd number");
  if (bound_.size() != act_dim) throw ContractError("Idm: action bound size must equal act_dim");
  Engine engine(substream_seed(seed, "idm.init"));
  net_ = nn::Mlp("idm.net", {obs_dim * config.window, config.units, config.layers, act_dim, config.dropout}, engine);
}

void Idm::fit_normalizer(const data::Corpus& corpus) {
  Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(obs_dim_);
  Eigen::RowVectorXd sq = Eigen::RowVectorXd::Zero(obs_dim_);
  double n = 0.0;
  for (const auto& t : corpus.trajectories) {
    const Matrix obs = t.obs.cast<double>();
    sum += obs.colwise().sum();
    sq += obs.array().square().matrix().colwise().sum();
    n += static_cast<double>(obs.rows());
  }
  if (n == 0.0) throw ContractError("fit_normalizer: empty corpus");
  mean_ = sum / n;
  Eigen::RowVectorXd var = sq / n - mean_.array().square().matrix();
  std_ = var.array().max(0.0).sqrt().max(kMinObsStd).matrix();
}

void Idm::set_normalizer(Eigen::RowVectorXd mean, Eigen::RowVectorXd stddev) {
  if (mean.size() != obs_dim_ || stddev.size() != obs_dim_) throw ContractError("set_normalizer: size mismatch");
  mean_ = std::move(mean);
  std_ = std::move(stddev);
}

ad::Var Idm::forward(ad::Tape& tape, const Matrix& windows, NoiseSource* dropout_noise) const {
  if (windows.cols() != obs_dim_ * config_.window) throw ContractError("Idm: window width mismatch");
  Matrix x(windows.rows(), windows.cols());
  for (int k = 0; k < config_.window; ++k) {
    x.middleCols(k * obs_dim_, obs_dim_) =
        ((windows.middleCols(k * obs_dim_, obs_dim_).rowwise() - mean_).array().rowwise() / std_.array()).matrix();
  }
  ad::Var raw = net_(tape, tape.constant(std::move(x)), dropout_noise);
  return ad::tanh(raw) * tape.constant(bound_.transpose().replicate(windows.rows(), 1));
}

Eigen::VectorXd Idm::predict(const Matrix& window) const {
  if (window.rows() != config_.window || window.cols() != obs_dim_) {
    throw ContractError("idm_predict: expected a " + std::to_string(config_.window) + " x " +
                        std::to_string(obs_dim_) + " window");
  }
  Matrix flat(1, window.size());
  for (ad::Index k = 0; k < window.rows(); ++k) flat.middleCols(k * obs_dim_, obs_dim_) = window.row(k);
  ad::Tape tape(false);
  return forward(tape, flat, nullptr).value().row(0).transpose();
}

Eigen::RowVectorXd window_at(const data::FloatMatrix& obs, ad::Index t, int window) {
  const ad::Index T = obs.rows();
  const ad::Index d = obs.cols();
  const int half = window / 2;
  Eigen::RowVectorXd out(window * d);
  for (int k = 0; k < window; ++k) {
    const ad::Index src = std::clamp<ad::Index>(t - half + k, 0, T - 1);
    out.segment(k * d, d) = obs.row(src).cast<double>();
  }
  return out;
}

Matrix Idm::predict_trajectory(const data::FloatMatrix& obs) const {
  if (obs.cols() != obs_dim_) throw ContractError("predict_trajectory: observation dimension mismatch");
  Matrix windows(obs.rows(), obs_dim_ * config_.window);
  for (ad::Index t = 0; t < obs.rows(); ++t) windows.row(t) = window_at(obs, t, config_.window);
  ad::Tape tape(false);
  return forward(tape, windows, nullptr).value();
}

nn::ParamList Idm::parameters() const {
  nn::ParamList out;
  net_.collect(out);
  return out;
}

TrainResult train_idm(Idm& idm, const data::Corpus& corpus, const IdmConfig& config) {
  const auto labeled = labeled_trajectories(corpus);
  if (labeled.empty()) throw ContractError("train_idm: corpus has no labeled trajectories");
  data::Corpus labeled_only;
  for (const auto* t : labeled) labeled_only.trajectories.push_back(*t);
  idm.fit_normalizer(labeled_only);

  std::vector<std::uint64_t> cumulative{0};
  for (const auto* t : labeled) {
    cumulative.push_back(cumulative.back() + static_cast<std::uint64_t>(observable_steps(*t)));
  }
  Engine sampler(substream_seed(config.seed, "idm.sample"));
  NoiseSource dropout(substream_seed(config.seed, "idm.dropout"));
  nn::Adam::Options opt;
  opt.learning_rate = config.learning_rate;
  opt.clip_norm = 0.0;
  nn::Adam adam(opt);
  const auto params = nn::mutable_params(idm.parameters());

  const ad::Index width = idm.obs_dim() * config.window;
  TrainResult result;
  result.loss_curve.reserve(config.steps);
  for (int step = 0; step < config.steps; ++step) {
    Matrix windows(config.batch_size, width);
    Matrix targets(config.batch_size, idm.act_dim());
    for (int b = 0; b < config.batch_size; ++b) {
      const std::uint64_t flat = uniform_index(sampler, cumulative.back());
      const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), flat);
      const std::size_t traj = static_cast<std::size_t>(it - cumulative.begin()) - 1;
      const auto t = static_cast<ad::Index>(flat - cumulative[traj]);
      windows.row(b) = window_at(labeled[traj]->obs, t, config.window);
      targets.row(b) = labeled[traj]->actions->row(t).cast<double>();
    }
    ad::Tape tape;
    ad::Var pred = idm.forward(tape, windows, config.dropout > 0.0 ? &dropout : nullptr);
    ad::Var loss = ad::mean(ad::square(pred - tape.constant(targets)));
    nn::zero_grads(params);
    tape.backward(loss);
    adam.step(params);
    result.loss_curve.push_back(loss.scalar());
  }
  const std::size_t tail = std::min<std::size_t>(100, result.loss_curve.size());
  if (tail > 0) {
    result.final_mse =
        std::accumulate(result.loss_curve.end() - static_cast<std::ptrdiff_t>(tail), result.loss_curve.end(), 0.0) /
        static_cast<double>(tail);
  }
  return result;
}

double evaluate_mse(const Idm& idm, const data::Corpus& corpus) {
  double sum = 0.0;
  double count = 0.0;
  for (const auto* t : labeled_trajectories(corpus)) {
    const ad::Index n = observable_steps(*t);
    const Matrix pred = idm.predict_trajectory(t->obs).topRows(n);
    sum += (pred - t->actions->topRows(n).cast<double>()).squaredNorm();
    count += static_cast<double>(pred.size());
  }
  if (count == 0.0) throw ContractError("evaluate_mse: corpus has no labeled trajectories");
  return sum / count;
}

data::Corpus pseudo_label_corpus(const Idm& idm, const data::Corpus& corpus) {
  data::Corpus out = corpus;
  for (auto& t : out.trajectories) {
    if (t.has_actions()) continue;
    t.actions = idm.predict_trajectory(t.obs).cast<float>();
    t.action_dim = idm.act_dim();
  }
  out.meta.provenance.push_back("idm");
  out.meta.labeled_fraction = 1.0;
  return out;
}

void pseudo_label_dataset(const Idm& idm, const std::filesystem::path& source, const std::filesystem::path& dest) {
  std::error_code ec;
  if (std::filesystem::exists(dest) && std::filesystem::equivalent(source, dest, ec)) {
    throw ContractError("pseudo_label_dataset: destination must differ from the source corpus");
  }
  data::write_corpus(pseudo_label_corpus(idm, data::read_corpus(source)), dest);
}

void save_idm(const Idm& idm, const std::filesystem::path& path) {
  Archive archive;
  ExperimentConfig cfg;
  cfg.idm = idm.config();
  nlohmann::ordered_json meta;
  meta["kind"] = "idm";
  meta["idm_config"] = nlohmann::ordered_json::parse(cfg.to_json())["idm"];
  meta["obs_dim"] = idm.obs_dim();
  meta["act_dim"] = idm.act_dim();
  meta["action_bound"] = std::vector<double>(idm.action_bound().data(), idm.action_bound().data() + idm.act_dim());
  archive.meta = meta.dump();
  archive.add("idm.obs_mean", idm.obs_mean());
  archive.add("idm.obs_std", idm.obs_std());
  nn::save_parameters(archive, idm.parameters());
  write_archive(path, archive);
}

Idm load_idm(const std::filesystem::path& path) {
  const Archive archive = read_archive(path);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(archive.meta);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("idm checkpoint: bad metadata: ") + e.what(), 0);
  }
  if (meta.value("kind", "") != "idm") throw FormatError("idm checkpoint: not an IDM archive", 0);
  nlohmann::json wrapped;
  wrapped["idm"] = meta["idm_config"];
  const ExperimentConfig cfg = ExperimentConfig::from_json(wrapped.dump());
  const auto bound_values = meta["action_bound"].get<std::vector<double>>();
  const Eigen::VectorXd bound = Eigen::Map<const Eigen::VectorXd>(bound_values.data(), bound_values.size());
  Idm idm(cfg.idm, meta["obs_dim"].get<ad::Index>(), meta["act_dim"].get<ad::Index>(), bound, cfg.idm.seed);
  idm.set_normalizer(archive.get("idm.obs_mean"), archive.get("idm.obs_std"));
  nn::load_parameters(archive, idm.parameters());
  return idm;
}

}  // namespace lawm::idm
