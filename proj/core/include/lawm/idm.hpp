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

#ifndef LAWM_IDM_HPP_
#define LAWM_IDM_HPP_

// Inverse dynamics baseline: an MLP that predicts a_t from the observation
// window o_{t-2..t+2}, trained on labeled trajectories and used to fill in
// the actions of action-free ones. Inputs are observations only; rewards are
// never read.

#include "lawm/autodiff.hpp"
#include "lawm/config.hpp"
#include "lawm/data.hpp"
#include "lawm/nn.hpp"

#include <filesystem>
#include <vector>

namespace lawm::idm {

using ad::Matrix;

class Idm {
 public:
  Idm(const IdmConfig& config, ad::Index obs_dim, ad::Index act_dim, const Eigen::VectorXd& action_bound,
      std::uint64_t seed);

  const IdmConfig& config() const { return config_; }
  ad::Index obs_dim() const { return obs_dim_; }
  ad::Index act_dim() const { return act_dim_; }
  int window() const { return config_.window; }

  // Per-coordinate observation statistics from the labeled corpus.
  void fit_normalizer(const data::Corpus& corpus);

  // `windows` holds one flattened window per row (window * obs_dim columns,
  // oldest first). Dropout is applied only when `dropout_noise` is set.
  ad::Var forward(ad::Tape& tape, const Matrix& windows, NoiseSource* dropout_noise) const;

  // Prediction for the centre transition of one window (window x obs_dim).
  Eigen::VectorXd predict(const Matrix& window) const;
  // Predictions for every step, padding the edges by replication.
  Matrix predict_trajectory(const data::FloatMatrix& obs) const;

  nn::ParamList parameters() const;

  const Eigen::RowVectorXd& obs_mean() const { return mean_; }
  const Eigen::RowVectorXd& obs_std() const { return std_; }
  void set_normalizer(Eigen::RowVectorXd mean, Eigen::RowVectorXd stddev);
  const Eigen::VectorXd& action_bound() const { return bound_; }

 private:
  IdmConfig config_;
  ad::Index obs_dim_;
  ad::Index act_dim_;
  Eigen::VectorXd bound_;
  Eigen::RowVectorXd mean_;
  Eigen::RowVectorXd std_;
  nn::Mlp net_;
};

// Flattened window centred on step `t`, edges replicated.
Eigen::RowVectorXd window_at(const data::FloatMatrix& obs, ad::Index t, int window);

struct TrainResult {
  std::vector<double> loss_curve;  // training MSE per step
  double final_mse = 0.0;          // mean of the last 100 steps
};

// Squared-error regression of recorded actions, skipping each trajectory's
// final step. Throws ContractError when the
// corpus holds no labeled trajectory.
TrainResult train_idm(Idm& idm, const data::Corpus& corpus, const IdmConfig& config);

// Mean squared error over the labeled steps whose successor is observed.
double evaluate_mse(const Idm& idm, const data::Corpus& corpus);

// Copy of `corpus` where every unlabeled trajectory carries predicted
// actions; labeled trajectories are copied unchanged.
data::Corpus pseudo_label_corpus(const Idm& idm, const data::Corpus& corpus);

// Writes the pseudo-labeled corpus into a new directory, never over `source`.
void pseudo_label_dataset(const Idm& idm, const std::filesystem::path& source, const std::filesystem::path& dest);

void save_idm(const Idm& idm, const std::filesystem::path& path);
Idm load_idm(const std::filesystem::path& path);

}  // namespace lawm::idm

#endif  // LAWM_IDM_HPP_
