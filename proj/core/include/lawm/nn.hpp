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

#ifndef LAWM_NN_HPP_
#define LAWM_NN_HPP_

#include "lawm/archive.hpp"
#include "lawm/autodiff.hpp"
#include "lawm/rng.hpp"

#include <string>
#include <vector>

namespace lawm::nn {

using ad::Matrix;
using ad::Parameter;
using ad::Tape;
using ad::Var;

using ParamList = std::vector<const Parameter*>;

class Linear {
 public:
  Linear() = default;
  Linear(const std::string& name, ad::Index in, ad::Index out, Engine& engine);

  Var operator()(Tape& tape, const Var& x) const;
  void collect(ParamList& out) const;

  ad::Index in_features() const { return weight_.value.rows(); }
  ad::Index out_features() const { return weight_.value.cols(); }

  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }

 private:
  Parameter weight_;
  Parameter bias_;
};

class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(const std::string& name, ad::Index features);

  Var operator()(Tape& tape, const Var& x) const;
  void collect(ParamList& out) const;

 private:
  Parameter gain_;
  Parameter bias_;
};

struct MlpShape {
  ad::Index in = 0;
  ad::Index hidden = 0;
  int layers = 0;  // hidden layers, each Linear -> LayerNorm -> Swish
  ad::Index out = 0;
  double dropout = 0.0;
};

// Stack of normalized Swish hidden layers followed by a linear read-out.
class Mlp {
 public:
  Mlp() = default;
  Mlp(const std::string& name, const MlpShape& shape, Engine& engine);

  // `dropout_noise`, when non-null, supplies uniform draws for the dropout
  // masks (training mode). Inference passes nullptr and dropout is skipped.
  Var operator()(Tape& tape, const Var& x, NoiseSource* dropout_noise = nullptr) const;
  void collect(ParamList& out) const;

  const MlpShape& shape() const { return shape_; }
  Linear& output_layer() { return out_; }

 private:
  MlpShape shape_;
  std::vector<Linear> hidden_;
  std::vector<LayerNorm> norms_;
  Linear out_;
};

// Layer-normalized GRU: gates are computed from [input, state] jointly.
class GruCell {
 public:
  GruCell() = default;
  GruCell(const std::string& name, ad::Index input, ad::Index state, Engine& engine);

  Var operator()(Tape& tape, const Var& input, const Var& state) const;
  void collect(ParamList& out) const;

 private:
  ad::Index state_ = 0;
  Linear gates_;
  LayerNorm norm_;
};

// Adaptive-moment optimizer with optional global gradient-norm clipping.
class Adam {
 public:
  struct Options {
    double learning_rate = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double clip_norm = 100.0;  // <= 0 disables clipping
  };

  Adam() = default;
  explicit Adam(Options options) : options_(options) {}

  // Applies one update to `params` using their accumulated gradients and
  // returns the pre-clip global gradient norm. The parameter list must be
  // the same (in order and shape) on every call.
  double step(const std::vector<Parameter*>& params);

  std::int64_t steps() const { return steps_; }
  const Options& options() const { return options_; }

  // Moment buffers, exposed for checkpointing.
  std::vector<Matrix>& first_moments() { return m_; }
  std::vector<Matrix>& second_moments() { return v_; }
  void set_steps(std::int64_t s) { steps_ = s; }

 private:
  Options options_;
  std::int64_t steps_ = 0;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

double global_grad_norm(const std::vector<Parameter*>& params);
void zero_grads(const std::vector<Parameter*>& params);

// Removes const from an owned parameter list (modules hand out const views).
std::vector<Parameter*> mutable_params(const ParamList& params);

// Stores parameters under their names; loading requires every name present
// with an identical shape.
void save_parameters(Archive& archive, const ParamList& params);
void load_parameters(const Archive& archive, const ParamList& params);
void save_optimizer(Archive& archive, const std::string& prefix, Adam& adam);
void load_optimizer(const Archive& archive, const std::string& prefix, Adam& adam, std::size_t count);

}  // namespace lawm::nn

#endif  // LAWM_NN_HPP_
