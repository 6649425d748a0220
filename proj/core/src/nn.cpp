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

#include "lawm/nn.hpp"

#include "lawm/error.hpp"

#include <cmath>

namespace lawm::nn {
namespace {

// Glorot-uniform initialization drawn from the supplied engine.
Matrix glorot(ad::Index in, ad::Index out, Engine& engine) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  Matrix w(in, out);
  for (ad::Index r = 0; r < in; ++r) {
    for (ad::Index c = 0; c < out; ++c) {
      const double u = static_cast<double>(engine() >> 11) * 0x1.0p-53;
      w(r, c) = (2.0 * u - 1.0) * limit;
    }
  }
  return w;
}

}  // namespace

Linear::Linear(const std::string& name, ad::Index in, ad::Index out, Engine& engine)
    : weight_(name + ".weight", glorot(in, out, engine)), bias_(name + ".bias", Matrix::Zero(1, out)) {}

Var Linear::operator()(Tape& tape, const Var& x) const {
  return ad::linear(x, tape.param(weight_), tape.param(bias_));
}

void Linear::collect(ParamList& out) const {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

LayerNorm::LayerNorm(const std::string& name, ad::Index features)
    : gain_(name + ".gain", Matrix::Ones(1, features)), bias_(name + ".bias", Matrix::Zero(1, features)) {}

Var LayerNorm::operator()(Tape& tape, const Var& x) const {
  return ad::layer_norm(x, tape.param(gain_), tape.param(bias_));
}

void LayerNorm::collect(ParamList& out) const {
  out.push_back(&gain_);
  out.push_back(&bias_);
}

Mlp::Mlp(const std::string& name, const MlpShape& shape, Engine& engine) : shape_(shape) {
  if (shape.in < 1 || shape.out < 1 || shape.layers < 0 || (shape.layers > 0 && shape.hidden < 1)) {
    throw ConfigError("Mlp '" + name + "': invalid shape");
  }
  if (shape.dropout < 0.0 || shape.dropout >= 1.0) throw ConfigError("Mlp '" + name + "': dropout not in [0,1)");
  ad::Index width = shape.in;
  for (int i = 0; i < shape.layers; ++i) {
    const std::string layer = name + "." + std::to_string(i);
    hidden_.emplace_back(layer + ".linear", width, shape.hidden, engine);
    norms_.emplace_back(layer + ".norm", shape.hidden);
    width = shape.hidden;
  }
  out_ = Linear(name + ".out", width, shape.out, engine);
}

Var Mlp::operator()(Tape& tape, const Var& x, NoiseSource* dropout_noise) const {
  if (x.cols() != shape_.in) {
    throw ContractError("Mlp: expected " + std::to_string(shape_.in) + " input features, got " +
                        std::to_string(x.cols()));
  }
  Var h = x;
  for (std::size_t i = 0; i < hidden_.size(); ++i) {
    h = ad::swish(norms_[i](tape, hidden_[i](tape, h)));
    if (dropout_noise != nullptr && shape_.dropout > 0.0) {
      const double keep = 1.0 - shape_.dropout;
      const Matrix u = dropout_noise->uniform(h.rows(), h.cols());
      const Matrix mask = (u.array() < keep).cast<double>() / keep;
      h = ad::mul_constant(h, mask);
    }
  }
  return out_(tape, h);
}

void Mlp::collect(ParamList& out) const {
  for (std::size_t i = 0; i < hidden_.size(); ++i) {
    hidden_[i].collect(out);
    norms_[i].collect(out);
  }
  out_.collect(out);
}

GruCell::GruCell(const std::string& name, ad::Index input, ad::Index state, Engine& engine)
    : state_(state), gates_(name + ".gates", input + state, 3 * state, engine), norm_(name + ".norm", 3 * state) {}

Var GruCell::operator()(Tape& tape, const Var& input, const Var& state) const {
  if (state.cols() != state_) throw ContractError("GruCell: state width mismatch");
  const Var parts = norm_(tape, gates_(tape, ad::concat_cols({input, state})));
  const Var reset = ad::sigmoid(ad::slice_cols(parts, 0, state_));
  const Var cand = ad::tanh(reset * ad::slice_cols(parts, state_, state_));
  // Bias the update gate towards keeping the previous state.
  const Var update = ad::sigmoid(ad::slice_cols(parts, 2 * state_, state_) - 1.0);
  return update * cand + (1.0 - update) * state;
}

void GruCell::collect(ParamList& out) const {
  gates_.collect(out);
  norm_.collect(out);
}

double global_grad_norm(const std::vector<Parameter*>& params) {
  double sq = 0.0;
  for (const Parameter* p : params) sq += p->grad.squaredNorm();
  return std::sqrt(sq);
}

void zero_grads(const std::vector<Parameter*>& params) {
  for (const Parameter* p : params) p->zero_grad();
}

std::vector<Parameter*> mutable_params(const ParamList& params) {
  std::vector<Parameter*> out;
  out.reserve(params.size());
  for (const Parameter* p : params) out.push_back(const_cast<Parameter*>(p));
  return out;
}

void save_parameters(Archive& archive, const ParamList& params) {
  for (const Parameter* p : params) archive.add(p->name, p->value);
}

void load_parameters(const Archive& archive, const ParamList& params) {
  for (const Parameter* p : params) {
    const Matrix& m = archive.get(p->name);
    if (m.rows() != p->value.rows() || m.cols() != p->value.cols()) {
      throw FormatError("checkpoint tensor '" + p->name + "' has the wrong shape", 0);
    }
    const_cast<Parameter*>(p)->value = m;
  }
}

void save_optimizer(Archive& archive, const std::string& prefix, Adam& adam) {
  Matrix steps(1, 1);
  steps(0, 0) = static_cast<double>(adam.steps());
  archive.add(prefix + ".steps", steps);
  for (std::size_t i = 0; i < adam.first_moments().size(); ++i) {
    archive.add(prefix + ".m." + std::to_string(i), adam.first_moments()[i]);
    archive.add(prefix + ".v." + std::to_string(i), adam.second_moments()[i]);
  }
}

void load_optimizer(const Archive& archive, const std::string& prefix, Adam& adam, std::size_t count) {
  adam.set_steps(static_cast<std::int64_t>(archive.get(prefix + ".steps")(0, 0)));
  adam.first_moments().clear();
  adam.second_moments().clear();
  if (adam.steps() == 0) return;
  for (std::size_t i = 0; i < count; ++i) {
    adam.first_moments().push_back(archive.get(prefix + ".m." + std::to_string(i)));
    adam.second_moments().push_back(archive.get(prefix + ".v." + std::to_string(i)));
  }
}

double Adam::step(const std::vector<Parameter*>& params) {
  if (m_.empty()) {
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const Parameter* p : params) {
      m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    }
  }
  if (m_.size() != params.size()) throw ContractError("Adam::step: parameter list changed between steps");
  const double norm = global_grad_norm(params);
  if (!std::isfinite(norm)) throw NumericError("Adam::step: non-finite gradient norm");
  const double clip = (options_.clip_norm > 0.0 && norm > options_.clip_norm) ? options_.clip_norm / norm : 1.0;
  ++steps_;
  const double bc1 = 1.0 - std::pow(options_.beta1, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(options_.beta2, static_cast<double>(steps_));
  const double lr = options_.learning_rate * std::sqrt(bc2) / bc1;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    const auto g = (p.grad.array() * clip);
    m_[i].array() = options_.beta1 * m_[i].array() + (1.0 - options_.beta1) * g;
    v_[i].array() = options_.beta2 * v_[i].array() + (1.0 - options_.beta2) * g.square();
    p.value.array() -= lr * m_[i].array() / (v_[i].array().sqrt() + options_.eps);
  }
  return norm;
}

}  // namespace lawm::nn
