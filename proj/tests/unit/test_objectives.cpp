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

#include "lawm/objectives.hpp"

#include "lawm/error.hpp"
#include "support/support.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>

using namespace lawm;
using ad::Matrix;
using ad::Tape;
using lawm::testing::random_batch;
using lawm::testing::tiny_model_config;

namespace {

constexpr ad::Index kObs = 3;
constexpr ad::Index kAct = 2;
const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

wm::WorldModel make_model(PriorMode prior = PriorMode::kLawm) {
  return wm::WorldModel(tiny_model_config(prior), kObs, kAct, Eigen::VectorXd::Ones(kAct), 17);
}

objectives::LossOptions options(double free_nats = 0.0, bool reward = false) {
  objectives::LossOptions o;
  o.free_nats = free_nats;
  o.include_reward = reward;
  return o;
}

std::vector<data::Trajectory> mixed_batch(std::uint64_t seed) {
  auto batch = random_batch(seed, 5, 4, kObs, kAct, true);
  batch[1].actions.reset();
  batch[3].actions.reset();
  batch[4].actions.reset();
  return batch;
}

std::vector<data::Trajectory> subset(const std::vector<data::Trajectory>& batch, bool labeled) {
  std::vector<data::Trajectory> out;
  for (const auto& t : batch)
    if (t.has_actions() == labeled) out.push_back(t);
  return out;
}

double gradient_norm(const nn::ParamList& params) {
  double s = 0;
  for (const auto* p : params) s += p->grad.squaredNorm();
  return std::sqrt(s);
}

nn::ParamList group(const wm::WorldModel& m, const std::string& name) {
  for (const auto& [n, g] : m.parameter_groups())
    if (n == name) return g;
  FAIL("missing parameter group " << name);
  return {};
}

}  // namespace

TEST_CASE("degenerate model on zero data gives the closed-form Gaussian NLL") {
  for (PriorMode mode : {PriorMode::kLawm, PriorMode::kClap}) {
    const auto m = make_model(mode);
    lawm::testing::make_degenerate(m);
    data::Trajectory t;
    t.obs = data::FloatMatrix::Zero(1, kObs);
    t.actions = data::FloatMatrix::Zero(1, kAct);
    t.rewards = Eigen::VectorXf::Zero(1);
    t.action_dim = kAct;
    const std::vector<data::Trajectory> batch{t};
    Tape tape(false);
    NoiseSource noise(0, true);
    const auto r = objectives::loss_action_conditioned(tape, m, batch, options(), noise);
    CHECK(r.breakdown.obs_recon == doctest::Approx(kObs * kHalfLog2Pi).epsilon(1e-12));
    CHECK(r.breakdown.action_recon == doctest::Approx(kAct * kHalfLog2Pi).epsilon(1e-12));
    CHECK(std::abs(r.breakdown.state_kl) < 1e-12);
    CHECK(std::abs(r.breakdown.action_kl) < 1e-12);
    CHECK(r.total.scalar() == doctest::Approx((kObs + kAct) * kHalfLog2Pi).epsilon(1e-12));
    NoiseSource n2(0, true);
    const auto rw = objectives::reward_loss(tape, m, batch, n2);
    CHECK(rw.total.scalar() == doctest::Approx(kHalfLog2Pi).epsilon(1e-12));
  }
}

TEST_CASE("breakdown totals add up and the mask fraction is reported") {
  const auto m = make_model();
  const auto batch = mixed_batch(1);
  Tape tape(false);
  NoiseSource noise(3);
  const auto r = objectives::model_objective(tape, m, batch, options(), noise);
  const auto& b = r.breakdown;
  CHECK(b.total == doctest::Approx(b.obs_recon + b.action_recon + b.state_kl + b.action_kl + b.reward_nll));
  CHECK(b.total == doctest::Approx(r.total.scalar()));
  CHECK(b.mask_fraction == doctest::Approx(0.4));
  CHECK(b.finite());
  CHECK(r.filters.size() == 2);
  CHECK(r.filters[0].mode == wm::FilterMode::kLabeled);
  CHECK(r.filters[1].mode == wm::FilterMode::kActionFree);
}

TEST_CASE("unified loss reduces to the pure losses on homogeneous batches") {
  const auto m = make_model();
  for (bool stochastic : {false, true}) {
    const auto labeled = random_batch(2, 3, 4, kObs, kAct, true);
    const auto unlabeled = random_batch(3, 3, 4, kObs, kAct, false);
    Tape tape(false);
    NoiseSource a(4, !stochastic), b(4, !stochastic), c(5, !stochastic), d(5, !stochastic);
    const double u1 = objectives::unified_loss(tape, m, labeled, options(), a).total.scalar();
    const double l1 = objectives::loss_action_conditioned(tape, m, labeled, options(), b).total.scalar();
    const double u2 = objectives::unified_loss(tape, m, unlabeled, options(), c).total.scalar();
    const double l2 = objectives::loss_action_free(tape, m, unlabeled, options(), d).total.scalar();
    CHECK(std::abs(u1 - l1) <= 1e-6);
    CHECK(std::abs(u2 - l2) <= 1e-6);
  }
}

TEST_CASE("mixed batches average the two paths over all trajectories") {
  const auto m = make_model();
  const auto batch = mixed_batch(6);
  const auto lab = subset(batch, true), unl = subset(batch, false);
  Tape tape(false);
  NoiseSource n1(8), n2(8);
  const auto mixed = objectives::unified_loss(tape, m, batch, options(0.3), n1);
  // Same noise order as the unified loss: labeled sub-batch first.
  const auto l = objectives::loss_action_conditioned(tape, m, lab, options(0.3), n2);
  const auto u = objectives::loss_action_free(tape, m, unl, options(0.3), n2);
  const double expect = (2.0 * l.total.scalar() + 3.0 * u.total.scalar()) / 5.0;
  CHECK(std::abs(mixed.total.scalar() - expect) <= 1e-6);
  CHECK(std::abs(mixed.breakdown.action_recon - 2.0 * l.breakdown.action_recon / 5.0) <= 1e-6);
}

TEST_CASE("duplicating the batch leaves the mean loss unchanged") {
  const auto m = make_model();
  auto batch = mixed_batch(9);
  auto doubled = batch;
  doubled.insert(doubled.end(), batch.begin(), batch.end());
  Tape tape(false);
  NoiseSource a(0, true), b(0, true);
  const double once = objectives::model_objective(tape, m, batch, options(0.1), a).total.scalar();
  const double twice = objectives::model_objective(tape, m, doubled, options(0.1), b).total.scalar();
  CHECK(std::abs(once - twice) <= 1e-6);
}

TEST_CASE("action-free loss has no action reconstruction and ignores stored actions") {
  const auto m = make_model();
  auto batch = random_batch(10, 3, 4, kObs, kAct, true);
  auto corrupted = batch;
  for (auto& t : corrupted) t.actions->setConstant(std::numeric_limits<float>::quiet_NaN());
  Tape tape(false);
  NoiseSource a(11), b(11);
  const auto r1 = objectives::loss_action_free(tape, m, batch, options(), a);
  const auto r2 = objectives::loss_action_free(tape, m, corrupted, options(), b);
  CHECK(r1.breakdown.action_recon == 0.0);
  CHECK(r1.total.scalar() == r2.total.scalar());
  CHECK(r1.breakdown.action_kl == r2.breakdown.action_kl);
  NoiseSource c(1);
  const auto short_batch = random_batch(12, 2, 1, kObs, kAct, false);
  CHECK_THROWS_AS(objectives::loss_action_free(tape, m, short_batch, options(), c), ContractError);
}

TEST_CASE("inputs are validated") {
  const auto m = make_model();
  Tape tape(false);
  NoiseSource n(1);
  CHECK_THROWS_AS(objectives::loss_action_conditioned(tape, m, mixed_batch(13), options(), n), ContractError);
  auto partial = random_batch(14, 2, 4, kObs, kAct, true);
  (*partial[0].actions)(2, 1) = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(objectives::label_mask(partial[0]), ContractError);
  CHECK_THROWS_AS(objectives::unified_loss(tape, m, partial, options(), n), ContractError);
  CHECK(objectives::label_mask(partial[1]));
  auto no_reward = random_batch(15, 2, 4, kObs, kAct, true);
  no_reward[1].rewards(0) = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(objectives::reward_loss(tape, m, no_reward, n), DataError);
  CHECK_THROWS_AS(objectives::unified_loss(tape, m, std::vector<data::Trajectory>{}, options(), n), ContractError);
}

TEST_CASE("each path trains only its own latent action head") {
  const auto m = make_model();
  const auto params = nn::mutable_params(m.parameters());
  const auto labeled_head = group(m, "action_posterior_labeled");
  const auto free_head = group(m, "action_posterior_unlabeled");

  nn::zero_grads(params);
  {
    Tape tape;
    NoiseSource n(1);
    tape.backward(objectives::loss_action_free(tape, m, random_batch(16, 3, 4, kObs, kAct, false), options(), n).total);
  }
  CHECK(gradient_norm(labeled_head) == 0.0);
  CHECK(gradient_norm(free_head) > 0.0);
  CHECK(gradient_norm(group(m, "action_decoder")) > 0.0);

  nn::zero_grads(params);
  {
    Tape tape;
    NoiseSource n(1);
    tape.backward(
        objectives::loss_action_conditioned(tape, m, random_batch(17, 3, 4, kObs, kAct, true), options(), n).total);
  }
  CHECK(gradient_norm(labeled_head) > 0.0);
  CHECK(gradient_norm(free_head) == 0.0);
  nn::zero_grads(params);
}

TEST_CASE("every parameter group receives gradient from the full objective") {
  for (PriorMode mode : {PriorMode::kLawm, PriorMode::kClap}) {
    const auto m = make_model(mode);
    const auto params = nn::mutable_params(m.parameters());
    nn::zero_grads(params);
    Tape tape;
    NoiseSource n(2);
    tape.backward(objectives::model_objective(tape, m, mixed_batch(18), options(), n).total);
    for (const auto& [name, g] : m.parameter_groups()) {
      CAPTURE(name);
      CHECK(gradient_norm(g) > 0.0);
    }
    nn::zero_grads(params);
  }
}

TEST_CASE("free nats above every KL stop the KL gradients") {
  const auto m = make_model(PriorMode::kClap);
  const auto params = nn::mutable_params(m.parameters());
  nn::zero_grads(params);
  Tape tape;
  NoiseSource n(3);
  const auto r = objectives::loss_action_conditioned(tape, m, random_batch(19, 3, 4, kObs, kAct, true), options(1e6), n);
  CHECK(r.breakdown.state_kl == 1e6);
  CHECK(r.breakdown.action_kl == 1e6);
  tape.backward(r.total);
  // Only the clipped KLs read these heads.
  CHECK(gradient_norm(group(m, "state_prior")) == 0.0);
  CHECK(gradient_norm(group(m, "action_prior")) == 0.0);
  nn::zero_grads(params);
}

TEST_CASE("loss gradients match central finite differences") {
  for (PriorMode mode : {PriorMode::kLawm, PriorMode::kClap}) {
    const auto m = make_model(mode);
    lawm::testing::jitter_parameters(m.parameters(), 7);
    const auto labeled = random_batch(20, 2, 3, kObs, kAct, true);
    const auto unlabeled = random_batch(21, 2, 3, kObs, kAct, false);
    auto with_next = unlabeled;
    with_next[0].next_obs = data::FloatRow::Constant(kObs, 0.5f);
    const auto check = [&](const char* what, auto fn) {
      const auto g = lawm::testing::check_gradients(m.parameters(), [&](Tape& t) {
        NoiseSource noise(99);
        return fn(t, noise);
      });
      CAPTURE(what);
      CAPTURE(g.worst_tensor);
      CHECK(g.worst_relative_error < 1e-3);
    };
    check("conditioned", [&](Tape& t, NoiseSource& n) {
      return objectives::loss_action_conditioned(t, m, labeled, options(), n).total;
    });
    check("action-free", [&](Tape& t, NoiseSource& n) {
      return objectives::loss_action_free(t, m, with_next, options(), n).total;
    });
    check("reward", [&](Tape& t, NoiseSource& n) { return objectives::reward_loss(t, m, labeled, n).total; });
  }
}

TEST_CASE("losses decrease when overfitting a tiny fixed batch") {
  const auto m = make_model();
  const auto params = nn::mutable_params(m.parameters());
  nn::Adam::Options opt;
  opt.learning_rate = 3e-3;
  for (bool labeled : {true, false}) {
    CAPTURE(labeled);
    const auto batch = random_batch(labeled ? 22 : 23, 3, 4, kObs, kAct, labeled);
    nn::Adam adam(opt);
    double first = 0, last = 0;
    NoiseSource noise(5);
    for (int step = 0; step < 500; ++step) {
      nn::zero_grads(params);
      Tape tape;
      const auto r = labeled ? objectives::loss_action_conditioned(tape, m, batch, options(), noise)
                             : objectives::loss_action_free(tape, m, batch, options(), noise);
      tape.backward(r.total);
      adam.step(params);
      if (step < 20) first += r.total.scalar() / 20;
      if (step >= 480) last += r.total.scalar() / 20;
    }
    CHECK(last < first);
  }
}
