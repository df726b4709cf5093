#include <doctest.h>

#include <cmath>
#include <vector>

#include "mgnet/error.hpp"
#include "mgnet/model.hpp"
#include "mgnet/rng.hpp"
#include "mgnet/training.hpp"
#include "test_util.hpp"

using namespace mgnet;
using namespace testutil;

TEST_SUITE_BEGIN("training");

namespace {

double loss_at(const Tensor4 &h0, const Matrix &a_hat, const ModelParams &params,
               const std::vector<int> &labels, LossKind kind, double w) {
  return loss(forward(h0, a_hat, params, RunMode::kEval, 0).probs, labels, kind, w);
}

struct ParamGroup {
  const char *name;
  std::vector<double> *values;
  const std::vector<double> *grads;
};

std::vector<ParamGroup> groups_of(ModelParams &p, const Gradients &g) {
  std::vector<ParamGroup> out;
  for (std::size_t l = 0; l < p.layer_count(); ++l)
    out.push_back({"layer_w", &p.layer_weights[l].data, &g.layer_weights[l].data});
  out.push_back({"alpha", &p.alpha, &g.alpha});
  out.push_back({"fcn_w", &p.fcn_weights.data, &g.fcn_weights.data});
  out.push_back({"fcn_b", &p.fcn_bias, &g.fcn_bias});
  return out;
}

// Central finite differences against the analytic gradient on `samples`
// entries of every parameter group. Returns the number checked.
std::size_t gradient_check(std::size_t n, std::size_t mods, std::size_t layers,
                           std::size_t d_out, std::size_t subs, LossKind kind,
                           double w_sl1, std::uint64_t seed,
                           std::size_t samples_per_group) {
  Rng rng(seed);
  const Tensor4 h0 = random_tensor(n, n, mods, subs, rng);
  const Matrix a_hat = random_symmetric(n, rng);
  ModelParams params = init_params(n, mods, layers, d_out, 0.0, seed + 1);
  std::vector<int> labels(subs);
  for (std::size_t s = 0; s < subs; ++s) labels[s] = rng.below(2) ? 1 : 0;

  const ForwardTrace trace = forward(h0, a_hat, params, RunMode::kTrain, 0);
  const Gradients grads = backward(trace, params, labels, kind, w_sl1);

  const double h = 1e-5;
  std::size_t checked = 0;
  for (ParamGroup group : groups_of(params, grads)) {
    for (std::size_t pick = 0; pick < samples_per_group; ++pick) {
      const std::size_t q = rng.below(group.values->size());
      const double saved = (*group.values)[q];
      (*group.values)[q] = saved + h;
      const double up = loss_at(h0, a_hat, params, labels, kind, w_sl1);
      (*group.values)[q] = saved - h;
      const double down = loss_at(h0, a_hat, params, labels, kind, w_sl1);
      (*group.values)[q] = saved;

      const double fd = (up - down) / (2.0 * h);
      const double an = (*group.grads)[q];
      const double abs_err = std::abs(fd - an);
      const double scale = std::max(std::abs(fd), std::abs(an));
      const bool ok = abs_err < 1e-8 || abs_err / scale < 1e-5;
      if (!ok) {
        CAPTURE(group.name);
        CAPTURE(q);
        CAPTURE(fd);
        CAPTURE(an);
      }
      CHECK(ok);
      ++checked;
    }
  }
  return checked;
}

}  // namespace

TEST_CASE("perfect prediction gives zero cross-entropy") {
  Matrix probs(2, 2);
  probs(0, 0) = 1.0;
  probs(1, 1) = 1.0;
  CHECK(loss(probs, {0, 1}, LossKind::kCrossEntropy, 0.0) == 0.0);
}

TEST_CASE("uniform predictor costs ln 2 per subject") {
  Matrix probs(3, 2);
  for (double &x : probs.data) x = 0.5;
  CHECK(loss(probs, {0, 1, 0}, LossKind::kCrossEntropy, 0.0) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("loss matches an independently coded scalar loop") {
  Rng rng(70);
  const std::size_t subs = 7;
  Matrix probs(subs, 2);
  std::vector<int> labels(subs);
  for (std::size_t s = 0; s < subs; ++s) {
    const double p = rng.uniform(0.01, 0.99);
    probs(s, 0) = 1.0 - p;
    probs(s, 1) = p;
    labels[s] = rng.below(2) ? 1 : 0;
  }
  const double w = 0.3;

  double expect_ce = 0.0, expect_sl1 = 0.0;
  for (std::size_t s = 0; s < subs; ++s) {
    expect_ce -= std::log(probs(s, static_cast<std::size_t>(labels[s])));
    for (std::size_t c = 0; c < 2; ++c) {
      const double d = (labels[s] == static_cast<int>(c) ? 1.0 : 0.0) - probs(s, c);
      expect_sl1 += std::abs(d) <= 1.0 ? 0.5 * d * d : std::abs(d) - 0.5;
    }
  }
  expect_ce /= subs;
  expect_sl1 /= subs;

  CHECK(loss(probs, labels, LossKind::kCrossEntropy, w) ==
        doctest::Approx(expect_ce).epsilon(1e-12));
  CHECK(loss(probs, labels, LossKind::kCrossEntropyPlusSmoothL1, w) ==
        doctest::Approx(expect_ce + w * expect_sl1).epsilon(1e-12));
}

TEST_CASE("loss clamps vanishing probabilities instead of diverging") {
  Matrix probs(1, 2);
  probs(0, 0) = 1.0;
  probs(0, 1) = 0.0;
  const double v = loss(probs, {1}, LossKind::kCrossEntropy, 0.0);
  CHECK(std::isfinite(v));
  CHECK(v == doctest::Approx(-std::log(1e-12)));
}

TEST_CASE("zero input and zero alpha give a zero alpha gradient") {
  const Tensor4 h0(4, 4, 2, 3);
  const Matrix a_hat = Matrix::identity(4);
  ModelParams params = init_params(4, 2, 1, 3, 0.0, 5);
  params.alpha = {0.0, 0.0};
  const ForwardTrace t = forward(h0, a_hat, params, RunMode::kTrain, 0);
  const Gradients g = backward(t, params, {0, 1, 0}, LossKind::kCrossEntropy, 0.0);
  CHECK(g.alpha[0] == 0.0);
  CHECK(g.alpha[1] == 0.0);
}

TEST_CASE("analytic gradients agree with central finite differences") {
  // Smaller sweep here; the acceptance suite runs the full 200+ parameter scan.
  gradient_check(5, 2, 2, 4, 4, LossKind::kCrossEntropy, 0.0, 71, 8);
  gradient_check(4, 3, 1, 3, 3, LossKind::kCrossEntropyPlusSmoothL1, 0.25, 72, 8);
}

TEST_CASE("duplicating every subject leaves gradients unchanged") {
  Rng rng(73);
  const Tensor4 h0 = random_tensor(4, 4, 2, 3, rng);
  const Matrix a_hat = random_symmetric(4, rng);
  const ModelParams params = init_params(4, 2, 2, 3, 0.0, 74);
  const std::vector<int> labels = {0, 1, 1};

  std::vector<std::size_t> doubled = {0, 1, 2, 0, 1, 2};
  const Tensor4 h0x2 = select_subjects(h0, doubled);
  const std::vector<int> labelsx2 = {0, 1, 1, 0, 1, 1};

  const Gradients g1 = backward(forward(h0, a_hat, params, RunMode::kTrain, 0),
                                params, labels, LossKind::kCrossEntropy, 0.0);
  const Gradients g2 = backward(forward(h0x2, a_hat, params, RunMode::kTrain, 0),
                                params, labelsx2, LossKind::kCrossEntropy, 0.0);
  for (std::size_t l = 0; l < g1.layer_weights.size(); ++l)
    CHECK(max_abs_diff(g1.layer_weights[l], g2.layer_weights[l]) < 1e-12);
  for (std::size_t m = 0; m < 2; ++m)
    CHECK(std::abs(g1.alpha[m] - g2.alpha[m]) < 1e-12);
  CHECK(max_abs_diff(g1.fcn_weights, g2.fcn_weights) < 1e-12);
}

TEST_CASE("adam with zero gradients leaves parameters unchanged") {
  ModelParams params = init_params(3, 2, 1, 2, 0.0, 75);
  const ModelParams before = params;
  AdamState st = make_adam_state(params, 0.01);
  Gradients g;
  g.layer_weights = {Matrix(3, 2)};
  g.alpha = {0.0, 0.0};
  g.fcn_weights = Matrix(2, 6);
  g.fcn_bias = {0.0, 0.0};
  adam_step(params, g, st);
  CHECK(st.step == 1);
  CHECK(params.layer_weights[0].data == before.layer_weights[0].data);
  CHECK(params.alpha == before.alpha);
  CHECK(params.fcn_weights.data == before.fcn_weights.data);
}

TEST_CASE("one adam step with unit gradient moves by about lr") {
  ModelParams params = init_params(3, 2, 1, 2, 0.0, 76);
  const double theta0 = params.fcn_bias[0];
  AdamState st = make_adam_state(params, 0.001);
  Gradients g;
  g.layer_weights = {Matrix(3, 2)};
  g.alpha = {0.0, 0.0};
  g.fcn_weights = Matrix(2, 6);
  g.fcn_bias = {1.0, 0.0};
  adam_step(params, g, st);
  // bias-corrected m/sqrt(v) is exactly 1 at t=1, damped only by eps
  CHECK(params.fcn_bias[0] ==
        doctest::Approx(theta0 - 0.001 * (1.0 / (1.0 + 1e-8))).epsilon(1e-12));
  CHECK(params.fcn_bias[1] == 0.0);
}

TEST_CASE("independent parameters update independently") {
  ModelParams params = init_params(3, 2, 1, 2, 0.0, 77);
  const ModelParams before = params;
  AdamState st = make_adam_state(params, 0.01);
  Gradients g;
  g.layer_weights = {Matrix(3, 2)};
  g.layer_weights[0](1, 1) = 2.5;
  g.alpha = {0.0, 0.0};
  g.fcn_weights = Matrix(2, 6);
  g.fcn_bias = {0.0, 0.0};
  adam_step(params, g, st);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      if (i == 1 && j == 1)
        CHECK(params.layer_weights[0](i, j) != before.layer_weights[0](i, j));
      else
        CHECK(params.layer_weights[0](i, j) == before.layer_weights[0](i, j));
    }
}

TEST_CASE("non-finite gradient aborts the step naming the parameter") {
  ModelParams params = init_params(3, 2, 1, 2, 0.0, 78);
  const ModelParams before = params;
  AdamState st = make_adam_state(params, 0.01);
  Gradients g;
  g.layer_weights = {Matrix(3, 2)};
  g.alpha = {0.0, std::nan("")};
  g.fcn_weights = Matrix(2, 6);
  g.fcn_bias = {0.0, 0.0};
  CHECK_THROWS_WITH_AS(adam_step(params, g, st), doctest::Contains("alpha"),
                       NumericError);
  CHECK(params.alpha == before.alpha);
  CHECK(st.step == 0);
}

namespace {

// Small separable setup: class decides the sign of the input pattern.
struct Toy {
  Tensor4 h0;
  Matrix a_hat;
  std::vector<int> labels;
};

Toy separable_toy(std::size_t subs, std::uint64_t seed) {
  Rng rng(seed);
  Toy toy;
  toy.h0 = Tensor4(4, 4, 2, subs);
  toy.a_hat = Matrix::identity(4);
  for (std::size_t s = 0; s < subs; ++s) {
    const int label = s % 2 == 0 ? 0 : 1;
    toy.labels.push_back(label);
    const double base = label == 0 ? 1.0 : -1.0;
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j)
        for (std::size_t m = 0; m < 2; ++m)
          toy.h0(i, j, m, s) = base + 0.05 * rng.uniform(-1.0, 1.0);
  }
  return toy;
}

}  // namespace

TEST_CASE("training fits a small separable cohort to 100% train accuracy") {
  const Toy toy = separable_toy(8, 80);
  TrainConfig cfg;
  cfg.epochs = 60;
  cfg.batch_size = 4;
  cfg.layers = 1;
  cfg.d_out = 4;
  cfg.lr = 0.01;
  cfg.seed = 81;
  const TrainResult r = train(toy.h0, toy.a_hat, toy.labels, {0, 1, 2, 3, 4, 5},
                              {6, 7}, cfg);
  CHECK(r.log.back().train_acc == 100.0);
}

TEST_CASE("lr = 0 freezes parameters and losses") {
  const Toy toy = separable_toy(8, 82);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.batch_size = 4;
  cfg.layers = 1;
  cfg.d_out = 3;
  cfg.lr = 0.0;
  cfg.seed = 83;
  const TrainResult r = train(toy.h0, toy.a_hat, toy.labels, {0, 1, 2, 3, 4, 5},
                              {6, 7}, cfg);
  const ModelParams fresh =
      init_params(4, 2, 1, 3, 0.0, derive_seed(83, seed_stage::kParamInit));
  CHECK(r.params.layer_weights[0].data == fresh.layer_weights[0].data);
  CHECK(r.params.fcn_weights.data == fresh.fcn_weights.data);
  for (std::size_t e = 1; e < r.log.size(); ++e) {
    CHECK(r.log[e].train_loss == r.log[0].train_loss);
    CHECK(r.log[e].val_loss == r.log[0].val_loss);
  }
}

TEST_CASE("same seed twice gives bitwise-identical logs") {
  const Toy toy = separable_toy(10, 84);
  TrainConfig cfg;
  cfg.epochs = 8;
  cfg.batch_size = 3;
  cfg.layers = 2;
  cfg.d_out = 3;
  cfg.dropout_rate = 0.2;
  cfg.seed = 85;
  const std::vector<std::size_t> tr = {0, 1, 2, 3, 4, 5, 6, 7};
  const std::vector<std::size_t> va = {8, 9};
  const TrainResult a = train(toy.h0, toy.a_hat, toy.labels, tr, va, cfg);
  const TrainResult b = train(toy.h0, toy.a_hat, toy.labels, tr, va, cfg);
  REQUIRE(a.log.size() == b.log.size());
  for (std::size_t e = 0; e < a.log.size(); ++e) {
    CHECK(a.log[e].train_loss == b.log[e].train_loss);
    CHECK(a.log[e].train_acc == b.log[e].train_acc);
    CHECK(a.log[e].val_loss == b.log[e].val_loss);
    CHECK(a.log[e].val_acc == b.log[e].val_acc);
  }
  CHECK(a.best_epoch == b.best_epoch);
  CHECK(a.params.fcn_weights.data == b.params.fcn_weights.data);
}

TEST_CASE("frozen alpha never moves from its uniform start") {
  const Toy toy = separable_toy(8, 86);
  TrainConfig cfg;
  cfg.epochs = 10;
  cfg.batch_size = 4;
  cfg.layers = 1;
  cfg.d_out = 3;
  cfg.freeze_alpha = true;
  cfg.seed = 87;
  const TrainResult r = train(toy.h0, toy.a_hat, toy.labels, {0, 1, 2, 3, 4, 5},
                              {6, 7}, cfg);
  CHECK(r.params.alpha[0] == 0.5);
  CHECK(r.params.alpha[1] == 0.5);
}

TEST_CASE("empty splits are rejected") {
  const Toy toy = separable_toy(4, 88);
  TrainConfig cfg;
  CHECK_THROWS_AS(train(toy.h0, toy.a_hat, toy.labels, {}, {2, 3}, cfg),
                  DataError);
  CHECK_THROWS_AS(train(toy.h0, toy.a_hat, toy.labels, {0, 1}, {}, cfg),
                  DataError);
}

TEST_CASE("full-batch adam descends the loss in nearly all seeds") {
  std::size_t ok = 0;
  const std::size_t trials = 40;
  for (std::size_t trial = 0; trial < trials; ++trial) {
    Rng rng(900 + trial);
    const Tensor4 h0 = random_tensor(4, 4, 2, 6, rng);
    const Matrix a_hat = random_symmetric(4, rng);
    ModelParams params = init_params(4, 2, 1, 3, 0.0, 1000 + trial);
    AdamState st = make_adam_state(params, 0.001);
    std::vector<int> labels(6);
    for (auto &y : labels) y = rng.below(2) ? 1 : 0;

    bool monotone = true;
    double prev = loss_at(h0, a_hat, params, labels, LossKind::kCrossEntropy, 0.0);
    for (int step = 0; step < 5; ++step) {
      const ForwardTrace t = forward(h0, a_hat, params, RunMode::kTrain, 0);
      adam_step(params,
                backward(t, params, labels, LossKind::kCrossEntropy, 0.0), st);
      const double cur =
          loss_at(h0, a_hat, params, labels, LossKind::kCrossEntropy, 0.0);
      if (cur > prev) monotone = false;
      prev = cur;
    }
    if (monotone) ++ok;
  }
  CHECK(ok >= trials * 95 / 100);
}

TEST_SUITE_END();
