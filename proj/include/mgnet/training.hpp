#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mgnet/model.hpp"
#include "mgnet/tensor.hpp"

namespace mgnet {

enum class LossKind { kCrossEntropy, kCrossEntropyPlusSmoothL1 };

// Gradient of the loss w.r.t. every trainable parameter; shapes mirror
// ModelParams exactly.
struct Gradients {
  std::vector<Matrix> layer_weights;
  std::vector<double> alpha;
  Matrix fcn_weights;
  std::vector<double> fcn_bias;
};

// Adam accumulators, one (m, v) pair per parameter.
struct AdamState {
  std::vector<Matrix> m_layer, v_layer;
  std::vector<double> m_alpha, v_alpha;
  Matrix m_fcn, v_fcn;
  std::vector<double> m_bias, v_bias;
  long step = 0;
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

AdamState make_adam_state(const ModelParams &params, double lr);

struct TrainConfig {
  double lr = 0.001;
  std::size_t epochs = 50;
  std::size_t batch_size = 8;
  double dropout_rate = 0.0;
  std::size_t layers = 1;
  std::size_t d_out = 60;
  LossKind loss = LossKind::kCrossEntropy;
  double smooth_l1_weight = 0.1;
  bool freeze_alpha = false;  // average pooling: alpha stays at 1/M
  std::uint64_t seed = 0;
};

// Mean cross-entropy over subjects, probabilities clamped at 1e-12 before the
// log. The smooth-L1 variant adds weight * mean_s sum_k huber(onehot_k - p_k)
// with delta = 1.
double loss(const Matrix &probs, const std::vector<int> &labels, LossKind kind,
            double smooth_l1_weight);

// Analytic gradients through softmax head, dropout, pooling and all GCN
// layers. The trace must come from forward() in the mode the loss is taken in
// (train mode with stored masks when dropout is active). ReLU subgradient at
// exactly 0 is 0.
Gradients backward(const ForwardTrace &trace, const ModelParams &params,
                   const std::vector<int> &labels, LossKind kind,
                   double smooth_l1_weight);

// One Adam update with bias correction. Throws NumericError naming the
// parameter group when a gradient is non-finite; parameters are untouched in
// that case.
void adam_step(ModelParams &params, const Gradients &grads, AdamState &state);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0, train_acc = 0.0;
  double val_loss = 0.0, val_acc = 0.0;
};

struct TrainResult {
  ModelParams params;             // snapshot from the best validation epoch
  std::vector<EpochRecord> log;   // one record per epoch
  std::size_t best_epoch = 0;     // 1-based; earliest epoch on ties
};

// Mini-batch training over the train split with per-epoch validation metrics.
// h0 holds the projected features of the whole cohort; train/val index into
// its subject mode. Deterministic given config.seed.
TrainResult train(const Tensor4 &h0, const Matrix &a_hat,
                  const std::vector<int> &labels,
                  const std::vector<std::size_t> &train_idx,
                  const std::vector<std::size_t> &val_idx,
                  const TrainConfig &config);

std::string loss_kind_name(LossKind kind);
LossKind loss_kind_from_name(const std::string &name);

}  // namespace mgnet
