#include "mgnet/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <string>

#include "mgnet/error.hpp"
#include "mgnet/rng.hpp"

namespace mgnet {

namespace {

constexpr double kProbFloor = 1e-12;

double huber(double d) {
  const double a = std::abs(d);
  return a <= 1.0 ? 0.5 * d * d : a - 0.5;
}

double huber_grad(double d) { return std::abs(d) <= 1.0 ? d : (d > 0 ? 1.0 : -1.0); }

void check_labels(std::size_t n_subjects, const std::vector<int> &labels,
                  std::size_t n_classes) {
  if (labels.size() != n_subjects)
    throw ShapeError("loss: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(n_subjects) + " subjects");
  for (int y : labels)
    if (y < 0 || static_cast<std::size_t>(y) >= n_classes)
      throw DataError("loss: label " + std::to_string(y) + " outside [0, " +
                      std::to_string(n_classes - 1) + "]");
}

// d loss / d logits for one subject, written into dz.
void logit_gradient(const double *p, int label, std::size_t classes,
                    double inv_s, LossKind kind, double w_sl1, double *dz) {
  for (std::size_t c = 0; c < classes; ++c)
    dz[c] = (p[c] - (static_cast<std::size_t>(label) == c ? 1.0 : 0.0)) * inv_s;
  if (kind == LossKind::kCrossEntropyPlusSmoothL1) {
    // g = d loss / d p, then through the softmax Jacobian:
    // dz_c += p_c * (g_c - <g, p>).
    double gdotp = 0.0;
    double g[8];
    for (std::size_t c = 0; c < classes; ++c) {
      const double onehot = static_cast<std::size_t>(label) == c ? 1.0 : 0.0;
      g[c] = -w_sl1 * inv_s * huber_grad(onehot - p[c]);
      gdotp += g[c] * p[c];
    }
    for (std::size_t c = 0; c < classes; ++c) dz[c] += p[c] * (g[c] - gdotp);
  }
}

void require_finite(const std::vector<double> &v, const std::string &name) {
  if (!all_finite(v))
    throw NumericError("adam_step: non-finite gradient for " + name);
}

void adam_update(std::vector<double> &theta, const std::vector<double> &g,
                 std::vector<double> &m, std::vector<double> &v,
                 const AdamState &st, double corr1, double corr2) {
  for (std::size_t i = 0; i < theta.size(); ++i) {
    m[i] = st.beta1 * m[i] + (1.0 - st.beta1) * g[i];
    v[i] = st.beta2 * v[i] + (1.0 - st.beta2) * g[i] * g[i];
    const double mhat = m[i] / corr1;
    const double vhat = v[i] / corr2;
    theta[i] -= st.lr * mhat / (std::sqrt(vhat) + st.eps);
  }
}

struct SplitMetrics {
  double loss = 0.0;
  double acc = 0.0;
};

SplitMetrics eval_split(const Tensor4 &tensor, const std::vector<int> &labels,
                        const Matrix &a_hat, const ModelParams &params,
                        LossKind kind, double w_sl1) {
  const ForwardTrace t = forward(tensor, a_hat, params, RunMode::kEval, 0);
  SplitMetrics out;
  out.loss = loss(t.probs, labels, kind, w_sl1);
  std::size_t correct = 0;
  for (std::size_t s = 0; s < labels.size(); ++s) {
    const int pred = t.probs(s, 1) > t.probs(s, 0) ? 1 : 0;
    if (pred == labels[s]) ++correct;
  }
  out.acc = 100.0 * static_cast<double>(correct) /
            static_cast<double>(labels.size());
  return out;
}

std::vector<int> gather_labels(const std::vector<int> &labels,
                               const std::vector<std::size_t> &idx) {
  std::vector<int> out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out[i] = labels[idx[i]];
  return out;
}

}  // namespace

AdamState make_adam_state(const ModelParams &params, double lr) {
  AdamState st;
  st.lr = lr;
  for (const Matrix &w : params.layer_weights) {
    st.m_layer.emplace_back(w.rows, w.cols);
    st.v_layer.emplace_back(w.rows, w.cols);
  }
  st.m_alpha.assign(params.alpha.size(), 0.0);
  st.v_alpha.assign(params.alpha.size(), 0.0);
  st.m_fcn = Matrix(params.fcn_weights.rows, params.fcn_weights.cols);
  st.v_fcn = Matrix(params.fcn_weights.rows, params.fcn_weights.cols);
  st.m_bias.assign(params.fcn_bias.size(), 0.0);
  st.v_bias.assign(params.fcn_bias.size(), 0.0);
  return st;
}

double loss(const Matrix &probs, const std::vector<int> &labels, LossKind kind,
            double smooth_l1_weight) {
  check_labels(probs.rows, labels, probs.cols);
  const double inv_s = 1.0 / static_cast<double>(probs.rows);
  double ce = 0.0;
  for (std::size_t s = 0; s < probs.rows; ++s)
    ce -= std::log(std::max(probs(s, static_cast<std::size_t>(labels[s])), kProbFloor));
  double total = ce * inv_s;
  if (kind == LossKind::kCrossEntropyPlusSmoothL1) {
    double sl1 = 0.0;
    for (std::size_t s = 0; s < probs.rows; ++s)
      for (std::size_t c = 0; c < probs.cols; ++c) {
        const double onehot = static_cast<std::size_t>(labels[s]) == c ? 1.0 : 0.0;
        sl1 += huber(onehot - probs(s, c));
      }
    total += smooth_l1_weight * sl1 * inv_s;
  }
  return total;
}

Gradients backward(const ForwardTrace &trace, const ModelParams &params,
                   const std::vector<int> &labels, LossKind kind,
                   double smooth_l1_weight) {
  const std::size_t n_subjects = trace.probs.rows;
  const std::size_t classes = trace.probs.cols;
  check_labels(n_subjects, labels, classes);
  if (classes > 8)
    throw ShapeError("backward: supports at most 8 classes");

  const std::size_t n_nodes = trace.pooled.d0;
  const std::size_t d_out = trace.pooled.d1;
  const std::size_t n_modalities = trace.input.d2;
  const std::size_t flat_len = n_nodes * d_out;
  const double inv_s = 1.0 / static_cast<double>(n_subjects);

  Gradients g;
  g.alpha.assign(params.alpha.size(), 0.0);
  g.fcn_weights = Matrix(params.fcn_weights.rows, params.fcn_weights.cols);
  g.fcn_bias.assign(params.fcn_bias.size(), 0.0);

  // Softmax head.
  Matrix dlogits(n_subjects, classes);
  for (std::size_t s = 0; s < n_subjects; ++s)
    logit_gradient(&trace.probs.data[s * classes], labels[s], classes, inv_s,
                   kind, smooth_l1_weight, &dlogits.data[s * classes]);

  for (std::size_t c = 0; c < classes; ++c) {
    double *wrow = &g.fcn_weights.data[c * flat_len];
    for (std::size_t s = 0; s < n_subjects; ++s) {
      const double dz = dlogits(s, c);
      const double *fr = &trace.flat.data[s * flat_len];
      for (std::size_t q = 0; q < flat_len; ++q) wrow[q] += dz * fr[q];
      g.fcn_bias[c] += dz;
    }
  }

  // Down to the (dropped) embedding, then through the dropout mask.
  Tensor3 df(n_nodes, d_out, n_subjects);
  for (std::size_t s = 0; s < n_subjects; ++s)
    for (std::size_t q = 0; q < flat_len; ++q) {
      double v = 0.0;
      for (std::size_t c = 0; c < classes; ++c)
        v += dlogits(s, c) * params.fcn_weights(c, q);
      df(q / d_out, q % d_out, s) = v;
    }
  if (!trace.keep_mask.empty()) {
    const double scale = 1.0 / (1.0 - params.dropout_rate);
    for (std::size_t q = 0; q < df.size(); ++q)
      df.data[q] = trace.keep_mask[q] ? df.data[q] * scale : 0.0;
  }

  // Pooling: dH_L(:,:,m,s) = alpha_m * dF(:,:,s); dalpha_m = <dF_s, H_L(m,s)>.
  const Tensor4 &h_last =
      trace.activations.empty() ? trace.input : trace.activations.back();
  for (std::size_t m = 0; m < n_modalities; ++m) {
    double acc = 0.0;
    for (std::size_t s = 0; s < n_subjects; ++s)
      for (std::size_t i = 0; i < n_nodes; ++i)
        for (std::size_t j = 0; j < d_out; ++j)
          acc += df(i, j, s) * h_last(i, j, m, s);
    g.alpha[m] = acc;
  }

  Tensor4 dh(n_nodes, d_out, n_modalities, n_subjects);
  for (std::size_t i = 0; i < n_nodes; ++i)
    for (std::size_t j = 0; j < d_out; ++j)
      for (std::size_t m = 0; m < n_modalities; ++m)
        for (std::size_t s = 0; s < n_subjects; ++s)
          dh(i, j, m, s) = params.alpha[m] * df(i, j, s);

  // GCN layers, last to first. With T = A_hat * dZ (A_hat symmetric):
  // dW^(l) = sum_ms H_ms^T T_ms and dH^(l)_ms = T_ms W^T.
  g.layer_weights.resize(params.layer_count());
  for (std::size_t li = params.layer_count(); li-- > 0;) {
    const Tensor4 &z = trace.preacts[li];
    const Tensor4 &h_in = li == 0 ? trace.input : trace.activations[li - 1];
    const Matrix &w = params.layer_weights[li];

    Tensor4 dz = dh;
    for (std::size_t q = 0; q < dz.size(); ++q)
      if (z.data[q] <= 0.0) dz.data[q] = 0.0;

    Matrix dw(w.rows, w.cols);
    Tensor4 dh_prev(h_in.d0, h_in.d1, h_in.d2, h_in.d3);

    const std::size_t n_slices = dz.d2 * dz.d3;
    std::vector<Matrix> dw_parts(n_slices);
#pragma omp parallel for schedule(static)
    for (std::int64_t sl = 0; sl < static_cast<std::int64_t>(n_slices); ++sl) {
      const std::size_t m = static_cast<std::size_t>(sl) / dz.d3;
      const std::size_t s = static_cast<std::size_t>(sl) % dz.d3;
      const Matrix t = matmul(trace.a_hat, dz.slice(m, s));
      dw_parts[static_cast<std::size_t>(sl)] =
          matmul(transpose(h_in.slice(m, s)), t);
      dh_prev.set_slice(m, s, matmul(t, transpose(w)));
    }
    for (std::size_t sl = 0; sl < n_slices; ++sl)
      for (std::size_t q = 0; q < dw.data.size(); ++q)
        dw.data[q] += dw_parts[sl].data[q];

    g.layer_weights[li] = std::move(dw);
    dh = std::move(dh_prev);
  }
  return g;
}

void adam_step(ModelParams &params, const Gradients &grads, AdamState &state) {
  if (grads.layer_weights.size() != params.layer_weights.size() ||
      grads.alpha.size() != params.alpha.size() ||
      grads.fcn_weights.size() != params.fcn_weights.size() ||
      grads.fcn_bias.size() != params.fcn_bias.size())
    throw ShapeError("adam_step: gradient shapes do not mirror the parameters");

  for (std::size_t l = 0; l < grads.layer_weights.size(); ++l)
    require_finite(grads.layer_weights[l].data, "layer_w" + std::to_string(l));
  require_finite(grads.alpha, "alpha");
  require_finite(grads.fcn_weights.data, "fcn_w");
  require_finite(grads.fcn_bias, "fcn_b");

  state.step += 1;
  const double corr1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double corr2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));

  for (std::size_t l = 0; l < params.layer_weights.size(); ++l)
    adam_update(params.layer_weights[l].data, grads.layer_weights[l].data,
                state.m_layer[l].data, state.v_layer[l].data, state, corr1, corr2);
  adam_update(params.alpha, grads.alpha, state.m_alpha, state.v_alpha, state,
              corr1, corr2);
  adam_update(params.fcn_weights.data, grads.fcn_weights.data, state.m_fcn.data,
              state.v_fcn.data, state, corr1, corr2);
  adam_update(params.fcn_bias, grads.fcn_bias, state.m_bias, state.v_bias, state,
              corr1, corr2);
}

TrainResult train(const Tensor4 &h0, const Matrix &a_hat,
                  const std::vector<int> &labels,
                  const std::vector<std::size_t> &train_idx,
                  const std::vector<std::size_t> &val_idx,
                  const TrainConfig &config) {
  if (train_idx.empty()) throw DataError("train: empty training split");
  if (val_idx.empty()) throw DataError("train: empty validation split");
  if (labels.size() != h0.d3)
    throw ShapeError("train: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(h0.d3) + " subjects");

  if (config.epochs == 0) throw DataError("train: epochs must be >= 1");
  std::size_t batch = config.batch_size;
  if (batch == 0) throw DataError("train: batch size must be >= 1");
  if (batch > train_idx.size()) {
    std::cerr << "warning: batch size " << batch << " exceeds training set size "
              << train_idx.size() << ", clamping\n";
    batch = train_idx.size();
  }

  const bool freeze_alpha = config.freeze_alpha || h0.d2 == 1;

  ModelParams params =
      init_params(h0.d0, h0.d2, config.layers, config.d_out, config.dropout_rate,
                  derive_seed(config.seed, seed_stage::kParamInit));
  AdamState adam = make_adam_state(params, config.lr);

  const Tensor4 train_tensor = select_subjects(h0, train_idx);
  const Tensor4 val_tensor = select_subjects(h0, val_idx);
  const std::vector<int> train_labels = gather_labels(labels, train_idx);
  const std::vector<int> val_labels = gather_labels(labels, val_idx);

  TrainResult result;
  double best_acc = -1.0;

  std::vector<std::size_t> order = train_idx;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(config.seed, seed_stage::kEpochShuffle, epoch));
    order = train_idx;
    shuffle_rng.shuffle(order);

    std::size_t batch_no = 0;
    for (std::size_t start = 0; start < order.size(); start += batch, ++batch_no) {
      const std::size_t end = std::min(start + batch, order.size());
      const std::vector<std::size_t> chunk(order.begin() + start,
                                           order.begin() + end);
      const Tensor4 hb = select_subjects(h0, chunk);
      const std::vector<int> yb = gather_labels(labels, chunk);
      const ForwardTrace t =
          forward(hb, a_hat, params, RunMode::kTrain,
                  derive_seed(config.seed, seed_stage::kDropout, epoch, batch_no));
      Gradients grads = backward(t, params, yb, config.loss,
                                 config.smooth_l1_weight);
      if (freeze_alpha) std::fill(grads.alpha.begin(), grads.alpha.end(), 0.0);
      adam_step(params, grads, adam);
    }

    const SplitMetrics tm = eval_split(train_tensor, train_labels, a_hat, params,
                                       config.loss, config.smooth_l1_weight);
    const SplitMetrics vm = eval_split(val_tensor, val_labels, a_hat, params,
                                       config.loss, config.smooth_l1_weight);
    result.log.push_back({epoch + 1, tm.loss, tm.acc, vm.loss, vm.acc});
    if (vm.acc > best_acc) {
      best_acc = vm.acc;
      result.params = params;
      result.best_epoch = epoch + 1;
    }
  }
  return result;
}

std::string loss_kind_name(LossKind kind) {
  return kind == LossKind::kCrossEntropy ? "cross_entropy"
                                         : "cross_entropy_plus_smooth_l1";
}

LossKind loss_kind_from_name(const std::string &name) {
  if (name == "cross_entropy") return LossKind::kCrossEntropy;
  if (name == "cross_entropy_plus_smooth_l1")
    return LossKind::kCrossEntropyPlusSmoothL1;
  throw DataError("unknown loss kind: " + name);
}

}  // namespace mgnet
