#include "mgnet/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mgnet/error.hpp"
#include "mgnet/rng.hpp"

namespace mgnet {

namespace {

Matrix glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng &rng) {
  Matrix w(fan_in, fan_out);
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double &x : w.data) x = rng.uniform(-a, a);
  return w;
}

void check_forward_shapes(const Tensor4 &h0, const Matrix &a_hat,
                          const ModelParams &params) {
  if (a_hat.rows != a_hat.cols || a_hat.rows != h0.d0)
    throw ShapeError("forward: adjacency is " + std::to_string(a_hat.rows) + "x" +
                     std::to_string(a_hat.cols) + " but tensor has " +
                     std::to_string(h0.d0) + " nodes");
  std::size_t width = h0.d1;
  for (std::size_t l = 0; l < params.layer_count(); ++l) {
    const Matrix &w = params.layer_weights[l];
    if (w.rows != width)
      throw ShapeError("forward: layer " + std::to_string(l) + " expects width " +
                       std::to_string(w.rows) + " but receives " +
                       std::to_string(width));
    width = w.cols;
  }
  const std::size_t flat_len = h0.d0 * width;
  if (params.fcn_weights.cols != flat_len)
    throw ShapeError("forward: fcn expects " +
                     std::to_string(params.fcn_weights.cols) +
                     " inputs but the pooled embedding flattens to " +
                     std::to_string(flat_len));
  if (params.fcn_bias.size() != params.fcn_weights.rows)
    throw ShapeError("forward: fcn bias length " +
                     std::to_string(params.fcn_bias.size()) +
                     " does not match class count " +
                     std::to_string(params.fcn_weights.rows));
  if (params.alpha.size() != h0.d2)
    throw ShapeError("forward: alpha has " + std::to_string(params.alpha.size()) +
                     " entries but tensor has " + std::to_string(h0.d2) +
                     " modalities");
}

}  // namespace

ModelParams init_params(std::size_t n_nodes, std::size_t n_modalities,
                        std::size_t layers, std::size_t d_out,
                        double dropout_rate, std::uint64_t seed,
                        std::size_t n_classes) {
  if (layers < 1 || layers > 3)
    throw DataError("init_params: layer count must be 1, 2 or 3, got " +
                    std::to_string(layers));
  if (dropout_rate < 0.0 || dropout_rate > 0.5)
    throw DataError("init_params: dropout rate must be in [0, 0.5], got " +
                    std::to_string(dropout_rate));
  if (n_nodes == 0 || n_modalities == 0 || d_out == 0 || n_classes < 2)
    throw DataError("init_params: zero-sized model");

  Rng rng(seed);
  ModelParams p;
  std::size_t width = n_nodes;
  for (std::size_t l = 0; l < layers; ++l) {
    p.layer_weights.push_back(glorot_uniform(width, d_out, rng));
    width = d_out;
  }
  p.alpha.assign(n_modalities, 1.0 / static_cast<double>(n_modalities));
  p.fcn_weights = transpose(glorot_uniform(n_nodes * d_out, n_classes, rng));
  p.fcn_bias.assign(n_classes, 0.0);
  p.dropout_rate = dropout_rate;
  return p;
}

Tensor4 gcn_layer_preact(const Tensor4 &h, const Matrix &a_hat, const Matrix &w) {
  return mode_n_product(mode_n_product(h, transpose(a_hat), 0), transpose(w), 1);
}

Tensor4 gcn_layer(const Tensor4 &h, const Matrix &a_hat, const Matrix &w) {
  return relu(gcn_layer_preact(h, a_hat, w));
}

Tensor3 modality_pool(const Tensor4 &h_last, const std::vector<double> &alpha) {
  if (alpha.size() != h_last.d2)
    throw ShapeError("modality_pool: alpha has " + std::to_string(alpha.size()) +
                     " entries but tensor has " + std::to_string(h_last.d2) +
                     " modalities");
  Matrix arow(1, alpha.size());
  for (std::size_t m = 0; m < alpha.size(); ++m) arow(0, m) = alpha[m];
  const Tensor4 contracted = mode_n_product(h_last, arow, 2);
  Tensor3 f(h_last.d0, h_last.d1, h_last.d3);
  for (std::size_t i = 0; i < f.d0; ++i)
    for (std::size_t j = 0; j < f.d1; ++j)
      for (std::size_t s = 0; s < f.d2; ++s) f(i, j, s) = contracted(i, j, 0, s);
  return f;
}

std::vector<double> fcn_softmax(const std::vector<double> &flat,
                                const Matrix &weights,
                                const std::vector<double> &bias) {
  if (weights.cols != flat.size() || bias.size() != weights.rows)
    throw ShapeError("fcn_softmax: weight shape " + std::to_string(weights.rows) +
                     "x" + std::to_string(weights.cols) +
                     " does not match input length " +
                     std::to_string(flat.size()));
  const std::size_t classes = weights.rows;
  std::vector<double> z(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    double s = bias[c];
    const double *wr = &weights.data[c * weights.cols];
    for (std::size_t q = 0; q < flat.size(); ++q) s += wr[q] * flat[q];
    z[c] = s;
  }
  const double zmax = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (double &x : z) {
    x = std::exp(x - zmax);
    total += x;
  }
  for (double &x : z) x /= total;
  return z;
}

ForwardTrace forward(const Tensor4 &h0, const Matrix &a_hat,
                     const ModelParams &params, RunMode mode,
                     std::uint64_t rng_seed) {
  check_forward_shapes(h0, a_hat, params);

  ForwardTrace t;
  t.input = h0;
  t.a_hat = a_hat;
  const Tensor4 *cur = &t.input;
  for (std::size_t l = 0; l < params.layer_count(); ++l) {
    t.preacts.push_back(gcn_layer_preact(*cur, a_hat, params.layer_weights[l]));
    t.activations.push_back(relu(t.preacts.back()));
    cur = &t.activations.back();
  }

  t.pooled = modality_pool(*cur, params.alpha);

  if (mode == RunMode::kTrain && params.dropout_rate > 0.0) {
    Rng rng(rng_seed);
    const double keep = 1.0 - params.dropout_rate;
    const double scale = 1.0 / keep;
    t.keep_mask.resize(t.pooled.size());
    t.embedding = t.pooled;
    for (std::size_t q = 0; q < t.pooled.size(); ++q) {
      const bool keep_it = rng.uniform() < keep;
      t.keep_mask[q] = keep_it ? 1 : 0;
      t.embedding.data[q] = keep_it ? t.pooled.data[q] * scale : 0.0;
    }
  } else {
    t.embedding = t.pooled;
  }

  const std::size_t n_subjects = h0.d3;
  const std::size_t flat_len = t.embedding.d0 * t.embedding.d1;
  t.flat = Matrix(n_subjects, flat_len);
  for (std::size_t s = 0; s < n_subjects; ++s)
    for (std::size_t i = 0; i < t.embedding.d0; ++i)
      for (std::size_t j = 0; j < t.embedding.d1; ++j)
        t.flat(s, i * t.embedding.d1 + j) = t.embedding(i, j, s);

  const std::size_t classes = params.fcn_weights.rows;
  t.logits = Matrix(n_subjects, classes);
  t.probs = Matrix(n_subjects, classes);
  for (std::size_t s = 0; s < n_subjects; ++s) {
    for (std::size_t c = 0; c < classes; ++c) {
      double z = params.fcn_bias[c];
      const double *wr = &params.fcn_weights.data[c * flat_len];
      const double *fr = &t.flat.data[s * flat_len];
      for (std::size_t q = 0; q < flat_len; ++q) z += wr[q] * fr[q];
      t.logits(s, c) = z;
    }
    double zmax = t.logits(s, 0);
    for (std::size_t c = 1; c < classes; ++c) zmax = std::max(zmax, t.logits(s, c));
    double total = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      t.probs(s, c) = std::exp(t.logits(s, c) - zmax);
      total += t.probs(s, c);
    }
    for (std::size_t c = 0; c < classes; ++c) t.probs(s, c) /= total;
  }
  return t;
}

}  // namespace mgnet
