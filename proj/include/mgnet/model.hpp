#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "mgnet/tensor.hpp"

namespace mgnet {

// Trainable state of the multiplex GCN: per-layer weights, modality pooling
// weights, and the fully connected softmax head.
struct ModelParams {
  std::vector<Matrix> layer_weights;  // W^(l): D_l x D_{l+1}, D_0 = N
  std::vector<double> alpha;          // one pooling weight per modality
  Matrix fcn_weights;                 // n_classes x (N * D_out)
  std::vector<double> fcn_bias;       // n_classes
  double dropout_rate = 0.0;

  std::size_t layer_count() const { return layer_weights.size(); }
  std::size_t d_out() const {
    return layer_weights.empty() ? 0 : layer_weights.back().cols;
  }
};

// Glorot-uniform weights, alpha = 1/M, zero biases. Hidden widths all equal
// d_out. layers must be 1, 2 or 3; dropout_rate in [0, 0.5].
ModelParams init_params(std::size_t n_nodes, std::size_t n_modalities,
                        std::size_t layers, std::size_t d_out,
                        double dropout_rate, std::uint64_t seed,
                        std::size_t n_classes = 2);

enum class RunMode { kTrain, kEval };

// Everything the backward pass needs: inputs, pre-activations, activations,
// the pooled embedding before and after dropout, and the head outputs.
struct ForwardTrace {
  Tensor4 input;                     // H^(0) for the processed batch
  Matrix a_hat;                      // adjacency the pass ran with
  std::vector<Tensor4> preacts;      // Z^(l+1) = H^(l) x0 A_hat^T x1 W^T
  std::vector<Tensor4> activations;  // H^(l+1) = relu(Z^(l+1))
  Tensor3 pooled;                    // F before dropout
  Tensor3 embedding;                 // F after dropout (== pooled in eval mode)
  std::vector<std::uint8_t> keep_mask;  // per element of pooled, train mode only
  Matrix flat;                       // S x (N * D_out), row s = vec(embedding_s)
  Matrix logits;                     // S x n_classes
  Matrix probs;                      // S x n_classes, rows sum to 1
};

// relu(h x0 A_hat^T x1 W^T); slice-by-slice this is relu(A_hat * H_ms * W).
Tensor4 gcn_layer(const Tensor4 &h, const Matrix &a_hat, const Matrix &w);
Tensor4 gcn_layer_preact(const Tensor4 &h, const Matrix &a_hat, const Matrix &w);

// F(:,:,s) = sum_m alpha[m] * H(:,:,m,s), realized as a mode-2 contraction.
Tensor3 modality_pool(const Tensor4 &h_last, const std::vector<double> &alpha);

// Numerically stable softmax head for one flattened embedding.
std::vector<double> fcn_softmax(const std::vector<double> &flat,
                                const Matrix &weights,
                                const std::vector<double> &bias);

// Full pass: L gcn layers, modality pooling, dropout on the pooled embedding
// (train mode, inverted scaling), flatten, softmax head. Eval mode is
// deterministic and ignores the seed.
ForwardTrace forward(const Tensor4 &h0, const Matrix &a_hat,
                     const ModelParams &params, RunMode mode,
                     std::uint64_t rng_seed);

}  // namespace mgnet
