#pragma once

#include <cstddef>
#include <vector>

#include "mgnet/tensor.hpp"

namespace mgnet::ref {

// Serial reference implementations, written as plain textbook loops and kept
// deliberately independent of the kernels in mgnet. The tests compare the two
// paths element-wise and the bench target times them against each other.

Matrix matmul(const Matrix &a, const Matrix &b);

Tensor4 mode_n_product(const Tensor4 &t, const Matrix &m, int mode);

// Per-(modality, subject) propagation sigma(A_hat * H_ms * W), one slice at a
// time.
Tensor4 gcn_layer(const Tensor4 &h, const Matrix &a_hat, const Matrix &w);

// F(:,:,s) = sum_m alpha[m] * H(:,:,m,s) as an explicit scalar loop.
Tensor3 modality_pool(const Tensor4 &h_last, const std::vector<double> &alpha);

// Brute-force KNN + Gaussian kernel; sigma must be explicit here.
Matrix knn_adjacency(const Matrix &u, std::size_t k, double sigma);

// All-pairs Mann-Whitney enumeration, in percent.
double auc_pairwise(const std::vector<double> &scores, const std::vector<int> &labels);

}  // namespace mgnet::ref
