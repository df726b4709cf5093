#pragma once

#include <cstddef>
#include <vector>

#include "mgnet/tensor.hpp"

namespace mgnet {

// Orthonormal factor pair from the HOSVD of a cohort tensor. u1 captures the
// node-level relationship (rows are node descriptors), u2 the feature side.
struct ProjectionPair {
  Matrix u1;                             // N x N, orthonormal columns
  Matrix u2;                             // N x N, orthonormal columns
  std::vector<double> singular_values;   // mode-0, descending, >= 0
  std::size_t trunc_rank = 0;            // energy rule, see truncated_u1
  double energy_threshold = 1.0;
};

// u1 = eigenvectors of the mode-0 Gram matrix (descending eigenvalues), u2
// likewise for mode 1. Column signs are fixed: a column is negated when its
// largest-magnitude entry (lowest index on ties) is negative. trunc_rank is
// the smallest r with sum_{i<=r} sigma_i^2 / sum sigma_i^2 >= tau.
ProjectionPair solve_projections(const Tensor4 &x, double energy_threshold);

// Full coefficient tensor, C(:,:,m,s) = U1^T X_ms U2, via two mode products.
Tensor4 project(const Tensor4 &x, const ProjectionPair &p);

// Network input H0 = U1^T X (mode-0 product only; the feature-side factor is
// absorbed by the first trainable layer).
Tensor4 project_features(const Tensor4 &x, const Matrix &u1);

// First trunc_rank columns of u1; rows are the node descriptors the KNN graph
// is built from.
Matrix truncated_u1(const ProjectionPair &p);

}  // namespace mgnet
