#pragma once

#include <cstddef>
#include <optional>

#include "mgnet/tensor.hpp"

namespace mgnet {

// Shared node graph used by every GCN layer across modalities and subjects.
struct PopulationGraph {
  Matrix adjacency;    // A: symmetric, zero diagonal, entries in [0, 1]
  Matrix normalized;   // A_hat = D^{-1/2} (A + I) D^{-1/2}
  std::size_t k_neighbors = 0;
  double kernel_width = 0.0;
};

// Median of the N(N-1)/2 pairwise Euclidean distances between rows of u.
double median_pairwise_distance(const Matrix &u);

// a_ij = exp(-|u_i - u_j|^2 / 2 sigma^2) when i != j and j is among the k
// nearest of i or vice versa (union rule), else 0. Distance ties break toward
// the lower node index. sigma defaults to the median pairwise distance.
Matrix knn_adjacency(const Matrix &u, std::size_t k,
                     std::optional<double> sigma = std::nullopt);

// A_hat = D^{-1/2} (A + I) D^{-1/2} with d_ii the row sums of A + I.
Matrix normalize_adjacency(const Matrix &a);

PopulationGraph build_population_graph(const Matrix &u, std::size_t k,
                                       std::optional<double> sigma = std::nullopt);

}  // namespace mgnet
