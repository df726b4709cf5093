#include "mgnet/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "mgnet/error.hpp"

namespace mgnet {

namespace {

// Squared distances between all row pairs; exact zero diagonal, symmetric by
// construction (each unordered pair computed once).
Matrix pairwise_sq_distances(const Matrix &u) {
  const std::size_t n = u.rows;
  Matrix d2(n, n);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
    for (std::size_t j = static_cast<std::size_t>(i) + 1; j < n; ++j) {
      double s = 0.0;
      const double *ri = &u.data[static_cast<std::size_t>(i) * u.cols];
      const double *rj = &u.data[j * u.cols];
      for (std::size_t q = 0; q < u.cols; ++q) {
        const double d = ri[q] - rj[q];
        s += d * d;
      }
      d2(static_cast<std::size_t>(i), j) = s;
      d2(j, static_cast<std::size_t>(i)) = s;
    }
  }
  return d2;
}

void check_knn_args(const Matrix &u, std::size_t k) {
  if (u.rows < 2 || u.cols < 1)
    throw ShapeError("knn_adjacency: need at least 2 node descriptors with >= 1 "
                     "feature, got " + std::to_string(u.rows) + "x" +
                     std::to_string(u.cols));
  if (k < 1 || k > u.rows - 1)
    throw DataError("knn_adjacency: k must be in [1, " +
                    std::to_string(u.rows - 1) + "], got " + std::to_string(k));
}

}  // namespace

double median_pairwise_distance(const Matrix &u) {
  const Matrix d2 = pairwise_sq_distances(u);
  std::vector<double> d;
  d.reserve(u.rows * (u.rows - 1) / 2);
  for (std::size_t i = 0; i < u.rows; ++i)
    for (std::size_t j = i + 1; j < u.rows; ++j) d.push_back(std::sqrt(d2(i, j)));
  std::sort(d.begin(), d.end());
  const std::size_t m = d.size() / 2;
  return d.size() % 2 == 1 ? d[m] : 0.5 * (d[m - 1] + d[m]);
}

Matrix knn_adjacency(const Matrix &u, std::size_t k, std::optional<double> sigma) {
  check_knn_args(u, k);
  const std::size_t n = u.rows;
  const Matrix d2 = pairwise_sq_distances(u);

  double width = 0.0;
  if (sigma.has_value()) {
    width = *sigma;
    if (!(width > 0.0))
      throw DataError("knn_adjacency: kernel width must be positive, got " +
                      std::to_string(width));
  } else {
    width = median_pairwise_distance(u);
    if (width == 0.0)
      throw DataError("knn_adjacency: median pairwise distance is zero "
                      "(identical node descriptors); pass an explicit kernel "
                      "width");
  }

  // k nearest of each node, ties toward the lower index; self excluded.
  std::vector<std::vector<std::size_t>> nearest(n);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
    std::vector<std::size_t> others;
    others.reserve(n - 1);
    for (std::size_t j = 0; j < n; ++j)
      if (j != static_cast<std::size_t>(i)) others.push_back(j);
    std::sort(others.begin(), others.end(), [&](std::size_t a, std::size_t b) {
      const double da = d2(static_cast<std::size_t>(i), a);
      const double db = d2(static_cast<std::size_t>(i), b);
      if (da != db) return da < db;
      return a < b;
    });
    others.resize(k);
    nearest[static_cast<std::size_t>(i)] = std::move(others);
  }

  Matrix a(n, n);
  const double denom = 2.0 * width * width;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j : nearest[i]) {
      if (a(i, j) != 0.0) continue;  // already linked from the other side
      const double w = std::exp(-d2(i, j) / denom);
      a(i, j) = w;
      a(j, i) = w;
    }
  return a;
}

Matrix normalize_adjacency(const Matrix &a) {
  if (a.rows != a.cols)
    throw ShapeError("normalize_adjacency: matrix is " + std::to_string(a.rows) +
                     "x" + std::to_string(a.cols) + ", expected square");
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = i + 1; j < a.cols; ++j)
      if (a(i, j) != a(j, i))
        throw ShapeError("normalize_adjacency: input is not symmetric at (" +
                         std::to_string(i) + "," + std::to_string(j) + ")");
  for (double x : a.data)
    if (x < 0.0)
      throw DataError("normalize_adjacency: adjacency has a negative entry");

  const std::size_t n = a.rows;
  std::vector<double> inv_sqrt_deg(n);
  for (std::size_t i = 0; i < n; ++i) {
    double d = 1.0;  // self-loop
    for (std::size_t j = 0; j < n; ++j) d += a(i, j);
    inv_sqrt_deg[i] = 1.0 / std::sqrt(d);
  }

  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double tilde = a(i, j) + (i == j ? 1.0 : 0.0);
      out(i, j) = tilde * (inv_sqrt_deg[i] * inv_sqrt_deg[j]);
    }
  return out;
}

PopulationGraph build_population_graph(const Matrix &u, std::size_t k,
                                       std::optional<double> sigma) {
  check_knn_args(u, k);
  PopulationGraph g;
  g.k_neighbors = k;
  if (sigma.has_value()) {
    g.kernel_width = *sigma;
  } else {
    g.kernel_width = median_pairwise_distance(u);
    if (g.kernel_width == 0.0)
      throw DataError("build_population_graph: median pairwise distance is zero "
                      "(identical node descriptors); pass an explicit kernel "
                      "width");
  }
  g.adjacency = knn_adjacency(u, k, g.kernel_width);
  g.normalized = normalize_adjacency(g.adjacency);
  return g;
}

}  // namespace mgnet
