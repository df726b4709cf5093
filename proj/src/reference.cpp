#include "mgnet/reference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "mgnet/error.hpp"

namespace mgnet::ref {

Matrix matmul(const Matrix &a, const Matrix &b) {
  if (a.cols != b.rows) throw ShapeError("ref::matmul: inner dims differ");
  Matrix c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < b.cols; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols; ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

Tensor4 mode_n_product(const Tensor4 &t, const Matrix &m, int mode) {
  if (mode < 0 || mode > 2) throw ShapeError("ref::mode_n_product: bad mode");
  if (m.cols != t.dim(mode)) throw ShapeError("ref::mode_n_product: dims differ");
  std::array<std::size_t, 4> od = t.dims();
  od[static_cast<std::size_t>(mode)] = m.rows;
  Tensor4 out(od[0], od[1], od[2], od[3]);
  for (std::size_t i = 0; i < od[0]; ++i)
    for (std::size_t j = 0; j < od[1]; ++j)
      for (std::size_t a = 0; a < od[2]; ++a)
        for (std::size_t b = 0; b < od[3]; ++b) {
          double s = 0.0;
          for (std::size_t k = 0; k < t.dim(mode); ++k) {
            switch (mode) {
              case 0: s += m(i, k) * t(k, j, a, b); break;
              case 1: s += m(j, k) * t(i, k, a, b); break;
              default: s += m(a, k) * t(i, j, k, b); break;
            }
          }
          out(i, j, a, b) = s;
        }
  return out;
}

Tensor4 gcn_layer(const Tensor4 &h, const Matrix &a_hat, const Matrix &w) {
  if (a_hat.cols != h.d0 || w.rows != h.d1)
    throw ShapeError("ref::gcn_layer: dims differ");
  Tensor4 out(a_hat.rows, w.cols, h.d2, h.d3);
  for (std::size_t m = 0; m < h.d2; ++m)
    for (std::size_t s = 0; s < h.d3; ++s) {
      Matrix z = ref::matmul(ref::matmul(a_hat, h.slice(m, s)), w);
      for (double &x : z.data) x = std::max(0.0, x);
      out.set_slice(m, s, z);
    }
  return out;
}

Tensor3 modality_pool(const Tensor4 &h_last, const std::vector<double> &alpha) {
  if (alpha.size() != h_last.d2)
    throw ShapeError("ref::modality_pool: alpha length differs from modality count");
  Tensor3 f(h_last.d0, h_last.d1, h_last.d3);
  for (std::size_t s = 0; s < h_last.d3; ++s)
    for (std::size_t m = 0; m < h_last.d2; ++m)
      for (std::size_t i = 0; i < h_last.d0; ++i)
        for (std::size_t j = 0; j < h_last.d1; ++j)
          f(i, j, s) += alpha[m] * h_last(i, j, m, s);
  return f;
}

Matrix knn_adjacency(const Matrix &u, std::size_t k, double sigma) {
  const std::size_t n = u.rows;
  if (k < 1 || k > n - 1) throw ShapeError("ref::knn_adjacency: k out of range");
  if (sigma <= 0.0) throw ShapeError("ref::knn_adjacency: sigma must be positive");

  Matrix d2(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t q = 0; q < u.cols; ++q) {
        const double d = u(i, q) - u(j, q);
        s += d * d;
      }
      d2(i, j) = s;
    }

  std::vector<std::vector<bool>> neighbor(n, std::vector<bool>(n, false));
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> others;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) others.push_back(j);
    std::sort(others.begin(), others.end(), [&](std::size_t a, std::size_t b) {
      if (d2(i, a) != d2(i, b)) return d2(i, a) < d2(i, b);
      return a < b;
    });
    for (std::size_t q = 0; q < k; ++q) neighbor[i][others[q]] = true;
  }

  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      if (neighbor[i][j] || neighbor[j][i])
        a(i, j) = std::exp(-d2(i, j) / (2.0 * sigma * sigma));
    }
  return a;
}

double auc_pairwise(const std::vector<double> &scores, const std::vector<int> &labels) {
  if (scores.size() != labels.size())
    throw ShapeError("ref::auc_pairwise: length mismatch");
  std::size_t n_pos = 0, n_neg = 0;
  for (int y : labels) (y == 1 ? n_pos : n_neg) += 1;
  if (n_pos == 0 || n_neg == 0)
    throw DataError("ref::auc_pairwise: both classes must be present");
  double u = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      if (scores[i] > scores[j])
        u += 1.0;
      else if (scores[i] == scores[j])
        u += 0.5;
    }
  }
  return 100.0 * u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

}  // namespace mgnet::ref
