#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace mgnet {

// Dense row-major matrix. All numerics in this project are double precision;
// the gradient checks run at 1e-5 tolerance which single precision cannot hold.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double &operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  std::size_t size() const { return rows * cols; }

  static Matrix identity(std::size_t n);
};

// Dense 4-way array, row-major over (d0, d1, d2, d3).
// Cohort data is (node, node, modality, subject); the feature tensors flowing
// through the network are (node, feature, modality, subject).
struct Tensor4 {
  std::size_t d0 = 0, d1 = 0, d2 = 0, d3 = 0;
  std::vector<double> data;

  Tensor4() = default;
  Tensor4(std::size_t a, std::size_t b, std::size_t c, std::size_t d)
      : d0(a), d1(b), d2(c), d3(d), data(a * b * c * d, 0.0) {}

  double &operator()(std::size_t i, std::size_t j, std::size_t m, std::size_t s) {
    return data[((i * d1 + j) * d2 + m) * d3 + s];
  }
  double operator()(std::size_t i, std::size_t j, std::size_t m, std::size_t s) const {
    return data[((i * d1 + j) * d2 + m) * d3 + s];
  }

  std::size_t dim(int mode) const;
  std::array<std::size_t, 4> dims() const { return {d0, d1, d2, d3}; }
  std::size_t size() const { return d0 * d1 * d2 * d3; }

  Matrix slice(std::size_t m, std::size_t s) const;  // copy of (:,:,m,s)
  void set_slice(std::size_t m, std::size_t s, const Matrix &v);
};

// 3-way array (node, feature, subject); holds pooled per-subject embeddings.
struct Tensor3 {
  std::size_t d0 = 0, d1 = 0, d2 = 0;
  std::vector<double> data;

  Tensor3() = default;
  Tensor3(std::size_t a, std::size_t b, std::size_t c)
      : d0(a), d1(b), d2(c), data(a * b * c, 0.0) {}

  double &operator()(std::size_t i, std::size_t j, std::size_t s) {
    return data[(i * d1 + j) * d2 + s];
  }
  double operator()(std::size_t i, std::size_t j, std::size_t s) const {
    return data[(i * d1 + j) * d2 + s];
  }

  std::size_t size() const { return d0 * d1 * d2; }

  Matrix slice(std::size_t s) const;  // copy of (:,:,s)
};

// ---- mode products and unfoldings ----

// result(.., i, ..) = sum_k m(i, k) * t(.., k, ..) contracted along `mode`,
// mode in {0, 1, 2}. Per slice: mode 0 is M * X, mode 1 is X * M^T.
Tensor4 mode_n_product(const Tensor4 &t, const Matrix &m, int mode);

// Mode-n fibers become rows; columns run over the remaining modes in
// ascending order. The convention is fixed so serialized intermediates are
// comparable across runs. mode in {0, 1, 2, 3}.
Matrix unfold(const Tensor4 &t, int mode);
Tensor4 refold(const Matrix &m, int mode, const std::array<std::size_t, 4> &dims);

// ---- symmetric eigendecomposition ----

struct SymEig {
  std::vector<double> eigenvalues;  // descending
  Matrix eigenvectors;              // columns, orthonormal
};

// Cyclic Jacobi. Input must be square and symmetric within 1e-10 relative.
SymEig sym_eig(const Matrix &g);

// ---- shared dense helpers ----

Matrix matmul(const Matrix &a, const Matrix &b);
Matrix transpose(const Matrix &m);
Matrix gram(const Matrix &m);  // m * m^T

double frobenius_norm(const Matrix &m);
double frobenius_norm(const Tensor4 &t);

Tensor4 relu(const Tensor4 &t);

bool all_finite(const std::vector<double> &v);

// Subject / modality selection (gathers along modes 3 and 2).
Tensor4 select_subjects(const Tensor4 &t, const std::vector<std::size_t> &idx);
Tensor4 select_modality(const Tensor4 &t, std::size_t m);

}  // namespace mgnet
