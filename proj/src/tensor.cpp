#include "mgnet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>

#include "mgnet/error.hpp"

namespace mgnet {

namespace {

void check_nonempty(const Tensor4 &t, const char *op) {
  if (t.d0 == 0 || t.d1 == 0 || t.d2 == 0 || t.d3 == 0) {
    throw ShapeError(std::string(op) + ": tensor has a zero dimension (" +
                     std::to_string(t.d0) + "x" + std::to_string(t.d1) + "x" +
                     std::to_string(t.d2) + "x" + std::to_string(t.d3) + ")");
  }
}

}  // namespace

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

std::size_t Tensor4::dim(int mode) const {
  switch (mode) {
    case 0: return d0;
    case 1: return d1;
    case 2: return d2;
    case 3: return d3;
    default:
      throw ShapeError("tensor mode out of range: " + std::to_string(mode));
  }
}

Matrix Tensor4::slice(std::size_t m, std::size_t s) const {
  Matrix out(d0, d1);
  for (std::size_t i = 0; i < d0; ++i)
    for (std::size_t j = 0; j < d1; ++j) out(i, j) = (*this)(i, j, m, s);
  return out;
}

void Tensor4::set_slice(std::size_t m, std::size_t s, const Matrix &v) {
  if (v.rows != d0 || v.cols != d1)
    throw ShapeError("set_slice: matrix is " + std::to_string(v.rows) + "x" +
                     std::to_string(v.cols) + " but slices are " +
                     std::to_string(d0) + "x" + std::to_string(d1));
  for (std::size_t i = 0; i < d0; ++i)
    for (std::size_t j = 0; j < d1; ++j) (*this)(i, j, m, s) = v(i, j);
}

Matrix Tensor3::slice(std::size_t s) const {
  Matrix out(d0, d1);
  for (std::size_t i = 0; i < d0; ++i)
    for (std::size_t j = 0; j < d1; ++j) out(i, j) = (*this)(i, j, s);
  return out;
}

// Every parallel loop below assigns each output element to exactly one
// iteration and accumulates in a fixed serial order inside it, so results are
// bit-identical for any thread count.

Tensor4 mode_n_product(const Tensor4 &t, const Matrix &m, int mode) {
  check_nonempty(t, "mode_n_product");
  if (mode < 0 || mode > 2)
    throw ShapeError("mode_n_product: mode must be 0, 1 or 2, got " +
                     std::to_string(mode));
  if (m.rows == 0 || m.cols == 0)
    throw ShapeError("mode_n_product: matrix has a zero dimension");
  if (m.cols != t.dim(mode))
    throw ShapeError("mode_n_product: matrix has " + std::to_string(m.cols) +
                     " columns but tensor mode " + std::to_string(mode) +
                     " has extent " + std::to_string(t.dim(mode)));

  if (mode == 0) {
    Tensor4 out(m.rows, t.d1, t.d2, t.d3);
    const std::size_t slab = t.d1 * t.d2 * t.d3;
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(m.rows); ++i) {
      double *dst = &out.data[static_cast<std::size_t>(i) * slab];
      for (std::size_t k = 0; k < t.d0; ++k) {
        const double c = m(static_cast<std::size_t>(i), k);
        const double *src = &t.data[k * slab];
        for (std::size_t q = 0; q < slab; ++q) dst[q] += c * src[q];
      }
    }
    return out;
  }

  if (mode == 1) {
    Tensor4 out(t.d0, m.rows, t.d2, t.d3);
    const std::size_t inner = t.d2 * t.d3;
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(t.d0); ++i) {
      for (std::size_t j = 0; j < m.rows; ++j) {
        double *dst =
            &out.data[(static_cast<std::size_t>(i) * m.rows + j) * inner];
        for (std::size_t k = 0; k < t.d1; ++k) {
          const double c = m(j, k);
          const double *src =
              &t.data[(static_cast<std::size_t>(i) * t.d1 + k) * inner];
          for (std::size_t q = 0; q < inner; ++q) dst[q] += c * src[q];
        }
      }
    }
    return out;
  }

  Tensor4 out(t.d0, t.d1, m.rows, t.d3);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(t.d0); ++i) {
    for (std::size_t j = 0; j < t.d1; ++j) {
      const std::size_t base_out =
          (static_cast<std::size_t>(i) * t.d1 + j) * m.rows;
      const std::size_t base_in =
          (static_cast<std::size_t>(i) * t.d1 + j) * t.d2;
      for (std::size_t a = 0; a < m.rows; ++a) {
        double *dst = &out.data[(base_out + a) * t.d3];
        for (std::size_t k = 0; k < t.d2; ++k) {
          const double c = m(a, k);
          const double *src = &t.data[(base_in + k) * t.d3];
          for (std::size_t b = 0; b < t.d3; ++b) dst[b] += c * src[b];
        }
      }
    }
  }
  return out;
}

Matrix unfold(const Tensor4 &t, int mode) {
  check_nonempty(t, "unfold");
  if (mode < 0 || mode > 3)
    throw ShapeError("unfold: mode must be in 0..3, got " + std::to_string(mode));
  const std::size_t n = t.dim(mode);
  const std::size_t cols = t.size() / n;
  Matrix out(n, cols);
  switch (mode) {
    case 0:
      // Rows are already contiguous slabs.
      std::copy(t.data.begin(), t.data.end(), out.data.begin());
      break;
    case 1:
      for (std::size_t j = 0; j < t.d1; ++j)
        for (std::size_t i = 0; i < t.d0; ++i)
          for (std::size_t m = 0; m < t.d2; ++m)
            for (std::size_t s = 0; s < t.d3; ++s)
              out(j, (i * t.d2 + m) * t.d3 + s) = t(i, j, m, s);
      break;
    case 2:
      for (std::size_t m = 0; m < t.d2; ++m)
        for (std::size_t i = 0; i < t.d0; ++i)
          for (std::size_t j = 0; j < t.d1; ++j)
            for (std::size_t s = 0; s < t.d3; ++s)
              out(m, (i * t.d1 + j) * t.d3 + s) = t(i, j, m, s);
      break;
    case 3:
      for (std::size_t s = 0; s < t.d3; ++s)
        for (std::size_t i = 0; i < t.d0; ++i)
          for (std::size_t j = 0; j < t.d1; ++j)
            for (std::size_t m = 0; m < t.d2; ++m)
              out(s, (i * t.d1 + j) * t.d2 + m) = t(i, j, m, s);
      break;
  }
  return out;
}

Tensor4 refold(const Matrix &m, int mode, const std::array<std::size_t, 4> &dims) {
  Tensor4 t(dims[0], dims[1], dims[2], dims[3]);
  check_nonempty(t, "refold");
  if (mode < 0 || mode > 3)
    throw ShapeError("refold: mode must be in 0..3, got " + std::to_string(mode));
  const std::size_t n = t.dim(mode);
  if (m.rows != n || m.cols != t.size() / n)
    throw ShapeError("refold: matrix " + std::to_string(m.rows) + "x" +
                     std::to_string(m.cols) + " does not match mode-" +
                     std::to_string(mode) + " unfolding of the target dims");
  switch (mode) {
    case 0:
      std::copy(m.data.begin(), m.data.end(), t.data.begin());
      break;
    case 1:
      for (std::size_t j = 0; j < t.d1; ++j)
        for (std::size_t i = 0; i < t.d0; ++i)
          for (std::size_t mm = 0; mm < t.d2; ++mm)
            for (std::size_t s = 0; s < t.d3; ++s)
              t(i, j, mm, s) = m(j, (i * t.d2 + mm) * t.d3 + s);
      break;
    case 2:
      for (std::size_t mm = 0; mm < t.d2; ++mm)
        for (std::size_t i = 0; i < t.d0; ++i)
          for (std::size_t j = 0; j < t.d1; ++j)
            for (std::size_t s = 0; s < t.d3; ++s)
              t(i, j, mm, s) = m(mm, (i * t.d1 + j) * t.d3 + s);
      break;
    case 3:
      for (std::size_t s = 0; s < t.d3; ++s)
        for (std::size_t i = 0; i < t.d0; ++i)
          for (std::size_t j = 0; j < t.d1; ++j)
            for (std::size_t mm = 0; mm < t.d2; ++mm)
              t(i, j, mm, s) = m(s, (i * t.d1 + j) * t.d2 + mm);
      break;
  }
  return t;
}

SymEig sym_eig(const Matrix &g) {
  if (g.rows != g.cols)
    throw ShapeError("sym_eig: matrix is " + std::to_string(g.rows) + "x" +
                     std::to_string(g.cols) + ", expected square");
  if (g.rows == 0) throw ShapeError("sym_eig: empty matrix");
  const std::size_t n = g.rows;

  double scale = 0.0, asym = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      scale = std::max(scale, std::abs(g(i, j)));
      asym = std::max(asym, std::abs(g(i, j) - g(j, i)));
    }
  if (asym > 1e-10 * std::max(1.0, scale))
    throw ShapeError("sym_eig: input is not symmetric (max asymmetry " +
                     std::to_string(asym) + ")");

  Matrix a = g;
  Matrix v = Matrix::identity(n);

  auto off_norm = [&]() {
    double s = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) s += a(p, q) * a(p, q);
    return std::sqrt(2.0 * s);
  };

  const double tol = 1e-14 * std::max(1.0, frobenius_norm(g));
  for (int sweep = 0; sweep < 64 && off_norm() > tol; ++sweep) {
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        const double tau = s / (1.0 + c);

        const double app = a(p, p), aqq = a(q, q);
        a(p, p) = app - t * apq;
        a(q, q) = aqq + t * apq;
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
          if (r == p || r == q) continue;
          const double arp = a(r, p), arq = a(r, q);
          a(r, p) = arp - s * (arq + tau * arp);
          a(p, r) = a(r, p);
          a(r, q) = arq + s * (arp - tau * arq);
          a(q, r) = a(r, q);
        }
        for (std::size_t r = 0; r < n; ++r) {
          const double vrp = v(r, p), vrq = v(r, q);
          v(r, p) = vrp - s * (vrq + tau * vrp);
          v(r, q) = vrq + s * (vrp - tau * vrq);
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });

  SymEig out;
  out.eigenvalues.resize(n);
  out.eigenvectors = Matrix(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    out.eigenvalues[k] = a(order[k], order[k]);
    for (std::size_t r = 0; r < n; ++r) out.eigenvectors(r, k) = v(r, order[k]);
  }
  return out;
}

Matrix matmul(const Matrix &a, const Matrix &b) {
  if (a.cols != b.rows)
    throw ShapeError("matmul: " + std::to_string(a.rows) + "x" +
                     std::to_string(a.cols) + " times " + std::to_string(b.rows) +
                     "x" + std::to_string(b.cols));
  Matrix c(a.rows, b.cols);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(a.rows); ++i) {
    double *crow = &c.data[static_cast<std::size_t>(i) * b.cols];
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = a(static_cast<std::size_t>(i), k);
      const double *brow = &b.data[k * b.cols];
      for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

Matrix transpose(const Matrix &m) {
  Matrix t(m.cols, m.rows);
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j) t(j, i) = m(i, j);
  return t;
}

Matrix gram(const Matrix &m) {
  Matrix g(m.rows, m.rows);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(m.rows); ++i) {
    for (std::size_t j = 0; j <= static_cast<std::size_t>(i); ++j) {
      double s = 0.0;
      const double *ri = &m.data[static_cast<std::size_t>(i) * m.cols];
      const double *rj = &m.data[j * m.cols];
      for (std::size_t q = 0; q < m.cols; ++q) s += ri[q] * rj[q];
      g(static_cast<std::size_t>(i), j) = s;
      g(j, static_cast<std::size_t>(i)) = s;
    }
  }
  return g;
}

double frobenius_norm(const Matrix &m) {
  double s = 0.0;
  for (double x : m.data) s += x * x;
  return std::sqrt(s);
}

double frobenius_norm(const Tensor4 &t) {
  double s = 0.0;
  for (double x : t.data) s += x * x;
  return std::sqrt(s);
}

Tensor4 relu(const Tensor4 &t) {
  Tensor4 out = t;
#pragma omp parallel for schedule(static)
  for (std::int64_t q = 0; q < static_cast<std::int64_t>(out.data.size()); ++q)
    out.data[static_cast<std::size_t>(q)] =
        std::max(0.0, out.data[static_cast<std::size_t>(q)]);
  return out;
}

bool all_finite(const std::vector<double> &v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

Tensor4 select_subjects(const Tensor4 &t, const std::vector<std::size_t> &idx) {
  check_nonempty(t, "select_subjects");
  if (idx.empty()) throw ShapeError("select_subjects: empty index list");
  for (std::size_t s : idx)
    if (s >= t.d3)
      throw ShapeError("select_subjects: index " + std::to_string(s) +
                       " out of range (subjects: " + std::to_string(t.d3) + ")");
  Tensor4 out(t.d0, t.d1, t.d2, idx.size());
  const std::size_t rows = t.d0 * t.d1 * t.d2;
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < static_cast<std::int64_t>(rows); ++r) {
    const double *src = &t.data[static_cast<std::size_t>(r) * t.d3];
    double *dst = &out.data[static_cast<std::size_t>(r) * idx.size()];
    for (std::size_t b = 0; b < idx.size(); ++b) dst[b] = src[idx[b]];
  }
  return out;
}

Tensor4 select_modality(const Tensor4 &t, std::size_t m) {
  check_nonempty(t, "select_modality");
  if (m >= t.d2)
    throw ShapeError("select_modality: index " + std::to_string(m) +
                     " out of range (modalities: " + std::to_string(t.d2) + ")");
  Tensor4 out(t.d0, t.d1, 1, t.d3);
  for (std::size_t i = 0; i < t.d0; ++i)
    for (std::size_t j = 0; j < t.d1; ++j)
      for (std::size_t s = 0; s < t.d3; ++s) out(i, j, 0, s) = t(i, j, m, s);
  return out;
}

}  // namespace mgnet
