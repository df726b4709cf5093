#include <doctest.h>

#include <cmath>

#include "mgnet/error.hpp"
#include "mgnet/projection.hpp"
#include "mgnet/reference.hpp"
#include "mgnet/rng.hpp"
#include "test_util.hpp"

using namespace mgnet;
using namespace testutil;

TEST_SUITE_BEGIN("projection");

namespace {

Tensor4 rank_one_cohort(std::size_t n, std::size_t mods, std::size_t subs) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = 1.0 + static_cast<double>(i);
  Tensor4 t(n, n, mods, subs);
  for (std::size_t m = 0; m < mods; ++m)
    for (std::size_t s = 0; s < subs; ++s)
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) t(i, j, m, s) = v[i] * v[j];
  return t;
}

}  // namespace

TEST_CASE("rank-1 cohort has a single nonzero singular value and rank 1") {
  const Tensor4 x = rank_one_cohort(5, 2, 3);
  for (double tau : {0.1, 0.5, 0.95, 1.0}) {
    const ProjectionPair p = solve_projections(x, tau);
    CHECK(p.singular_values[0] > 0.0);
    for (std::size_t i = 1; i < p.singular_values.size(); ++i)
      CHECK(p.singular_values[i] == 0.0);
    CHECK(p.trunc_rank == 1);
    const Matrix u = truncated_u1(p);
    CHECK(u.cols == 1);
    // single column proportional to v, normalized and sign-fixed
    const double ratio = u(1, 0) / u(0, 0);
    CHECK(ratio == doctest::Approx(2.0));
  }
}

TEST_CASE("tau = 1 keeps the full rank of the mode-0 unfolding") {
  Rng rng(20);
  const Tensor4 x = random_cohort_tensor(6, 2, 4, rng);
  const ProjectionPair p = solve_projections(x, 1.0);
  CHECK(p.trunc_rank == 6);
  CHECK(truncated_u1(p).cols == 6);
}

TEST_CASE("full-rank reconstruction C x0 U1 x1 U2 recovers the tensor") {
  Rng rng(21);
  const Tensor4 x = random_tensor(6, 6, 2, 3, rng);
  const ProjectionPair p = solve_projections(x, 1.0);
  const Tensor4 c = project(x, p);
  const Tensor4 back = mode_n_product(mode_n_product(c, p.u1, 0), p.u2, 1);
  CHECK(rel_frobenius_error(back, x) < 1e-8);
}

TEST_CASE("identity factors make project the identity") {
  Rng rng(22);
  const Tensor4 x = random_tensor(4, 4, 2, 2, rng);
  ProjectionPair p;
  p.u1 = Matrix::identity(4);
  p.u2 = Matrix::identity(4);
  p.trunc_rank = 4;
  const Tensor4 c = project(x, p);
  CHECK(max_abs_diff(c, x) == 0.0);
}

TEST_CASE("project equals the per-slice U1^T X U2 loop") {
  Rng rng(23);
  const Tensor4 x = random_tensor(5, 5, 3, 2, rng);
  const ProjectionPair p = solve_projections(x, 0.95);
  const Tensor4 c = project(x, p);
  const Matrix u1t = transpose(p.u1);
  for (std::size_t m = 0; m < x.d2; ++m)
    for (std::size_t s = 0; s < x.d3; ++s) {
      const Matrix expected = ref::matmul(ref::matmul(u1t, x.slice(m, s)), p.u2);
      CHECK(max_abs_diff(c.slice(m, s), expected) < 1e-12);
    }
}

TEST_CASE("project_features equals the mode-0 part of the slice loop") {
  Rng rng(24);
  const Tensor4 x = random_tensor(5, 5, 2, 3, rng);
  const ProjectionPair p = solve_projections(x, 0.95);
  const Tensor4 h0 = project_features(x, p.u1);
  const Matrix u1t = transpose(p.u1);
  for (std::size_t m = 0; m < x.d2; ++m)
    for (std::size_t s = 0; s < x.d3; ++s)
      CHECK(max_abs_diff(h0.slice(m, s),
                         ref::matmul(u1t, x.slice(m, s))) < 1e-12);
}

TEST_CASE("trunc_rank satisfies the energy rule minimally") {
  Rng rng(25);
  for (int trial = 0; trial < 5; ++trial) {
    const Tensor4 x = random_cohort_tensor(7, 2, 3, rng);
    const double tau = 0.7 + 0.05 * trial;
    const ProjectionPair p = solve_projections(x, tau);
    double total = 0.0;
    for (double s : p.singular_values) total += s * s;
    // exhaustive scan: first r whose cumulative energy reaches tau
    double cum = 0.0;
    std::size_t expected = p.singular_values.size();
    for (std::size_t r = 0; r < p.singular_values.size(); ++r) {
      cum += p.singular_values[r] * p.singular_values[r];
      if (cum / total >= tau) {
        expected = r + 1;
        break;
      }
    }
    CHECK(p.trunc_rank == expected);
  }
}

TEST_CASE("factors are orthonormal within 1e-10") {
  Rng rng(26);
  const Tensor4 x = random_tensor(8, 8, 2, 4, rng);
  const ProjectionPair p = solve_projections(x, 0.95);
  CHECK(max_abs_diff(matmul(transpose(p.u1), p.u1), Matrix::identity(8)) < 1e-10);
  CHECK(max_abs_diff(matmul(transpose(p.u2), p.u2), Matrix::identity(8)) < 1e-10);
}

TEST_CASE("truncated reconstruction error is monotone in the rank") {
  Rng rng(27);
  const Tensor4 x = random_cohort_tensor(6, 2, 4, rng);
  const ProjectionPair p = solve_projections(x, 1.0);
  double prev = -1.0;
  for (std::size_t r = 1; r <= 6; ++r) {
    Matrix u1r(6, r), u2r(6, r);
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t j = 0; j < r; ++j) {
        u1r(i, j) = p.u1(i, j);
        u2r(i, j) = p.u2(i, j);
      }
    const Tensor4 c =
        mode_n_product(mode_n_product(x, transpose(u1r), 0), transpose(u2r), 1);
    const Tensor4 back = mode_n_product(mode_n_product(c, u1r, 0), u2r, 1);
    double err = 0.0;
    for (std::size_t q = 0; q < x.data.size(); ++q) {
      const double d = back.data[q] - x.data[q];
      err += d * d;
    }
    err = std::sqrt(err);
    if (prev >= 0.0) CHECK(err <= prev + 1e-10);
    prev = err;
  }
}

TEST_CASE("symmetric slices give matching factors up to sign") {
  Rng rng(28);
  const Tensor4 x = random_cohort_tensor(6, 2, 3, rng);
  const ProjectionPair p = solve_projections(x, 0.95);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j)
      CHECK(std::abs(p.u1(i, j)) ==
            doctest::Approx(std::abs(p.u2(i, j))).epsilon(1e-8));
}

TEST_CASE("identical input bytes produce identical factors") {
  Rng rng(29);
  const Tensor4 x = random_tensor(5, 5, 2, 3, rng);
  const ProjectionPair a = solve_projections(x, 0.9);
  const ProjectionPair b = solve_projections(x, 0.9);
  CHECK(a.u1.data == b.u1.data);
  CHECK(a.u2.data == b.u2.data);
  CHECK(a.singular_values == b.singular_values);
  CHECK(a.trunc_rank == b.trunc_rank);
}

TEST_CASE("sign convention: largest-magnitude entry of each column is positive") {
  Rng rng(30);
  const Tensor4 x = random_tensor(6, 6, 2, 3, rng);
  const ProjectionPair p = solve_projections(x, 0.95);
  for (std::size_t c = 0; c < 6; ++c) {
    double best = 0.0;
    for (std::size_t r = 0; r < 6; ++r)
      if (std::abs(p.u1(r, c)) > std::abs(best)) best = p.u1(r, c);
    CHECK(best > 0.0);
  }
}

TEST_CASE("all-zero tensor is rejected") {
  const Tensor4 x(4, 4, 2, 2);
  CHECK_THROWS_AS(solve_projections(x, 0.95), DataError);
}

TEST_CASE("energy threshold outside (0, 1] is rejected") {
  Rng rng(31);
  const Tensor4 x = random_tensor(4, 4, 1, 2, rng);
  CHECK_THROWS_AS(solve_projections(x, 0.0), DataError);
  CHECK_THROWS_AS(solve_projections(x, 1.5), DataError);
}

TEST_SUITE_END();
