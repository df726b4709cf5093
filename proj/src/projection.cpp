#include "mgnet/projection.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mgnet/error.hpp"

namespace mgnet {

namespace {

// Relative floor under which an eigenvalue of the Gram matrix counts as zero;
// keeps numerically rank-deficient inputs at their true rank.
constexpr double kRankTol = 1e-12;

void fix_column_signs(Matrix &m) {
  for (std::size_t c = 0; c < m.cols; ++c) {
    double best = -1.0;
    std::size_t best_row = 0;
    for (std::size_t r = 0; r < m.rows; ++r) {
      const double a = std::abs(m(r, c));
      if (a > best) {
        best = a;
        best_row = r;
      }
    }
    if (m(best_row, c) < 0.0)
      for (std::size_t r = 0; r < m.rows; ++r) m(r, c) = -m(r, c);
  }
}

Matrix mode_factor(const Tensor4 &x, int mode, std::vector<double> *eigenvalues) {
  SymEig eig = sym_eig(gram(unfold(x, mode)));
  if (eigenvalues) *eigenvalues = eig.eigenvalues;
  fix_column_signs(eig.eigenvectors);
  return eig.eigenvectors;
}

}  // namespace

ProjectionPair solve_projections(const Tensor4 &x, double energy_threshold) {
  if (!(energy_threshold > 0.0 && energy_threshold <= 1.0))
    throw DataError("solve_projections: energy threshold must be in (0, 1], got " +
                    std::to_string(energy_threshold));

  ProjectionPair p;
  p.energy_threshold = energy_threshold;

  std::vector<double> lambda;
  p.u1 = mode_factor(x, 0, &lambda);
  p.u2 = mode_factor(x, 1, nullptr);

  const double lambda_max = lambda.empty() ? 0.0 : std::max(lambda.front(), 0.0);
  if (lambda_max == 0.0)
    throw DataError("solve_projections: tensor is all zero, singular values are "
                    "degenerate and the energy rule is undefined");

  p.singular_values.resize(lambda.size());
  double total = 0.0;
  for (std::size_t i = 0; i < lambda.size(); ++i) {
    double li = lambda[i];
    if (li < kRankTol * lambda_max) li = 0.0;
    p.singular_values[i] = std::sqrt(li);
    total += li;
  }

  double cum = 0.0;
  p.trunc_rank = p.singular_values.size();
  for (std::size_t k = 0; k < p.singular_values.size(); ++k) {
    cum += p.singular_values[k] * p.singular_values[k];
    if (cum / total >= energy_threshold) {
      p.trunc_rank = k + 1;
      break;
    }
  }
  return p;
}

Tensor4 project(const Tensor4 &x, const ProjectionPair &p) {
  return mode_n_product(mode_n_product(x, transpose(p.u1), 0), transpose(p.u2), 1);
}

Tensor4 project_features(const Tensor4 &x, const Matrix &u1) {
  return mode_n_product(x, transpose(u1), 0);
}

Matrix truncated_u1(const ProjectionPair &p) {
  Matrix out(p.u1.rows, p.trunc_rank);
  for (std::size_t i = 0; i < p.u1.rows; ++i)
    for (std::size_t j = 0; j < p.trunc_rank; ++j) out(i, j) = p.u1(i, j);
  return out;
}

}  // namespace mgnet
