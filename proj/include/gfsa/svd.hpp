#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "gfsa/matrix.hpp"

namespace gfsa {

// Thin SVD, singular values sorted ascending (spectra are read low
// frequency first throughout this project). u is rows x r, vt is r x cols,
// r = min(rows, cols).
struct SvdResult {
  DenseMatrix u;
  std::vector<double> sigma;
  DenseMatrix vt;

  DenseMatrix reconstruct() const {
    DenseMatrix scaled = u;
    for (std::size_t i = 0; i < scaled.rows(); ++i)
      for (std::size_t j = 0; j < scaled.cols(); ++j) scaled(i, j) *= sigma[j];
    return matmul(scaled, vt);
  }
};

namespace detail {

// One-sided Jacobi on a tall-or-square matrix: columns are rotated until
// pairwise orthogonal. A pair counts as orthogonal when
// |a_p . a_q| <= 1e-12 * |a_p| * |a_q|, and a full sweep with no rotation
// means convergence. Deterministic pair order, hard cap of 60 sweeps.
inline SvdResult jacobi_svd_tall(const DenseMatrix& input) {
  constexpr double kTol = 1e-12;
  constexpr int kMaxSweeps = 60;
  const std::size_t m = input.rows();
  const std::size_t n = input.cols();

  DenseMatrix a = input;
  DenseMatrix v = DenseMatrix::identity(n);

  // Rotations are norm-preserving, so the Frobenius norm of the start matrix
  // gives a fixed scale for deflation below.
  double fro2 = 0.0;
  for (const double x : a.data()) fro2 += x * x;
  const double col_floor = fro2 * 1e-30;

  int sweep = 0;
  for (; sweep < kMaxSweeps; ++sweep) {
    // Deflate columns whose norm has fallen below 1e-15 of the matrix norm.
    // Such a column is the rounding residue of an exact rank deficiency
    // (rotating two exactly-parallel columns leaves a 1-ulp leftover that is
    // itself parallel, so the relative orthogonality test can never pass);
    // zeroing it is within the documented reconstruction tolerance.
    for (std::size_t j = 0; j < n; ++j) {
      double s2 = 0.0;
      for (std::size_t i = 0; i < m; ++i) s2 += a(i, j) * a(i, j);
      if (s2 != 0.0 && s2 <= col_floor)
        for (std::size_t i = 0; i < m; ++i) a(i, j) = 0.0;
    }
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          const double ap = a(i, p), aq = a(i, q);
          alpha += ap * ap;
          beta += aq * aq;
          gamma += ap * aq;
        }
        if (std::abs(gamma) <= kTol * std::sqrt(alpha * beta)) continue;

        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;

        for (std::size_t i = 0; i < m; ++i) {
          const double ap = a(i, p), aq = a(i, q);
          a(i, p) = c * ap - s * aq;
          a(i, q) = s * ap + c * aq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double vp = v(i, p), vq = v(i, q);
          v(i, p) = c * vp - s * vq;
          v(i, q) = s * vp + c * vq;
        }
        rotated = true;
      }
    }
    if (!rotated) break;
  }
  if (sweep == kMaxSweeps)
    throw std::runtime_error(
        "svd: one-sided Jacobi did not converge after " +
        std::to_string(kMaxSweeps) + " sweeps");

  std::vector<double> norms(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) s += a(i, j) * a(i, j);
    norms[j] = std::sqrt(s);
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return norms[x] < norms[y]; });

  SvdResult res;
  res.sigma.resize(n);
  res.u = DenseMatrix(m, n);
  res.vt = DenseMatrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t src = order[j];
    const double sig = norms[src];
    res.sigma[j] = sig;
    if (sig > 0.0) {
      for (std::size_t i = 0; i < m; ++i) res.u(i, j) = a(i, src) / sig;
    }
    for (std::size_t i = 0; i < n; ++i) res.vt(j, i) = v(i, src);
  }
  return res;
}

}  // namespace detail

inline SvdResult svd(const DenseMatrix& input) {
  constexpr std::size_t kMaxDim = 4096;
  if (std::max(input.rows(), input.cols()) > kMaxDim)
    throw std::invalid_argument("svd: matrix " + input.shape_str() +
                                " exceeds supported size " +
                                std::to_string(kMaxDim));
  if (input.rows() == 0 || input.cols() == 0)
    return SvdResult{DenseMatrix(input.rows(), 0), {}, DenseMatrix(0, input.cols())};

  if (input.rows() >= input.cols()) return detail::jacobi_svd_tall(input);

  // Wide input: factor the transpose and swap the roles of U and V.
  SvdResult t = detail::jacobi_svd_tall(transpose(input));
  SvdResult res;
  res.sigma = std::move(t.sigma);
  res.u = transpose(t.vt);
  res.vt = transpose(t.u);
  return res;
}

inline std::vector<double> singular_values(const DenseMatrix& m) {
  return svd(m).sigma;
}

}  // namespace gfsa
