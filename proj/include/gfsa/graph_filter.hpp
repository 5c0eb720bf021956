#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "gfsa/attention.hpp"
#include "gfsa/matrix.hpp"

namespace gfsa {

// Three-term graph filter H = w0*I + w1*A + wK*(A + (K-1)(A^2 - A)) with
// per-head coefficients and one shared order K. At the default
// initialization (w0=0, w1=1, wK=0) the filter is plain self-attention.
struct GraphFilter {
  std::vector<double> w0;
  std::vector<double> w1;
  std::vector<double> wk;
  int order_k = 1;

  GraphFilter(std::vector<double> w0_, std::vector<double> w1_,
              std::vector<double> wk_, int k)
      : w0(std::move(w0_)), w1(std::move(w1_)), wk(std::move(wk_)), order_k(k) {
    if (order_k < 1)
      throw std::invalid_argument("GraphFilter: order K must be >= 1, got " +
                                  std::to_string(order_k));
    if (w0.size() != w1.size() || w0.size() != wk.size() || w0.empty())
      throw std::invalid_argument("GraphFilter: coefficient vectors must share a "
                                  "nonzero per-head length");
    for (std::size_t h = 0; h < w0.size(); ++h)
      if (!std::isfinite(w0[h]) || !std::isfinite(w1[h]) || !std::isfinite(wk[h]))
        throw std::invalid_argument("GraphFilter: non-finite coefficient at head " +
                                    std::to_string(h));
  }

  // Single-head convenience.
  GraphFilter(double w0_, double w1_, double wk_, int k)
      : GraphFilter(std::vector<double>{w0_}, std::vector<double>{w1_},
                    std::vector<double>{wk_}, k) {}

  static GraphFilter baseline(std::size_t heads, int k) {
    return GraphFilter(std::vector<double>(heads, 0.0),
                       std::vector<double>(heads, 1.0),
                       std::vector<double>(heads, 0.0), k);
  }

  std::size_t heads() const { return w0.size(); }

  void check_head(std::size_t head) const {
    if (head >= heads())
      throw std::invalid_argument("GraphFilter: head " + std::to_string(head) +
                                  " out of range, filter has " +
                                  std::to_string(heads()) + " heads");
  }
};

struct ErrorBoundRecord {
  int k = 0;
  double actual_error = 0.0;  // induced infinity norm of the residual
  double bound = 0.0;         // 2K
};

// A^k by repeated left-to-right multiplication; the brute-force reference
// the Taylor path is judged against.
inline DenseMatrix exact_power(const AttentionMatrix& a, int k) {
  if (k < 1)
    throw std::invalid_argument("exact_power: k must be >= 1, got " +
                                std::to_string(k));
  DenseMatrix result = a.mat();
  for (int i = 1; i < k; ++i) result = matmul(result, a.mat());
  return result;
}

namespace detail {

inline DenseMatrix taylor_power_from_sq(const DenseMatrix& a,
                                        const DenseMatrix& a_sq, int k) {
  // A + (K-1)(A^2 - A); at K=1 the correction is exactly zero and at K=2
  // the result is A^2 up to one rounding of each entry.
  const double km1 = static_cast<double>(k - 1);
  DenseMatrix out = a;
  for (std::size_t i = 0; i < out.size(); ++i)
    out.data()[i] += km1 * (a_sq.data()[i] - a.data()[i]);
  return out;
}

}  // namespace detail

inline DenseMatrix taylor_power(const AttentionMatrix& a, int k) {
  if (k < 1)
    throw std::invalid_argument("taylor_power: k must be >= 1, got " +
                                std::to_string(k));
  if (k == 1) return a.mat();
  const DenseMatrix a_sq = matmul(a.mat(), a.mat());
  return detail::taylor_power_from_sq(a.mat(), a_sq, k);
}

// Measures |A^k - taylor(A, k)| in the induced infinity norm (max absolute
// row sum) and pairs it with the 2K bound. A violated bound means the input
// was not row-substochastic, so it is reported as an error rather than a
// record.
inline ErrorBoundRecord error_ek(const AttentionMatrix& a, int k) {
  if (k < 1)
    throw std::invalid_argument("error_ek: k must be >= 1, got " +
                                std::to_string(k));
  const DenseMatrix exact = exact_power(a, k);
  const DenseMatrix approx = taylor_power(a, k);
  ErrorBoundRecord rec;
  rec.k = k;
  rec.actual_error = linf_norm(sub(exact, approx));
  rec.bound = 2.0 * static_cast<double>(k);
  if (rec.actual_error > rec.bound + 1e-9)
    throw std::runtime_error(
        "error_ek: measured error " + format_double(rec.actual_error) +
        " exceeds bound " + format_double(rec.bound) +
        "; input is not row-substochastic");
  return rec;
}

namespace detail {

inline DenseMatrix build_filter_from_sq(const DenseMatrix& a,
                                        const DenseMatrix& a_sq,
                                        const GraphFilter& f, std::size_t head) {
  const DenseMatrix high = taylor_power_from_sq(a, a_sq, f.order_k);
  // w0*I + w1*A + wK*high, evaluated left to right.
  DenseMatrix h = scale(DenseMatrix::identity(a.rows()), f.w0[head]);
  h = add(h, scale(a, f.w1[head]));
  h = add(h, scale(high, f.wk[head]));
  return h;
}

}  // namespace detail

inline DenseMatrix build_filter(const AttentionMatrix& a, const GraphFilter& f,
                                std::size_t head) {
  f.check_head(head);
  if (f.order_k == 1) {
    // The high-order term collapses to A itself, so skip the square.
    DenseMatrix h = scale(DenseMatrix::identity(a.n()), f.w0[head]);
    h = add(h, scale(a.mat(), f.w1[head]));
    h = add(h, scale(a.mat(), f.wk[head]));
    return h;
  }
  const DenseMatrix a_sq = matmul(a.mat(), a.mat());
  return detail::build_filter_from_sq(a.mat(), a_sq, f, head);
}

// GFSA(X) = H X Wval.
inline DenseMatrix apply_gfsa(const DenseMatrix& x, const AttentionMatrix& a,
                              const GraphFilter& f, std::size_t head,
                              const DenseMatrix& w_val) {
  f.check_head(head);
  if (a.n() != x.rows())
    throw std::invalid_argument("apply_gfsa: attention is " + std::to_string(a.n()) +
                                " tokens but x is " + x.shape_str());
  const DenseMatrix h = build_filter(a, f, head);
  return matmul(matmul(h, x), w_val);
}

}  // namespace gfsa
