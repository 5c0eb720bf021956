#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "gfsa/attention.hpp"
#include "gfsa/graph_filter.hpp"
#include "gfsa/matrix.hpp"
#include "gfsa/svd.hpp"

namespace gfsa {

// Filter response sampled on a set of singular values, low frequencies
// first. layer_index / head_index identify where the report came from when
// a whole model is being scanned.
struct SpectralReport {
  std::vector<double> sigma;
  std::vector<double> response;
  int layer_index = 0;
  int head_index = 0;
};

// Mean pairwise cosine similarity of token features after each step of
// repeated filtering; values live in [-1, 1].
struct SimilarityTrace {
  std::vector<double> per_layer;
};

// Scalar response r(s) = w0 + w1*s + wK*(s + (K-1)(s^2 - s)).
// r(1) = w0 + w1 + wK for every K: the correction vanishes at s = 1.
inline double filter_response_at(const GraphFilter& f, std::size_t head, double s) {
  const double km1 = static_cast<double>(f.order_k - 1);
  return f.w0[head] + f.w1[head] * s + f.wk[head] * (s + km1 * (s * s - s));
}

inline SpectralReport filter_response(const GraphFilter& f, std::size_t head,
                                      const std::vector<double>& sigma,
                                      int layer_index = 0, int head_index = 0) {
  f.check_head(head);
  for (std::size_t i = 0; i < sigma.size(); ++i) {
    if (sigma[i] < 0.0)
      throw std::invalid_argument("filter_response: sigma[" + std::to_string(i) +
                                  "] is negative");
    if (i > 0 && sigma[i] < sigma[i - 1])
      throw std::invalid_argument("filter_response: sigma must be ascending");
  }
  SpectralReport rep;
  rep.sigma = sigma;
  rep.response.reserve(sigma.size());
  for (double s : sigma) rep.response.push_back(filter_response_at(f, head, s));
  rep.layer_index = layer_index;
  rep.head_index = head_index;
  return rep;
}

inline std::vector<double> attention_spectrum(const AttentionMatrix& a) {
  return singular_values(a.mat());
}

inline std::vector<double> feature_spectrum(const DenseMatrix& x) {
  return singular_values(x);
}

// Mean over ordered pairs i != j of cos(x_i, x_j); pairs touching a
// zero-norm row contribute 0.
inline double mean_cosine_similarity(const DenseMatrix& x) {
  const std::size_t n = x.rows();
  if (n < 2)
    throw std::invalid_argument("mean_cosine_similarity: need at least 2 rows, got " +
                                std::to_string(n));
  std::vector<double> norms(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j) s += x(i, j) * x(i, j);
    norms[i] = std::sqrt(s);
  }
  // Gram of normalized rows; the double-loop test oracle recomputes this
  // pairwise with inner products.
  DenseMatrix xn = x;
  for (std::size_t i = 0; i < n; ++i) {
    if (norms[i] == 0.0) continue;
    for (std::size_t j = 0; j < x.cols(); ++j) xn(i, j) /= norms[i];
  }
  const DenseMatrix gram = matmul_nt(xn, xn);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      if (norms[i] == 0.0 || norms[j] == 0.0) continue;
      total += std::clamp(gram(i, j), -1.0, 1.0);
    }
  return total / static_cast<double>(n * (n - 1));
}

// Similarity of H^m x0 for m = 1..steps, iterating one fixed filter over a
// static graph. Divergent coefficient sums make the iterates blow up; that
// is reported as an error instead of a garbage trace.
inline SimilarityTrace propagate_trace(const DenseMatrix& x0,
                                       const AttentionMatrix& a,
                                       const GraphFilter& f, int steps,
                                       std::size_t head = 0) {
  if (steps < 1)
    throw std::invalid_argument("propagate_trace: steps must be >= 1, got " +
                                std::to_string(steps));
  if (a.n() != x0.rows())
    throw std::invalid_argument("propagate_trace: attention is " +
                                std::to_string(a.n()) + " tokens but x0 is " +
                                x0.shape_str());
  const DenseMatrix h = build_filter(a, f, head);
  SimilarityTrace trace;
  trace.per_layer.reserve(steps);
  DenseMatrix x = x0;
  for (int m = 1; m <= steps; ++m) {
    x = matmul(h, x);
    if (!x.all_finite() || max_abs(x) > 1e150)
      throw std::runtime_error(
          "propagate_trace: iterates overflow at step " + std::to_string(m) +
          "; rescale the coefficients so |w0 + w1 + wK| <= 1");
    trace.per_layer.push_back(mean_cosine_similarity(x));
  }
  return trace;
}

}  // namespace gfsa
