#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "gfsa/matrix.hpp"
#include "gfsa/rng.hpp"

namespace gfsa {

// Boolean visibility mask; at(i, j) == true means token i may attend to j.
struct Mask {
  std::size_t n = 0;
  std::vector<std::uint8_t> visible;

  Mask() = default;
  explicit Mask(std::size_t n_, bool fill = true)
      : n(n_), visible(n_ * n_, fill ? 1 : 0) {}

  static Mask causal(std::size_t n) {
    Mask m(n, false);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j <= i; ++j) m.visible[i * n + j] = 1;
    return m;
  }

  bool at(std::size_t i, std::size_t j) const { return visible[i * n + j] != 0; }
  void set(std::size_t i, std::size_t j, bool vis) { visible[i * n + j] = vis ? 1 : 0; }
};

// Row-(sub)stochastic n x n matrix: entries in [0,1], every row summing to 1
// (or to at most 1 when rows were masked), so the induced infinity norm is
// at most 1. Construction validates; `tol` is loose enough to accept
// matrices that round-tripped through the text format.
class AttentionMatrix {
 public:
  static AttentionMatrix from_matrix(DenseMatrix m, double tol = 1e-6) {
    validate(m, tol);
    return AttentionMatrix(std::move(m));
  }

  std::size_t n() const { return m_.rows(); }
  const DenseMatrix& mat() const { return m_; }
  double operator()(std::size_t i, std::size_t j) const { return m_(i, j); }

 private:
  explicit AttentionMatrix(DenseMatrix m) : m_(std::move(m)) {}

  static void validate(const DenseMatrix& m, double tol) {
    if (m.rows() != m.cols())
      throw std::invalid_argument("AttentionMatrix: matrix must be square, got " +
                                  m.shape_str());
    if (m.rows() == 0)
      throw std::invalid_argument("AttentionMatrix: empty matrix");
    for (std::size_t i = 0; i < m.rows(); ++i) {
      double sum = 0.0;
      for (std::size_t j = 0; j < m.cols(); ++j) {
        const double v = m(i, j);
        if (!std::isfinite(v))
          throw std::invalid_argument("AttentionMatrix: non-finite entry at (" +
                                      std::to_string(i) + "," + std::to_string(j) + ")");
        if (v < -tol || v > 1.0 + tol)
          throw std::invalid_argument(
              "AttentionMatrix: entry " + format_double(v) + " at (" +
              std::to_string(i) + "," + std::to_string(j) + ") outside [0,1]");
        sum += v;
      }
      if (sum > 1.0 + tol)
        throw std::invalid_argument("AttentionMatrix: row " + std::to_string(i) +
                                    " sums to " + format_double(sum) +
                                    ", expected at most 1");
    }
  }

  DenseMatrix m_;
};

// softmax((X Wqry)(X Wkey)^T / sqrt(d)), with masked positions forced to
// -inf before the softmax so visible entries in each row still sum to 1.
inline AttentionMatrix attention_scores(const DenseMatrix& x,
                                        const DenseMatrix& w_qry,
                                        const DenseMatrix& w_key,
                                        const Mask* mask = nullptr) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  if (d == 0 || n == 0)
    throw std::invalid_argument("attention_scores: empty input " + x.shape_str());
  if (w_qry.rows() != d || w_key.rows() != d)
    throw std::invalid_argument("attention_scores: projection shape mismatch, x is " +
                                x.shape_str() + ", w_qry is " + w_qry.shape_str() +
                                ", w_key is " + w_key.shape_str());
  if (w_qry.cols() != w_key.cols())
    throw std::invalid_argument("attention_scores: w_qry " + w_qry.shape_str() +
                                " and w_key " + w_key.shape_str() +
                                " must project to the same width");
  if (mask && mask->n != n)
    throw std::invalid_argument("attention_scores: mask size " +
                                std::to_string(mask->n) + " does not match n=" +
                                std::to_string(n));

  const DenseMatrix q = matmul(x, w_qry);
  const DenseMatrix k = matmul(x, w_key);
  DenseMatrix scores = matmul_nt(q, k);
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(d));
  for (double& v : scores.data()) v *= inv_scale;

  if (mask) {
    for (std::size_t i = 0; i < n; ++i) {
      bool any_visible = false;
      for (std::size_t j = 0; j < n; ++j) {
        if (mask->at(i, j)) {
          any_visible = true;
        } else {
          scores(i, j) = -std::numeric_limits<double>::infinity();
        }
      }
      if (!any_visible)
        throw std::invalid_argument("attention_scores: row " + std::to_string(i) +
                                    " is fully masked, softmax undefined");
    }
  }

  DenseMatrix probs = softmax_rows(scores);
  if (mask) {
    // exp(-inf) contributes exactly 0; pin it to be explicit.
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (!mask->at(i, j)) probs(i, j) = 0.0;
  }
  return AttentionMatrix::from_matrix(std::move(probs), 1e-9);
}

// SA(X) = A X Wval.
inline DenseMatrix apply_sa(const DenseMatrix& x, const AttentionMatrix& a,
                            const DenseMatrix& w_val) {
  if (a.n() != x.rows())
    throw std::invalid_argument("apply_sa: attention is " + std::to_string(a.n()) +
                                " tokens but x is " + x.shape_str());
  return matmul(matmul(a.mat(), x), w_val);
}

struct HeadLayout {
  std::size_t heads = 1;
  std::size_t model_dim = 0;

  HeadLayout(std::size_t h, std::size_t d) : heads(h), model_dim(d) {
    if (h == 0 || d == 0 || d % h != 0)
      throw std::invalid_argument("HeadLayout: heads=" + std::to_string(h) +
                                  " must divide model_dim=" + std::to_string(d));
  }

  std::size_t head_dim() const { return model_dim / heads; }
};

// Contiguous-column split: head i owns columns [i*hd, (i+1)*hd).
inline std::vector<DenseMatrix> split_heads(const DenseMatrix& x, const HeadLayout& layout) {
  if (x.cols() != layout.model_dim)
    throw std::invalid_argument("split_heads: x is " + x.shape_str() +
                                " but layout expects " +
                                std::to_string(layout.model_dim) + " columns");
  const std::size_t hd = layout.head_dim();
  std::vector<DenseMatrix> heads;
  heads.reserve(layout.heads);
  for (std::size_t h = 0; h < layout.heads; ++h) {
    DenseMatrix part(x.rows(), hd);
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t j = 0; j < hd; ++j) part(i, j) = x(i, h * hd + j);
    heads.push_back(std::move(part));
  }
  return heads;
}

inline DenseMatrix merge_heads(const std::vector<DenseMatrix>& heads,
                               const HeadLayout& layout) {
  if (heads.size() != layout.heads)
    throw std::invalid_argument("merge_heads: got " + std::to_string(heads.size()) +
                                " heads, layout expects " +
                                std::to_string(layout.heads));
  const std::size_t hd = layout.head_dim();
  const std::size_t n = heads.empty() ? 0 : heads[0].rows();
  DenseMatrix out(n, layout.model_dim);
  for (std::size_t h = 0; h < layout.heads; ++h) {
    if (heads[h].rows() != n || heads[h].cols() != hd)
      throw std::invalid_argument("merge_heads: head " + std::to_string(h) +
                                  " is " + heads[h].shape_str() + ", expected " +
                                  std::to_string(n) + "x" + std::to_string(hd));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < hd; ++j) out(i, h * hd + j) = heads[h](i, j);
  }
  return out;
}

// i.i.d. uniform(0,1) entries, row-normalized. This is the documented
// ensemble for every bound-verification run.
inline AttentionMatrix random_row_stochastic(std::size_t n, Rng& rng) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      m(i, j) = rng.uniform();
      sum += m(i, j);
    }
    if (sum <= 0.0) {  // vanishing probability; keep the row valid anyway
      for (std::size_t j = 0; j < n; ++j) m(i, j) = 1.0 / static_cast<double>(n);
      continue;
    }
    for (std::size_t j = 0; j < n; ++j) m(i, j) /= sum;
  }
  return AttentionMatrix::from_matrix(std::move(m), 1e-9);
}

}  // namespace gfsa
