#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gfsa/matrix.hpp"

namespace gfsa {

// Reverse-mode tape over dense-matrix ops: enough surface for the toy
// transformer and nothing more. Records forward values as it goes;
// backward() walks the nodes once, in reverse creation order. Scalars
// (loss, filter coefficients) travel as 1x1 matrices.
class Tape {
 public:
  using VarId = int;

  enum class Op {
    kInput,
    kMatMul,      // A * B
    kMatMulNT,    // A * B^T
    kAdd,
    kSub,
    kScale,       // c * A, plain double c
    kScalarMul,   // s * A, s a 1x1 variable
    kSoftmaxRows,
    kRmsNormRows,
    kGelu,
    kSliceCols,
    kConcatCols,
    kEmbed,       // gather rows of a table by token id
    kSelectEntry, // 1x1 view of one entry
    kCrossEntropy // mean over rows of -log softmax(logits)[label]
  };

  VarId input(DenseMatrix value, bool requires_grad = false) {
    Node n;
    n.op = Op::kInput;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    return push(std::move(n));
  }

  VarId constant(DenseMatrix value) { return input(std::move(value), false); }

  VarId matmul(VarId a, VarId b) {
    Node n;
    n.op = Op::kMatMul;
    n.a = a;
    n.b = b;
    n.value = gfsa::matmul(val(a), val(b));
    n.requires_grad = needs(a) || needs(b);
    return push(std::move(n));
  }

  VarId matmul_nt(VarId a, VarId b) {
    Node n;
    n.op = Op::kMatMulNT;
    n.a = a;
    n.b = b;
    n.value = gfsa::matmul_nt(val(a), val(b));
    n.requires_grad = needs(a) || needs(b);
    return push(std::move(n));
  }

  VarId add(VarId a, VarId b) {
    Node n;
    n.op = Op::kAdd;
    n.a = a;
    n.b = b;
    n.value = gfsa::add(val(a), val(b));
    n.requires_grad = needs(a) || needs(b);
    return push(std::move(n));
  }

  VarId sub(VarId a, VarId b) {
    Node n;
    n.op = Op::kSub;
    n.a = a;
    n.b = b;
    n.value = gfsa::sub(val(a), val(b));
    n.requires_grad = needs(a) || needs(b);
    return push(std::move(n));
  }

  VarId scale(VarId a, double c) {
    Node n;
    n.op = Op::kScale;
    n.a = a;
    n.c = c;
    n.value = gfsa::scale(val(a), c);
    n.requires_grad = needs(a);
    return push(std::move(n));
  }

  VarId scalar_mul(VarId s, VarId a) {
    if (val(s).rows() != 1 || val(s).cols() != 1)
      throw std::invalid_argument("scalar_mul: scalar operand must be 1x1, got " +
                                  val(s).shape_str());
    Node n;
    n.op = Op::kScalarMul;
    n.a = s;
    n.b = a;
    n.value = gfsa::scale(val(a), val(s)(0, 0));
    n.requires_grad = needs(s) || needs(a);
    return push(std::move(n));
  }

  VarId softmax_rows(VarId a) {
    Node n;
    n.op = Op::kSoftmaxRows;
    n.a = a;
    n.value = gfsa::softmax_rows(val(a));
    n.requires_grad = needs(a);
    return push(std::move(n));
  }

  VarId rmsnorm_rows(VarId a) {
    const DenseMatrix& x = val(a);
    Node n;
    n.op = Op::kRmsNormRows;
    n.a = a;
    n.value = DenseMatrix(x.rows(), x.cols());
    n.aux = DenseMatrix(x.rows(), 1);
    for (std::size_t i = 0; i < x.rows(); ++i) {
      double ms = 0.0;
      for (std::size_t j = 0; j < x.cols(); ++j) ms += x(i, j) * x(i, j);
      const double rms = std::sqrt(ms / static_cast<double>(x.cols()) + kRmsEps);
      n.aux(i, 0) = rms;
      for (std::size_t j = 0; j < x.cols(); ++j) n.value(i, j) = x(i, j) / rms;
    }
    n.requires_grad = needs(a);
    return push(std::move(n));
  }

  VarId gelu(VarId a) {
    const DenseMatrix& x = val(a);
    Node n;
    n.op = Op::kGelu;
    n.a = a;
    n.value = DenseMatrix(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double v = x.data()[i];
      n.value.data()[i] = 0.5 * v * (1.0 + std::erf(v * kSqrtHalf));
    }
    n.requires_grad = needs(a);
    return push(std::move(n));
  }

  VarId slice_cols(VarId a, std::size_t c0, std::size_t c1) {
    const DenseMatrix& x = val(a);
    if (c0 >= c1 || c1 > x.cols())
      throw std::invalid_argument("slice_cols: bad range [" + std::to_string(c0) +
                                  "," + std::to_string(c1) + ") for " +
                                  x.shape_str());
    Node n;
    n.op = Op::kSliceCols;
    n.a = a;
    n.i0 = c0;
    n.i1 = c1;
    n.value = DenseMatrix(x.rows(), c1 - c0);
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t j = c0; j < c1; ++j) n.value(i, j - c0) = x(i, j);
    n.requires_grad = needs(a);
    return push(std::move(n));
  }

  VarId concat_cols(const std::vector<VarId>& parts) {
    if (parts.empty())
      throw std::invalid_argument("concat_cols: no operands");
    std::size_t rows = val(parts[0]).rows();
    std::size_t cols = 0;
    bool rg = false;
    for (VarId p : parts) {
      if (val(p).rows() != rows)
        throw std::invalid_argument("concat_cols: row mismatch");
      cols += val(p).cols();
      rg = rg || needs(p);
    }
    Node n;
    n.op = Op::kConcatCols;
    n.srcs = parts;
    n.value = DenseMatrix(rows, cols);
    std::size_t off = 0;
    for (VarId p : parts) {
      const DenseMatrix& x = val(p);
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < x.cols(); ++j) n.value(i, off + j) = x(i, j);
      off += x.cols();
    }
    n.requires_grad = rg;
    return push(std::move(n));
  }

  VarId embed(VarId table, std::vector<int> ids) {
    const DenseMatrix& t = val(table);
    Node n;
    n.op = Op::kEmbed;
    n.a = table;
    n.value = DenseMatrix(ids.size(), t.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= t.rows())
        throw std::invalid_argument("embed: id " + std::to_string(ids[i]) +
                                    " out of range for table with " +
                                    std::to_string(t.rows()) + " rows");
      for (std::size_t j = 0; j < t.cols(); ++j)
        n.value(i, j) = t(static_cast<std::size_t>(ids[i]), j);
    }
    n.ids = std::move(ids);
    n.requires_grad = needs(table);
    return push(std::move(n));
  }

  VarId select_entry(VarId a, std::size_t i, std::size_t j) {
    const DenseMatrix& x = val(a);
    if (i >= x.rows() || j >= x.cols())
      throw std::invalid_argument("select_entry: (" + std::to_string(i) + "," +
                                  std::to_string(j) + ") out of range for " +
                                  x.shape_str());
    Node n;
    n.op = Op::kSelectEntry;
    n.a = a;
    n.i0 = i;
    n.i1 = j;
    n.value = DenseMatrix(1, 1, std::vector<double>{x(i, j)});
    n.requires_grad = needs(a);
    return push(std::move(n));
  }

  // Mean over rows of -log softmax(row)[label]; value is 1x1. Keeps the
  // softmax probabilities for the fused backward.
  VarId cross_entropy(VarId logits, std::vector<int> labels) {
    const DenseMatrix& z = val(logits);
    if (labels.size() != z.rows())
      throw std::invalid_argument("cross_entropy: " + std::to_string(labels.size()) +
                                  " labels for " + std::to_string(z.rows()) +
                                  " rows of logits");
    Node n;
    n.op = Op::kCrossEntropy;
    n.a = logits;
    n.aux = gfsa::softmax_rows(z);
    double total = 0.0;
    for (std::size_t i = 0; i < z.rows(); ++i) {
      const int l = labels[i];
      if (l < 0 || static_cast<std::size_t>(l) >= z.cols())
        throw std::invalid_argument("cross_entropy: label " + std::to_string(l) +
                                    " out of range for " + std::to_string(z.cols()) +
                                    " classes");
      // log-sum-exp evaluated directly for accuracy
      double mx = z(i, 0);
      for (std::size_t j = 1; j < z.cols(); ++j) mx = std::max(mx, z(i, j));
      double se = 0.0;
      for (std::size_t j = 0; j < z.cols(); ++j) se += std::exp(z(i, j) - mx);
      total += mx + std::log(se) - z(i, static_cast<std::size_t>(l));
    }
    n.value = DenseMatrix(1, 1, std::vector<double>{total / static_cast<double>(z.rows())});
    n.ids = std::move(labels);
    n.requires_grad = needs(logits);
    return push(std::move(n));
  }

  const DenseMatrix& value(VarId id) const { return nodes_[check(id)].value; }

  bool requires_grad(VarId id) const { return nodes_[check(id)].requires_grad; }

  std::size_t size() const { return nodes_.size(); }

  // Seeds d(loss)/d(loss) = 1 and accumulates adjoints into every node that
  // requires a gradient. Each node is visited exactly once.
  void backward(VarId loss) {
    const Node& ln = nodes_[check(loss)];
    if (ln.value.rows() != 1 || ln.value.cols() != 1)
      throw std::invalid_argument("backward: loss must be 1x1, got " +
                                  ln.value.shape_str());
    if (!ln.requires_grad)
      throw std::invalid_argument("backward: loss does not depend on any parameter");
    for (Node& n : nodes_) n.grad = DenseMatrix();
    ensure_grad(loss)(0, 0) = 1.0;
    for (int id = loss; id >= 0; --id) {
      Node& n = nodes_[id];
      if (!n.requires_grad || n.grad.size() == 0) continue;
      propagate(n);
    }
  }

  const DenseMatrix& grad(VarId id) const {
    const Node& n = nodes_[check(id)];
    if (n.grad.size() == 0)
      throw std::logic_error("grad: node has no gradient; run backward first "
                             "on a loss that reaches it");
    return n.grad;
  }

  // Gradient of a parameter that the loss may legitimately not touch.
  DenseMatrix grad_or_zero(VarId id) const {
    const Node& n = nodes_[check(id)];
    if (n.grad.size() == 0) return DenseMatrix(n.value.rows(), n.value.cols());
    return n.grad;
  }

 private:
  static constexpr double kRmsEps = 1e-8;
  static constexpr double kSqrtHalf = 0.70710678118654752440;
  static constexpr double kInvSqrt2Pi = 0.39894228040143267794;

  struct Node {
    Op op = Op::kInput;
    int a = -1;
    int b = -1;
    std::vector<int> srcs;
    std::vector<int> ids;
    double c = 0.0;
    std::size_t i0 = 0, i1 = 0;
    DenseMatrix value;
    DenseMatrix aux;
    DenseMatrix grad;
    bool requires_grad = false;
  };

  VarId push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<VarId>(nodes_.size() - 1);
  }

  int check(VarId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size())
      throw std::invalid_argument("Tape: variable id " + std::to_string(id) +
                                  " out of range");
    return id;
  }

  const DenseMatrix& val(VarId id) const { return nodes_[check(id)].value; }
  bool needs(VarId id) const { return nodes_[check(id)].requires_grad; }

  DenseMatrix& ensure_grad(VarId id) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0) n.grad = DenseMatrix(n.value.rows(), n.value.cols());
    return n.grad;
  }

  void accumulate(VarId id, const DenseMatrix& delta) {
    if (!nodes_[id].requires_grad) return;
    DenseMatrix& g = ensure_grad(id);
    for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] += delta.data()[i];
  }

  void propagate(Node& n) {
    const DenseMatrix& g = n.grad;
    switch (n.op) {
      case Op::kInput:
        break;
      case Op::kMatMul:
        if (needs(n.a)) accumulate(n.a, gfsa::matmul_nt(g, nodes_[n.b].value));
        if (needs(n.b)) accumulate(n.b, gfsa::matmul_tn(nodes_[n.a].value, g));
        break;
      case Op::kMatMulNT:
        if (needs(n.a)) accumulate(n.a, gfsa::matmul(g, nodes_[n.b].value));
        if (needs(n.b)) accumulate(n.b, gfsa::matmul_tn(g, nodes_[n.a].value));
        break;
      case Op::kAdd:
        accumulate(n.a, g);
        accumulate(n.b, g);
        break;
      case Op::kSub:
        accumulate(n.a, g);
        if (needs(n.b)) accumulate(n.b, gfsa::scale(g, -1.0));
        break;
      case Op::kScale:
        if (needs(n.a)) accumulate(n.a, gfsa::scale(g, n.c));
        break;
      case Op::kScalarMul: {
        const double s = nodes_[n.a].value(0, 0);
        if (needs(n.a)) {
          double dot = 0.0;
          const DenseMatrix& m = nodes_[n.b].value;
          for (std::size_t i = 0; i < m.size(); ++i)
            dot += g.data()[i] * m.data()[i];
          DenseMatrix ds(1, 1, std::vector<double>{dot});
          accumulate(n.a, ds);
        }
        if (needs(n.b)) accumulate(n.b, gfsa::scale(g, s));
        break;
      }
      case Op::kSoftmaxRows: {
        if (!needs(n.a)) break;
        const DenseMatrix& p = n.value;
        DenseMatrix dx(p.rows(), p.cols());
        for (std::size_t i = 0; i < p.rows(); ++i) {
          double dot = 0.0;
          for (std::size_t j = 0; j < p.cols(); ++j) dot += g(i, j) * p(i, j);
          for (std::size_t j = 0; j < p.cols(); ++j)
            dx(i, j) = p(i, j) * (g(i, j) - dot);
        }
        accumulate(n.a, dx);
        break;
      }
      case Op::kRmsNormRows: {
        if (!needs(n.a)) break;
        const DenseMatrix& x = nodes_[n.a].value;
        const std::size_t d = x.cols();
        DenseMatrix dx(x.rows(), d);
        for (std::size_t i = 0; i < x.rows(); ++i) {
          const double rms = n.aux(i, 0);
          double dot = 0.0;
          for (std::size_t j = 0; j < d; ++j) dot += g(i, j) * x(i, j);
          const double corr = dot / (static_cast<double>(d) * rms * rms * rms);
          for (std::size_t j = 0; j < d; ++j)
            dx(i, j) = g(i, j) / rms - x(i, j) * corr;
        }
        accumulate(n.a, dx);
        break;
      }
      case Op::kGelu: {
        if (!needs(n.a)) break;
        const DenseMatrix& x = nodes_[n.a].value;
        DenseMatrix dx(x.rows(), x.cols());
        for (std::size_t i = 0; i < x.size(); ++i) {
          const double v = x.data()[i];
          const double cdf = 0.5 * (1.0 + std::erf(v * kSqrtHalf));
          const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
          dx.data()[i] = g.data()[i] * (cdf + v * pdf);
        }
        accumulate(n.a, dx);
        break;
      }
      case Op::kSliceCols: {
        if (!needs(n.a)) break;
        const DenseMatrix& x = nodes_[n.a].value;
        DenseMatrix dx(x.rows(), x.cols());
        for (std::size_t i = 0; i < g.rows(); ++i)
          for (std::size_t j = 0; j < g.cols(); ++j) dx(i, n.i0 + j) = g(i, j);
        accumulate(n.a, dx);
        break;
      }
      case Op::kConcatCols: {
        std::size_t off = 0;
        for (int src : n.srcs) {
          const DenseMatrix& x = nodes_[src].value;
          if (needs(src)) {
            DenseMatrix dx(x.rows(), x.cols());
            for (std::size_t i = 0; i < x.rows(); ++i)
              for (std::size_t j = 0; j < x.cols(); ++j) dx(i, j) = g(i, off + j);
            accumulate(src, dx);
          }
          off += x.cols();
        }
        break;
      }
      case Op::kEmbed: {
        if (!needs(n.a)) break;
        const DenseMatrix& t = nodes_[n.a].value;
        DenseMatrix dt(t.rows(), t.cols());
        for (std::size_t i = 0; i < n.ids.size(); ++i)
          for (std::size_t j = 0; j < t.cols(); ++j)
            dt(static_cast<std::size_t>(n.ids[i]), j) += g(i, j);
        accumulate(n.a, dt);
        break;
      }
      case Op::kSelectEntry: {
        if (!needs(n.a)) break;
        const DenseMatrix& x = nodes_[n.a].value;
        DenseMatrix dx(x.rows(), x.cols());
        dx(n.i0, n.i1) = g(0, 0);
        accumulate(n.a, dx);
        break;
      }
      case Op::kCrossEntropy: {
        if (!needs(n.a)) break;
        const DenseMatrix& p = n.aux;
        const double w = g(0, 0) / static_cast<double>(p.rows());
        DenseMatrix dz = gfsa::scale(p, w);
        for (std::size_t i = 0; i < p.rows(); ++i)
          dz(i, static_cast<std::size_t>(n.ids[i])) -= w;
        accumulate(n.a, dz);
        break;
      }
    }
  }

  std::vector<Node> nodes_;
};

}  // namespace gfsa
