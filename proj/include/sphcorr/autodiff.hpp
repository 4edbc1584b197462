#ifndef SPHCORR_AUTODIFF_HPP_
#define SPHCORR_AUTODIFF_HPP_

// Minimal reverse-mode differentiation over dense matrices. A Tape records
// every operation with a closure that pushes its output gradient back to its
// inputs; backward() replays the closures in reverse order.

#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "sphcorr/errors.hpp"
#include "sphcorr/types.hpp"

namespace sphcorr::ad {

struct Var {
  int id = -1;
};

class Tape {
 public:
  Tape() { nodes_.reserve(64); }

  // Leaf without gradient tracking.
  Var constant(Matrix v) { return push(std::move(v), false, nullptr); }
  // Leaf whose gradient is accumulated and can be read back after backward().
  Var leaf(Matrix v) { return push(std::move(v), true, nullptr); }

  const Matrix& value(Var v) const { return nodes_[v.id].value; }
  // Gradient of the seeded output w.r.t. v; zero-shaped if v never received one.
  const Matrix& grad(Var v) {
    ensure_grad(v.id);
    return nodes_[v.id].grad;
  }
  int size() const { return static_cast<int>(nodes_.size()); }
  int normalize_guard_hits() const { return guard_hits_; }

  Var add(Var a, Var b) {
    check_same(a, b, "add");
    return push(value(a) + value(b), needs(a) || needs(b), [this, a, b](int self) {
      accumulate(a, nodes_[self].grad);
      accumulate(b, nodes_[self].grad);
    });
  }

  // a (n x k) plus a 1 x k row broadcast over rows.
  Var add_row(Var a, Var row) {
    if (value(row).rows() != 1 || value(row).cols() != value(a).cols()) {
      throw InvalidArgument("add_row: bias shape mismatch");
    }
    Matrix out = value(a);
    out.rowwise() += value(row).row(0);
    return push(std::move(out), needs(a) || needs(row), [this, a, row](int self) {
      const Matrix& g = nodes_[self].grad;
      accumulate(a, g);
      if (needs(row)) accumulate(row, g.colwise().sum());
    });
  }

  Var scale(Var a, double s) {
    return push(s * value(a), needs(a), [this, a, s](int self) { accumulate(a, s * nodes_[self].grad); });
  }

  Var matmul(Var a, Var b) {
    if (value(a).cols() != value(b).rows()) throw InvalidArgument("matmul: inner dimensions differ");
    return push(value(a) * value(b), needs(a) || needs(b), [this, a, b](int self) {
      const Matrix& g = nodes_[self].grad;
      if (needs(a)) accumulate(a, g * value(b).transpose());
      if (needs(b)) accumulate(b, value(a).transpose() * g);
    });
  }

  // a * b^T
  Var matmul_nt(Var a, Var b) {
    if (value(a).cols() != value(b).cols()) throw InvalidArgument("matmul_nt: inner dimensions differ");
    return push(value(a) * value(b).transpose(), needs(a) || needs(b), [this, a, b](int self) {
      const Matrix& g = nodes_[self].grad;
      if (needs(a)) accumulate(a, g * value(b));
      if (needs(b)) accumulate(b, g.transpose() * value(a));
    });
  }

  Var softmax_rows(Var a) {
    const Matrix& x = value(a);
    Matrix p(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const double mx = x.row(i).maxCoeff();
      p.row(i) = (x.row(i).array() - mx).exp();
      p.row(i) /= p.row(i).sum();
    }
    return push(std::move(p), needs(a), [this, a](int self) {
      const Matrix& y = nodes_[self].value;
      const Matrix& g = nodes_[self].grad;
      const Vector dot = (g.cwiseProduct(y)).rowwise().sum();
      accumulate(a, y.cwiseProduct(g - dot.replicate(1, g.cols())));
    });
  }

  // Exact GeLU, x * Phi(x).
  Var gelu(Var a) {
    const Matrix& x = value(a);
    Matrix y = x.unaryExpr([](double v) { return 0.5 * v * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0)); });
    return push(std::move(y), needs(a), [this, a](int self) {
      const Matrix d = value(a).unaryExpr([](double v) {
        const double cdf = 0.5 * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0));
        const double pdf = std::exp(-0.5 * v * v) / std::sqrt(2.0 * std::numbers::pi);
        return cdf + v * pdf;
      });
      accumulate(a, nodes_[self].grad.cwiseProduct(d));
    });
  }

  // Row-wise y = x / max(||x||, eps). Rows below eps are counted in
  // normalize_guard_hits().
  Var normalize_rows(Var a, double eps) {
    const Matrix& x = value(a);
    Vector norms = x.rowwise().norm();
    std::vector<bool> guarded(x.rows(), false);
    Matrix y(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      if (!(norms[i] > eps)) {
        ++guard_hits_;
        guarded[i] = true;
        norms[i] = eps;
      }
      y.row(i) = x.row(i) / norms[i];
    }
    return push(std::move(y), needs(a), [this, a, norms, guarded](int self) {
      const Matrix& y = nodes_[self].value;
      const Matrix& g = nodes_[self].grad;
      Matrix dx(g.rows(), g.cols());
      for (Eigen::Index i = 0; i < g.rows(); ++i) {
        if (guarded[i]) {
          dx.row(i) = g.row(i) / norms[i];  // y = x / eps is linear here
        } else {
          dx.row(i) = (g.row(i) - g.row(i).dot(y.row(i)) * y.row(i)) / norms[i];
        }
      }
      accumulate(a, dx);
    });
  }

  // Seeds d(out) = seed and propagates to every tracked node.
  void backward(Var out, const Matrix& seed) {
    Node& n = nodes_[out.id];
    if (seed.rows() != n.value.rows() || seed.cols() != n.value.cols()) {
      throw InvalidArgument("backward: seed shape does not match output");
    }
    ensure_grad(out.id);
    n.grad += seed;
    for (int i = out.id; i >= 0; --i) {
      Node& node = nodes_[i];
      if (node.backward && node.needs_grad && node.grad.size() != 0) node.backward(i);
    }
  }

 private:
  struct Node {
    Matrix value;
    Matrix grad;  // empty until first accumulation
    bool needs_grad = false;
    std::function<void(int)> backward;
  };

  Var push(Matrix v, bool needs_grad, std::function<void(int)> back) {
    nodes_.push_back({std::move(v), Matrix(), needs_grad, needs_grad ? std::move(back) : nullptr});
    return {static_cast<int>(nodes_.size()) - 1};
  }
  bool needs(Var v) const { return nodes_[v.id].needs_grad; }
  void ensure_grad(int id) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0 && n.value.size() != 0) n.grad.setZero(n.value.rows(), n.value.cols());
  }
  template <typename Expr>
  void accumulate(Var v, const Expr& g) {
    if (!needs(v)) return;
    ensure_grad(v.id);
    nodes_[v.id].grad += g;
  }
  void check_same(Var a, Var b, const char* op) const {
    if (value(a).rows() != value(b).rows() || value(a).cols() != value(b).cols()) {
      throw InvalidArgument(std::string(op) + ": shape mismatch");
    }
  }

  std::vector<Node> nodes_;
  int guard_hits_ = 0;
};

}  // namespace sphcorr::ad

#endif  // SPHCORR_AUTODIFF_HPP_
