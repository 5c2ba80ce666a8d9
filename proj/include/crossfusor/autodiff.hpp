#pragma once

// Tape-based reverse-mode differentiation over dense Eigen matrices.
//
// Every operation appends a node holding its value and (when any input needs
// a gradient) a closure that pushes the node's gradient to its inputs.
// Backward walks the tape in reverse creation order, so the tape is always a
// valid topological order.

#include <cmath>
#include <complex>
#include <functional>
#include <initializer_list>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "crossfusor/errors.hpp"
#include "crossfusor/fft.hpp"

namespace crossfusor::ad {

using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

class Tape;

class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  const Matrix& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }

  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, const Matrix&)>;

  Tape() { nodes_.reserve(1024); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value) { return push(std::move(value), nullptr, false, nullptr); }
  Var variable(Matrix value) { return push(std::move(value), nullptr, true, nullptr); }

  /// Leaf that reads storage owned by the caller. The storage must outlive the tape.
  Var external(const Matrix& value, bool requires_grad) {
    return push(Matrix(), &value, requires_grad, nullptr);
  }

  Var record(Matrix value, std::initializer_list<Var> inputs, Backward backward) {
    bool needs = false;
    for (const Var& v : inputs) needs = needs || requires_grad(v);
    return push(std::move(value), nullptr, needs, needs ? std::move(backward) : nullptr);
  }

  Var record(Matrix value, const std::vector<Var>& inputs, Backward backward) {
    bool needs = false;
    for (const Var& v : inputs) needs = needs || requires_grad(v);
    return push(std::move(value), nullptr, needs, needs ? std::move(backward) : nullptr);
  }

  const Matrix& value(int id) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    return n.external ? *n.external : n.value;
  }

  bool requires_grad(const Var& v) const { return nodes_[static_cast<std::size_t>(v.id())].requires_grad; }

  /// Adds `delta` into the gradient slot of `v` (no-op for constants).
  template <typename Derived>
  void accumulate(const Var& v, const Eigen::MatrixBase<Derived>& delta) {
    Node& n = nodes_[static_cast<std::size_t>(v.id())];
    if (!n.requires_grad) return;
    if (!n.has_grad) {
      n.grad = delta;
      n.has_grad = true;
    } else {
      n.grad += delta;
    }
  }

  /// Gradient of the last backward root with respect to `v`; zeros when unreached.
  Matrix gradient(const Var& v) const {
    const Node& n = nodes_[static_cast<std::size_t>(v.id())];
    if (n.has_grad) return n.grad;
    const Matrix& val = value(v.id());
    return Matrix::Zero(val.rows(), val.cols());
  }

  bool has_gradient(const Var& v) const { return nodes_[static_cast<std::size_t>(v.id())].has_grad; }

  /// Reverse sweep from a 1x1 root, seeded with `seed`.
  void backward(const Var& root, double seed = 1.0) {
    require(root.rows() == 1 && root.cols() == 1, ErrorKind::invalid_argument,
            "backward root must be a scalar");
    for (Node& n : nodes_) {
      n.has_grad = false;
    }
    accumulate(root, Matrix::Constant(1, 1, seed));
    for (std::size_t i = nodes_.size(); i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.has_grad || !n.backward) continue;
      // The closure may add to other nodes' grads but never to this one.
      Matrix grad = std::move(n.grad);
      n.backward(*this, grad);
      nodes_[i].grad = std::move(grad);
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    const Matrix* external = nullptr;
    Matrix grad;
    bool has_grad = false;
    bool requires_grad = false;
    Backward backward;
  };

  Var push(Matrix value, const Matrix* external, bool requires_grad, Backward backward) {
    Node n;
    n.value = std::move(value);
    n.external = external;
    n.requires_grad = requires_grad;
    n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return Var(this, static_cast<int>(nodes_.size() - 1));
  }

  std::vector<Node> nodes_;
};

inline const Matrix& Var::value() const { return tape_->value(id_); }

namespace detail {

inline void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    fail(ErrorKind::invalid_argument,
         std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
             " vs " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double softplus(double x) {
  // log(1 + e^x) without overflow for large x or cancellation for very negative x.
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise arithmetic

inline Var add(const Var& a, const Var& b) {
  detail::check_same_shape(a, b, "add");
  return a.tape()->record(a.value() + b.value(), {a, b}, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

inline Var sub(const Var& a, const Var& b) {
  detail::check_same_shape(a, b, "sub");
  return a.tape()->record(a.value() - b.value(), {a, b}, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, -g);
  });
}

inline Var mul(const Var& a, const Var& b) {
  detail::check_same_shape(a, b, "mul");
  return a.tape()->record(a.value().cwiseProduct(b.value()), {a, b}, [a, b](Tape& t, const Matrix& g) {
    if (t.requires_grad(a)) t.accumulate(a, g.cwiseProduct(b.value()));
    if (t.requires_grad(b)) t.accumulate(b, g.cwiseProduct(a.value()));
  });
}

inline Var scale(const Var& a, double s) {
  return a.tape()->record(a.value() * s, {a}, [a, s](Tape& t, const Matrix& g) { t.accumulate(a, g * s); });
}

inline Var add_scalar(const Var& a, double s) {
  return a.tape()->record(a.value().array() + s, {a}, [a](Tape& t, const Matrix& g) { t.accumulate(a, g); });
}

/// a (R x C) + row (1 x C), broadcast over rows.
inline Var add_row(const Var& a, const Var& row) {
  require(row.rows() == 1 && row.cols() == a.cols(), ErrorKind::invalid_argument, "add_row: shape mismatch");
  Matrix out = a.value().rowwise() + row.value().row(0);
  return a.tape()->record(std::move(out), {a, row}, [a, row](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    if (t.requires_grad(row)) t.accumulate(row, g.colwise().sum());
  });
}

/// a (R x C) + col (R x 1), broadcast over columns.
inline Var add_col(const Var& a, const Var& col) {
  require(col.cols() == 1 && col.rows() == a.rows(), ErrorKind::invalid_argument, "add_col: shape mismatch");
  Matrix out = a.value().colwise() + col.value().col(0);
  return a.tape()->record(std::move(out), {a, col}, [a, col](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    if (t.requires_grad(col)) t.accumulate(col, g.rowwise().sum());
  });
}

/// a (R x C) scaled per row by col (R x 1).
inline Var mul_col(const Var& a, const Var& col) {
  require(col.cols() == 1 && col.rows() == a.rows(), ErrorKind::invalid_argument, "mul_col: shape mismatch");
  Matrix out = a.value().array().colwise() * col.value().col(0).array();
  return a.tape()->record(std::move(out), {a, col}, [a, col](Tape& t, const Matrix& g) {
    if (t.requires_grad(a)) {
      Matrix ga = g.array().colwise() * col.value().col(0).array();
      t.accumulate(a, ga);
    }
    if (t.requires_grad(col)) t.accumulate(col, g.cwiseProduct(a.value()).rowwise().sum());
  });
}

// ---------------------------------------------------------------------------
// Linear algebra and reshaping

inline Var matmul(const Var& a, const Var& b) {
  require(a.cols() == b.rows(), ErrorKind::invalid_argument,
          "matmul: inner dimension mismatch " + std::to_string(a.cols()) + " vs " + std::to_string(b.rows()));
  return a.tape()->record(a.value() * b.value(), {a, b}, [a, b](Tape& t, const Matrix& g) {
    if (t.requires_grad(a)) t.accumulate(a, g * b.value().transpose());
    if (t.requires_grad(b)) t.accumulate(b, a.value().transpose() * g);
  });
}

inline Var transpose(const Var& a) {
  return a.tape()->record(a.value().transpose(), {a},
                          [a](Tape& t, const Matrix& g) { t.accumulate(a, g.transpose()); });
}

inline Var concat_cols(const std::vector<Var>& parts) {
  require(!parts.empty(), ErrorKind::invalid_argument, "concat_cols: no inputs");
  const Index rows = parts.front().rows();
  Index cols = 0;
  for (const Var& p : parts) {
    require(p.rows() == rows, ErrorKind::invalid_argument, "concat_cols: row mismatch");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  Index offset = 0;
  for (const Var& p : parts) {
    out.middleCols(offset, p.cols()) = p.value();
    offset += p.cols();
  }
  return parts.front().tape()->record(std::move(out), parts, [parts](Tape& t, const Matrix& g) {
    Index off = 0;
    for (const Var& p : parts) {
      if (t.requires_grad(p)) t.accumulate(p, g.middleCols(off, p.cols()));
      off += p.cols();
    }
  });
}

inline Var concat_rows(const std::vector<Var>& parts) {
  require(!parts.empty(), ErrorKind::invalid_argument, "concat_rows: no inputs");
  const Index cols = parts.front().cols();
  Index rows = 0;
  for (const Var& p : parts) {
    require(p.cols() == cols, ErrorKind::invalid_argument, "concat_rows: column mismatch");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  Index offset = 0;
  for (const Var& p : parts) {
    out.middleRows(offset, p.rows()) = p.value();
    offset += p.rows();
  }
  return parts.front().tape()->record(std::move(out), parts, [parts](Tape& t, const Matrix& g) {
    Index off = 0;
    for (const Var& p : parts) {
      if (t.requires_grad(p)) t.accumulate(p, g.middleRows(off, p.rows()));
      off += p.rows();
    }
  });
}

inline Var slice_cols(const Var& a, Index start, Index count) {
  require(start >= 0 && count >= 0 && start + count <= a.cols(), ErrorKind::invalid_argument,
          "slice_cols: out of range");
  const Index rows = a.rows(), cols = a.cols();
  return a.tape()->record(a.value().middleCols(start, count), {a},
                          [a, start, count, rows, cols](Tape& t, const Matrix& g) {
                            Matrix full = Matrix::Zero(rows, cols);
                            full.middleCols(start, count) = g;
                            t.accumulate(a, full);
                          });
}

inline Var slice_rows(const Var& a, Index start, Index count) {
  require(start >= 0 && count >= 0 && start + count <= a.rows(), ErrorKind::invalid_argument,
          "slice_rows: out of range");
  const Index rows = a.rows(), cols = a.cols();
  return a.tape()->record(a.value().middleRows(start, count), {a},
                          [a, start, count, rows, cols](Tape& t, const Matrix& g) {
                            Matrix full = Matrix::Zero(rows, cols);
                            full.middleRows(start, count) = g;
                            t.accumulate(a, full);
                          });
}

// ---------------------------------------------------------------------------
// Reductions

inline Var sum_all(const Var& a) {
  const Index r = a.rows(), c = a.cols();
  return a.tape()->record(Matrix::Constant(1, 1, a.value().sum()), {a},
                          [a, r, c](Tape& t, const Matrix& g) { t.accumulate(a, Matrix::Constant(r, c, g(0, 0))); });
}

inline Var mean_all(const Var& a) {
  const double n = static_cast<double>(a.value().size());
  return scale(sum_all(a), 1.0 / n);
}

/// Mean over rows: (R x C) -> (1 x C).
inline Var mean_rows(const Var& a) {
  const Index r = a.rows();
  return a.tape()->record(a.value().colwise().mean(), {a}, [a, r](Tape& t, const Matrix& g) {
    t.accumulate(a, g.replicate(r, 1) / static_cast<double>(r));
  });
}

// ---------------------------------------------------------------------------
// Nonlinearities

inline Var sigmoid(const Var& a) {
  Matrix y = a.value().unaryExpr([](double x) { return detail::sigmoid(x); });
  Matrix dy = y.array() * (1.0 - y.array());
  return a.tape()->record(std::move(y), {a}, [a, dy = std::move(dy)](Tape& t, const Matrix& g) {
    t.accumulate(a, g.cwiseProduct(dy));
  });
}

inline Var tanh(const Var& a) {
  Matrix y = a.value().array().tanh();
  Matrix dy = 1.0 - y.array().square();
  return a.tape()->record(std::move(y), {a}, [a, dy = std::move(dy)](Tape& t, const Matrix& g) {
    t.accumulate(a, g.cwiseProduct(dy));
  });
}

/// x * sigmoid(x).
inline Var silu(const Var& a) {
  const Matrix s = a.value().unaryExpr([](double x) { return detail::sigmoid(x); });
  Matrix y = a.value().cwiseProduct(s);
  Matrix dy = s.array() * (1.0 + a.value().array() * (1.0 - s.array()));
  return a.tape()->record(std::move(y), {a}, [a, dy = std::move(dy)](Tape& t, const Matrix& g) {
    t.accumulate(a, g.cwiseProduct(dy));
  });
}

inline Var softplus(const Var& a) {
  Matrix y = a.value().unaryExpr([](double x) { return detail::softplus(x); });
  Matrix dy = a.value().unaryExpr([](double x) { return detail::sigmoid(x); });
  return a.tape()->record(std::move(y), {a}, [a, dy = std::move(dy)](Tape& t, const Matrix& g) {
    t.accumulate(a, g.cwiseProduct(dy));
  });
}

inline Var sqrt(const Var& a) {
  Matrix y = a.value().array().sqrt();
  Matrix dy = 0.5 / y.array();
  return a.tape()->record(std::move(y), {a}, [a, dy = std::move(dy)](Tape& t, const Matrix& g) {
    t.accumulate(a, g.cwiseProduct(dy));
  });
}

inline Var square(const Var& a) {
  return a.tape()->record(a.value().array().square(), {a},
                          [a](Tape& t, const Matrix& g) { t.accumulate(a, 2.0 * g.cwiseProduct(a.value())); });
}

namespace detail {

inline Matrix softmax_rows_value(const Matrix& x) {
  Matrix y(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    const double m = x.row(i).maxCoeff();
    y.row(i) = (x.row(i).array() - m).exp();
    y.row(i) /= y.row(i).sum();
  }
  return y;
}

}  // namespace detail

/// Softmax across columns within each row (rows sum to 1).
inline Var softmax_rows(const Var& a) {
  Matrix y = detail::softmax_rows_value(a.value());
  Matrix yc = y;
  return a.tape()->record(std::move(y), {a}, [a, y = std::move(yc)](Tape& t, const Matrix& g) {
    const Eigen::VectorXd dot = g.cwiseProduct(y).rowwise().sum();
    Matrix ga = y.array() * (g.colwise() - dot).array();
    t.accumulate(a, ga);
  });
}

/// Softmax across rows within each column (columns sum to 1).
inline Var softmax_cols(const Var& a) {
  Matrix y = detail::softmax_rows_value(a.value().transpose()).transpose();
  Matrix yc = y;
  return a.tape()->record(std::move(y), {a}, [a, y = std::move(yc)](Tape& t, const Matrix& g) {
    const Eigen::RowVectorXd dot = g.cwiseProduct(y).colwise().sum();
    Matrix ga = y.array() * (g.rowwise() - dot).array();
    t.accumulate(a, ga);
  });
}

/// Per-row layer normalization with affine gamma/beta (both 1 x C).
inline Var layer_norm_rows(const Var& a, const Var& gamma, const Var& beta, double eps) {
  const Index rows = a.rows(), cols = a.cols();
  require(gamma.rows() == 1 && gamma.cols() == cols && beta.rows() == 1 && beta.cols() == cols,
          ErrorKind::invalid_argument, "layer_norm_rows: affine shape mismatch");
  Matrix xhat(rows, cols);
  Eigen::VectorXd inv_std(rows);
  for (Index i = 0; i < rows; ++i) {
    const double mean = a.value().row(i).mean();
    const Eigen::RowVectorXd centered = a.value().row(i).array() - mean;
    const double var = centered.squaredNorm() / static_cast<double>(cols);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = centered * inv_std[i];
  }
  Matrix y = (xhat.array().rowwise() * gamma.value().row(0).array()).rowwise() + beta.value().row(0).array();
  return a.tape()->record(
      std::move(y), {a, gamma, beta},
      [a, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std), cols](Tape& t, const Matrix& g) {
        if (t.requires_grad(gamma)) t.accumulate(gamma, g.cwiseProduct(xhat).colwise().sum());
        if (t.requires_grad(beta)) t.accumulate(beta, g.colwise().sum());
        if (!t.requires_grad(a)) return;
        const Matrix gx = g.array().rowwise() * gamma.value().row(0).array();
        Matrix ga(gx.rows(), gx.cols());
        const double n = static_cast<double>(cols);
        for (Index i = 0; i < gx.rows(); ++i) {
          const double mean_g = gx.row(i).mean();
          const double mean_gx = gx.row(i).dot(xhat.row(i)) / n;
          ga.row(i) = inv_std[i] * (gx.row(i).array() - mean_g - xhat.row(i).array() * mean_gx);
        }
        t.accumulate(a, ga);
      });
}

// ---------------------------------------------------------------------------
// Sequence and signal operators

/// Single GRU layer over a whole sequence (gate order r, z, n).
///
///   r = s(x Wir + bir + h Whr + bhr)
///   z = s(x Wiz + biz + h Whz + bhz)
///   n = tanh(x Win + bin + r * (h Whn + bhn))
///   h' = (1 - z) * n + z * h
///
/// x: T x I, w_ih: I x 3H, w_hh: H x 3H, b_ih/b_hh: 1 x 3H. Returns T x H with h_{-1} = 0.
inline Var gru_sequence(const Var& x, const Var& w_ih, const Var& w_hh, const Var& b_ih, const Var& b_hh) {
  const Index steps = x.rows();
  const Index hidden = w_hh.rows();
  require(w_ih.rows() == x.cols() && w_ih.cols() == 3 * hidden && w_hh.cols() == 3 * hidden &&
              b_ih.cols() == 3 * hidden && b_hh.cols() == 3 * hidden,
          ErrorKind::invalid_argument, "gru_sequence: parameter shape mismatch");

  const Matrix gi = (x.value() * w_ih.value()).rowwise() + b_ih.value().row(0);
  Matrix r(steps, hidden), z(steps, hidden), n(steps, hidden), hn(steps, hidden), h(steps, hidden);
  Eigen::RowVectorXd prev = Eigen::RowVectorXd::Zero(hidden);
  for (Index t = 0; t < steps; ++t) {
    const Eigen::RowVectorXd gh = prev * w_hh.value() + b_hh.value().row(0);
    for (Index j = 0; j < hidden; ++j) {
      const double rj = detail::sigmoid(gi(t, j) + gh[j]);
      const double zj = detail::sigmoid(gi(t, hidden + j) + gh[hidden + j]);
      const double nj = std::tanh(gi(t, 2 * hidden + j) + rj * gh[2 * hidden + j]);
      r(t, j) = rj;
      z(t, j) = zj;
      n(t, j) = nj;
      hn(t, j) = gh[2 * hidden + j];
      h(t, j) = (1.0 - zj) * nj + zj * prev[j];
    }
    prev = h.row(t);
  }

  Matrix out = h;
  return x.tape()->record(
      std::move(out), {x, w_ih, w_hh, b_ih, b_hh},
      [x, w_ih, w_hh, b_ih, b_hh, r = std::move(r), z = std::move(z), n = std::move(n), hn = std::move(hn),
       h = std::move(h), steps, hidden](Tape& t, const Matrix& g) {
        Matrix dgi(steps, 3 * hidden);
        Matrix dgh(steps, 3 * hidden);
        Eigen::RowVectorXd dh = Eigen::RowVectorXd::Zero(hidden);
        for (Index s = steps; s-- > 0;) {
          dh += g.row(s);
          Eigen::RowVectorXd dh_prev(hidden);
          for (Index j = 0; j < hidden; ++j) {
            const double hprev = s > 0 ? h(s - 1, j) : 0.0;
            const double dn = dh[j] * (1.0 - z(s, j));
            const double dz = dh[j] * (hprev - n(s, j));
            const double dan = dn * (1.0 - n(s, j) * n(s, j));
            const double dr = dan * hn(s, j);
            const double dar = dr * r(s, j) * (1.0 - r(s, j));
            const double daz = dz * z(s, j) * (1.0 - z(s, j));
            dgi(s, j) = dar;
            dgi(s, hidden + j) = daz;
            dgi(s, 2 * hidden + j) = dan;
            dgh(s, j) = dar;
            dgh(s, hidden + j) = daz;
            dgh(s, 2 * hidden + j) = dan * r(s, j);
            dh_prev[j] = dh[j] * z(s, j);
          }
          dh_prev += dgh.row(s) * w_hh.value().transpose();
          dh = dh_prev;
        }
        if (t.requires_grad(x)) t.accumulate(x, dgi * w_ih.value().transpose());
        if (t.requires_grad(w_ih)) t.accumulate(w_ih, x.value().transpose() * dgi);
        if (t.requires_grad(b_ih)) t.accumulate(b_ih, dgi.colwise().sum());
        if (t.requires_grad(b_hh)) t.accumulate(b_hh, dgh.colwise().sum());
        if (t.requires_grad(w_hh)) {
          // h_{s-1} for s = 0 is zero, so only rows 1.. contribute.
          Matrix dw = Matrix::Zero(hidden, 3 * hidden);
          if (steps > 1) dw = h.topRows(steps - 1).transpose() * dgh.bottomRows(steps - 1);
          t.accumulate(w_hh, dw);
        }
      });
}

namespace detail {

// Column-wise forward DFT along rows of a real matrix: returns [Re | Im].
inline Matrix dft_time_value(const Matrix& re_in, const Matrix* im_in) {
  const Index n = re_in.rows(), d = re_in.cols();
  Matrix out(n, 2 * d);
  std::vector<fft::Complex> buf(static_cast<std::size_t>(n));
  for (Index c = 0; c < d; ++c) {
    for (Index i = 0; i < n; ++i) buf[static_cast<std::size_t>(i)] = {re_in(i, c), im_in ? (*im_in)(i, c) : 0.0};
    const auto spec = fft::forward(buf);
    for (Index i = 0; i < n; ++i) {
      out(i, c) = spec[static_cast<std::size_t>(i)].real();
      out(i, d + c) = spec[static_cast<std::size_t>(i)].imag();
    }
  }
  return out;
}

}  // namespace detail

/// Unnormalized DFT along the time (row) axis of each column of a real T x D
/// input. Output is T x 2D: real parts in the first D columns, imaginary in the rest.
inline Var dft_time(const Var& a) {
  const Index d = a.cols();
  return a.tape()->record(detail::dft_time_value(a.value(), nullptr), {a}, [a, d](Tape& t, const Matrix& g) {
    // dL/dx_n = Re( FFT(g_re - j g_im)[n] ).
    const Matrix g_re = g.leftCols(d);
    const Matrix g_im_neg = -g.rightCols(d);
    const Matrix back = detail::dft_time_value(g_re, &g_im_neg);
    t.accumulate(a, back.leftCols(d));
  });
}

/// 1-D convolution over a (C_in x L) signal. weight: C_out x (C_in * kernel), laid
/// out channel-major then tap; bias: C_out x 1. Zero padding on both ends.
inline Var conv1d(const Var& x, const Var& weight, const Var& bias, Index kernel, Index stride, Index pad) {
  const Index c_in = x.rows(), len = x.cols();
  const Index c_out = weight.rows();
  require(weight.cols() == c_in * kernel && bias.rows() == c_out && bias.cols() == 1,
          ErrorKind::invalid_argument, "conv1d: parameter shape mismatch");
  const Index out_len = (len + 2 * pad - kernel) / stride + 1;
  require(out_len >= 1, ErrorKind::invalid_argument, "conv1d: input too short");

  Matrix cols = Matrix::Zero(c_in * kernel, out_len);
  for (Index c = 0; c < c_in; ++c) {
    for (Index k = 0; k < kernel; ++k) {
      for (Index o = 0; o < out_len; ++o) {
        const Index src = o * stride + k - pad;
        if (src >= 0 && src < len) cols(c * kernel + k, o) = x.value()(c, src);
      }
    }
  }
  Matrix y = (weight.value() * cols).colwise() + bias.value().col(0);
  return x.tape()->record(
      std::move(y), {x, weight, bias},
      [x, weight, bias, cols = std::move(cols), kernel, stride, pad, c_in, len, out_len](Tape& t, const Matrix& g) {
        if (t.requires_grad(weight)) t.accumulate(weight, g * cols.transpose());
        if (t.requires_grad(bias)) t.accumulate(bias, g.rowwise().sum());
        if (!t.requires_grad(x)) return;
        const Matrix dcols = weight.value().transpose() * g;
        Matrix dx = Matrix::Zero(c_in, len);
        for (Index c = 0; c < c_in; ++c) {
          for (Index k = 0; k < kernel; ++k) {
            for (Index o = 0; o < out_len; ++o) {
              const Index src = o * stride + k - pad;
              if (src >= 0 && src < len) dx(c, src) += dcols(c * kernel + k, o);
            }
          }
        }
        t.accumulate(x, dx);
      });
}

/// Nearest-neighbour 2x upsampling along columns, cropped to `out_len` (<= 2L).
inline Var upsample2(const Var& x, Index out_len) {
  const Index len = x.cols();
  require(out_len >= 1 && out_len <= 2 * len, ErrorKind::invalid_argument, "upsample2: bad output length");
  Matrix y(x.rows(), out_len);
  for (Index j = 0; j < out_len; ++j) y.col(j) = x.value().col(j / 2);
  return x.tape()->record(std::move(y), {x}, [x, len, out_len](Tape& t, const Matrix& g) {
    Matrix dx = Matrix::Zero(x.rows(), len);
    for (Index j = 0; j < out_len; ++j) dx.col(j / 2) += g.col(j);
    t.accumulate(x, dx);
  });
}

/// Blocks gradient flow; the value is carried as a constant.
inline Var detach(const Var& a) { return a.tape()->constant(a.value()); }

}  // namespace crossfusor::ad
