#include "ssimgen/autodiff.hpp"

#include "ssimgen/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace ssimgen::ad {

const Matrix& Var::value() const {
  if (!tape_) throw Error(ErrorCode::InvalidParam, "unbound Var");
  return tape_->value(id_);
}

double Var::scalar() const {
  const Matrix& v = value();
  if (v.size() != 1) throw Error(ErrorCode::NotScalarOutput, "tensor is not 1 x 1");
  return v(0, 0);
}

Var Tape::leaf(Matrix value) {
  if (!value.allFinite()) throw Error(ErrorCode::NonFinite, "leaf holds NaN or Inf");
  nodes_.push_back(Node{std::move(value), {}, {}, {}, true});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::constant(Matrix value) {
  if (!value.allFinite()) throw Error(ErrorCode::NonFinite, "constant holds NaN or Inf");
  nodes_.push_back(Node{std::move(value), {}, {}, {}, false});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::constant(double value) { return constant(Matrix::Constant(1, 1, value)); }

Var Tape::record(Matrix value, std::vector<int> parents, BackwardFn backward) {
  if (!value.allFinite()) throw Error(ErrorCode::NonFinite, "operation produced NaN or Inf");
  bool needs = false;
  for (int p : parents) needs = needs || requires_grad(p);
  Node node{std::move(value), {}, std::move(parents), {}, needs};
  if (needs) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

void Tape::accumulate(int id, const Matrix& contribution) {
  Node& node = nodes_[static_cast<std::size_t>(id)];
  if (!node.requires_grad) return;
  if (!contribution.allFinite()) throw Error(ErrorCode::NonFinite, "gradient became NaN or Inf");
  if (node.grad.size() == 0)
    node.grad = contribution;
  else
    node.grad += contribution;
}

void Tape::backward(Var output) {
  if (output.tape_ != this) throw Error(ErrorCode::InvalidParam, "output belongs to another tape");
  if (value(output.id_).size() != 1) throw Error(ErrorCode::NotScalarOutput, "backward needs a 1 x 1 output");
  for (auto& n : nodes_) n.grad.resize(0, 0);
  if (!requires_grad(output.id_)) return;
  nodes_[static_cast<std::size_t>(output.id_)].grad = Matrix::Ones(1, 1);
  for (int id = output.id_; id >= 0; --id) {
    Node& node = nodes_[static_cast<std::size_t>(id)];
    if (node.grad.size() == 0 || !node.backward) continue;
    node.backward(*this, id);
  }
}

Matrix Tape::grad(Var v) const {
  const Node& node = nodes_[static_cast<std::size_t>(v.id_)];
  if (node.grad.size() == 0) return Matrix::Zero(node.value.rows(), node.value.cols());
  return node.grad;
}

namespace {

Tape& tape_of(Var a, Var b) {
  if (!a.tape() || a.tape() != b.tape()) throw Error(ErrorCode::InvalidParam, "operands live on different tapes");
  return *a.tape();
}

Tape& tape_of(Var a) {
  if (!a.tape()) throw Error(ErrorCode::InvalidParam, "unbound Var");
  return *a.tape();
}

Eigen::Index broadcast_dim(Eigen::Index x, Eigen::Index y) {
  if (x == y) return x;
  if (x == 1) return y;
  if (y == 1) return x;
  throw Error(ErrorCode::ShapeMismatch, "incompatible shapes " + std::to_string(x) + " vs " + std::to_string(y));
}

Matrix expand(const Matrix& m, Eigen::Index rows, Eigen::Index cols) {
  if (m.rows() == rows && m.cols() == cols) return m;
  if (m.rows() != rows && m.rows() != 1) throw Error(ErrorCode::ShapeMismatch, "cannot broadcast rows");
  if (m.cols() != cols && m.cols() != 1) throw Error(ErrorCode::ShapeMismatch, "cannot broadcast cols");
  return m.replicate(rows / m.rows(), cols / m.cols());
}

// Sums a gradient down to the shape of a broadcast operand.
Matrix reduce_to(const Matrix& g, Eigen::Index rows, Eigen::Index cols) {
  if (g.rows() == rows && g.cols() == cols) return g;
  Matrix out = g;
  if (rows == 1 && out.rows() != 1) out = out.colwise().sum().eval();
  if (cols == 1 && out.cols() != 1) out = out.rowwise().sum().eval();
  return out;
}

template <typename Forward, typename GradA, typename GradB>
Var binary(Var a, Var b, Forward fwd, GradA grad_a, GradB grad_b) {
  Tape& t = tape_of(a, b);
  const Eigen::Index r = broadcast_dim(a.rows(), b.rows());
  const Eigen::Index c = broadcast_dim(a.cols(), b.cols());
  Matrix ea = expand(a.value(), r, c);
  Matrix eb = expand(b.value(), r, c);
  Matrix out = fwd(ea, eb);
  const int ia = a.id(), ib = b.id();
  const Eigen::Index ar = a.rows(), ac = a.cols(), br = b.rows(), bc = b.cols();
  return t.record(std::move(out), {ia, ib}, [=](Tape& tp, int self) {
    const Matrix& g = tp.grad_of(self);
    const Matrix xa = expand(tp.value(ia), r, c);
    const Matrix xb = expand(tp.value(ib), r, c);
    if (tp.requires_grad(ia)) tp.accumulate(ia, reduce_to(grad_a(g, xa, xb), ar, ac));
    if (tp.requires_grad(ib)) tp.accumulate(ib, reduce_to(grad_b(g, xa, xb), br, bc));
  });
}

template <typename Forward, typename Derivative>
Var unary(Var a, Forward fwd, Derivative dfdx) {
  Tape& t = tape_of(a);
  const int ia = a.id();
  return t.record(fwd(a.value()), {ia}, [=](Tape& tp, int self) {
    tp.accumulate(ia, dfdx(tp.grad_of(self), tp.value(ia), tp.value(self)));
  });
}

}  // namespace

Var add(Var a, Var b) {
  return binary(
      a, b, [](const Matrix& x, const Matrix& y) -> Matrix { return x + y; },
      [](const Matrix& g, const Matrix&, const Matrix&) -> Matrix { return g; },
      [](const Matrix& g, const Matrix&, const Matrix&) -> Matrix { return g; });
}

Var sub(Var a, Var b) {
  return binary(
      a, b, [](const Matrix& x, const Matrix& y) -> Matrix { return x - y; },
      [](const Matrix& g, const Matrix&, const Matrix&) -> Matrix { return g; },
      [](const Matrix& g, const Matrix&, const Matrix&) -> Matrix { return -g; });
}

Var mul(Var a, Var b) {
  return binary(
      a, b, [](const Matrix& x, const Matrix& y) -> Matrix { return x.cwiseProduct(y); },
      [](const Matrix& g, const Matrix&, const Matrix& y) -> Matrix { return g.cwiseProduct(y); },
      [](const Matrix& g, const Matrix& x, const Matrix&) -> Matrix { return g.cwiseProduct(x); });
}

Var div(Var a, Var b) {
  return binary(
      a, b, [](const Matrix& x, const Matrix& y) -> Matrix { return x.cwiseQuotient(y); },
      [](const Matrix& g, const Matrix&, const Matrix& y) -> Matrix { return g.cwiseQuotient(y); },
      [](const Matrix& g, const Matrix& x, const Matrix& y) -> Matrix {
        return (-g.array() * x.array() / y.array().square()).matrix();
      });
}

Var neg(Var a) {
  return unary(
      a, [](const Matrix& x) -> Matrix { return -x; },
      [](const Matrix& g, const Matrix&, const Matrix&) -> Matrix { return -g; });
}

Var scale(Var a, double k) {
  return unary(
      a, [k](const Matrix& x) -> Matrix { return k * x; },
      [k](const Matrix& g, const Matrix&, const Matrix&) -> Matrix { return k * g; });
}

Var shift(Var a, double k) {
  return unary(
      a, [k](const Matrix& x) -> Matrix { return (x.array() + k).matrix(); },
      [](const Matrix& g, const Matrix&, const Matrix&) -> Matrix { return g; });
}

Var broadcast(Var a, Eigen::Index rows, Eigen::Index cols) {
  Tape& t = tape_of(a);
  const int ia = a.id();
  const Eigen::Index ar = a.rows(), ac = a.cols();
  return t.record(expand(a.value(), rows, cols), {ia},
                  [=](Tape& tp, int self) { tp.accumulate(ia, reduce_to(tp.grad_of(self), ar, ac)); });
}

Var square(Var a) {
  return unary(
      a, [](const Matrix& x) -> Matrix { return x.array().square().matrix(); },
      [](const Matrix& g, const Matrix& x, const Matrix&) -> Matrix { return 2.0 * g.cwiseProduct(x); });
}

Var sqrt(Var a) {
  if (a.value().size() && a.value().minCoeff() < -1e-12)
    throw Error(ErrorCode::DomainError, "sqrt of a negative value");
  return unary(
      a, [](const Matrix& x) -> Matrix { return x.cwiseMax(0.0).cwiseSqrt(); },
      [](const Matrix& g, const Matrix&, const Matrix& y) -> Matrix {
        return (0.5 * g.array() / y.array()).matrix();
      });
}

Var exp(Var a) {
  return unary(
      a, [](const Matrix& x) -> Matrix { return x.array().exp().matrix(); },
      [](const Matrix& g, const Matrix&, const Matrix& y) -> Matrix { return g.cwiseProduct(y); });
}

Var log(Var a) {
  if (a.value().size() && a.value().minCoeff() < -1e-12)
    throw Error(ErrorCode::DomainError, "log of a negative value");
  return unary(
      a, [](const Matrix& x) -> Matrix { return x.cwiseMax(0.0).array().log().matrix(); },
      [](const Matrix& g, const Matrix& x, const Matrix&) -> Matrix { return g.cwiseQuotient(x); });
}

Var sigmoid(Var a) {
  return unary(
      a,
      [](const Matrix& x) -> Matrix {
        return x.unaryExpr([](double v) {
          if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
          const double e = std::exp(v);
          return e / (1.0 + e);
        });
      },
      [](const Matrix& g, const Matrix&, const Matrix& y) -> Matrix {
        return (g.array() * y.array() * (1.0 - y.array())).matrix();
      });
}

Var tanh(Var a) {
  return unary(
      a, [](const Matrix& x) -> Matrix { return x.array().tanh().matrix(); },
      [](const Matrix& g, const Matrix&, const Matrix& y) -> Matrix {
        return (g.array() * (1.0 - y.array().square())).matrix();
      });
}

Var relu(Var a) {
  return unary(
      a, [](const Matrix& x) -> Matrix { return x.cwiseMax(0.0); },
      [](const Matrix& g, const Matrix& x, const Matrix&) -> Matrix {
        return (x.array() > 0.0).select(g, 0.0);
      });
}

Var softplus(Var a) {
  return unary(
      a,
      [](const Matrix& x) -> Matrix {
        return x.unaryExpr([](double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))); });
      },
      [](const Matrix& g, const Matrix& x, const Matrix&) -> Matrix {
        const Matrix s = x.unaryExpr([](double v) {
          if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
          const double e = std::exp(v);
          return e / (1.0 + e);
        });
        return g.cwiseProduct(s);
      });
}

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  if (a.cols() != b.rows()) throw Error(ErrorCode::ShapeMismatch, "matmul inner dimensions differ");
  const int ia = a.id(), ib = b.id();
  return t.record(a.value() * b.value(), {ia, ib}, [=](Tape& tp, int self) {
    const Matrix& g = tp.grad_of(self);
    if (tp.requires_grad(ia)) tp.accumulate(ia, g * tp.value(ib).transpose());
    if (tp.requires_grad(ib)) tp.accumulate(ib, tp.value(ia).transpose() * g);
  });
}

Var transpose(Var a) {
  Tape& t = tape_of(a);
  const int ia = a.id();
  return t.record(a.value().transpose(), {ia},
                  [=](Tape& tp, int self) { tp.accumulate(ia, tp.grad_of(self).transpose()); });
}

Var affine(Var x, Var w, Var b) {
  if (b.rows() != 1 || b.cols() != w.cols()) throw Error(ErrorCode::ShapeMismatch, "bias must be 1 x out");
  return add(matmul(x, w), b);
}

Var sum(Var a) {
  Tape& t = tape_of(a);
  const int ia = a.id();
  const Eigen::Index r = a.rows(), c = a.cols();
  return t.record(Matrix::Constant(1, 1, a.value().sum()), {ia}, [=](Tape& tp, int self) {
    tp.accumulate(ia, Matrix::Constant(r, c, tp.grad_of(self)(0, 0)));
  });
}

Var mean(Var a) {
  if (a.value().size() == 0) throw Error(ErrorCode::ShapeMismatch, "mean of empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

Var row_sums(Var a) {
  Tape& t = tape_of(a);
  const int ia = a.id();
  const Eigen::Index c = a.cols();
  return t.record(a.value().rowwise().sum(), {ia},
                  [=](Tape& tp, int self) { tp.accumulate(ia, tp.grad_of(self).replicate(1, c)); });
}

Var col_sums(Var a) {
  Tape& t = tape_of(a);
  const int ia = a.id();
  const Eigen::Index r = a.rows();
  return t.record(a.value().colwise().sum(), {ia},
                  [=](Tape& tp, int self) { tp.accumulate(ia, tp.grad_of(self).replicate(r, 1)); });
}

Var row_means(Var a) { return scale(row_sums(a), 1.0 / static_cast<double>(a.cols())); }
Var col_means(Var a) { return scale(col_sums(a), 1.0 / static_cast<double>(a.rows())); }

Var variance(Var a) {
  const auto q = a.value().size();
  if (q < 2) throw Error(ErrorCode::BlockTooSmall, "variance needs at least 2 entries");
  const Var centered = sub(a, mean(a));
  return scale(sum(square(centered)), 1.0 / static_cast<double>(q - 1));
}

Var row_variances(Var a) {
  if (a.cols() < 2) throw Error(ErrorCode::BlockTooSmall, "variance needs at least 2 entries");
  const Var centered = sub(a, row_means(a));
  return scale(row_sums(square(centered)), 1.0 / static_cast<double>(a.cols() - 1));
}

Var concat_cols(Var a, Var b) {
  Tape& t = tape_of(a, b);
  if (a.rows() != b.rows()) throw Error(ErrorCode::ShapeMismatch, "concat_cols needs equal rows");
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a.value(), b.value();
  const int ia = a.id(), ib = b.id();
  const Eigen::Index ac = a.cols(), bc = b.cols();
  return t.record(std::move(out), {ia, ib}, [=](Tape& tp, int self) {
    const Matrix& g = tp.grad_of(self);
    tp.accumulate(ia, g.leftCols(ac));
    tp.accumulate(ib, g.rightCols(bc));
  });
}

Var concat_rows(Var a, Var b) {
  Tape& t = tape_of(a, b);
  if (a.cols() != b.cols()) throw Error(ErrorCode::ShapeMismatch, "concat_rows needs equal cols");
  Matrix out(a.rows() + b.rows(), a.cols());
  out << a.value(), b.value();
  const int ia = a.id(), ib = b.id();
  const Eigen::Index ar = a.rows(), br = b.rows();
  return t.record(std::move(out), {ia, ib}, [=](Tape& tp, int self) {
    const Matrix& g = tp.grad_of(self);
    tp.accumulate(ia, g.topRows(ar));
    tp.accumulate(ib, g.bottomRows(br));
  });
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  Tape& t = tape_of(a);
  if (start < 0 || count < 0 || start + count > a.cols()) throw Error(ErrorCode::ShapeMismatch, "column slice out of range");
  const int ia = a.id();
  const Eigen::Index r = a.rows(), c = a.cols();
  return t.record(a.value().middleCols(start, count), {ia}, [=](Tape& tp, int self) {
    Matrix g = Matrix::Zero(r, c);
    g.middleCols(start, count) = tp.grad_of(self);
    tp.accumulate(ia, g);
  });
}

Var slice_rows(Var a, Eigen::Index start, Eigen::Index count) {
  Tape& t = tape_of(a);
  if (start < 0 || count < 0 || start + count > a.rows()) throw Error(ErrorCode::ShapeMismatch, "row slice out of range");
  const int ia = a.id();
  const Eigen::Index r = a.rows(), c = a.cols();
  return t.record(a.value().middleRows(start, count), {ia}, [=](Tape& tp, int self) {
    Matrix g = Matrix::Zero(r, c);
    g.middleRows(start, count) = tp.grad_of(self);
    tp.accumulate(ia, g);
  });
}

Var gather_cols(Var a, const std::vector<Eigen::Index>& columns) {
  Tape& t = tape_of(a);
  for (auto c : columns)
    if (c < 0 || c >= a.cols()) throw Error(ErrorCode::ShapeMismatch, "gathered column out of range");
  const int ia = a.id();
  const Eigen::Index r = a.rows(), c = a.cols();
  return t.record(a.value()(Eigen::all, columns), {ia}, [=](Tape& tp, int self) {
    const Matrix& g = tp.grad_of(self);
    Matrix out = Matrix::Zero(r, c);
    for (std::size_t k = 0; k < columns.size(); ++k) out.col(columns[k]) += g.col(static_cast<Eigen::Index>(k));
    tp.accumulate(ia, out);
  });
}

Var reshape(Var a, Eigen::Index rows, Eigen::Index cols) {
  Tape& t = tape_of(a);
  if (rows * cols != a.value().size()) throw Error(ErrorCode::ShapeMismatch, "reshape changes element count");
  const int ia = a.id();
  const Eigen::Index r = a.rows(), c = a.cols();
  return t.record(a.value().reshaped(rows, cols), {ia},
                  [=](Tape& tp, int self) { tp.accumulate(ia, tp.grad_of(self).reshaped(r, c)); });
}

// --- SSIM composites ----------------------------------------------------------

Var ssim_dist2_diff(Var x, Var y, double c) {
  if (x.rows() != y.rows() || x.cols() != y.cols()) throw Error(ErrorCode::ShapeMismatch, "blocks differ in shape");
  if (!(c > 0)) throw Error(ErrorCode::InvalidParam, "c must be positive");
  const Var xc = x - mean(x);
  const Var yc = y - mean(y);
  const Var num = sum(square(xc - yc));
  const Var den = sum(square(xc)) + sum(square(yc)) + c;
  return num / den;
}

std::vector<std::vector<Eigen::Index>> window_columns(Eigen::Index height, Eigen::Index width, WindowSpec spec) {
  const auto [rows, cols] = window_grid(height, width, spec);
  std::vector<std::vector<Eigen::Index>> out;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) {
      std::vector<Eigen::Index> idx;
      for (Eigen::Index dr = 0; dr < spec.window; ++dr)
        for (Eigen::Index dc = 0; dc < spec.window; ++dc)
          idx.push_back((r * spec.stride + dr) * width + c * spec.stride + dc);
      out.push_back(std::move(idx));
    }
  return out;
}

Var patch_ssim_dist2(Var x, Var y, Eigen::Index height, Eigen::Index width, WindowSpec spec, double c,
                     bool centered) {
  if (x.rows() != y.rows() || x.cols() != y.cols() || x.cols() != height * width)
    throw Error(ErrorCode::ShapeMismatch, "image batches differ in shape");
  if (!(c > 0)) throw Error(ErrorCode::InvalidParam, "c must be positive");
  Var total;
  for (const auto& cols : window_columns(height, width, spec)) {
    Var xp = gather_cols(x, cols);
    Var yp = gather_cols(y, cols);
    if (centered) {
      xp = xp - row_means(xp);
      yp = yp - row_means(yp);
    }
    const Var num = row_sums(square(xp - yp));
    const Var den = row_sums(square(xp)) + row_sums(square(yp)) + c;
    const Var d2 = num / den;
    total = total.tape() ? total + d2 : d2;
  }
  return total;
}

Var pairwise_ssim_distance(Var z, Eigen::Index height, Eigen::Index width, WindowSpec spec, double c,
                           double smoothing) {
  if (z.cols() != height * width) throw Error(ErrorCode::ShapeMismatch, "rows must be flattened images");
  Tape& t = tape_of(z);
  const Eigen::Index n = z.rows();
  Var total;
  for (const auto& cols : window_columns(height, width, spec)) {
    Var p = gather_cols(z, cols);
    p = p - row_means(p);
    const Var norms = row_sums(square(p));  // n x 1
    const Var gram = matmul(p, transpose(p));
    const Var pair_norms = norms + transpose(norms);  // n x n by broadcasting
    const Var num = pair_norms - 2.0 * gram;
    const Var d2 = num / (pair_norms + c);
    total = total.tape() ? total + d2 : d2;
  }
  const Var off_diagonal = t.constant(Matrix::Ones(n, n) - Matrix::Identity(n, n));
  // relu absorbs rounding below zero in |a|^2 + |b|^2 - 2 a.b.
  const Var radicand = relu(total * off_diagonal) + smoothing;
  return sqrt(radicand) * off_diagonal;
}

Var double_center(Var d) {
  if (d.rows() != d.cols()) throw Error(ErrorCode::ShapeMismatch, "distance matrix must be square");
  Tape& t = tape_of(d);
  const Var h = t.constant(centering_matrix(d.rows()));
  return -0.5 * matmul(matmul(h, d), h);
}

Var rbf_gram(Var z, double gamma) {
  if (!(gamma > 0)) throw Error(ErrorCode::InvalidParam, "gamma must be positive");
  const Var norms = row_sums(square(z));
  const Var sq = norms + transpose(norms) - 2.0 * matmul(z, transpose(z));
  return exp(-gamma * relu(sq));
}

Var mmd2_biased_pooled(Var k, Eigen::Index nx) {
  const Eigen::Index n = k.rows();
  if (k.cols() != n || nx < 1 || nx >= n) throw Error(ErrorCode::DimensionMismatch, "bad pooled Gram split");
  Tape& t = tape_of(k);
  Matrix w(n, 1);
  w.topRows(nx).setConstant(1.0 / static_cast<double>(nx));
  w.bottomRows(n - nx).setConstant(-1.0 / static_cast<double>(n - nx));
  const Var wv = t.constant(w);
  return matmul(matmul(transpose(wv), k), wv);
}

// --- checking and optimization ----------------------------------------------

std::pair<double, Matrix> value_and_grad(const ScalarGraph& f, const Matrix& point) {
  Tape tape;
  const Var x = tape.leaf(point);
  const Var y = f(tape, x);
  const double value = y.scalar();
  tape.backward(y);
  return {value, tape.grad(x)};
}

double grad_check(const ScalarGraph& f, const Matrix& point, double eps) {
  if (eps < 1e-7 || eps > 1e-3) throw Error(ErrorCode::InvalidParam, "eps must lie in [1e-7, 1e-3]");
  const Matrix analytic = value_and_grad(f, point).second;
  auto eval = [&](const Matrix& p) {
    Tape tape;
    return f(tape, tape.leaf(p)).scalar();
  };
  double worst = 0.0;
  Matrix probe = point;
  for (Eigen::Index k = 0; k < point.size(); ++k) {
    const double orig = probe.data()[k];
    probe.data()[k] = orig + eps;
    const double up = eval(probe);
    probe.data()[k] = orig - eps;
    const double down = eval(probe);
    probe.data()[k] = orig;
    const double numeric = (up - down) / (2.0 * eps);
    const double a = analytic.data()[k];
    worst = std::max(worst, std::abs(a - numeric) / std::max(1.0, std::abs(a)));
  }
  return worst;
}

void adam_step(std::span<Matrix> params, std::span<const Matrix> grads, AdamState& state) {
  if (params.size() != grads.size()) throw Error(ErrorCode::ShapeMismatch, "params and grads differ in count");
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.push_back(Matrix::Zero(p.rows(), p.cols()));
      state.v.push_back(Matrix::Zero(p.rows(), p.cols()));
    }
  }
  if (state.m.size() != params.size()) throw Error(ErrorCode::ShapeMismatch, "Adam state does not match params");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].rows() != grads[i].rows() || params[i].cols() != grads[i].cols() ||
        state.m[i].rows() != params[i].rows() || state.m[i].cols() != params[i].cols())
      throw Error(ErrorCode::ShapeMismatch, "parameter and gradient shapes differ");
    if (!grads[i].allFinite()) throw Error(ErrorCode::NonFinite, "non-finite gradient");
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grads[i];
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grads[i].cwiseAbs2();
    const auto m_hat = state.m[i].array() / bc1;
    const auto v_hat = state.v[i].array() / bc2;
    params[i].array() -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
  }
}

}  // namespace ssimgen::ad
