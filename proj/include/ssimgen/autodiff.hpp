#pragma once

#include "ssimgen/error.hpp"
#include "ssimgen/ssim.hpp"

#include <Eigen/Dense>

#include <functional>
#include <span>
#include <vector>

namespace ssimgen::ad {

/// Tensors are dense 2-D matrices; vectors are 1 x n or n x 1.
using Matrix = Eigen::MatrixXd;

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const;
  int id() const { return id_; }
  Tape* tape() const { return tape_; }

 private:
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
  friend class Tape;
};

/// Records operations in creation order, which is a topological order, so
/// backward is a single reverse sweep that visits each node once.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, int self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Differentiable input.
  Var leaf(Matrix value);
  /// Input that never receives a gradient.
  Var constant(Matrix value);
  Var constant(double value);

  /// Appends a node computed from `parents`. Throws NonFinite when `value`
  /// carries NaN or Inf.
  Var record(Matrix value, std::vector<int> parents, BackwardFn backward);

  /// Reverse accumulation from a 1 x 1 output. Resets previous gradients.
  void backward(Var output);

  /// Gradient of the last backward output with respect to `v` (zeros when
  /// `v` was not reached).
  Matrix grad(Var v) const;

  const Matrix& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  const Matrix& grad_of(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }
  bool requires_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }
  void accumulate(int id, const Matrix& contribution);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::vector<int> parents;
    BackwardFn backward;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
};

// --- elementwise with broadcasting -------------------------------------------
// Binary ops follow numpy broadcasting over the two dimensions: each
// dimension must match or be 1 on one side.

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var neg(Var a);
Var scale(Var a, double k);
Var shift(Var a, double k);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator/(Var a, Var b) { return div(a, b); }
inline Var operator-(Var a) { return neg(a); }
inline Var operator+(Var a, double k) { return shift(a, k); }
inline Var operator+(double k, Var a) { return shift(a, k); }
inline Var operator-(Var a, double k) { return shift(a, -k); }
inline Var operator-(double k, Var a) { return shift(neg(a), k); }
inline Var operator*(Var a, double k) { return scale(a, k); }
inline Var operator*(double k, Var a) { return scale(a, k); }

/// Explicit broadcast of a 1 x 1, 1 x c or r x 1 tensor to rows x cols.
Var broadcast(Var a, Eigen::Index rows, Eigen::Index cols);

// --- unary ------------------------------------------------------------------

Var square(Var a);
/// DomainError below -1e-12; values in [-1e-12, 0) are treated as 0.
Var sqrt(Var a);
Var exp(Var a);
/// DomainError below -1e-12.
Var log(Var a);
Var sigmoid(Var a);
Var tanh(Var a);
Var relu(Var a);
/// log(1 + exp(a)), evaluated stably.
Var softplus(Var a);

// --- linear algebra and reductions ------------------------------------------

Var matmul(Var a, Var b);
Var transpose(Var a);
/// x W + b with b a 1 x out row broadcast over the rows of x.
Var affine(Var x, Var w, Var b);

Var sum(Var a);
Var mean(Var a);
/// Per-row sums (r x 1) and per-column sums (1 x c).
Var row_sums(Var a);
Var col_sums(Var a);
Var row_means(Var a);
Var col_means(Var a);
/// Sample variance of all entries, 1/(q-1) normalizer.
Var variance(Var a);
/// Per-row sample variances (r x 1), 1/(q-1) normalizer.
Var row_variances(Var a);

// --- structure --------------------------------------------------------------

Var concat_cols(Var a, Var b);
Var concat_rows(Var a, Var b);
Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
Var slice_rows(Var a, Eigen::Index start, Eigen::Index count);
/// Columns picked by index; gradients scatter-add back.
Var gather_cols(Var a, const std::vector<Eigen::Index>& columns);
/// Column-major reinterpretation to rows x cols.
Var reshape(Var a, Eigen::Index rows, Eigen::Index cols);

// --- SSIM composites ----------------------------------------------------------

/// Squared zero-mean SSIM distance between two blocks, both centered inside
/// the graph: |x - y|^2 / (|x|^2 + |y|^2 + c).
Var ssim_dist2_diff(Var x, Var y, double c);

/// Column indices (row-major flattening) of every window of an image.
std::vector<std::vector<Eigen::Index>> window_columns(Eigen::Index height, Eigen::Index width, WindowSpec spec);

/// Row-paired images (B x height*width each): per-image sum over windows of
/// the squared zero-mean SSIM distance. Returns B x 1. `centered` = false is
/// the uncentered approximation.
Var patch_ssim_dist2(Var x, Var y, Eigen::Index height, Eigen::Index width, WindowSpec spec, double c,
                     bool centered = true);

/// All-pairs image distances D(i,j) = sqrt(sum over windows of squared
/// zero-mean SSIM distance) over the rows of z (N x height*width). The
/// diagonal is exactly zero; off-diagonal radicands get `smoothing` added so
/// the square root stays differentiable.
Var pairwise_ssim_distance(Var z, Eigen::Index height, Eigen::Index width, WindowSpec spec, double c,
                           double smoothing = 1e-12);

/// -1/2 H D H.
Var double_center(Var d);

/// exp(-gamma |z_i - z_j|^2) over rows of z.
Var rbf_gram(Var z, double gamma);

/// Biased MMD^2 of a pooled Gram whose first nx rows are X: w^T K w with
/// w = (1/nx, ..., -1/ny, ...). Not clamped.
Var mmd2_biased_pooled(Var k, Eigen::Index nx);

// --- checking and optimization ----------------------------------------------

/// Builds a scalar graph from a leaf holding the evaluation point.
using ScalarGraph = std::function<Var(Tape&, Var)>;

/// Max over coordinates of |analytic - central difference| / max(1, |analytic|).
double grad_check(const ScalarGraph& f, const Matrix& point, double eps = 1e-5);

/// Value and gradient of a scalar graph at a point.
std::pair<double, Matrix> value_and_grad(const ScalarGraph& f, const Matrix& point);

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  std::vector<Matrix> m;
  std::vector<Matrix> v;
};

/// Bias-corrected Adam update applied in place.
void adam_step(std::span<Matrix> params, std::span<const Matrix> grads, AdamState& state);

}  // namespace ssimgen::ad
