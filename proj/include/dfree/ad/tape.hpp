#pragma once

#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace dfree::ad {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

class Tape;
class ParamStore;
struct Param;

// Handle to a node on a tape. Only meaningful together with its tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
};

// Reverse-mode tape over 2-D double tensors. Nodes are appended in
// evaluation order, so reverse creation order is a valid topological order
// for the backward sweep. A tape built with requires_grad = false records
// values only and is cheap to use for inference.
class Tape {
 public:
  using Backward = std::function<void(Tape&, int self)>;

  explicit Tape(bool requires_grad = true) : requires_grad_(requires_grad) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool requires_grad() const { return requires_grad_; }
  std::size_t size() const { return nodes_.size(); }

  Var constant(Matrix value);
  // Leaf bound to a parameter; backward() accumulates into its grad slot.
  // Repeated requests for the same name return the same node.
  Var param(ParamStore& store, const std::string& name);

  const Matrix& value(Var v) const;
  double scalar(Var v) const;
  // Gradient of the last backward() target with respect to v (zeros if v
  // did not influence it).
  Matrix grad(Var v) const;

  // Seeds d(loss)/d(loss) = 1 for a 1x1 node, sweeps the tape in reverse and
  // adds parameter gradients into their ParamStore slots.
  void backward(Var loss);

  // Used by op implementations.
  Var push(Matrix value, Backward backward);
  Matrix& grad_acc(int id);

 private:
  struct Node {
    Matrix value;
    const Matrix* ref = nullptr;
    Param* param = nullptr;
    Matrix grad;
    Backward backward;
  };

  bool requires_grad_;
  std::vector<Node> nodes_;
  std::unordered_map<const Param*, int> param_nodes_;
};

// ---- primitives ----------------------------------------------------------
// All ops throw ShapeMismatch on incompatible operands.

Var matmul(Var a, Var b);
// a + b for equal shapes, or a (n x m) + b (1 x m) broadcast over rows.
Var add(Var a, Var b);
Var sub(Var a, Var b);
// Elementwise product, equal shapes.
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
// Multiplies row i by the constant factors[i] (used for masks).
Var scale_rows(Var a, const std::vector<double>& factors);
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var slice_rows(Var a, Eigen::Index begin, Eigen::Index count);
Var slice_cols(Var a, Eigen::Index begin, Eigen::Index count);
// Row i of the result is table.row(indices[i]).
Var embedding_lookup(Var table, const std::vector<int>& indices);
Var tanh(Var a);
Var sigmoid(Var a);
Var relu(Var a);
Var exp(Var a);
// Values outside [lo, hi] are clamped and pass no gradient.
Var clamp(Var a, double lo, double hi);
Var minimum(Var a, Var b);
// Row-wise softmax / log-softmax.
Var softmax(Var a);
Var log_softmax(Var a);
// Column vector with a(i, indices[i]).
Var gather_cols(Var a, const std::vector<int>& indices);
Var sum(Var a);
Var mean(Var a);
// sum(a .* w) / sum(w) with constant weights shaped like a; zero when all
// weights vanish.
Var weighted_mean(Var a, const Matrix& weights);

// Single GRU step with gates ordered (reset, update, candidate):
//   gx = x W_i + b_i (n x 3H, precomputed by the caller)
//   gh = h W_h + b_h
//   r = sig(gx_r + gh_r), z = sig(gx_z + gh_z), c = tanh(gx_c + r .* gh_c)
//   h' = (1 - z) .* c + z .* h
Var gru_cell(Var gx, Var h, Var w_h, Var b_h);

// Convenience wrapper taking the raw input x and the input weights.
Var gru_cell(Var x, Var h, Var w_i, Var b_i, Var w_h, Var b_h);

// Elementwise focal loss on probabilities, clamped to [1e-7, 1 - 1e-7]:
//   c = 1: -alpha (1 - p)^gamma ln p
//   c = 0: -(1 - alpha) p^gamma ln(1 - p)
// `labels` has one entry per element of p (row-major).
Var focal_loss(Var p, const std::vector<double>& labels, double gamma, double alpha);

}  // namespace dfree::ad
