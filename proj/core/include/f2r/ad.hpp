#pragma once

#include <Eigen/Dense>

#include <functional>
#include <utility>
#include <vector>

namespace f2r::ad {

using Matrix = Eigen::MatrixXd;

/// Handle to a node on a Tape. Only meaningful together with the tape that
/// created it.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Reverse-mode automatic differentiation over dense double matrices.
///
/// A Tape records one forward computation as a sequence of nodes; backward()
/// replays the recorded pullbacks in reverse order and accumulates gradients
/// into every node that was created with (or inherits) requires_grad. One tape
/// per loss evaluation; tapes are cheap to discard.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// New leaf node. Gradients flow into it only when requires_grad is set.
  Var leaf(Matrix value, bool requires_grad = false);

  // Elementwise / broadcast arithmetic.
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var add_rowwise(Var a, Var row);  // adds a 1 x C row to every row of a
  Var scale(Var a, double s);
  Var hadamard(Var a, Var b);
  Var log(Var a);                // caller guarantees positive entries
  Var clamp_min(Var a, double lo);

  // Linear algebra.
  Var matmul(Var a, Var b);     // A * B
  Var matmul_nt(Var a, Var b);  // A * B^T

  // Shape ops.
  Var gather_rows(Var table, std::vector<int> ids);
  Var concat_rows(const std::vector<Var>& parts);
  Var concat_cols(const std::vector<Var>& parts);
  Var slice_rows(Var a, int first, int count);
  Var slice_cols(Var a, int first, int count);
  Var gather_coeffs(Var a, std::vector<std::pair<int, int>> rc);  // k x 1

  // Reductions.
  Var sum(Var a);   // 1 x 1
  Var mean(Var a);  // 1 x 1

  // Nonlinearities.
  Var softmax_rows(Var a);
  Var log_softmax_rows(Var a);
  Var gelu(Var a);
  Var layer_norm_rows(Var a, Var gain, Var bias);  // gain, bias: 1 x C

  /// Seeds d(root)/d(root) = 1 and runs all pullbacks in reverse order.
  /// root must be 1 x 1.
  void backward(Var root);

  const Matrix& value(Var v) const { return node(v).value; }
  /// Gradient accumulated by the last backward(); zero matrix if the node
  /// did not contribute to the root.
  Matrix grad(Var v) const;
  bool requires_grad(Var v) const { return node(v).requires_grad; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node;
  using Pullback = std::function<void(const Node&)>;

  struct Node {
    Matrix value;
    Matrix grad;  // allocated lazily during backward
    Pullback pullback;
    bool requires_grad = false;
  };

  const Node& node(Var v) const;
  Node& node(Var v);
  Var push(Matrix value, bool requires_grad, Pullback pullback);
  /// Gradient buffer of node id, allocated on first touch.
  Matrix& gbuf(int id);
  bool has_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad.size() != 0; }

  static constexpr double kLayerNormEps = 1e-5;

  std::vector<Node> nodes_;
};

}  // namespace f2r::ad
