#pragma once

#include <cstdint>
#include <vector>

#include "stagecost/tensor.hpp"

namespace stagecost {

/// Handle to a node on a Tape. Only valid for the tape that created it.
struct Var {
  int32_t id = -1;
  bool valid() const { return id >= 0; }
};

/// Reverse-mode tape over dense tensors.
///
/// Records exactly the primitives the model and losses need. Nodes are
/// stored in creation (topological) order; one backward pass populates a
/// gradient for every parameter reachable from the loss node. All loops
/// run in a fixed serial order, so evaluating the same graph twice yields
/// bitwise-identical values and gradients.
class Tape {
 public:
  /// Leaf that never receives a gradient (inputs, targets).
  Var constant(Tensor value);
  /// Leaf with a tracked gradient (trainable parameter).
  Var param(Tensor value);

  /// C[m,n] = A[m,k] * B[k,n].
  Var matmul(Var a, Var b);
  /// Elementwise sum, shapes must match.
  Var add(Var a, Var b);
  /// Row broadcast: x[m,n] + b[n].
  Var add_bias(Var x, Var b);
  /// Elementwise max(0, x); subgradient at 0 is 0.
  Var relu(Var x);
  /// Mean over rows of -log softmax(logits)[target]; fused log-sum-exp
  /// with max subtraction.
  Var softmax_cross_entropy(Var logits, std::vector<int32_t> targets);
  /// 0.5 * mean((pred - target)^2) over all elements.
  Var l2_loss(Var pred, Var target);
  /// Sum of squared elements (scalar output).
  Var sum_squares(Var x);
  /// c * x elementwise.
  Var scale(Var x, double c);

  const Tensor& value(Var v) const;
  /// Gradient of the last backward() loss w.r.t. v. Parameters always have
  /// one after backward(); other nodes only if they were reached.
  const Tensor& grad(Var v) const;
  bool has_grad(Var v) const;

  /// Reverse sweep from a scalar loss node recorded on this tape.
  void backward(Var loss);

  /// Recompute every forward value from the recorded operations, in order.
  void replay();

  size_t size() const { return nodes_.size(); }

 private:
  enum class Op : uint8_t {
    kConstant,
    kParam,
    kMatMul,
    kAdd,
    kAddBias,
    kRelu,
    kSoftmaxCrossEntropy,
    kL2Loss,
    kSumSquares,
    kScale,
  };

  struct Node {
    Op op;
    int32_t a = -1;
    int32_t b = -1;
    double c = 0.0;                 // scale factor
    std::vector<int32_t> targets;   // cross-entropy class indices
    Tensor value;
    Tensor aux;                     // cross-entropy: softmax probabilities
    Tensor grad;                    // empty until reached by backward
    bool requires_grad = false;
  };

  Var push(Node node);
  const Node& node(Var v) const;
  void compute(Node& n);
  void accumulate(Node& n);

  std::vector<Node> nodes_;
};

}  // namespace stagecost
