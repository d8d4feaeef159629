#include "stagecost/autodiff.hpp"

#include <cmath>
#include <string>

#include "stagecost/errors.hpp"

namespace stagecost {

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{static_cast<int32_t>(nodes_.size() - 1)};
}

const Tape::Node& Tape::node(Var v) const {
  if (!v.valid() || static_cast<size_t>(v.id) >= nodes_.size()) {
    throw ValidationError("variable is not recorded on this tape");
  }
  return nodes_[static_cast<size_t>(v.id)];
}

Var Tape::constant(Tensor value) {
  Node n;
  n.op = Op::kConstant;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::param(Tensor value) {
  Node n;
  n.op = Op::kParam;
  n.value = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

Var Tape::matmul(Var a, Var b) {
  const Node& na = node(a);
  const Node& nb = node(b);
  Node n;
  n.op = Op::kMatMul;
  n.a = a.id;
  n.b = b.id;
  n.requires_grad = na.requires_grad || nb.requires_grad;
  compute(n);
  return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
  const Node& na = node(a);
  const Node& nb = node(b);
  if (!na.value.same_shape(nb.value)) {
    throw ValidationError("add shape mismatch: " + na.value.shape_str() + " vs " +
                          nb.value.shape_str());
  }
  Node n;
  n.op = Op::kAdd;
  n.a = a.id;
  n.b = b.id;
  n.requires_grad = na.requires_grad || nb.requires_grad;
  compute(n);
  return push(std::move(n));
}

Var Tape::add_bias(Var x, Var b) {
  const Node& nx = node(x);
  const Node& nb = node(b);
  if (nx.value.rank() != 2 || nb.value.rank() != 1 || nx.value.cols() != nb.value.numel()) {
    throw ValidationError("add_bias shape mismatch: " + nx.value.shape_str() + " vs " +
                          nb.value.shape_str());
  }
  Node n;
  n.op = Op::kAddBias;
  n.a = x.id;
  n.b = b.id;
  n.requires_grad = nx.requires_grad || nb.requires_grad;
  compute(n);
  return push(std::move(n));
}

Var Tape::relu(Var x) {
  Node n;
  n.op = Op::kRelu;
  n.a = x.id;
  n.requires_grad = node(x).requires_grad;
  compute(n);
  return push(std::move(n));
}

Var Tape::softmax_cross_entropy(Var logits, std::vector<int32_t> targets) {
  const Node& nl = node(logits);
  if (nl.value.rank() != 2) {
    throw ValidationError("softmax_cross_entropy expects rank-2 logits, got " +
                          nl.value.shape_str());
  }
  int64_t batch = nl.value.rows();
  int64_t classes = nl.value.cols();
  if (static_cast<int64_t>(targets.size()) != batch) {
    throw ValidationError("softmax_cross_entropy: " + std::to_string(targets.size()) +
                          " targets for batch of " + std::to_string(batch));
  }
  for (int32_t t : targets) {
    if (t < 0 || t >= classes) {
      throw ValidationError("softmax_cross_entropy: target index " + std::to_string(t) +
                            " out of range [0," + std::to_string(classes) + ")");
    }
  }
  Node n;
  n.op = Op::kSoftmaxCrossEntropy;
  n.a = logits.id;
  n.targets = std::move(targets);
  n.requires_grad = nl.requires_grad;
  compute(n);
  return push(std::move(n));
}

Var Tape::l2_loss(Var pred, Var target) {
  const Node& np = node(pred);
  const Node& nt = node(target);
  if (!np.value.same_shape(nt.value)) {
    throw ValidationError("l2_loss shape mismatch: " + np.value.shape_str() + " vs " +
                          nt.value.shape_str());
  }
  Node n;
  n.op = Op::kL2Loss;
  n.a = pred.id;
  n.b = target.id;
  n.requires_grad = np.requires_grad || nt.requires_grad;
  compute(n);
  return push(std::move(n));
}

Var Tape::sum_squares(Var x) {
  Node n;
  n.op = Op::kSumSquares;
  n.a = x.id;
  n.requires_grad = node(x).requires_grad;
  compute(n);
  return push(std::move(n));
}

Var Tape::scale(Var x, double c) {
  Node n;
  n.op = Op::kScale;
  n.a = x.id;
  n.c = c;
  n.requires_grad = node(x).requires_grad;
  compute(n);
  return push(std::move(n));
}

void Tape::compute(Node& n) {
  switch (n.op) {
    case Op::kConstant:
    case Op::kParam:
      break;
    case Op::kMatMul: {
      n.value = stagecost::matmul(nodes_[n.a].value, nodes_[n.b].value);
      break;
    }
    case Op::kAdd: {
      const Tensor& a = nodes_[n.a].value;
      const Tensor& b = nodes_[n.b].value;
      n.value = a;
      for (size_t i = 0; i < n.value.values.size(); ++i) n.value.values[i] += b.values[i];
      break;
    }
    case Op::kAddBias: {
      const Tensor& x = nodes_[n.a].value;
      const Tensor& b = nodes_[n.b].value;
      n.value = x;
      int64_t cols = x.cols();
      for (int64_t i = 0; i < x.rows(); ++i) {
        double* row = n.value.values.data() + i * cols;
        for (int64_t j = 0; j < cols; ++j) row[j] += b.values[static_cast<size_t>(j)];
      }
      break;
    }
    case Op::kRelu: {
      const Tensor& x = nodes_[n.a].value;
      n.value = x;
      for (double& v : n.value.values) v = v > 0.0 ? v : 0.0;
      break;
    }
    case Op::kSoftmaxCrossEntropy: {
      const Tensor& logits = nodes_[n.a].value;
      int64_t batch = logits.rows();
      int64_t classes = logits.cols();
      n.aux = Tensor::zeros({batch, classes});
      double total = 0.0;
      for (int64_t i = 0; i < batch; ++i) {
        const double* row = logits.values.data() + i * classes;
        double m = row[0];
        for (int64_t j = 1; j < classes; ++j) m = row[j] > m ? row[j] : m;
        double denom = 0.0;
        for (int64_t j = 0; j < classes; ++j) denom += std::exp(row[j] - m);
        double* prow = n.aux.values.data() + i * classes;
        for (int64_t j = 0; j < classes; ++j) prow[j] = std::exp(row[j] - m) / denom;
        total += (m + std::log(denom)) - row[n.targets[static_cast<size_t>(i)]];
      }
      n.value = Tensor::scalar(total / static_cast<double>(batch));
      break;
    }
    case Op::kL2Loss: {
      const Tensor& p = nodes_[n.a].value;
      const Tensor& t = nodes_[n.b].value;
      double total = 0.0;
      for (size_t i = 0; i < p.values.size(); ++i) {
        double d = p.values[i] - t.values[i];
        total += d * d;
      }
      n.value = Tensor::scalar(0.5 * total / static_cast<double>(p.numel()));
      break;
    }
    case Op::kSumSquares: {
      const Tensor& x = nodes_[n.a].value;
      double total = 0.0;
      for (double v : x.values) total += v * v;
      n.value = Tensor::scalar(total);
      break;
    }
    case Op::kScale: {
      n.value = nodes_[n.a].value;
      for (double& v : n.value.values) v *= n.c;
      break;
    }
  }
}

void Tape::accumulate(Node& n) {
  const Tensor& g = n.grad;
  auto reach = [&](int32_t id) -> Tensor* {
    Node& in = nodes_[static_cast<size_t>(id)];
    if (!in.requires_grad) return nullptr;
    if (in.grad.values.empty()) in.grad = Tensor::zeros(in.value.shape);
    return &in.grad;
  };
  switch (n.op) {
    case Op::kConstant:
    case Op::kParam:
      break;
    case Op::kMatMul: {
      if (Tensor* da = reach(n.a)) add_matmul_nt(*da, g, nodes_[n.b].value);
      if (Tensor* db = reach(n.b)) add_matmul_tn(*db, nodes_[n.a].value, g);
      break;
    }
    case Op::kAdd: {
      if (Tensor* da = reach(n.a)) {
        for (size_t i = 0; i < g.values.size(); ++i) da->values[i] += g.values[i];
      }
      if (Tensor* db = reach(n.b)) {
        for (size_t i = 0; i < g.values.size(); ++i) db->values[i] += g.values[i];
      }
      break;
    }
    case Op::kAddBias: {
      if (Tensor* dx = reach(n.a)) {
        for (size_t i = 0; i < g.values.size(); ++i) dx->values[i] += g.values[i];
      }
      if (Tensor* db = reach(n.b)) {
        int64_t cols = g.cols();
        for (int64_t i = 0; i < g.rows(); ++i) {
          const double* grow = g.values.data() + i * cols;
          for (int64_t j = 0; j < cols; ++j) db->values[static_cast<size_t>(j)] += grow[j];
        }
      }
      break;
    }
    case Op::kRelu: {
      if (Tensor* dx = reach(n.a)) {
        const Tensor& x = nodes_[n.a].value;
        for (size_t i = 0; i < g.values.size(); ++i) {
          if (x.values[i] > 0.0) dx->values[i] += g.values[i];
        }
      }
      break;
    }
    case Op::kSoftmaxCrossEntropy: {
      if (Tensor* dl = reach(n.a)) {
        double gout = g.values[0];
        int64_t batch = n.aux.rows();
        int64_t classes = n.aux.cols();
        double inv = gout / static_cast<double>(batch);
        for (int64_t i = 0; i < batch; ++i) {
          const double* prow = n.aux.values.data() + i * classes;
          double* drow = dl->values.data() + i * classes;
          int32_t t = n.targets[static_cast<size_t>(i)];
          for (int64_t j = 0; j < classes; ++j) {
            drow[j] += inv * (prow[j] - (j == t ? 1.0 : 0.0));
          }
        }
      }
      break;
    }
    case Op::kL2Loss: {
      const Tensor& p = nodes_[n.a].value;
      const Tensor& t = nodes_[n.b].value;
      double inv = g.values[0] / static_cast<double>(p.numel());
      if (Tensor* dp = reach(n.a)) {
        for (size_t i = 0; i < p.values.size(); ++i) {
          dp->values[i] += inv * (p.values[i] - t.values[i]);
        }
      }
      if (Tensor* dt = reach(n.b)) {
        for (size_t i = 0; i < p.values.size(); ++i) {
          dt->values[i] -= inv * (p.values[i] - t.values[i]);
        }
      }
      break;
    }
    case Op::kSumSquares: {
      if (Tensor* dx = reach(n.a)) {
        const Tensor& x = nodes_[n.a].value;
        double gout = g.values[0];
        for (size_t i = 0; i < x.values.size(); ++i) dx->values[i] += gout * 2.0 * x.values[i];
      }
      break;
    }
    case Op::kScale: {
      if (Tensor* dx = reach(n.a)) {
        for (size_t i = 0; i < g.values.size(); ++i) dx->values[i] += n.c * g.values[i];
      }
      break;
    }
  }
}

void Tape::backward(Var loss) {
  const Node& ln = node(loss);
  if (ln.value.numel() != 1) {
    throw ValidationError("backward requires a scalar loss, got " + ln.value.shape_str());
  }
  for (Node& n : nodes_) n.grad = Tensor();
  Node& seed = nodes_[static_cast<size_t>(loss.id)];
  seed.grad = Tensor::zeros(seed.value.shape);
  seed.grad.values[0] = 1.0;
  for (int32_t i = loss.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<size_t>(i)];
    if (n.grad.values.empty()) continue;  // not an ancestor of the loss
    accumulate(n);
  }
  // Parameters that did not contribute to the loss get a zero gradient so
  // every traced parameter has one after backward.
  for (Node& n : nodes_) {
    if (n.op == Op::kParam && n.grad.values.empty()) n.grad = Tensor::zeros(n.value.shape);
  }
}

const Tensor& Tape::value(Var v) const { return node(v).value; }

bool Tape::has_grad(Var v) const { return !node(v).grad.values.empty(); }

const Tensor& Tape::grad(Var v) const {
  const Node& n = node(v);
  if (n.grad.values.empty()) {
    throw ValidationError("no gradient recorded for this node; run backward first");
  }
  return n.grad;
}

void Tape::replay() {
  for (Node& n : nodes_) compute(n);
}

}  // namespace stagecost
