#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "exitnet/kernels.hpp"
#include "exitnet/tensor.hpp"

namespace exitnet {

enum class OpKind {
  leaf,
  matmul,
  add_bias,
  add,
  mul,
  scale,
  relu,
  softmax_t,
  log,
  sum,
  mean,
  cross_entropy,
  kl_div,
  scale_grad,
  stop_grad,
};

inline const char* op_kind_name(OpKind k) {
  switch (k) {
    case OpKind::leaf: return "leaf";
    case OpKind::matmul: return "matmul";
    case OpKind::add_bias: return "add_bias";
    case OpKind::add: return "add";
    case OpKind::mul: return "mul";
    case OpKind::scale: return "scale";
    case OpKind::relu: return "relu";
    case OpKind::softmax_t: return "softmax_t";
    case OpKind::log: return "log";
    case OpKind::sum: return "sum";
    case OpKind::mean: return "mean";
    case OpKind::cross_entropy: return "cross_entropy";
    case OpKind::kl_div: return "kl_div";
    case OpKind::scale_grad: return "scale_grad";
    case OpKind::stop_grad: return "stop_grad";
  }
  return "?";
}

/// One recorded operation. Insertion order is a topological order of the
/// graph, so backward is a single reverse sweep over the node vector.
struct TapeNode {
  OpKind kind = OpKind::leaf;
  int in0 = -1;
  int in1 = -1;
  Tensor out;                    // forward result
  Tensor a;                      // saved first input
  Tensor b;                      // saved second input
  std::vector<double> saved;     // op-specific values needed by backward
  std::vector<int> labels;       // cross_entropy only
  double scalar = 0.0;           // temperature / scale factor / grad scale s
  std::vector<double> out_grad;  // populated during backward
};

/// Reverse-mode tape for one training step. Built during the forward pass,
/// swept once by backward(), then discarded.
class Tape {
 public:
  /// Registers a tensor as a leaf node (idempotent per tensor identity).
  int ensure_leaf(const Tensor& t) {
    auto it = index_.find(t.id());
    if (it != index_.end()) return it->second;
    TapeNode n;
    n.kind = OpKind::leaf;
    n.out = t;
    return push(t, std::move(n));
  }

  int node_of(const Tensor& t) const {
    auto it = index_.find(t.id());
    return it == index_.end() ? -1 : it->second;
  }

  int record_unary(OpKind kind, const Tensor& in, Tensor out,
                   double scalar = 0.0, std::vector<double> saved = {}) {
    TapeNode n;
    n.kind = kind;
    n.in0 = ensure_leaf(in);
    n.a = in;
    n.out = out;
    n.scalar = scalar;
    n.saved = std::move(saved);
    return push(out, std::move(n));
  }

  int record_binary(OpKind kind, const Tensor& in0, const Tensor& in1,
                    Tensor out, double scalar = 0.0,
                    std::vector<double> saved = {},
                    std::vector<int> labels = {}) {
    TapeNode n;
    n.kind = kind;
    n.in0 = ensure_leaf(in0);
    n.in1 = ensure_leaf(in1);
    n.a = in0;
    n.b = in1;
    n.out = out;
    n.scalar = scalar;
    n.saved = std::move(saved);
    n.labels = std::move(labels);
    return push(out, std::move(n));
  }

  int record_cross_entropy(const Tensor& logits, std::vector<int> labels,
                           Tensor out, std::vector<double> probs) {
    TapeNode n;
    n.kind = OpKind::cross_entropy;
    n.in0 = ensure_leaf(logits);
    n.a = logits;
    n.out = out;
    n.saved = std::move(probs);
    n.labels = std::move(labels);
    return push(out, std::move(n));
  }

  /// Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse, accumulating
  /// gradients of every requires_grad leaf into its grad slot. Gradients from
  /// multiple consumers of a node are summed.
  void backward(const Tensor& loss) {
    if (loss.size() != 1)
      throw std::invalid_argument("backward: loss must be scalar");
    int root = node_of(loss);
    if (root < 0)
      throw std::invalid_argument("backward: loss is not on this tape");
    grad_buf(root).assign(1, 1.0);
    for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
      TapeNode& n = nodes_[i];
      if (n.out_grad.empty()) continue;
      apply_backward(n);
    }
  }

  /// Clears node gradients so another backward() can run on the same graph.
  /// Leaf tensor grad slots are untouched (callers own those).
  void reset_grads() {
    for (auto& n : nodes_) n.out_grad.clear();
  }

  /// Gradient accumulated at a tensor's node during the last backward sweep.
  /// Zeros if no gradient reached it.
  std::vector<double> grad_of(const Tensor& t) const {
    int i = node_of(t);
    if (i < 0) throw std::invalid_argument("grad_of: tensor not on tape");
    if (nodes_[i].out_grad.empty())
      return std::vector<double>(static_cast<std::size_t>(t.size()), 0.0);
    return nodes_[i].out_grad;
  }

  std::size_t size() const { return nodes_.size(); }
  const TapeNode& node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }

 private:
  int push(const Tensor& keyed, TapeNode&& n) {
    int idx = static_cast<int>(nodes_.size());
    nodes_.push_back(std::move(n));
    index_.emplace(keyed.id(), idx);
    return idx;
  }

  std::vector<double>& grad_buf(int idx) {
    TapeNode& n = nodes_[static_cast<std::size_t>(idx)];
    if (n.out_grad.empty())
      n.out_grad.assign(static_cast<std::size_t>(n.out.size()), 0.0);
    return n.out_grad;
  }

  void apply_backward(TapeNode& n) {
    const std::vector<double>& g = n.out_grad;
    switch (n.kind) {
      case OpKind::leaf: {
        if (n.out.requires_grad()) {
          auto& dst = n.out.grad();
          for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
        }
        break;
      }
      case OpKind::matmul: {
        int m = n.a.dim(0), k = n.a.dim(1), cols = n.b.dim(1);
        detail::gemm_nt_acc(m, cols, k, g.data(), n.b.data(),
                            grad_buf(n.in0).data());
        detail::gemm_tn_acc(m, k, cols, n.a.data(), g.data(),
                            grad_buf(n.in1).data());
        break;
      }
      case OpKind::add_bias: {
        int m = n.a.dim(0), cols = n.a.dim(1);
        auto& dx = grad_buf(n.in0);
        for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i];
        auto& db = grad_buf(n.in1);
        for (int r = 0; r < m; ++r)
          for (int c = 0; c < cols; ++c)
            db[static_cast<std::size_t>(c)] +=
                g[static_cast<std::size_t>(r) * cols + c];
        break;
      }
      case OpKind::add: {
        auto& dx = grad_buf(n.in0);
        for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i];
        auto& dy = grad_buf(n.in1);
        for (std::size_t i = 0; i < g.size(); ++i) dy[i] += g[i];
        break;
      }
      case OpKind::mul: {
        auto& dx = grad_buf(n.in0);
        const double* yv = n.b.data();
        for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * yv[i];
        auto& dy = grad_buf(n.in1);
        const double* xv = n.a.data();
        for (std::size_t i = 0; i < g.size(); ++i) dy[i] += g[i] * xv[i];
        break;
      }
      case OpKind::scale: {
        auto& dx = grad_buf(n.in0);
        for (std::size_t i = 0; i < g.size(); ++i) dx[i] += n.scalar * g[i];
        break;
      }
      case OpKind::relu: {
        auto& dx = grad_buf(n.in0);
        const double* xv = n.a.data();
        // subgradient 0 at exactly 0
        for (std::size_t i = 0; i < g.size(); ++i)
          if (xv[i] > 0.0) dx[i] += g[i];
        break;
      }
      case OpKind::softmax_t: {
        int m = n.out.dim(0), cols = n.out.dim(1);
        const double* p = n.out.data();
        auto& dz = grad_buf(n.in0);
        double inv_t = 1.0 / n.scalar;
        for (int r = 0; r < m; ++r) {
          const double* pr = p + static_cast<long>(r) * cols;
          const double* gr = g.data() + static_cast<long>(r) * cols;
          double dot = 0.0;
          for (int c = 0; c < cols; ++c) dot += gr[c] * pr[c];
          double* dzr = dz.data() + static_cast<long>(r) * cols;
          for (int c = 0; c < cols; ++c)
            dzr[c] += inv_t * pr[c] * (gr[c] - dot);
        }
        break;
      }
      case OpKind::log: {
        auto& dx = grad_buf(n.in0);
        const double* xv = n.a.data();
        for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] / xv[i];
        break;
      }
      case OpKind::sum: {
        auto& dx = grad_buf(n.in0);
        for (auto& v : dx) v += g[0];
        break;
      }
      case OpKind::mean: {
        auto& dx = grad_buf(n.in0);
        double s = g[0] / static_cast<double>(dx.size());
        for (auto& v : dx) v += s;
        break;
      }
      case OpKind::cross_entropy: {
        int m = n.a.dim(0), cols = n.a.dim(1);
        const double* p = n.saved.data();
        auto& dz = grad_buf(n.in0);
        double gs = g[0] / static_cast<double>(m);
        for (int r = 0; r < m; ++r) {
          const double* pr = p + static_cast<long>(r) * cols;
          double* dzr = dz.data() + static_cast<long>(r) * cols;
          for (int c = 0; c < cols; ++c) {
            double ind = (c == n.labels[static_cast<std::size_t>(r)]) ? 1.0 : 0.0;
            dzr[c] += gs * (pr[c] - ind);
          }
        }
        break;
      }
      case OpKind::kl_div: {
        // teacher (in0) is gradient-stopped by contract; only the student
        // side receives gradient. saved = [p_teacher | q_student].
        int m = n.b.dim(0), cols = n.b.dim(1);
        std::size_t half = static_cast<std::size_t>(m) * cols;
        const double* p = n.saved.data();
        const double* q = n.saved.data() + half;
        auto& ds = grad_buf(n.in1);
        double gs = g[0] / (n.scalar * static_cast<double>(m));
        for (std::size_t i = 0; i < half; ++i) ds[i] += gs * (q[i] - p[i]);
        break;
      }
      case OpKind::scale_grad: {
        auto& dx = grad_buf(n.in0);
        for (std::size_t i = 0; i < g.size(); ++i) dx[i] += n.scalar * g[i];
        break;
      }
      case OpKind::stop_grad:
        break;
    }
  }

  std::vector<TapeNode> nodes_;
  std::unordered_map<const void*, int> index_;
};

}  // namespace exitnet
