#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "exitnet/ops.hpp"
#include "exitnet/tape.hpp"
#include "exitnet/tensor.hpp"

namespace exitnet {

struct GradCheckReport {
  double max_abs_err = 0.0;
  double max_rel_err = 0.0;
  int n_params_checked = 0;
  int n_params_skipped = 0;  // parameters behind scale_grad/stop_grad nodes
};

namespace detail {

// Marks every node lying upstream (toward the leaves) of a scale_grad or
// stop_grad node. Gradients there intentionally disagree with the true
// derivative of the forward map, so finite differences cannot validate them.
inline std::vector<char> rescale_upstream_mask(const Tape& tape) {
  std::vector<char> upstream(tape.size(), 0);
  for (int i = static_cast<int>(tape.size()) - 1; i >= 0; --i) {
    const TapeNode& n = tape.node(i);
    bool taints = upstream[static_cast<std::size_t>(i)] != 0 ||
                  n.kind == OpKind::scale_grad || n.kind == OpKind::stop_grad;
    if (!taints) continue;
    if (n.in0 >= 0) upstream[static_cast<std::size_t>(n.in0)] = 1;
    if (n.in1 >= 0) upstream[static_cast<std::size_t>(n.in1)] = 1;
  }
  return upstream;
}

}  // namespace detail

/// Compares tape gradients against central finite differences. The closure
/// builds the scalar loss; it is called with a tape once for the analytic
/// gradients and with nullptr for every probe evaluation.
///
/// Parameters whose gradient path crosses a scale_grad or stop_grad node are
/// skipped: those nodes' backward is not the analytic derivative, and their
/// contracts are validated by their own unit tests.
inline GradCheckReport check_gradients(
    const std::function<Tensor(Tape*)>& forward,
    const std::vector<Tensor>& params, double eps) {
  if (!(eps > 0.0))
    throw std::invalid_argument("check_gradients: eps must be positive");

  for (Tensor p : params) p.zero_grad();
  Tape tape;
  Tensor loss = forward(&tape);
  tape.backward(loss);
  std::vector<char> upstream = detail::rescale_upstream_mask(tape);

  GradCheckReport report;
  for (Tensor p : params) {
    int node = tape.node_of(p);
    if (node >= 0 && upstream[static_cast<std::size_t>(node)]) {
      report.n_params_skipped += p.size();
      continue;
    }
    std::vector<double> analytic(static_cast<std::size_t>(p.size()), 0.0);
    if (p.has_grad()) analytic = p.grad();
    double* pv = p.data();
    for (int i = 0; i < p.size(); ++i) {
      double keep = pv[i];
      pv[i] = keep + eps;
      double up = forward(nullptr).item();
      pv[i] = keep - eps;
      double down = forward(nullptr).item();
      pv[i] = keep;
      double fd = (up - down) / (2.0 * eps);
      double a = analytic[static_cast<std::size_t>(i)];
      double abs_err = std::fabs(a - fd);
      double denom = std::max({std::fabs(a), std::fabs(fd), 1e-4});
      report.max_abs_err = std::max(report.max_abs_err, abs_err);
      report.max_rel_err = std::max(report.max_rel_err, abs_err / denom);
      ++report.n_params_checked;
    }
  }
  return report;
}

}  // namespace exitnet
