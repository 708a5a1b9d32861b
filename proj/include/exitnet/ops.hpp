#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "exitnet/tape.hpp"
#include "exitnet/tensor.hpp"

namespace exitnet::ops {

namespace detail2 {

inline void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

// Row-wise softened log-probabilities and probabilities of logits/T,
// computed with max-subtraction.
inline void softmax_rows(const Tensor& logits, double temperature,
                         double* probs, double* log_probs) {
  int m = logits.dim(0), c = logits.dim(1);
  const double* z = logits.data();
  for (int r = 0; r < m; ++r) {
    const double* zr = z + static_cast<long>(r) * c;
    double mx = zr[0];
    for (int j = 1; j < c; ++j) mx = std::max(mx, zr[j]);
    double s = 0.0;
    for (int j = 0; j < c; ++j) s += std::exp((zr[j] - mx) / temperature);
    double lse = mx / temperature + std::log(s);
    for (int j = 0; j < c; ++j) {
      double lp = zr[j] / temperature - lse;
      if (log_probs) log_probs[static_cast<long>(r) * c + j] = lp;
      if (probs) probs[static_cast<long>(r) * c + j] = std::exp(lp);
    }
  }
}

}  // namespace detail2

/// out[m x n] = a[m x k] @ b[k x n]
inline Tensor matmul(const Tensor& a, const Tensor& b, Tape* tape = nullptr) {
  detail2::require(a.rank() == 2 && b.rank() == 2, "matmul: inputs must be rank-2");
  detail2::require(a.dim(1) == b.dim(0), "matmul: inner dimensions mismatch");
  Tensor out({a.dim(0), b.dim(1)});
  detail::gemm_nn(a.dim(0), a.dim(1), b.dim(1), a.data(), b.data(), out.data(),
                  false);
  if (tape) tape->record_binary(OpKind::matmul, a, b, out);
  return out;
}

/// Adds a length-n bias row to every row of x[m x n].
inline Tensor add_bias(const Tensor& x, const Tensor& bias,
                       Tape* tape = nullptr) {
  detail2::require(x.rank() == 2 && bias.rank() == 1, "add_bias: bad ranks");
  detail2::require(x.dim(1) == bias.dim(0), "add_bias: width mismatch");
  Tensor out(x.shape());
  int m = x.dim(0), n = x.dim(1);
  const double* xv = x.data();
  const double* bv = bias.data();
  double* ov = out.data();
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < n; ++c)
      ov[static_cast<long>(r) * n + c] = xv[static_cast<long>(r) * n + c] + bv[c];
  if (tape) tape->record_binary(OpKind::add_bias, x, bias, out);
  return out;
}

/// Elementwise sum of two same-shape tensors.
inline Tensor add(const Tensor& x, const Tensor& y, Tape* tape = nullptr) {
  detail2::require(x.shape() == y.shape(), "add: shape mismatch");
  Tensor out(x.shape());
  const double* xv = x.data();
  const double* yv = y.data();
  double* ov = out.data();
  for (int i = 0; i < x.size(); ++i) ov[i] = xv[i] + yv[i];
  if (tape) tape->record_binary(OpKind::add, x, y, out);
  return out;
}

/// Elementwise product of two same-shape tensors.
inline Tensor mul(const Tensor& x, const Tensor& y, Tape* tape = nullptr) {
  detail2::require(x.shape() == y.shape(), "mul: shape mismatch");
  Tensor out(x.shape());
  const double* xv = x.data();
  const double* yv = y.data();
  double* ov = out.data();
  for (int i = 0; i < x.size(); ++i) ov[i] = xv[i] * yv[i];
  if (tape) tape->record_binary(OpKind::mul, x, y, out);
  return out;
}

/// Multiplies every element by a constant (forward and backward).
inline Tensor scale(const Tensor& x, double c, Tape* tape = nullptr) {
  detail2::require(std::isfinite(c), "scale: non-finite factor");
  Tensor out(x.shape());
  const double* xv = x.data();
  double* ov = out.data();
  for (int i = 0; i < x.size(); ++i) ov[i] = c * xv[i];
  if (tape) tape->record_unary(OpKind::scale, x, out, c);
  return out;
}

inline Tensor relu(const Tensor& x, Tape* tape = nullptr) {
  Tensor out(x.shape());
  const double* xv = x.data();
  double* ov = out.data();
  for (int i = 0; i < x.size(); ++i) ov[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  if (tape) tape->record_unary(OpKind::relu, x, out);
  return out;
}

/// Row-wise softmax of logits/T. Rows sum to 1 within rounding.
inline Tensor softmax_with_temperature(const Tensor& logits, double temperature,
                                       Tape* tape = nullptr) {
  detail2::require(temperature > 0.0 && std::isfinite(temperature),
                   "softmax_with_temperature: T must be positive");
  detail2::require(logits.rank() == 2,
                   "softmax_with_temperature: logits must be rank-2");
  Tensor out(logits.shape());
  detail2::softmax_rows(logits, temperature, out.data(), nullptr);
  if (tape) tape->record_unary(OpKind::softmax_t, logits, out, temperature);
  return out;
}

/// Natural log, defined for strictly positive inputs.
inline Tensor log(const Tensor& x, Tape* tape = nullptr) {
  const double* xv = x.data();
  for (int i = 0; i < x.size(); ++i)
    detail2::require(xv[i] > 0.0, "log: input must be strictly positive");
  Tensor out(x.shape());
  double* ov = out.data();
  for (int i = 0; i < x.size(); ++i) ov[i] = std::log(xv[i]);
  if (tape) tape->record_unary(OpKind::log, x, out);
  return out;
}

inline Tensor sum(const Tensor& x, Tape* tape = nullptr) {
  double s = 0.0;
  const double* xv = x.data();
  for (int i = 0; i < x.size(); ++i) s += xv[i];
  Tensor out = Tensor::scalar(s);
  if (tape) tape->record_unary(OpKind::sum, x, out);
  return out;
}

inline Tensor mean(const Tensor& x, Tape* tape = nullptr) {
  double s = 0.0;
  const double* xv = x.data();
  for (int i = 0; i < x.size(); ++i) s += xv[i];
  Tensor out = Tensor::scalar(s / x.size());
  if (tape) tape->record_unary(OpKind::mean, x, out);
  return out;
}

/// Mean over the batch of -log softmax(logits)[label].
inline Tensor cross_entropy_loss(const Tensor& logits,
                                 const std::vector<int>& labels,
                                 Tape* tape = nullptr) {
  detail2::require(logits.rank() == 2, "cross_entropy_loss: logits must be rank-2");
  int m = logits.dim(0), c = logits.dim(1);
  detail2::require(static_cast<int>(labels.size()) == m,
                   "cross_entropy_loss: batch size mismatch");
  for (int y : labels)
    detail2::require(y >= 0 && y < c, "cross_entropy_loss: label out of range");
  std::vector<double> probs(static_cast<std::size_t>(m) * c);
  std::vector<double> log_probs(static_cast<std::size_t>(m) * c);
  detail2::softmax_rows(logits, 1.0, probs.data(), log_probs.data());
  double loss = 0.0;
  for (int r = 0; r < m; ++r)
    loss -= log_probs[static_cast<long>(r) * c + labels[static_cast<std::size_t>(r)]];
  Tensor out = Tensor::scalar(loss / m);
  if (tape) tape->record_cross_entropy(logits, labels, out, std::move(probs));
  return out;
}

/// KL(teacher || student) between class distributions softened at temperature
/// T, averaged over the batch. The teacher side never receives gradient.
inline Tensor kl_divergence_loss(const Tensor& teacher_logits,
                                 const Tensor& student_logits,
                                 double temperature, Tape* tape = nullptr) {
  detail2::require(teacher_logits.rank() == 2 && student_logits.rank() == 2,
                   "kl_divergence_loss: logits must be rank-2");
  detail2::require(teacher_logits.shape() == student_logits.shape(),
                   "kl_divergence_loss: shape mismatch");
  detail2::require(temperature > 0.0 && std::isfinite(temperature),
                   "kl_divergence_loss: T must be positive");
  int m = teacher_logits.dim(0), c = teacher_logits.dim(1);
  std::size_t half = static_cast<std::size_t>(m) * c;
  std::vector<double> saved(2 * half);  // [p_teacher | q_student]
  std::vector<double> lp(half), lq(half);
  detail2::softmax_rows(teacher_logits, temperature, saved.data(), lp.data());
  detail2::softmax_rows(student_logits, temperature, saved.data() + half,
                        lq.data());
  double total = 0.0;
  for (int r = 0; r < m; ++r) {
    double row = 0.0;
    for (int j = 0; j < c; ++j) {
      std::size_t i = static_cast<std::size_t>(r) * c + j;
      row += saved[i] * (lp[i] - lq[i]);
    }
    total += std::max(row, 0.0);  // Gibbs: true row value is nonnegative
  }
  Tensor out = Tensor::scalar(total / m);
  if (tape)
    tape->record_binary(OpKind::kl_div, teacher_logits, student_logits, out,
                        temperature, std::move(saved));
  return out;
}

/// Forward identity; scales the incoming gradient by s during backward.
inline Tensor rescale_gradient(const Tensor& x, double s, Tape* tape = nullptr) {
  detail2::require(std::isfinite(s), "rescale_gradient: non-finite factor");
  Tensor out = Tensor::from(x.shape(), x.values());
  if (tape) tape->record_unary(OpKind::scale_grad, x, out, s);
  return out;
}

/// Forward identity; contributes zero gradient to its input.
inline Tensor stop_gradient(const Tensor& x, Tape* tape = nullptr) {
  Tensor out = Tensor::from(x.shape(), x.values());
  if (tape) tape->record_unary(OpKind::stop_grad, x, out);
  return out;
}

inline void backward(const Tensor& loss, Tape& tape) { tape.backward(loss); }

/// Index of the row maximum (first max wins on ties).
inline std::vector<int> argmax_rows(const Tensor& x) {
  detail2::require(x.rank() == 2, "argmax_rows: rank-2 required");
  int m = x.dim(0), c = x.dim(1);
  std::vector<int> out(static_cast<std::size_t>(m));
  const double* xv = x.data();
  for (int r = 0; r < m; ++r) {
    const double* row = xv + static_cast<long>(r) * c;
    int best = 0;
    for (int j = 1; j < c; ++j)
      if (row[j] > row[best]) best = j;
    out[static_cast<std::size_t>(r)] = best;
  }
  return out;
}

}  // namespace exitnet::ops
