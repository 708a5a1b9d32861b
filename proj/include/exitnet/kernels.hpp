#pragma once

namespace exitnet::detail {

// C[m x n] = A[m x k] * B[k x n]; accumulates when acc is true.
inline void gemm_nn(int m, int k, int n, const double* A, const double* B,
                    double* C, bool acc) {
  if (!acc)
    for (int i = 0; i < m * n; ++i) C[i] = 0.0;
  for (int i = 0; i < m; ++i) {
    const double* a_row = A + static_cast<long>(i) * k;
    double* c_row = C + static_cast<long>(i) * n;
    for (int p = 0; p < k; ++p) {
      double a = a_row[p];
      const double* b_row = B + static_cast<long>(p) * n;
      for (int j = 0; j < n; ++j) c_row[j] += a * b_row[j];
    }
  }
}

// C[m x k] += G[m x n] * B^T where B is [k x n].
inline void gemm_nt_acc(int m, int n, int k, const double* G, const double* B,
                        double* C) {
  for (int i = 0; i < m; ++i) {
    const double* g_row = G + static_cast<long>(i) * n;
    double* c_row = C + static_cast<long>(i) * k;
    for (int p = 0; p < k; ++p) {
      const double* b_row = B + static_cast<long>(p) * n;
      double dot = 0.0;
      for (int j = 0; j < n; ++j) dot += g_row[j] * b_row[j];
      c_row[p] += dot;
    }
  }
}

// C[k x n] += A^T * G where A is [m x k], G is [m x n].
inline void gemm_tn_acc(int m, int k, int n, const double* A, const double* G,
                        double* C) {
  for (int i = 0; i < m; ++i) {
    const double* a_row = A + static_cast<long>(i) * k;
    const double* g_row = G + static_cast<long>(i) * n;
    for (int p = 0; p < k; ++p) {
      double a = a_row[p];
      double* c_row = C + static_cast<long>(p) * n;
      for (int j = 0; j < n; ++j) c_row[j] += a * g_row[j];
    }
  }
}

}  // namespace exitnet::detail
