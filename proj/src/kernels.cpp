#include "asmaml/kernels.hpp"

#include <atomic>
#include <cmath>

namespace asmaml::kern {

namespace {
std::atomic<bool> g_parallel{true};

inline double apply_unary(Unary f, double x) {
  switch (f) {
    case Unary::Sigmoid: return 1.0 / (1.0 + std::exp(-x));
    case Unary::Tanh: return std::tanh(x);
    case Unary::Relu: return x > 0.0 ? x : 0.0;
    case Unary::Log: return std::log(x);
    case Unary::Neg: return -x;
  }
  return 0.0;
}

inline double apply_binary(Binary f, double a, double b) {
  switch (f) {
    case Binary::Add: return a + b;
    case Binary::Sub: return a - b;
    case Binary::Mul: return a * b;
  }
  return 0.0;
}
}  // namespace

void set_parallel(bool enabled) { g_parallel.store(enabled); }
bool parallel_enabled() { return g_parallel.load(); }

void matmul_nn_serial(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
      c[i * n + j] = acc;
    }
  }
}

void matmul_nn_parallel(const double* a, const double* b, double* c,
                        std::size_t m, std::size_t k, std::size_t n) {
  const long lm = static_cast<long>(m);
#pragma omp parallel for schedule(static) if (m * n * k >= kParallelGrain)
  for (long i = 0; i < lm; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
      c[i * n + j] = acc;
    }
  }
}

void matmul_nn(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n) {
  if (parallel_enabled()) {
    matmul_nn_parallel(a, b, c, m, k, n);
  } else {
    matmul_nn_serial(a, b, c, m, k, n);
  }
}

void matmul_nt_serial(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[j * k + p];
      c[i * n + j] = acc;
    }
  }
}

void matmul_nt_parallel(const double* a, const double* b, double* c,
                        std::size_t m, std::size_t k, std::size_t n) {
  const long lm = static_cast<long>(m);
#pragma omp parallel for schedule(static) if (m * n * k >= kParallelGrain)
  for (long i = 0; i < lm; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[j * k + p];
      c[i * n + j] = acc;
    }
  }
}

void matmul_nt(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n) {
  if (parallel_enabled()) {
    matmul_nt_parallel(a, b, c, m, k, n);
  } else {
    matmul_nt_serial(a, b, c, m, k, n);
  }
}

void matmul_tn_serial(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a[p * m + i] * b[p * n + j];
      c[i * n + j] = acc;
    }
  }
}

void matmul_tn_parallel(const double* a, const double* b, double* c,
                        std::size_t m, std::size_t k, std::size_t n) {
  const long lm = static_cast<long>(m);
#pragma omp parallel for schedule(static) if (m * n * k >= kParallelGrain)
  for (long i = 0; i < lm; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a[p * m + i] * b[p * n + j];
      c[i * n + j] = acc;
    }
  }
}

void matmul_tn(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n) {
  if (parallel_enabled()) {
    matmul_tn_parallel(a, b, c, m, k, n);
  } else {
    matmul_tn_serial(a, b, c, m, k, n);
  }
}

void map_unary_serial(Unary f, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = apply_unary(f, x[i]);
}

void map_unary_parallel(Unary f, const double* x, double* y, std::size_t n) {
  const long ln = static_cast<long>(n);
#pragma omp parallel for schedule(static) if (n >= kParallelGrain)
  for (long i = 0; i < ln; ++i) y[i] = apply_unary(f, x[i]);
}

void map_unary(Unary f, const double* x, double* y, std::size_t n) {
  if (parallel_enabled()) {
    map_unary_parallel(f, x, y, n);
  } else {
    map_unary_serial(f, x, y, n);
  }
}

void map_binary_serial(Binary f, const double* a, const double* b, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = apply_binary(f, a[i], b[i]);
}

void map_binary_parallel(Binary f, const double* a, const double* b, double* y, std::size_t n) {
  const long ln = static_cast<long>(n);
#pragma omp parallel for schedule(static) if (n >= kParallelGrain)
  for (long i = 0; i < ln; ++i) y[i] = apply_binary(f, a[i], b[i]);
}

void map_binary(Binary f, const double* a, const double* b, double* y, std::size_t n) {
  if (parallel_enabled()) {
    map_binary_parallel(f, a, b, y, n);
  } else {
    map_binary_serial(f, a, b, y, n);
  }
}

}  // namespace asmaml::kern
