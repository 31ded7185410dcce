#pragma once

#include <cstddef>

// Dense kernels behind the tape. Every kernel has a serial reference body
// and an OpenMP body that splits independent output elements across threads;
// per-element accumulation order is identical in both, so results match
// bitwise for any thread count. kern::set_parallel picks the path at runtime
// and tools/bench_kernels compares the two.
namespace asmaml::kern {

void set_parallel(bool enabled);
bool parallel_enabled();

// Work (in multiply-adds) below which the parallel path falls back to serial.
inline constexpr std::size_t kParallelGrain = 16384;

// C = A(m x k) * B(k x n)
void matmul_nn_serial(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t k, std::size_t n);
void matmul_nn_parallel(const double* a, const double* b, double* c,
                        std::size_t m, std::size_t k, std::size_t n);
void matmul_nn(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n);

// C = A(m x k) * B(n x k)^T
void matmul_nt_serial(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t k, std::size_t n);
void matmul_nt_parallel(const double* a, const double* b, double* c,
                        std::size_t m, std::size_t k, std::size_t n);
void matmul_nt(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n);

// C = A(k x m)^T * B(k x n)
void matmul_tn_serial(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t k, std::size_t n);
void matmul_tn_parallel(const double* a, const double* b, double* c,
                        std::size_t m, std::size_t k, std::size_t n);
void matmul_tn(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n);

enum class Unary { Sigmoid, Tanh, Relu, Log, Neg };

void map_unary_serial(Unary f, const double* x, double* y, std::size_t n);
void map_unary_parallel(Unary f, const double* x, double* y, std::size_t n);
void map_unary(Unary f, const double* x, double* y, std::size_t n);

enum class Binary { Add, Sub, Mul };

void map_binary_serial(Binary f, const double* a, const double* b, double* y, std::size_t n);
void map_binary_parallel(Binary f, const double* a, const double* b, double* y, std::size_t n);
void map_binary(Binary f, const double* a, const double* b, double* y, std::size_t n);

}  // namespace asmaml::kern
