#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <vector>

#include "asmaml/kernels.hpp"
#include "asmaml/rng.hpp"

using namespace asmaml;

namespace {

std::vector<double> random_vec(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

}  // namespace

// The OpenMP kernels split independent output elements across threads while
// keeping per-element accumulation order identical to the serial reference,
// so the comparison below is exact equality, not approximate.
TEST_CASE("parallel matmul variants match the serial reference bitwise") {
  Rng rng(2024);
  for (auto [m, k, n] : {std::tuple<std::size_t, std::size_t, std::size_t>{1, 1, 1},
                         {3, 5, 2},
                         {17, 31, 13},
                         {64, 40, 64}}) {
    const auto a = random_vec(m * k, rng);
    const auto b = random_vec(k * n, rng);
    std::vector<double> c1(m * n), c2(m * n);

    kern::matmul_nn_serial(a.data(), b.data(), c1.data(), m, k, n);
    kern::matmul_nn_parallel(a.data(), b.data(), c2.data(), m, k, n);
    CHECK(c1 == c2);

    const auto bt = random_vec(n * k, rng);
    kern::matmul_nt_serial(a.data(), bt.data(), c1.data(), m, k, n);
    kern::matmul_nt_parallel(a.data(), bt.data(), c2.data(), m, k, n);
    CHECK(c1 == c2);

    const auto at = random_vec(k * m, rng);
    const auto b2 = random_vec(k * n, rng);
    kern::matmul_tn_serial(at.data(), b2.data(), c1.data(), m, k, n);
    kern::matmul_tn_parallel(at.data(), b2.data(), c2.data(), m, k, n);
    CHECK(c1 == c2);
  }
}

TEST_CASE("matmul_nt and matmul_tn agree with explicit transposition") {
  Rng rng(7);
  const std::size_t m = 4, k = 6, n = 3;
  const auto a = random_vec(m * k, rng);
  const auto b = random_vec(n * k, rng);  // to be used as B^T
  std::vector<double> bt(k * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) bt[j * n + i] = b[i * k + j];
  }
  std::vector<double> c1(m * n), c2(m * n);
  kern::matmul_nt_serial(a.data(), b.data(), c1.data(), m, k, n);
  kern::matmul_nn_serial(a.data(), bt.data(), c2.data(), m, k, n);
  for (std::size_t i = 0; i < c1.size(); ++i) CHECK(c1[i] == doctest::Approx(c2[i]).epsilon(1e-13));
}

TEST_CASE("unary and binary maps match serial bitwise") {
  Rng rng(5);
  const auto x = random_vec(20000, rng);  // above the parallel grain
  const auto y = random_vec(20000, rng);
  std::vector<double> r1(x.size()), r2(x.size());
  for (auto f : {kern::Unary::Sigmoid, kern::Unary::Tanh, kern::Unary::Relu, kern::Unary::Neg}) {
    kern::map_unary_serial(f, x.data(), r1.data(), x.size());
    kern::map_unary_parallel(f, x.data(), r2.data(), x.size());
    CHECK(r1 == r2);
  }
  for (auto f : {kern::Binary::Add, kern::Binary::Sub, kern::Binary::Mul}) {
    kern::map_binary_serial(f, x.data(), y.data(), r1.data(), x.size());
    kern::map_binary_parallel(f, x.data(), y.data(), r2.data(), x.size());
    CHECK(r1 == r2);
  }
}

TEST_CASE("runtime dispatch honors the parallel switch") {
  const bool before = kern::parallel_enabled();
  kern::set_parallel(false);
  CHECK_FALSE(kern::parallel_enabled());
  kern::set_parallel(true);
  CHECK(kern::parallel_enabled());
  kern::set_parallel(before);
}
