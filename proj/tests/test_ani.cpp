#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "asmaml/ani.hpp"
#include "asmaml/error.hpp"
#include "asmaml/rng.hpp"

using namespace asmaml;

namespace {

// Dense brute-force reference: builds (I - D^{-1}A) explicitly and sums row
// L1 norms of its product with H. Kept independent of the implementation.
double ani_dense_oracle(std::size_t n, const std::vector<std::pair<int, int>>& edges,
                        const Tensor& h) {
  std::vector<std::vector<double>> a(n, std::vector<double>(n, 0.0));
  std::vector<double> deg(n, 0.0);
  for (const auto& [u, v] : edges) {
    a[static_cast<std::size_t>(u)][static_cast<std::size_t>(v)] = 1.0;
    a[static_cast<std::size_t>(v)][static_cast<std::size_t>(u)] = 1.0;
    deg[static_cast<std::size_t>(u)] += 1.0;
    deg[static_cast<std::size_t>(v)] += 1.0;
  }
  std::vector<std::vector<double>> op(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double da = deg[i] > 0.0 ? a[i][j] / deg[i] : 0.0;
      op[i][j] = (i == j ? 1.0 : 0.0) - da;
    }
  }
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < h.cols(); ++c) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += op[i][j] * h.at(j, c);
      total += std::fabs(acc);
    }
  }
  return total / static_cast<double>(n);
}

}  // namespace

TEST_CASE("complete graph with identical features has zero information") {
  const std::vector<std::pair<int, int>> k3 = {{0, 1}, {0, 2}, {1, 2}};
  CHECK(ani::ani_graph(3, k3, Tensor::matrix(3, 4, 0.8)) == doctest::Approx(0.0));
}

TEST_CASE("isolated node contributes its own L1 norm") {
  CHECK(ani::ani_graph(1, {}, Tensor({1, 2}, {1.0, -2.0})) == doctest::Approx(3.0));
}

TEST_CASE("three-node path hand example") {
  const Tensor h({3, 2}, {1.0, 0.0, 0.0, 1.0, 1.0, 1.0});
  const std::vector<std::pair<int, int>> path = {{0, 1}, {1, 2}};
  CHECK(ani::ani_graph(3, path, h) == doctest::Approx(1.5).epsilon(1e-15));
}

TEST_CASE("batch mean and its edge cases") {
  CHECK(ani::ani_batch({2.5}) == doctest::Approx(2.5));
  CHECK(ani::ani_batch({1.0, 3.0}) == doctest::Approx(2.0));
  CHECK_THROWS_AS(ani::ani_batch({}), ShapeError);
}

TEST_CASE("matches the dense oracle on random graphs") {
  Rng rng(55);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.uniform_int(8);
    std::vector<std::pair<int, int>> edges;
    for (std::size_t u = 0; u < n; ++u) {
      for (std::size_t v = u + 1; v < n; ++v) {
        if (rng.uniform() < 0.4) edges.emplace_back(static_cast<int>(u), static_cast<int>(v));
      }
    }
    const std::size_t d = 1 + rng.uniform_int(4);
    Tensor h = Tensor::matrix(n, d);
    for (double& v : h.values()) v = rng.normal();
    const double got = ani::ani_graph(n, edges, h);
    const double want = ani_dense_oracle(n, edges, h);
    CHECK(std::fabs(got - want) < 1e-12);
  }
}

TEST_CASE("positive homogeneity in the hidden matrix") {
  Rng rng(66);
  const std::vector<std::pair<int, int>> edges = {{0, 1}, {1, 2}, {2, 3}};
  Tensor h = Tensor::matrix(4, 3);
  for (double& v : h.values()) v = rng.normal();
  const double base = ani::ani_graph(4, edges, h);
  for (const double s : {0.5, 2.0, 7.25}) {
    Tensor scaled = h;
    for (double& v : scaled.values()) v *= s;
    CHECK(ani::ani_graph(4, edges, scaled) == doctest::Approx(s * base).epsilon(1e-12));
  }
}

TEST_CASE("exact node-permutation invariance") {
  Rng rng(77);
  const std::size_t n = 6;
  std::vector<std::pair<int, int>> edges = {{0, 1}, {0, 2}, {1, 3}, {2, 4}, {4, 5}, {1, 2}};
  Tensor h = Tensor::matrix(n, 2);
  for (double& v : h.values()) v = rng.normal();
  const double base = ani::ani_graph(n, edges, h);

  std::vector<int> perm = {3, 0, 5, 1, 4, 2};
  std::vector<std::pair<int, int>> pedges;
  for (const auto& [u, v] : edges) {
    pedges.emplace_back(perm[static_cast<std::size_t>(u)], perm[static_cast<std::size_t>(v)]);
  }
  Tensor ph = Tensor::matrix(n, 2);
  for (std::size_t v = 0; v < n; ++v) {
    for (std::size_t j = 0; j < 2; ++j) {
      ph.at(static_cast<std::size_t>(perm[v]), j) = h.at(v, j);
    }
  }
  CHECK(ani::ani_graph(n, pedges, ph) == doctest::Approx(base).epsilon(1e-14));
}

TEST_CASE("shape mismatch is rejected") {
  CHECK_THROWS_AS(ani::ani_graph(3, {}, Tensor::matrix(2, 2)), ShapeError);
}
