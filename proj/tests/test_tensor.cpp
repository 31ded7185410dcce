#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "asmaml/error.hpp"
#include "asmaml/rng.hpp"
#include "asmaml/tensor.hpp"

using namespace asmaml;

TEST_CASE("tensor shape bookkeeping") {
  Tensor t = Tensor::matrix(3, 4, 1.5);
  CHECK(t.rows() == 3);
  CHECK(t.cols() == 4);
  CHECK(t.size() == 12);
  t.at(2, 3) = -2.0;
  CHECK(t[11] == -2.0);
  CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>{1.0}), ShapeError);
}

TEST_CASE("paramset axpy matches names and shapes") {
  ParamSet p;
  p.emplace("a", Tensor::matrix(2, 2, 1.0));
  p.emplace("b", Tensor::matrix(1, 3, 2.0));
  GradRecord g = zeros_like(p);
  g.at("a")[0] = 10.0;
  axpy(p, 0.5, g);
  CHECK(p.at("a")[0] == 6.0);
  CHECK(p.at("a")[1] == 1.0);
  CHECK(p.at("b")[0] == 2.0);

  GradRecord bad;
  bad.emplace("a", Tensor::matrix(3, 3));
  CHECK_THROWS_AS(axpy(p, 1.0, bad), ShapeError);
}

TEST_CASE("checkpoint stream round-trips bitwise") {
  Rng rng(123);
  ParamSet p;
  Tensor w = Tensor::matrix(4, 7);
  for (double& v : w.values()) v = rng.normal() * 1e-7;
  Tensor b({1, 3}, {0.1, -0.0, 1e308});
  p.emplace("layer.weight", std::move(w));
  p.emplace("layer.bias", std::move(b));

  std::stringstream ss;
  write_params(p, ss);
  const ParamSet q = read_params(ss);
  REQUIRE(q.size() == p.size());
  for (const auto& [name, t] : p) {
    REQUIRE(q.count(name) == 1);
    CHECK(q.at(name).shape() == t.shape());
    CHECK(q.at(name).values() == t.values());  // exact, not approximate
  }
}

TEST_CASE("checkpoint header is validated") {
  std::stringstream ss("something-else v1\n0\n");
  CHECK_THROWS_AS(read_params(ss), DataError);
}

TEST_CASE("rng determinism and ranges") {
  Rng a(99), b(99);
  for (int i = 0; i < 100; ++i) {
    CHECK(a.uniform_int(17) == b.uniform_int(17));
    const double u = a.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    b.uniform();
  }
  auto sample = a.sample_without_replacement(10, 10);
  std::sort(sample.begin(), sample.end());
  for (std::size_t i = 0; i < 10; ++i) CHECK(sample[i] == i);
}
