#include "asmaml/tensor.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "asmaml/error.hpp"

namespace asmaml {

namespace {
std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}
}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), values_(shape_product(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (values_.size() != shape_product(shape_)) {
    throw ShapeError("tensor values length does not match shape product");
  }
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, double fill) {
  return Tensor({rows, cols}, fill);
}

Tensor Tensor::scalar(double v) { return Tensor({1, 1}, std::vector<double>{v}); }

std::size_t Tensor::rows() const {
  if (shape_.empty()) throw ShapeError("rows() on rank-0 tensor");
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (shape_.size() < 2) return 1;
  if (shape_.size() > 2) throw ShapeError("cols() on tensor of rank > 2");
  return shape_[1];
}

bool Tensor::all_finite() const {
  for (double v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

ParamSet zeros_like(const ParamSet& p) {
  ParamSet out;
  for (const auto& [name, t] : p) out.emplace(name, Tensor(t.shape(), 0.0));
  return out;
}

void axpy(ParamSet& out, double scale, const GradRecord& g) {
  for (auto& [name, t] : out) {
    auto it = g.find(name);
    if (it == g.end()) continue;
    if (!t.same_shape(it->second)) {
      throw ShapeError("axpy shape mismatch for parameter '" + name + "'");
    }
    const double* src = it->second.data();
    double* dst = t.data();
    for (std::size_t i = 0; i < t.size(); ++i) dst[i] += scale * src[i];
  }
}

double dot(const GradRecord& a, const GradRecord& b) {
  double acc = 0.0;
  for (const auto& [name, t] : a) {
    auto it = b.find(name);
    if (it == b.end()) continue;
    const double* x = t.data();
    const double* y = it->second.data();
    for (std::size_t i = 0; i < t.size(); ++i) acc += x[i] * y[i];
  }
  return acc;
}

double max_abs(const GradRecord& g) {
  double m = 0.0;
  for (const auto& [name, t] : g) {
    for (double v : t.values()) m = std::max(m, std::fabs(v));
  }
  return m;
}

void write_params(const ParamSet& params, std::ostream& os) {
  os << "asmaml-params v1\n";
  os << params.size() << "\n";
  char buf[64];
  for (const auto& [name, t] : params) {
    os << name << " " << t.rank();
    for (std::size_t d : t.shape()) os << " " << d;
    os << "\n";
    const auto& v = t.values();
    for (std::size_t i = 0; i < v.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%a", v[i]);
      os << buf << (i + 1 == v.size() ? "" : " ");
    }
    os << "\n";
  }
}

ParamSet read_params(std::istream& is) {
  std::string magic, version;
  is >> magic >> version;
  if (magic != "asmaml-params" || version != "v1") {
    throw DataError("not an asmaml parameter file (bad header)");
  }
  std::size_t count = 0;
  is >> count;
  ParamSet out;
  for (std::size_t p = 0; p < count; ++p) {
    std::string name;
    std::size_t rank = 0;
    if (!(is >> name >> rank)) throw DataError("truncated parameter header");
    std::vector<std::size_t> shape(rank);
    std::size_t n = 1;
    for (std::size_t i = 0; i < rank; ++i) {
      if (!(is >> shape[i])) throw DataError("truncated shape for '" + name + "'");
      n *= shape[i];
    }
    std::vector<double> values(n);
    std::string tok;
    for (std::size_t i = 0; i < n; ++i) {
      if (!(is >> tok)) throw DataError("truncated values for '" + name + "'");
      values[i] = std::strtod(tok.c_str(), nullptr);
    }
    out.emplace(name, Tensor(std::move(shape), std::move(values)));
  }
  return out;
}

void save_params(const ParamSet& params, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open checkpoint for writing: " + path);
  write_params(params, os);
  if (!os) throw DataError("failed writing checkpoint: " + path);
}

ParamSet load_params(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open checkpoint: " + path);
  return read_params(is);
}

}  // namespace asmaml
