#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace asmaml {

// Dense row-major tensor of doubles. All model math is rank-2; the type
// itself allows any rank so scalars and flat stats fit the same container.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
  Tensor(std::vector<std::size_t> shape, std::vector<double> values);

  static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  static Tensor scalar(double v);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t size() const { return values_.size(); }
  std::size_t rank() const { return shape_.size(); }

  std::size_t rows() const;
  std::size_t cols() const;

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  double& at(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> values_;
};

// Named parameter collection. std::map keeps iteration sorted by name, which
// fixes the reduction and update order everywhere.
using ParamSet = std::map<std::string, Tensor>;

// Gradient of a scalar objective; shapes mirror the ParamSet they came from.
using GradRecord = ParamSet;

ParamSet zeros_like(const ParamSet& p);

// out += scale * g, matched by name; missing names in g contribute nothing.
void axpy(ParamSet& out, double scale, const GradRecord& g);

double dot(const GradRecord& a, const GradRecord& b);
double max_abs(const GradRecord& g);

// Checkpoint file: a text header per tensor (name + shape) followed by the
// flat values printed as C hex-floats, so save/load round-trips bitwise.
void save_params(const ParamSet& params, const std::string& path);
ParamSet load_params(const std::string& path);
void write_params(const ParamSet& params, std::ostream& os);
ParamSet read_params(std::istream& is);

}  // namespace asmaml
