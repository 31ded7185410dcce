#include "asmaml/tape.hpp"

#include <algorithm>
#include <cmath>

#include "asmaml/error.hpp"
#include "asmaml/kernels.hpp"

namespace asmaml::ad {

namespace {
inline double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }
}

const char* Tape::op_name(Op op) {
  switch (op) {
    case Op::Input: return "input";
    case Op::Constant: return "constant";
    case Op::MatMul: return "matmul";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::BiasAdd: return "bias_add";
    case Op::Sigmoid: return "sigmoid";
    case Op::Tanh: return "tanh";
    case Op::Relu: return "relu";
    case Op::Log: return "log";
    case Op::Scale: return "scale";
    case Op::RowMean: return "rowmean";
    case Op::ColMax: return "colmax";
    case Op::SumAll: return "sum_all";
    case Op::L1Rows: return "l1_rows";
    case Op::GatherRows: return "gather_rows";
    case Op::ScaleRows: return "scale_rows";
    case Op::ConcatCols: return "concat_cols";
    case Op::StackRows: return "stack_rows";
    case Op::SoftmaxCE: return "softmax_cross_entropy";
  }
  return "?";
}

int Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  const int id = static_cast<int>(nodes_.size()) - 1;
  finish_forward(id);
  return id;
}

void Tape::finish_forward(int id) {
  if (!opt_.check_finite) return;
  const Node& n = nodes_[id];
  for (double v : n.val) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string("non-finite value produced by op '") +
                         op_name(n.op) + "'" +
                         (n.name.empty() ? "" : " (" + n.name + ")"));
    }
  }
  if (opt_.tangents) {
    for (double v : n.tan) {
      if (!std::isfinite(v)) {
        throw NumericError(std::string("non-finite tangent produced by op '") +
                           op_name(n.op) + "'");
      }
    }
  }
}

int Tape::input(const std::string& name, const Tensor& value) {
  Node n;
  n.op = Op::Input;
  n.rows = value.rows();
  n.cols = value.cols();
  n.val = value.values();
  n.orig_shape = value.shape();
  n.needs_grad = true;
  n.name = name;
  if (opt_.tangents) n.tan.assign(n.val.size(), 0.0);
  return push(std::move(n));
}

int Tape::input(const std::string& name, const Tensor& value, const Tensor& tangent) {
  if (!opt_.tangents) throw ShapeError("tangent input on a tape without tangent mode");
  if (!value.same_shape(tangent)) throw ShapeError("tangent shape mismatch for '" + name + "'");
  Node n;
  n.op = Op::Input;
  n.rows = value.rows();
  n.cols = value.cols();
  n.val = value.values();
  n.tan = tangent.values();
  n.orig_shape = value.shape();
  n.needs_grad = true;
  n.name = name;
  return push(std::move(n));
}

int Tape::constant(const Tensor& value) {
  Node n;
  n.op = Op::Constant;
  n.rows = value.rows();
  n.cols = value.cols();
  n.val = value.values();
  if (opt_.tangents) n.tan.assign(n.val.size(), 0.0);
  return push(std::move(n));
}

int Tape::matmul(int a, int b) {
  const Node& A = nodes_[a];
  const Node& B = nodes_[b];
  if (A.cols != B.rows) throw ShapeError("matmul inner dimension mismatch");
  Node n;
  n.op = Op::MatMul;
  n.a = a;
  n.b = b;
  n.rows = A.rows;
  n.cols = B.cols;
  n.needs_grad = A.needs_grad || B.needs_grad;
  n.val.resize(n.rows * n.cols);
  kern::matmul_nn(A.val.data(), B.val.data(), n.val.data(), A.rows, A.cols, B.cols);
  if (opt_.tangents) {
    n.tan.resize(n.val.size());
    std::vector<double> tmp(n.val.size());
    kern::matmul_nn(A.tan.data(), B.val.data(), n.tan.data(), A.rows, A.cols, B.cols);
    kern::matmul_nn(A.val.data(), B.tan.data(), tmp.data(), A.rows, A.cols, B.cols);
    for (std::size_t i = 0; i < n.tan.size(); ++i) n.tan[i] += tmp[i];
  }
  return push(std::move(n));
}

int Tape::add(int a, int b) {
  const Node& A = nodes_[a];
  const Node& B = nodes_[b];
  if (A.rows != B.rows || A.cols != B.cols) throw ShapeError("add shape mismatch");
  Node n;
  n.op = Op::Add;
  n.a = a;
  n.b = b;
  n.rows = A.rows;
  n.cols = A.cols;
  n.needs_grad = A.needs_grad || B.needs_grad;
  n.val.resize(A.val.size());
  kern::map_binary(kern::Binary::Add, A.val.data(), B.val.data(), n.val.data(), n.val.size());
  if (opt_.tangents) {
    n.tan.resize(A.val.size());
    kern::map_binary(kern::Binary::Add, A.tan.data(), B.tan.data(), n.tan.data(), n.tan.size());
  }
  return push(std::move(n));
}

int Tape::sub(int a, int b) {
  const Node& A = nodes_[a];
  const Node& B = nodes_[b];
  if (A.rows != B.rows || A.cols != B.cols) throw ShapeError("sub shape mismatch");
  Node n;
  n.op = Op::Sub;
  n.a = a;
  n.b = b;
  n.rows = A.rows;
  n.cols = A.cols;
  n.needs_grad = A.needs_grad || B.needs_grad;
  n.val.resize(A.val.size());
  kern::map_binary(kern::Binary::Sub, A.val.data(), B.val.data(), n.val.data(), n.val.size());
  if (opt_.tangents) {
    n.tan.resize(A.val.size());
    kern::map_binary(kern::Binary::Sub, A.tan.data(), B.tan.data(), n.tan.data(), n.tan.size());
  }
  return push(std::move(n));
}

int Tape::mul(int a, int b) {
  const Node& A = nodes_[a];
  const Node& B = nodes_[b];
  if (A.rows != B.rows || A.cols != B.cols) throw ShapeError("mul shape mismatch");
  Node n;
  n.op = Op::Mul;
  n.a = a;
  n.b = b;
  n.rows = A.rows;
  n.cols = A.cols;
  n.needs_grad = A.needs_grad || B.needs_grad;
  n.val.resize(A.val.size());
  kern::map_binary(kern::Binary::Mul, A.val.data(), B.val.data(), n.val.data(), n.val.size());
  if (opt_.tangents) {
    n.tan.resize(A.val.size());
    for (std::size_t i = 0; i < n.tan.size(); ++i) {
      n.tan[i] = A.tan[i] * B.val[i] + A.val[i] * B.tan[i];
    }
  }
  return push(std::move(n));
}

int Tape::bias_add(int x, int bias) {
  const Node& X = nodes_[x];
  const Node& B = nodes_[bias];
  if (B.rows != 1 || B.cols != X.cols) throw ShapeError("bias_add expects a 1 x cols bias");
  Node n;
  n.op = Op::BiasAdd;
  n.a = x;
  n.b = bias;
  n.rows = X.rows;
  n.cols = X.cols;
  n.needs_grad = X.needs_grad || B.needs_grad;
  n.val.resize(X.val.size());
  for (std::size_t i = 0; i < X.rows; ++i) {
    for (std::size_t j = 0; j < X.cols; ++j) {
      n.val[i * X.cols + j] = X.val[i * X.cols + j] + B.val[j];
    }
  }
  if (opt_.tangents) {
    n.tan.resize(X.val.size());
    for (std::size_t i = 0; i < X.rows; ++i) {
      for (std::size_t j = 0; j < X.cols; ++j) {
        n.tan[i * X.cols + j] = X.tan[i * X.cols + j] + B.tan[j];
      }
    }
  }
  return push(std::move(n));
}

int Tape::sigmoid(int x) {
  const Node& X = nodes_[x];
  Node n;
  n.op = Op::Sigmoid;
  n.a = x;
  n.rows = X.rows;
  n.cols = X.cols;
  n.needs_grad = X.needs_grad;
  n.val.resize(X.val.size());
  kern::map_unary(kern::Unary::Sigmoid, X.val.data(), n.val.data(), n.val.size());
  if (opt_.tangents) {
    n.tan.resize(X.val.size());
    for (std::size_t i = 0; i < n.tan.size(); ++i) {
      n.tan[i] = n.val[i] * (1.0 - n.val[i]) * X.tan[i];
    }
  }
  return push(std::move(n));
}

int Tape::tanh_(int x) {
  const Node& X = nodes_[x];
  Node n;
  n.op = Op::Tanh;
  n.a = x;
  n.rows = X.rows;
  n.cols = X.cols;
  n.needs_grad = X.needs_grad;
  n.val.resize(X.val.size());
  kern::map_unary(kern::Unary::Tanh, X.val.data(), n.val.data(), n.val.size());
  if (opt_.tangents) {
    n.tan.resize(X.val.size());
    for (std::size_t i = 0; i < n.tan.size(); ++i) {
      n.tan[i] = (1.0 - n.val[i] * n.val[i]) * X.tan[i];
    }
  }
  return push(std::move(n));
}

int Tape::relu(int x) {
  const Node& X = nodes_[x];
  Node n;
  n.op = Op::Relu;
  n.a = x;
  n.rows = X.rows;
  n.cols = X.cols;
  n.needs_grad = X.needs_grad;
  n.val.resize(X.val.size());
  kern::map_unary(kern::Unary::Relu, X.val.data(), n.val.data(), n.val.size());
  if (opt_.tangents) {
    n.tan.resize(X.val.size());
    for (std::size_t i = 0; i < n.tan.size(); ++i) {
      n.tan[i] = X.val[i] > 0.0 ? X.tan[i] : 0.0;
    }
  }
  return push(std::move(n));
}

int Tape::log_(int x) {
  const Node& X = nodes_[x];
  Node n;
  n.op = Op::Log;
  n.a = x;
  n.rows = X.rows;
  n.cols = X.cols;
  n.needs_grad = X.needs_grad;
  n.val.resize(X.val.size());
  kern::map_unary(kern::Unary::Log, X.val.data(), n.val.data(), n.val.size());
  if (opt_.tangents) {
    n.tan.resize(X.val.size());
    for (std::size_t i = 0; i < n.tan.size(); ++i) n.tan[i] = X.tan[i] / X.val[i];
  }
  return push(std::move(n));
}

int Tape::scale(int x, double c) {
  const Node& X = nodes_[x];
  Node n;
  n.op = Op::Scale;
  n.a = x;
  n.c = c;
  n.rows = X.rows;
  n.cols = X.cols;
  n.needs_grad = X.needs_grad;
  n.val.resize(X.val.size());
  for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] = c * X.val[i];
  if (opt_.tangents) {
    n.tan.resize(X.val.size());
    for (std::size_t i = 0; i < n.tan.size(); ++i) n.tan[i] = c * X.tan[i];
  }
  return push(std::move(n));
}

int Tape::rowmean(int x) {
  const Node& X = nodes_[x];
  if (X.rows == 0) throw ShapeError("rowmean of empty matrix");
  Node n;
  n.op = Op::RowMean;
  n.a = x;
  n.rows = 1;
  n.cols = X.cols;
  n.needs_grad = X.needs_grad;
  n.val.assign(X.cols, 0.0);
  for (std::size_t i = 0; i < X.rows; ++i) {
    for (std::size_t j = 0; j < X.cols; ++j) n.val[j] += X.val[i * X.cols + j];
  }
  const double inv = 1.0 / static_cast<double>(X.rows);
  for (double& v : n.val) v *= inv;
  if (opt_.tangents) {
    n.tan.assign(X.cols, 0.0);
    for (std::size_t i = 0; i < X.rows; ++i) {
      for (std::size_t j = 0; j < X.cols; ++j) n.tan[j] += X.tan[i * X.cols + j];
    }
    for (double& v : n.tan) v *= inv;
  }
  return push(std::move(n));
}

int Tape::colmax(int x) {
  const Node& X = nodes_[x];
  if (X.rows == 0) throw ShapeError("colmax of empty matrix");
  Node n;
  n.op = Op::ColMax;
  n.a = x;
  n.rows = 1;
  n.cols = X.cols;
  n.needs_grad = X.needs_grad;
  n.val.resize(X.cols);
  n.idx.resize(X.cols);
  for (std::size_t j = 0; j < X.cols; ++j) {
    std::size_t arg = 0;
    double best = X.val[j];
    for (std::size_t i = 1; i < X.rows; ++i) {
      const double v = X.val[i * X.cols + j];
      if (v > best) {  // strict: ties keep the lowest row index
        best = v;
        arg = i;
      }
    }
    n.val[j] = best;
    n.idx[j] = static_cast<int>(arg);
  }
  if (opt_.tangents) {
    n.tan.resize(X.cols);
    for (std::size_t j = 0; j < X.cols; ++j) {
      n.tan[j] = X.tan[static_cast<std::size_t>(n.idx[j]) * X.cols + j];
    }
  }
  return push(std::move(n));
}

int Tape::sum_all(int x) {
  const Node& X = nodes_[x];
  Node n;
  n.op = Op::SumAll;
  n.a = x;
  n.rows = 1;
  n.cols = 1;
  n.needs_grad = X.needs_grad;
  double acc = 0.0;
  for (double v : X.val) acc += v;
  n.val.assign(1, acc);
  if (opt_.tangents) {
    double t = 0.0;
    for (double v : X.tan) t += v;
    n.tan.assign(1, t);
  }
  return push(std::move(n));
}

int Tape::l1_rows(int x) {
  const Node& X = nodes_[x];
  Node n;
  n.op = Op::L1Rows;
  n.a = x;
  n.rows = X.rows;
  n.cols = 1;
  n.needs_grad = X.needs_grad;
  n.val.assign(X.rows, 0.0);
  for (std::size_t i = 0; i < X.rows; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < X.cols; ++j) acc += std::fabs(X.val[i * X.cols + j]);
    n.val[i] = acc;
  }
  if (opt_.tangents) {
    n.tan.assign(X.rows, 0.0);
    for (std::size_t i = 0; i < X.rows; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < X.cols; ++j) {
        acc += sgn(X.val[i * X.cols + j]) * X.tan[i * X.cols + j];
      }
      n.tan[i] = acc;
    }
  }
  return push(std::move(n));
}

int Tape::gather_rows(int x, std::vector<int> idx) {
  const Node& X = nodes_[x];
  for (int r : idx) {
    if (r < 0 || static_cast<std::size_t>(r) >= X.rows) {
      throw ShapeError("gather_rows index out of range");
    }
  }
  Node n;
  n.op = Op::GatherRows;
  n.a = x;
  n.rows = idx.size();
  n.cols = X.cols;
  n.needs_grad = X.needs_grad;
  n.idx = std::move(idx);
  n.val.resize(n.rows * n.cols);
  for (std::size_t r = 0; r < n.rows; ++r) {
    const double* src = &X.val[static_cast<std::size_t>(n.idx[r]) * X.cols];
    std::copy(src, src + X.cols, &n.val[r * n.cols]);
  }
  if (opt_.tangents) {
    n.tan.resize(n.rows * n.cols);
    for (std::size_t r = 0; r < n.rows; ++r) {
      const double* src = &X.tan[static_cast<std::size_t>(n.idx[r]) * X.cols];
      std::copy(src, src + X.cols, &n.tan[r * n.cols]);
    }
  }
  return push(std::move(n));
}

int Tape::scale_rows(int x, int s) {
  const Node& X = nodes_[x];
  const Node& S = nodes_[s];
  if (S.rows != X.rows || S.cols != 1) throw ShapeError("scale_rows expects an n x 1 scale");
  Node n;
  n.op = Op::ScaleRows;
  n.a = x;
  n.b = s;
  n.rows = X.rows;
  n.cols = X.cols;
  n.needs_grad = X.needs_grad || S.needs_grad;
  n.val.resize(X.val.size());
  for (std::size_t i = 0; i < X.rows; ++i) {
    for (std::size_t j = 0; j < X.cols; ++j) {
      n.val[i * X.cols + j] = X.val[i * X.cols + j] * S.val[i];
    }
  }
  if (opt_.tangents) {
    n.tan.resize(X.val.size());
    for (std::size_t i = 0; i < X.rows; ++i) {
      for (std::size_t j = 0; j < X.cols; ++j) {
        n.tan[i * X.cols + j] =
            X.tan[i * X.cols + j] * S.val[i] + X.val[i * X.cols + j] * S.tan[i];
      }
    }
  }
  return push(std::move(n));
}

int Tape::concat_cols(int a, int b) {
  const Node& A = nodes_[a];
  const Node& B = nodes_[b];
  if (A.rows != B.rows) throw ShapeError("concat_cols row mismatch");
  Node n;
  n.op = Op::ConcatCols;
  n.a = a;
  n.b = b;
  n.rows = A.rows;
  n.cols = A.cols + B.cols;
  n.needs_grad = A.needs_grad || B.needs_grad;
  n.val.resize(n.rows * n.cols);
  for (std::size_t i = 0; i < n.rows; ++i) {
    std::copy(&A.val[i * A.cols], &A.val[i * A.cols] + A.cols, &n.val[i * n.cols]);
    std::copy(&B.val[i * B.cols], &B.val[i * B.cols] + B.cols, &n.val[i * n.cols + A.cols]);
  }
  if (opt_.tangents) {
    n.tan.resize(n.rows * n.cols);
    for (std::size_t i = 0; i < n.rows; ++i) {
      std::copy(&A.tan[i * A.cols], &A.tan[i * A.cols] + A.cols, &n.tan[i * n.cols]);
      std::copy(&B.tan[i * B.cols], &B.tan[i * B.cols] + B.cols, &n.tan[i * n.cols + A.cols]);
    }
  }
  return push(std::move(n));
}

int Tape::stack_rows(const std::vector<int>& xs) {
  if (xs.empty()) throw ShapeError("stack_rows of nothing");
  const std::size_t cols = nodes_[xs[0]].cols;
  std::size_t rows = 0;
  for (int id : xs) {
    if (nodes_[id].cols != cols) throw ShapeError("stack_rows column mismatch");
    rows += nodes_[id].rows;
  }
  Node n;
  n.op = Op::StackRows;
  n.ins = xs;
  n.rows = rows;
  n.cols = cols;
  for (int id : xs) n.needs_grad = n.needs_grad || nodes_[id].needs_grad;
  n.val.resize(rows * cols);
  std::size_t off = 0;
  for (int id : xs) {
    const Node& X = nodes_[id];
    std::copy(X.val.begin(), X.val.end(), n.val.begin() + off);
    off += X.val.size();
  }
  if (opt_.tangents) {
    n.tan.resize(rows * cols);
    off = 0;
    for (int id : xs) {
      const Node& X = nodes_[id];
      std::copy(X.tan.begin(), X.tan.end(), n.tan.begin() + off);
      off += X.tan.size();
    }
  }
  return push(std::move(n));
}

int Tape::softmax_cross_entropy(int logits, std::vector<int> labels) {
  const Node& X = nodes_[logits];
  if (labels.size() != X.rows) throw ShapeError("one label per logits row required");
  for (int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= X.cols) {
      throw ShapeError("label out of range for logits width");
    }
  }
  Node n;
  n.op = Op::SoftmaxCE;
  n.a = logits;
  n.rows = 1;
  n.cols = 1;
  n.needs_grad = X.needs_grad;
  n.idx = std::move(labels);
  n.aux.resize(X.rows * X.cols);  // probabilities, reused by backward
  double loss = 0.0;
  for (std::size_t i = 0; i < X.rows; ++i) {
    const double* row = &X.val[i * X.cols];
    double m = row[0];
    for (std::size_t j = 1; j < X.cols; ++j) m = std::max(m, row[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < X.cols; ++j) z += std::exp(row[j] - m);
    for (std::size_t j = 0; j < X.cols; ++j) n.aux[i * X.cols + j] = std::exp(row[j] - m) / z;
    loss += std::log(z) - (row[static_cast<std::size_t>(n.idx[i])] - m);
  }
  const double inv = 1.0 / static_cast<double>(X.rows);
  n.val.assign(1, loss * inv);
  if (opt_.tangents) {
    double t = 0.0;
    for (std::size_t i = 0; i < X.rows; ++i) {
      for (std::size_t j = 0; j < X.cols; ++j) {
        const double residual =
            n.aux[i * X.cols + j] - (static_cast<std::size_t>(n.idx[i]) == j ? 1.0 : 0.0);
        t += residual * X.tan[i * X.cols + j];
      }
    }
    n.tan.assign(1, t * inv);
  }
  return push(std::move(n));
}

double Tape::scalar(int id) const {
  const Node& n = nodes_[id];
  if (n.rows != 1 || n.cols != 1) throw ShapeError("scalar() on a non-scalar node");
  return n.val[0];
}

Tensor Tape::value_tensor(int id) const {
  const Node& n = nodes_[id];
  return Tensor({n.rows, n.cols}, n.val);
}

Tensor Tape::adjoint(int id) const {
  const Node& n = nodes_[id];
  auto shape = n.orig_shape.empty() ? std::vector<std::size_t>{n.rows, n.cols} : n.orig_shape;
  if (n.adj.empty()) return Tensor(shape, 0.0);
  return Tensor(shape, n.adj);
}

Tensor Tape::adjoint_tangent(int id) const {
  const Node& n = nodes_[id];
  auto shape = n.orig_shape.empty() ? std::vector<std::size_t>{n.rows, n.cols} : n.orig_shape;
  if (n.adjtan.empty()) return Tensor(shape, 0.0);
  return Tensor(shape, n.adjtan);
}

void Tape::backward(int root) {
  if (backward_done_) throw ShapeError("backward may run only once per tape");
  backward_done_ = true;
  Node& r = nodes_[root];
  if (r.rows != 1 || r.cols != 1) throw ShapeError("backward root must be scalar");
  for (Node& n : nodes_) {
    if (!n.needs_grad) continue;
    n.adj.assign(n.val.size(), 0.0);
    if (opt_.tangents) n.adjtan.assign(n.val.size(), 0.0);
  }
  if (!r.needs_grad) return;  // objective does not depend on any input
  r.adj[0] = 1.0;
  for (int id = root; id >= 0; --id) propagate(id);
}

void Tape::propagate(int id) {
  Node& n = nodes_[id];
  if (!n.needs_grad || n.adj.empty()) return;
  const bool tg = opt_.tangents;
  auto grad_of = [&](int in) -> Node* {
    Node* p = &nodes_[in];
    return p->needs_grad ? p : nullptr;
  };
  switch (n.op) {
    case Op::Input:
    case Op::Constant:
      return;
    case Op::MatMul: {
      Node& A = nodes_[n.a];
      Node& B = nodes_[n.b];
      if (Node* ga = grad_of(n.a)) {
        std::vector<double> tmp(A.val.size());
        kern::matmul_nt(n.adj.data(), B.val.data(), tmp.data(), n.rows, n.cols, B.rows);
        for (std::size_t i = 0; i < tmp.size(); ++i) ga->adj[i] += tmp[i];
        if (tg) {
          kern::matmul_nt(n.adjtan.data(), B.val.data(), tmp.data(), n.rows, n.cols, B.rows);
          for (std::size_t i = 0; i < tmp.size(); ++i) ga->adjtan[i] += tmp[i];
          kern::matmul_nt(n.adj.data(), B.tan.data(), tmp.data(), n.rows, n.cols, B.rows);
          for (std::size_t i = 0; i < tmp.size(); ++i) ga->adjtan[i] += tmp[i];
        }
      }
      if (Node* gb = grad_of(n.b)) {
        std::vector<double> tmp(B.val.size());
        kern::matmul_tn(A.val.data(), n.adj.data(), tmp.data(), B.rows, A.rows, n.cols);
        for (std::size_t i = 0; i < tmp.size(); ++i) gb->adj[i] += tmp[i];
        if (tg) {
          kern::matmul_tn(A.val.data(), n.adjtan.data(), tmp.data(), B.rows, A.rows, n.cols);
          for (std::size_t i = 0; i < tmp.size(); ++i) gb->adjtan[i] += tmp[i];
          kern::matmul_tn(A.tan.data(), n.adj.data(), tmp.data(), B.rows, A.rows, n.cols);
          for (std::size_t i = 0; i < tmp.size(); ++i) gb->adjtan[i] += tmp[i];
        }
      }
      return;
    }
    case Op::Add: {
      if (Node* ga = grad_of(n.a)) {
        for (std::size_t i = 0; i < n.adj.size(); ++i) ga->adj[i] += n.adj[i];
        if (tg) for (std::size_t i = 0; i < n.adj.size(); ++i) ga->adjtan[i] += n.adjtan[i];
      }
      if (Node* gb = grad_of(n.b)) {
        for (std::size_t i = 0; i < n.adj.size(); ++i) gb->adj[i] += n.adj[i];
        if (tg) for (std::size_t i = 0; i < n.adj.size(); ++i) gb->adjtan[i] += n.adjtan[i];
      }
      return;
    }
    case Op::Sub: {
      if (Node* ga = grad_of(n.a)) {
        for (std::size_t i = 0; i < n.adj.size(); ++i) ga->adj[i] += n.adj[i];
        if (tg) for (std::size_t i = 0; i < n.adj.size(); ++i) ga->adjtan[i] += n.adjtan[i];
      }
      if (Node* gb = grad_of(n.b)) {
        for (std::size_t i = 0; i < n.adj.size(); ++i) gb->adj[i] -= n.adj[i];
        if (tg) for (std::size_t i = 0; i < n.adj.size(); ++i) gb->adjtan[i] -= n.adjtan[i];
      }
      return;
    }
    case Op::Mul: {
      Node& A = nodes_[n.a];
      Node& B = nodes_[n.b];
      if (Node* ga = grad_of(n.a)) {
        for (std::size_t i = 0; i < n.adj.size(); ++i) ga->adj[i] += n.adj[i] * B.val[i];
        if (tg) {
          for (std::size_t i = 0; i < n.adj.size(); ++i) {
            ga->adjtan[i] += n.adjtan[i] * B.val[i] + n.adj[i] * B.tan[i];
          }
        }
      }
      if (Node* gb = grad_of(n.b)) {
        for (std::size_t i = 0; i < n.adj.size(); ++i) gb->adj[i] += n.adj[i] * A.val[i];
        if (tg) {
          for (std::size_t i = 0; i < n.adj.size(); ++i) {
            gb->adjtan[i] += n.adjtan[i] * A.val[i] + n.adj[i] * A.tan[i];
          }
        }
      }
      return;
    }
    case Op::BiasAdd: {
      if (Node* ga = grad_of(n.a)) {
        for (std::size_t i = 0; i < n.adj.size(); ++i) ga->adj[i] += n.adj[i];
        if (tg) for (std::size_t i = 0; i < n.adj.size(); ++i) ga->adjtan[i] += n.adjtan[i];
      }
      if (Node* gb = grad_of(n.b)) {
        for (std::size_t i = 0; i < n.rows; ++i) {
          for (std::size_t j = 0; j < n.cols; ++j) {
            gb->adj[j] += n.adj[i * n.cols + j];
            if (tg) gb->adjtan[j] += n.adjtan[i * n.cols + j];
          }
        }
      }
      return;
    }
    case Op::Sigmoid: {
      if (Node* ga = grad_of(n.a)) {
        for (std::size_t i = 0; i < n.adj.size(); ++i) {
          const double d = n.val[i] * (1.0 - n.val[i]);
          ga->adj[i] += n.adj[i] * d;
          if (tg) {
            ga->adjtan[i] += n.adjtan[i] * d + n.adj[i] * (1.0 - 2.0 * n.val[i]) * n.tan[i];
          }
        }
      }
      return;
    }
    case Op::Tanh: {
      if (Node* ga = grad_of(n.a)) {
        for (std::size_t i = 0; i < n.adj.size(); ++i) {
          const double d = 1.0 - n.val[i] * n.val[i];
          ga->adj[i] += n.adj[i] * d;
          if (tg) {
            ga->adjtan[i] += n.adjtan[i] * d - n.adj[i] * 2.0 * n.val[i] * n.tan[i];
          }
        }
      }
      return;
    }
    case Op::Relu: {
      Node& A = nodes_[n.a];
      if (Node* ga = grad_of(n.a)) {
        for (std::size_t i = 0; i < n.adj.size(); ++i) {
          if (A.val[i] > 0.0) {
            ga->adj[i] += n.adj[i];
            if (tg) ga->adjtan[i] += n.adjtan[i];
          }
        }
      }
      return;
    }
    case Op::Log: {
      Node& A = nodes_[n.a];
      if (Node* ga = grad_of(n.a)) {
        for (std::size_t i = 0; i < n.adj.size(); ++i) {
          ga->adj[i] += n.adj[i] / A.val[i];
          if (tg) {
            ga->adjtan[i] += n.adjtan[i] / A.val[i] -
                             n.adj[i] * A.tan[i] / (A.val[i] * A.val[i]);
          }
        }
      }
      return;
    }
    case Op::Scale: {
      if (Node* ga = grad_of(n.a)) {
        for (std::size_t i = 0; i < n.adj.size(); ++i) ga->adj[i] += n.c * n.adj[i];
        if (tg) for (std::size_t i = 0; i < n.adj.size(); ++i) ga->adjtan[i] += n.c * n.adjtan[i];
      }
      return;
    }
    case Op::RowMean: {
      Node& A = nodes_[n.a];
      if (Node* ga = grad_of(n.a)) {
        const double inv = 1.0 / static_cast<double>(A.rows);
        for (std::size_t i = 0; i < A.rows; ++i) {
          for (std::size_t j = 0; j < A.cols; ++j) {
            ga->adj[i * A.cols + j] += n.adj[j] * inv;
            if (tg) ga->adjtan[i * A.cols + j] += n.adjtan[j] * inv;
          }
        }
      }
      return;
    }
    case Op::ColMax: {
      Node& A = nodes_[n.a];
      if (Node* ga = grad_of(n.a)) {
        for (std::size_t j = 0; j < n.cols; ++j) {
          const std::size_t i = static_cast<std::size_t>(n.idx[j]);
          ga->adj[i * A.cols + j] += n.adj[j];
          if (tg) ga->adjtan[i * A.cols + j] += n.adjtan[j];
        }
      }
      return;
    }
    case Op::SumAll: {
      Node& A = nodes_[n.a];
      if (Node* ga = grad_of(n.a)) {
        for (std::size_t i = 0; i < A.val.size(); ++i) {
          ga->adj[i] += n.adj[0];
          if (tg) ga->adjtan[i] += n.adjtan[0];
        }
      }
      return;
    }
    case Op::L1Rows: {
      Node& A = nodes_[n.a];
      if (Node* ga = grad_of(n.a)) {
        for (std::size_t i = 0; i < A.rows; ++i) {
          for (std::size_t j = 0; j < A.cols; ++j) {
            const double s = sgn(A.val[i * A.cols + j]);
            ga->adj[i * A.cols + j] += n.adj[i] * s;
            if (tg) ga->adjtan[i * A.cols + j] += n.adjtan[i] * s;
          }
        }
      }
      return;
    }
    case Op::GatherRows: {
      Node& A = nodes_[n.a];
      if (Node* ga = grad_of(n.a)) {
        for (std::size_t r = 0; r < n.rows; ++r) {
          const std::size_t src = static_cast<std::size_t>(n.idx[r]);
          for (std::size_t j = 0; j < n.cols; ++j) {
            ga->adj[src * A.cols + j] += n.adj[r * n.cols + j];
            if (tg) ga->adjtan[src * A.cols + j] += n.adjtan[r * n.cols + j];
          }
        }
      }
      return;
    }
    case Op::ScaleRows: {
      Node& A = nodes_[n.a];
      Node& S = nodes_[n.b];
      if (Node* ga = grad_of(n.a)) {
        for (std::size_t i = 0; i < n.rows; ++i) {
          for (std::size_t j = 0; j < n.cols; ++j) {
            ga->adj[i * n.cols + j] += n.adj[i * n.cols + j] * S.val[i];
            if (tg) {
              ga->adjtan[i * n.cols + j] +=
                  n.adjtan[i * n.cols + j] * S.val[i] + n.adj[i * n.cols + j] * S.tan[i];
            }
          }
        }
      }
      if (Node* gs = grad_of(n.b)) {
        for (std::size_t i = 0; i < n.rows; ++i) {
          double acc = 0.0, acct = 0.0;
          for (std::size_t j = 0; j < n.cols; ++j) {
            acc += n.adj[i * n.cols + j] * A.val[i * n.cols + j];
            if (tg) {
              acct += n.adjtan[i * n.cols + j] * A.val[i * n.cols + j] +
                      n.adj[i * n.cols + j] * A.tan[i * n.cols + j];
            }
          }
          gs->adj[i] += acc;
          if (tg) gs->adjtan[i] += acct;
        }
      }
      return;
    }
    case Op::ConcatCols: {
      Node& A = nodes_[n.a];
      Node& B = nodes_[n.b];
      if (Node* ga = grad_of(n.a)) {
        for (std::size_t i = 0; i < n.rows; ++i) {
          for (std::size_t j = 0; j < A.cols; ++j) {
            ga->adj[i * A.cols + j] += n.adj[i * n.cols + j];
            if (tg) ga->adjtan[i * A.cols + j] += n.adjtan[i * n.cols + j];
          }
        }
      }
      if (Node* gb = grad_of(n.b)) {
        for (std::size_t i = 0; i < n.rows; ++i) {
          for (std::size_t j = 0; j < B.cols; ++j) {
            gb->adj[i * B.cols + j] += n.adj[i * n.cols + A.cols + j];
            if (tg) gb->adjtan[i * B.cols + j] += n.adjtan[i * n.cols + A.cols + j];
          }
        }
      }
      return;
    }
    case Op::StackRows: {
      std::size_t off = 0;
      for (int in : n.ins) {
        Node& X = nodes_[in];
        if (X.needs_grad) {
          for (std::size_t i = 0; i < X.val.size(); ++i) {
            X.adj[i] += n.adj[off + i];
            if (tg) X.adjtan[i] += n.adjtan[off + i];
          }
        }
        off += X.val.size();
      }
      return;
    }
    case Op::SoftmaxCE: {
      Node& A = nodes_[n.a];
      if (Node* ga = grad_of(n.a)) {
        const double inv = 1.0 / static_cast<double>(A.rows);
        // Tangent of probabilities: dp = p * (dx - sum_k p_k dx_k) per row.
        for (std::size_t i = 0; i < A.rows; ++i) {
          double pdx = 0.0;
          if (tg) {
            for (std::size_t k = 0; k < A.cols; ++k) {
              pdx += n.aux[i * A.cols + k] * A.tan[i * A.cols + k];
            }
          }
          for (std::size_t j = 0; j < A.cols; ++j) {
            const double p = n.aux[i * A.cols + j];
            const double residual = p - (static_cast<std::size_t>(n.idx[i]) == j ? 1.0 : 0.0);
            ga->adj[i * A.cols + j] += n.adj[0] * inv * residual;
            if (tg) {
              const double dp = p * (A.tan[i * A.cols + j] - pdx);
              ga->adjtan[i * A.cols + j] += n.adjtan[0] * inv * residual + n.adj[0] * inv * dp;
            }
          }
        }
      }
      return;
    }
  }
}

}  // namespace asmaml::ad
