#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "asmaml/tensor.hpp"

namespace asmaml::ad {

// Tape input node per named parameter.
using ParamNodeIds = std::map<std::string, int>;

struct TapeOptions {
  bool tangents = false;
  bool check_finite = true;
};

// Reverse-mode tape over dense matrices. Nodes are evaluated eagerly at
// creation, so value-dependent control flow (top-c node selection, argmax
// ties) can read results while the graph is being built. When tangent mode
// is on, every node also carries a directional derivative alongside its
// value and adjoint; running backward then yields Hessian-vector products
// in the parameter adjoint tangents.
class Tape {
 public:
  explicit Tape(TapeOptions opt = TapeOptions()) : opt_(opt) {}

  // Differentiable leaf bound to a named parameter.
  int input(const std::string& name, const Tensor& value);
  int input(const std::string& name, const Tensor& value, const Tensor& tangent);
  // Non-differentiable leaf (graph adjacency, data features, ...).
  int constant(const Tensor& value);

  int matmul(int a, int b);
  int add(int a, int b);
  int sub(int a, int b);
  int mul(int a, int b);
  int bias_add(int x, int bias);  // X (n x d) plus a broadcast 1 x d row.
  int sigmoid(int x);
  int tanh_(int x);
  int relu(int x);
  int log_(int x);
  int scale(int x, double c);
  int rowmean(int x);   // 1 x d mean of the rows.
  int colmax(int x);    // 1 x d per-column max over rows; ties pick the lowest row.
  int sum_all(int x);   // 1 x 1.
  int l1_rows(int x);   // n x 1 row L1 norms; subgradient sign(x), sign(0) = 0.
  int gather_rows(int x, std::vector<int> idx);
  int scale_rows(int x, int s);  // row i of X scaled by s[i]; s is n x 1.
  int concat_cols(int a, int b);
  int stack_rows(const std::vector<int>& xs);
  // Mean softmax cross-entropy of logits (n x N) against integer labels.
  int softmax_cross_entropy(int logits, std::vector<int> labels);

  // Reverse sweep from a scalar root. One sweep per tape.
  void backward(int root);

  std::size_t rows(int id) const { return nodes_[id].rows; }
  std::size_t cols(int id) const { return nodes_[id].cols; }
  const std::vector<double>& value(int id) const { return nodes_[id].val; }
  const std::vector<double>& tangent_values(int id) const { return nodes_[id].tan; }
  double scalar(int id) const;
  Tensor value_tensor(int id) const;
  Tensor adjoint(int id) const;
  Tensor adjoint_tangent(int id) const;
  bool tangents_enabled() const { return opt_.tangents; }
  std::size_t node_count() const { return nodes_.size(); }

 private:
  enum class Op : unsigned char {
    Input, Constant, MatMul, Add, Sub, Mul, BiasAdd, Sigmoid, Tanh, Relu,
    Log, Scale, RowMean, ColMax, SumAll, L1Rows, GatherRows, ScaleRows,
    ConcatCols, StackRows, SoftmaxCE,
  };

  struct Node {
    Op op;
    int a = -1;
    int b = -1;
    std::vector<int> ins;        // StackRows operands.
    std::size_t rows = 0, cols = 0;
    std::vector<double> val, tan;
    std::vector<double> adj, adjtan;
    std::vector<int> idx;        // gather indices / labels / argmax rows.
    std::vector<double> aux;     // softmax probabilities.
    std::vector<std::size_t> orig_shape;  // inputs: shape to mirror in adjoints.
    double c = 0.0;              // Scale factor.
    bool needs_grad = false;
    std::string name;            // inputs: parameter name.
  };

  int push(Node n);
  void finish_forward(int id);
  void propagate(int id);
  static const char* op_name(Op op);

  TapeOptions opt_;
  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

}  // namespace asmaml::ad
