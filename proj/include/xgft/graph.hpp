#pragma once

#include <vector>

#include "xgft/params.hpp"
#include "xgft/tensor.hpp"

namespace xgft {

enum class Op {
  Constant,
  Param,
  Affine,    // x[B×n] or [n], W[m×n], b[m] -> [B×m] / [m]
  Linear,    // x[n], W[m×n] -> [m]
  MatMul,    // A[m×k] · B[k×n] -> [m×n]
  Conv2d,    // x[Cin×H×W], f[Cout×Cin×a×a], stride -> [Cout×H'×W']
  Act,       // relu / sigmoid / tanh / identity
  SoftmaxRows,
  LogSoftmaxRows,
  Log,
  Add,
  Sub,
  Mul,
  AddConst,
  Scale,
  Sum,            // -> [1]
  Pick,           // element i of flat x -> [1]
  Slice,          // flat [off, off+len)
  Concat,         // flat concat of two inputs
  Reshape,
  AppendOnesRow,  // [D×N] -> [(D+1)×N]
  RowScale,       // [D×N] ⊙ v[D] per row
  RowBias,        // [D×N] + v[D] per row
  EmbedSum,       // sum of table rows for a token id list -> [E]
};

enum class Act { Relu, Sigmoid, Tanh, Identity };

struct Node {
  Op op;
  int a = -1, b = -1, c = -1;  // input node ids
  int i0 = 0;                  // op attribute (stride, offset, pick index, ...)
  int i1 = 0;
  double d0 = 0.0;
  Act act = Act::Identity;
  std::vector<int> ids;  // token ids for EmbedSum
  std::vector<int> out_shape;
  Tensor val;   // empty for Param nodes (value lives in the ParameterSet)
  Tensor grad;  // allocated lazily during backward
  int param = -1;
};

// Append-only eager tape: every op computes its forward value as it is
// recorded, so sampling can read activations immediately and backward() can
// replay the list in reverse. Node ids are topological by construction. A
// graph is confined to one worker; parameters are read through the
// ParameterSet it was built with.
class Graph {
 public:
  explicit Graph(ParameterSet* ps = nullptr) : ps_(ps) {}

  // --- leaves ---
  int param(int param_idx);
  int constant(Tensor t);

  // --- ops ---
  int affine(int x, int w, int b);
  int linear(int x, int w);
  int matmul(int a, int b);
  int conv2d(int x, int f, int stride);
  int activate(int x, Act kind);
  int relu(int x) { return activate(x, Act::Relu); }
  int sigmoid(int x) { return activate(x, Act::Sigmoid); }
  int tanh_(int x) { return activate(x, Act::Tanh); }
  int softmax_rows(int x);
  int log_softmax_rows(int x);
  int log_(int x);
  int add(int a, int b);
  int sub(int a, int b);
  int mul(int a, int b);
  int add_const(int x, double c);
  int scale(int x, double c);
  int sum(int x);
  int pick(int x, int index);
  int slice(int x, int offset, int len);
  int concat(int a, int b);
  int reshape(int x, std::vector<int> shape);
  int append_ones_row(int x);
  int row_scale(int x, int v);
  int row_bias(int x, int v);
  int embed_sum(int table, const std::vector<int>& ids);

  const Tensor& value(int id) const;
  double scalar_value(int id) const {
    const Tensor& t = value(id);
    check(t.numel() == 1, "scalar_value: node is not scalar");
    return t.data[0];
  }

  // Reverse-mode sweep from a scalar loss node. Parameter gradients are
  // accumulated into `sink`, indexed by ParameterSet entry index (tensors are
  // allocated on first touch). Each node's backward rule runs at most once.
  void backward(int loss, std::vector<Tensor>& sink, double seed = 1.0);
  // Convenience: accumulate straight into the ParameterSet accumulators.
  void backward(int loss, double seed = 1.0);

  int size() const { return static_cast<int>(nodes_.size()); }
  void clear();

  ParameterSet* params() const { return ps_; }

 private:
  int push(Node n);
  const Tensor& in(const Node& n, int which) const;
  void backward_node(int id);

  std::vector<Node> nodes_;
  std::vector<int> param_nodes_;  // memoized leaf per parameter index
  ParameterSet* ps_;
};

}  // namespace xgft
