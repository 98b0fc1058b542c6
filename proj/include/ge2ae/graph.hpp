#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "ge2ae/tensor.hpp"

namespace ge2ae {

enum class Op : std::uint8_t {
  kLeaf,
  kConst,
  kAdd,
  kSub,
  kMul,
  kMatmul,
  kReshape,
  kTranspose,
  kConcat,
  kSlice,
  kGatherRows,
  kScatterRows,
  kMean,
  kSum,
  kPower,
  kSqrt,
  kExp,
  kGelu,
  kSoftmax,
  kLayerNorm,
  kLinear,
  // Linear spectral transforms registered by the fourier module.
  kDft2d,       // real [H,W,C] -> [2,H,W,C] (re plane, im plane)
  kIdft2dReal,  // [2,H,W,C] -> real part of the inverse, [H,W,C]
};

struct OpAttrs {
  double scalar = 0.0;               // power exponent
  double eps = 1e-6;                 // layer_norm epsilon
  int axis = 0;                      // slice/concat axis
  int start = 0, len = 0;            // slice window
  int rows = 0;                      // scatter_rows output row count
  std::vector<int> shape;            // reshape target
  std::vector<int> indices;          // gather/scatter row indices
};
using AttrsPtr = std::shared_ptr<const OpAttrs>;

class Graph;

// Lightweight handle into a Graph node.
struct Value {
  Graph* g = nullptr;
  int id = -1;
  bool valid() const { return g != nullptr && id >= 0; }
  const Tensor& tensor() const;
};

using GradMap = std::map<std::string, Tensor>;

// Recorded computation graph: nodes are appended in topological order as
// operations execute, so reverse iteration is a valid backward schedule.
class Graph {
 public:
  Value leaf(std::string name, Tensor t);
  Value constant(Tensor t);

  Value apply(Op op, const std::vector<Value>& inputs, AttrsPtr attrs = nullptr);

  // String-keyed entry point exposing the documented primitive set only.
  Value apply_primitive(const std::string& kind, const std::vector<Value>& inputs,
                        AttrsPtr attrs = nullptr);

  // Reverse-mode sweep from a scalar loss. Returns one gradient per
  // grad-requiring leaf, keyed by leaf name; untouched leaves map to zeros.
  GradMap backward(Value loss) const;

  // Per-node gradients (diagnostics and support tests).
  std::vector<Tensor> backward_all(Value loss) const;

  const Tensor& value(Value v) const;
  bool requires_grad(Value v) const;
  std::size_t node_count() const { return nodes_.size(); }

  // Re-evaluates one node from its stored inputs; used to assert replay
  // determinism.
  Tensor recompute(int id) const;

  long long flops() const { return flops_; }

  void reserve(std::size_t n) { nodes_.reserve(n); }

 private:
  struct Node {
    Op op;
    std::vector<int> in;
    Tensor out;
    bool requires_grad = false;
    AttrsPtr attrs;
    std::string leaf_name;
  };

  Tensor eval(const Node& node) const;
  void backprop(std::vector<Tensor>& grads, int upto) const;

  std::vector<Node> nodes_;
  std::vector<std::pair<std::string, int>> leaves_;
  long long flops_ = 0;
  mutable bool keep_all_ = false;
};

inline const Tensor& Value::tensor() const { return g->value(*this); }

Value operator+(Value a, Value b);
Value operator-(Value a, Value b);
Value operator*(Value a, Value b);

namespace ops {

Value matmul(Value a, Value b);
Value reshape(Value a, std::vector<int> shape);
Value transpose(Value a);
Value concat(const std::vector<Value>& xs, int axis);
Value slice(Value a, int axis, int start, int len);
Value gather_rows(Value a, std::vector<int> idx);
Value scatter_rows(Value a, std::vector<int> idx, int rows);
Value mean(Value a);
Value sum(Value a);
Value power(Value a, double p);
Value sqrt(Value a);
Value exp(Value a);
Value gelu(Value a);
Value softmax(Value a);
Value layer_norm(Value x, Value scale, Value shift, double eps = 1e-6);
Value linear(Value x, Value w, Value b);
Value scalar_mul(Value a, double s);
Value dft2d(Value image);
Value idft2d_real(Value pair);

}  // namespace ops

}  // namespace ge2ae
