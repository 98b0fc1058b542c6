#include "ge2ae/graph.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "ge2ae/fft_core.hpp"
#include "ge2ae/mm_kernels.hpp"

namespace ge2ae {

namespace {

// Message expressions are only evaluated on failure.
#define GE2AE_REQUIRE(cond, msg)                     \
  do {                                               \
    if (!(cond)) throw std::invalid_argument(msg);   \
  } while (0)

inline void mm_nn(const double* A, const double* B, double* C, int N, int K, int M) {
  mm::nn(A, B, C, N, K, M);
}
inline void mm_nt(const double* A, const double* B, double* C, int N, int K, int M) {
  mm::nt(A, B, C, N, K, M);
}
inline void mm_tn(const double* A, const double* G, double* C, int N, int K, int M) {
  mm::tn(A, G, C, N, K, M);
}

std::size_t prod_range(const std::vector<int>& s, std::size_t lo, std::size_t hi) {
  std::size_t p = 1;
  for (std::size_t i = lo; i < hi; ++i) p *= static_cast<std::size_t>(s[i]);
  return p;
}

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double gelu_fwd(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }
double gelu_grad(double x) {
  return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

// 0: same shape, 1: a is scalar, 2: b is scalar.
int broadcast_mode(const Tensor& a, const Tensor& b, const char* opname) {
  if (a.same_shape(b)) return 0;
  if (a.is_scalar()) return 1;
  if (b.is_scalar()) return 2;
  throw std::invalid_argument(std::string(opname) + ": shape mismatch " + shape_str(a.shape) +
                              " vs " + shape_str(b.shape));
}

void add_into(Tensor& acc, const Tensor& g) {
  if (acc.data.empty()) {
    acc = g;
    return;
  }
  for (std::size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += g.data[i];
}

void move_into(Tensor& acc, Tensor&& g) {
  if (acc.data.empty()) {
    acc = std::move(g);
    return;
  }
  for (std::size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += g.data[i];
}

// acc += s * g without a temporary.
void scaled_into(Tensor& acc, const Tensor& g, double s, const std::vector<int>& shape) {
  if (acc.data.empty()) acc = Tensor(shape);
  for (std::size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += s * g.data[i];
}

// acc += g (elementwise) * h without a temporary.
void product_into(Tensor& acc, const Tensor& g, const Tensor& h, const std::vector<int>& shape) {
  if (acc.data.empty()) acc = Tensor(shape);
  if (h.is_scalar() && acc.data.size() != 1) {
    const double hv = h.data[0];
    for (std::size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += g.data[i] * hv;
  } else {
    for (std::size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += g.data[i] * h.data[i];
  }
}

}  // namespace

Value Graph::leaf(std::string name, Tensor t) {
  Node n;
  n.op = Op::kLeaf;
  n.requires_grad = t.requires_grad;
  n.out = std::move(t);
  n.leaf_name = name;
  nodes_.push_back(std::move(n));
  const int id = static_cast<int>(nodes_.size()) - 1;
  leaves_.emplace_back(std::move(name), id);
  return Value{this, id};
}

Value Graph::constant(Tensor t) {
  Node n;
  n.op = Op::kConst;
  t.requires_grad = false;
  n.out = std::move(t);
  nodes_.push_back(std::move(n));
  return Value{this, static_cast<int>(nodes_.size()) - 1};
}

const Tensor& Graph::value(Value v) const { return nodes_[static_cast<std::size_t>(v.id)].out; }
bool Graph::requires_grad(Value v) const {
  return nodes_[static_cast<std::size_t>(v.id)].requires_grad;
}

Tensor Graph::recompute(int id) const { return eval(nodes_[static_cast<std::size_t>(id)]); }

Value Graph::apply(Op op, const std::vector<Value>& inputs, AttrsPtr attrs) {
  Node n;
  n.op = op;
  n.attrs = std::move(attrs);
  n.in.reserve(inputs.size());
  for (const Value& v : inputs) {
    GE2AE_REQUIRE(v.g == this, "apply: input from a different graph");
    n.in.push_back(v.id);
    if (nodes_[static_cast<std::size_t>(v.id)].requires_grad) n.requires_grad = true;
  }
  n.out = eval(n);
  nodes_.push_back(std::move(n));
  return Value{this, static_cast<int>(nodes_.size()) - 1};
}

Value Graph::apply_primitive(const std::string& kind, const std::vector<Value>& inputs,
                             AttrsPtr attrs) {
  static const std::map<std::string, Op> table = {
      {"add", Op::kAdd},
      {"sub", Op::kSub},
      {"mul", Op::kMul},
      {"matmul", Op::kMatmul},
      {"reshape", Op::kReshape},
      {"transpose", Op::kTranspose},
      {"concat", Op::kConcat},
      {"slice", Op::kSlice},
      {"gather-rows", Op::kGatherRows},
      {"scatter-rows", Op::kScatterRows},
      {"mean", Op::kMean},
      {"sum", Op::kSum},
      {"power", Op::kPower},
      {"sqrt", Op::kSqrt},
      {"exp", Op::kExp},
      {"gelu", Op::kGelu},
      {"softmax", Op::kSoftmax},
      {"layer_norm", Op::kLayerNorm},
      {"linear", Op::kLinear},
  };
  auto it = table.find(kind);
  GE2AE_REQUIRE(it != table.end(), "unknown primitive kind '" + kind + "'");
  return apply(it->second, inputs, std::move(attrs));
}

Tensor Graph::eval(const Node& node) const {
  auto in = [&](std::size_t i) -> const Tensor& {
    return nodes_[static_cast<std::size_t>(node.in[i])].out;
  };
  auto& self = const_cast<Graph&>(*this);

  switch (node.op) {
    case Op::kLeaf:
    case Op::kConst:
      return node.out;

    case Op::kAdd:
    case Op::kSub:
    case Op::kMul: {
      GE2AE_REQUIRE(node.in.size() == 2, "elementwise op needs 2 inputs");
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      const char* nm = node.op == Op::kAdd ? "add" : node.op == Op::kSub ? "sub" : "mul";
      const int mode = broadcast_mode(a, b, nm);
      const Tensor& big = mode == 1 ? b : a;
      Tensor out(big.shape);
      const std::size_t n = out.numel();
      self.flops_ += static_cast<long long>(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double x = mode == 1 ? a.data[0] : a.data[i];
        const double y = mode == 2 ? b.data[0] : b.data[i];
        out.data[i] = node.op == Op::kAdd ? x + y : node.op == Op::kSub ? x - y : x * y;
      }
      return out;
    }

    case Op::kMatmul: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      GE2AE_REQUIRE(a.rank() == 2 && b.rank() == 2 && a.shape[1] == b.shape[0],
              "matmul: incompatible shapes " + shape_str(a.shape) + " x " + shape_str(b.shape));
      const int N = a.shape[0], K = a.shape[1], M = b.shape[1];
      Tensor out({N, M});
      mm_nn(a.data.data(), b.data.data(), out.data.data(), N, K, M);
      self.flops_ += 2LL * N * K * M;
      return out;
    }

    case Op::kLinear: {
      const Tensor& x = in(0);
      const Tensor& w = in(1);
      const Tensor& b = in(2);
      GE2AE_REQUIRE(x.rank() == 2 && w.rank() == 2 && b.rank() == 1 && x.shape[1] == w.shape[0] &&
                  w.shape[1] == b.shape[0],
              "linear: incompatible shapes " + shape_str(x.shape) + ", " + shape_str(w.shape) +
                  ", " + shape_str(b.shape));
      const int N = x.shape[0], K = x.shape[1], M = w.shape[1];
      Tensor out({N, M});
      for (int i = 0; i < N; ++i)
        std::memcpy(&out.data[static_cast<std::size_t>(i) * M], b.data.data(),
                    sizeof(double) * static_cast<std::size_t>(M));
      for (int i = 0; i < N; ++i) {
        const double* xr = &x.data[static_cast<std::size_t>(i) * K];
        double* o = &out.data[static_cast<std::size_t>(i) * M];
        for (int k = 0; k < K; ++k) {
          const double xv = xr[k];
          const double* wr = &w.data[static_cast<std::size_t>(k) * M];
          for (int j = 0; j < M; ++j) o[j] += xv * wr[j];
        }
      }
      self.flops_ += 2LL * N * K * M + static_cast<long long>(N) * M;
      return out;
    }

    case Op::kReshape: {
      const Tensor& a = in(0);
      GE2AE_REQUIRE(node.attrs != nullptr, "reshape: missing target shape");
      const std::vector<int>& s = node.attrs->shape;
      GE2AE_REQUIRE(checked_numel(s) == a.numel(), "reshape: numel mismatch " + shape_str(a.shape) +
                                                 " -> " + shape_str(s));
      Tensor out = a;
      out.shape = s;
      out.requires_grad = false;
      return out;
    }

    case Op::kTranspose: {
      const Tensor& a = in(0);
      GE2AE_REQUIRE(a.rank() == 2, "transpose: expects rank-2, got " + shape_str(a.shape));
      const int N = a.shape[0], M = a.shape[1];
      Tensor out({M, N});
      for (int i = 0; i < N; ++i)
        for (int j = 0; j < M; ++j) out.at2(j, i) = a.at2(i, j);
      return out;
    }

    case Op::kConcat: {
      GE2AE_REQUIRE(!node.in.empty() && node.attrs != nullptr, "concat: needs inputs and axis");
      const int axis = node.attrs->axis;
      const Tensor& first = in(0);
      GE2AE_REQUIRE(axis >= 0 && axis < first.rank(), "concat: bad axis");
      std::vector<int> out_shape = first.shape;
      int total = 0;
      for (std::size_t i = 0; i < node.in.size(); ++i) {
        const Tensor& t = in(i);
        GE2AE_REQUIRE(t.rank() == first.rank(), "concat: rank mismatch");
        for (int d = 0; d < first.rank(); ++d)
          GE2AE_REQUIRE(d == axis || t.shape[d] == first.shape[d],
                  "concat: shape mismatch " + shape_str(t.shape) + " vs " +
                      shape_str(first.shape));
        total += t.shape[axis];
      }
      out_shape[static_cast<std::size_t>(axis)] = total;
      Tensor out(out_shape);
      const std::size_t outer = prod_range(out_shape, 0, static_cast<std::size_t>(axis));
      const std::size_t inner =
          prod_range(out_shape, static_cast<std::size_t>(axis) + 1, out_shape.size());
      std::size_t off = 0;
      for (std::size_t i = 0; i < node.in.size(); ++i) {
        const Tensor& t = in(i);
        const std::size_t len = static_cast<std::size_t>(t.shape[axis]);
        for (std::size_t o = 0; o < outer; ++o)
          std::memcpy(&out.data[(o * total + off) * inner], &t.data[o * len * inner],
                      sizeof(double) * len * inner);
        off += len;
      }
      return out;
    }

    case Op::kSlice: {
      const Tensor& a = in(0);
      GE2AE_REQUIRE(node.attrs != nullptr, "slice: missing attrs");
      const int axis = node.attrs->axis, start = node.attrs->start, len = node.attrs->len;
      GE2AE_REQUIRE(axis >= 0 && axis < a.rank() && start >= 0 && len >= 1 &&
                  start + len <= a.shape[axis],
              "slice: window [" + std::to_string(start) + "," + std::to_string(start + len) +
                  ") out of range for " + shape_str(a.shape));
      std::vector<int> out_shape = a.shape;
      out_shape[static_cast<std::size_t>(axis)] = len;
      Tensor out(out_shape);
      const std::size_t outer = prod_range(a.shape, 0, static_cast<std::size_t>(axis));
      const std::size_t inner =
          prod_range(a.shape, static_cast<std::size_t>(axis) + 1, a.shape.size());
      const std::size_t D = static_cast<std::size_t>(a.shape[axis]);
      for (std::size_t o = 0; o < outer; ++o)
        std::memcpy(&out.data[o * len * inner], &a.data[(o * D + start) * inner],
                    sizeof(double) * static_cast<std::size_t>(len) * inner);
      return out;
    }

    case Op::kGatherRows: {
      const Tensor& a = in(0);
      GE2AE_REQUIRE(a.rank() == 2 && node.attrs != nullptr, "gather-rows: expects rank-2 and indices");
      const auto& idx = node.attrs->indices;
      const int D = a.shape[1];
      Tensor out({static_cast<int>(idx.size()), D});
      for (std::size_t r = 0; r < idx.size(); ++r) {
        GE2AE_REQUIRE(idx[r] >= 0 && idx[r] < a.shape[0], "gather-rows: index out of range");
        std::memcpy(&out.data[r * static_cast<std::size_t>(D)],
                    &a.data[static_cast<std::size_t>(idx[r]) * D],
                    sizeof(double) * static_cast<std::size_t>(D));
      }
      return out;
    }

    case Op::kScatterRows: {
      const Tensor& a = in(0);
      GE2AE_REQUIRE(a.rank() == 2 && node.attrs != nullptr, "scatter-rows: expects rank-2 and indices");
      const auto& idx = node.attrs->indices;
      GE2AE_REQUIRE(static_cast<std::size_t>(a.shape[0]) == idx.size(),
              "scatter-rows: row count does not match index count");
      const int D = a.shape[1];
      const int N = node.attrs->rows;
      GE2AE_REQUIRE(N >= 1, "scatter-rows: target rows must be >= 1");
      Tensor out({N, D});
      for (std::size_t r = 0; r < idx.size(); ++r) {
        GE2AE_REQUIRE(idx[r] >= 0 && idx[r] < N, "scatter-rows: index out of range");
        double* dst = &out.data[static_cast<std::size_t>(idx[r]) * D];
        const double* src = &a.data[r * static_cast<std::size_t>(D)];
        for (int j = 0; j < D; ++j) dst[j] += src[j];
      }
      return out;
    }

    case Op::kMean:
    case Op::kSum: {
      const Tensor& a = in(0);
      double acc = 0.0;
      for (double x : a.data) acc += x;
      self.flops_ += static_cast<long long>(a.numel());
      if (node.op == Op::kMean) acc /= static_cast<double>(a.numel());
      return Tensor::scalar(acc);
    }

    case Op::kPower: {
      const Tensor& a = in(0);
      GE2AE_REQUIRE(node.attrs != nullptr, "power: missing exponent");
      const double p = node.attrs->scalar;
      Tensor out(a.shape);
      self.flops_ += static_cast<long long>(a.numel());
      if (p == 2.0) {
        for (std::size_t i = 0; i < a.numel(); ++i) out.data[i] = a.data[i] * a.data[i];
      } else {
        for (std::size_t i = 0; i < a.numel(); ++i) out.data[i] = std::pow(a.data[i], p);
      }
      return out;
    }

    case Op::kSqrt: {
      const Tensor& a = in(0);
      Tensor out(a.shape);
      self.flops_ += static_cast<long long>(a.numel());
      for (std::size_t i = 0; i < a.numel(); ++i) out.data[i] = std::sqrt(a.data[i]);
      return out;
    }

    case Op::kExp: {
      const Tensor& a = in(0);
      Tensor out(a.shape);
      self.flops_ += static_cast<long long>(a.numel());
      for (std::size_t i = 0; i < a.numel(); ++i) out.data[i] = std::exp(a.data[i]);
      return out;
    }

    case Op::kGelu: {
      const Tensor& a = in(0);
      Tensor out(a.shape);
      self.flops_ += 8LL * static_cast<long long>(a.numel());
      for (std::size_t i = 0; i < a.numel(); ++i) out.data[i] = gelu_fwd(a.data[i]);
      return out;
    }

    case Op::kSoftmax: {
      const Tensor& a = in(0);
      GE2AE_REQUIRE(a.rank() >= 1, "softmax: empty input");
      const int D = a.shape.back();
      const std::size_t rows = a.numel() / static_cast<std::size_t>(D);
      Tensor out(a.shape);
      self.flops_ += 5LL * static_cast<long long>(a.numel());
      for (std::size_t r = 0; r < rows; ++r) {
        const double* x = &a.data[r * static_cast<std::size_t>(D)];
        double* y = &out.data[r * static_cast<std::size_t>(D)];
        double mx = x[0];
        for (int j = 1; j < D; ++j) mx = x[j] > mx ? x[j] : mx;
        double z = 0.0;
        for (int j = 0; j < D; ++j) {
          y[j] = std::exp(x[j] - mx);
          z += y[j];
        }
        const double inv = 1.0 / z;
        for (int j = 0; j < D; ++j) y[j] *= inv;
      }
      return out;
    }

    case Op::kLayerNorm: {
      const Tensor& x = in(0);
      const Tensor& scale = in(1);
      const Tensor& shift = in(2);
      const int D = x.shape.back();
      GE2AE_REQUIRE(scale.rank() == 1 && scale.shape[0] == D && shift.rank() == 1 &&
                  shift.shape[0] == D,
              "layer_norm: scale/shift must be [" + std::to_string(D) + "], got " +
                  shape_str(scale.shape) + " and " + shape_str(shift.shape));
      const double eps = node.attrs ? node.attrs->eps : 1e-6;
      const std::size_t rows = x.numel() / static_cast<std::size_t>(D);
      Tensor out(x.shape);
      self.flops_ += 8LL * static_cast<long long>(x.numel());
      for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = &x.data[r * static_cast<std::size_t>(D)];
        double* o = &out.data[r * static_cast<std::size_t>(D)];
        double mu = 0.0;
        for (int j = 0; j < D; ++j) mu += xr[j];
        mu /= D;
        double var = 0.0;
        for (int j = 0; j < D; ++j) {
          const double d = xr[j] - mu;
          var += d * d;
        }
        var /= D;
        const double inv = 1.0 / std::sqrt(var + eps);
        for (int j = 0; j < D; ++j) o[j] = (xr[j] - mu) * inv * scale.data[j] + shift.data[j];
      }
      return out;
    }

    case Op::kDft2d: {
      const Tensor& a = in(0);
      GE2AE_REQUIRE(a.rank() == 3, "dft2d: expects [H,W,C], got " + shape_str(a.shape));
      const int H = a.shape[0], W = a.shape[1], C = a.shape[2];
      Tensor out({2, H, W, C});
      const std::size_t n = a.numel();
      fftcore::dft2d(H, W, C, a.data.data(), nullptr, out.data.data(), out.data.data() + n,
                     false);
      self.flops_ += 10LL * static_cast<long long>(n);
      return out;
    }

    case Op::kIdft2dReal: {
      const Tensor& a = in(0);
      GE2AE_REQUIRE(a.rank() == 4 && a.shape[0] == 2,
              "idft2d_real: expects [2,H,W,C], got " + shape_str(a.shape));
      const int H = a.shape[1], W = a.shape[2], C = a.shape[3];
      const std::size_t n = static_cast<std::size_t>(H) * W * C;
      std::vector<double> re(n), im(n);
      fftcore::dft2d(H, W, C, a.data.data(), a.data.data() + n, re.data(), im.data(), true);
      self.flops_ += 10LL * static_cast<long long>(n);
      Tensor out({H, W, C});
      out.data = std::move(re);
      return out;
    }
  }
  throw std::logic_error("eval: unhandled op");
}

void Graph::backprop(std::vector<Tensor>& grads, int upto) const {
  for (int i = upto; i >= 0; --i) {
    const Node& node = nodes_[static_cast<std::size_t>(i)];
    if (!node.requires_grad || grads[static_cast<std::size_t>(i)].data.empty()) continue;
    const Tensor& g = grads[static_cast<std::size_t>(i)];
    auto in = [&](std::size_t k) -> const Tensor& {
      return nodes_[static_cast<std::size_t>(node.in[k])].out;
    };
    auto needs = [&](std::size_t k) {
      return nodes_[static_cast<std::size_t>(node.in[k])].requires_grad;
    };
    auto acc = [&](std::size_t k, const Tensor& t) {
      add_into(grads[static_cast<std::size_t>(node.in[k])], t);
    };
    auto accm = [&](std::size_t k, Tensor&& t) {
      move_into(grads[static_cast<std::size_t>(node.in[k])], std::move(t));
    };
    auto slot = [&](std::size_t k) -> Tensor& {
      return grads[static_cast<std::size_t>(node.in[k])];
    };

    switch (node.op) {
      case Op::kLeaf:
      case Op::kConst:
        break;

      case Op::kAdd:
      case Op::kSub: {
        const double sign = node.op == Op::kAdd ? 1.0 : -1.0;
        for (int side = 0; side < 2; ++side) {
          const std::size_t k = static_cast<std::size_t>(side);
          if (!needs(k)) continue;
          const Tensor& xi = in(k);
          const double s = side == 0 ? 1.0 : sign;
          if (xi.same_shape(g)) {
            scaled_into(slot(k), g, s, xi.shape);
          } else {  // scalar operand
            double total = 0.0;
            for (double v : g.data) total += v;
            acc(k, Tensor::scalar(s * total));
          }
        }
        break;
      }

      case Op::kMul: {
        const Tensor& a = in(0);
        const Tensor& b = in(1);
        for (int side = 0; side < 2; ++side) {
          const std::size_t k = static_cast<std::size_t>(side);
          if (!needs(k)) continue;
          const Tensor& self_t = side == 0 ? a : b;
          const Tensor& other = side == 0 ? b : a;
          if (self_t.same_shape(g)) {
            product_into(slot(k), g, other, self_t.shape);
          } else {  // self is the scalar operand
            double total = 0.0;
            for (std::size_t j = 0; j < g.numel(); ++j) total += g.data[j] * other.data[j];
            acc(k, Tensor::scalar(total));
          }
        }
        break;
      }

      case Op::kMatmul: {
        const Tensor& a = in(0);
        const Tensor& b = in(1);
        const int N = a.shape[0], K = a.shape[1], M = b.shape[1];
        if (needs(0)) {
          Tensor da({N, K});
          mm_nt(g.data.data(), b.data.data(), da.data.data(), N, M, K);
          accm(0, std::move(da));
        }
        if (needs(1)) {
          Tensor db({K, M});
          mm_tn(a.data.data(), g.data.data(), db.data.data(), N, K, M);
          accm(1, std::move(db));
        }
        break;
      }

      case Op::kLinear: {
        const Tensor& x = in(0);
        const Tensor& w = in(1);
        const int N = x.shape[0], K = x.shape[1], M = w.shape[1];
        if (needs(0)) {
          Tensor dx({N, K});
          mm_nt(g.data.data(), w.data.data(), dx.data.data(), N, M, K);
          accm(0, std::move(dx));
        }
        if (needs(1)) {
          Tensor dw({K, M});
          mm_tn(x.data.data(), g.data.data(), dw.data.data(), N, K, M);
          accm(1, std::move(dw));
        }
        if (needs(2)) {
          Tensor db({M});
          for (int i = 0; i < N; ++i) {
            const double* gr = &g.data[static_cast<std::size_t>(i) * M];
            for (int j = 0; j < M; ++j) db.data[static_cast<std::size_t>(j)] += gr[j];
          }
          accm(2, std::move(db));
        }
        break;
      }

      case Op::kReshape: {
        if (!needs(0)) break;
        Tensor t = g;
        t.shape = in(0).shape;
        accm(0, std::move(t));
        break;
      }

      case Op::kTranspose: {
        if (!needs(0)) break;
        const int N = g.shape[0], M = g.shape[1];
        Tensor t({M, N});
        for (int i = 0; i < N; ++i)
          for (int j = 0; j < M; ++j) t.at2(j, i) = g.at2(i, j);
        accm(0, std::move(t));
        break;
      }

      case Op::kConcat: {
        const int axis = node.attrs->axis;
        const std::size_t outer = prod_range(g.shape, 0, static_cast<std::size_t>(axis));
        const std::size_t inner =
            prod_range(g.shape, static_cast<std::size_t>(axis) + 1, g.shape.size());
        const std::size_t total = static_cast<std::size_t>(g.shape[axis]);
        std::size_t off = 0;
        for (std::size_t k = 0; k < node.in.size(); ++k) {
          const Tensor& xi = in(k);
          const std::size_t len = static_cast<std::size_t>(xi.shape[axis]);
          if (needs(k)) {
            Tensor t(xi.shape);
            for (std::size_t o = 0; o < outer; ++o)
              std::memcpy(&t.data[o * len * inner], &g.data[(o * total + off) * inner],
                          sizeof(double) * len * inner);
            acc(k, t);
          }
          off += len;
        }
        break;
      }

      case Op::kSlice: {
        if (!needs(0)) break;
        const Tensor& a = in(0);
        const int axis = node.attrs->axis, start = node.attrs->start, len = node.attrs->len;
        const std::size_t outer = prod_range(a.shape, 0, static_cast<std::size_t>(axis));
        const std::size_t inner =
            prod_range(a.shape, static_cast<std::size_t>(axis) + 1, a.shape.size());
        const std::size_t D = static_cast<std::size_t>(a.shape[axis]);
        Tensor t(a.shape);
        for (std::size_t o = 0; o < outer; ++o)
          std::memcpy(&t.data[(o * D + start) * inner],
                      &g.data[o * static_cast<std::size_t>(len) * inner],
                      sizeof(double) * static_cast<std::size_t>(len) * inner);
        accm(0, std::move(t));
        break;
      }

      case Op::kGatherRows: {
        if (!needs(0)) break;
        const Tensor& a = in(0);
        const auto& idx = node.attrs->indices;
        const int D = a.shape[1];
        Tensor t(a.shape);
        for (std::size_t r = 0; r < idx.size(); ++r) {
          double* dst = &t.data[static_cast<std::size_t>(idx[r]) * D];
          const double* src = &g.data[r * static_cast<std::size_t>(D)];
          for (int j = 0; j < D; ++j) dst[j] += src[j];
        }
        accm(0, std::move(t));
        break;
      }

      case Op::kScatterRows: {
        if (!needs(0)) break;
        const auto& idx = node.attrs->indices;
        const int D = in(0).shape[1];
        Tensor t({static_cast<int>(idx.size()), D});
        for (std::size_t r = 0; r < idx.size(); ++r)
          std::memcpy(&t.data[r * static_cast<std::size_t>(D)],
                      &g.data[static_cast<std::size_t>(idx[r]) * D],
                      sizeof(double) * static_cast<std::size_t>(D));
        accm(0, std::move(t));
        break;
      }

      case Op::kMean:
      case Op::kSum: {
        if (!needs(0)) break;
        const Tensor& a = in(0);
        const double gv = g.data[0] *
                          (node.op == Op::kMean ? 1.0 / static_cast<double>(a.numel()) : 1.0);
        accm(0, Tensor::full(a.shape, gv));
        break;
      }

      case Op::kPower: {
        if (!needs(0)) break;
        const Tensor& a = in(0);
        const double p = node.attrs->scalar;
        Tensor t(a.shape);
        if (p == 2.0) {
          for (std::size_t j = 0; j < a.numel(); ++j) t.data[j] = g.data[j] * 2.0 * a.data[j];
        } else {
          for (std::size_t j = 0; j < a.numel(); ++j)
            t.data[j] = g.data[j] * p * std::pow(a.data[j], p - 1.0);
        }
        accm(0, std::move(t));
        break;
      }

      case Op::kSqrt: {
        if (!needs(0)) break;
        Tensor t(g.shape);
        for (std::size_t j = 0; j < g.numel(); ++j) t.data[j] = g.data[j] * 0.5 / node.out.data[j];
        accm(0, std::move(t));
        break;
      }

      case Op::kExp: {
        if (!needs(0)) break;
        Tensor t(g.shape);
        for (std::size_t j = 0; j < g.numel(); ++j) t.data[j] = g.data[j] * node.out.data[j];
        accm(0, std::move(t));
        break;
      }

      case Op::kGelu: {
        if (!needs(0)) break;
        const Tensor& a = in(0);
        Tensor t(a.shape);
        for (std::size_t j = 0; j < a.numel(); ++j) t.data[j] = g.data[j] * gelu_grad(a.data[j]);
        accm(0, std::move(t));
        break;
      }

      case Op::kSoftmax: {
        if (!needs(0)) break;
        const Tensor& y = node.out;
        const int D = y.shape.back();
        const std::size_t rows = y.numel() / static_cast<std::size_t>(D);
        Tensor t(y.shape);
        for (std::size_t r = 0; r < rows; ++r) {
          const double* yr = &y.data[r * static_cast<std::size_t>(D)];
          const double* gr = &g.data[r * static_cast<std::size_t>(D)];
          double dot = 0.0;
          for (int j = 0; j < D; ++j) dot += yr[j] * gr[j];
          double* tr = &t.data[r * static_cast<std::size_t>(D)];
          for (int j = 0; j < D; ++j) tr[j] = yr[j] * (gr[j] - dot);
        }
        accm(0, std::move(t));
        break;
      }

      case Op::kLayerNorm: {
        const Tensor& x = in(0);
        const Tensor& scale = in(1);
        const int D = x.shape.back();
        const double eps = node.attrs ? node.attrs->eps : 1e-6;
        const std::size_t rows = x.numel() / static_cast<std::size_t>(D);
        Tensor dx, dscale, dshift;
        if (needs(0)) dx = Tensor(x.shape);
        if (needs(1)) dscale = Tensor({D});
        if (needs(2)) dshift = Tensor({D});
        std::vector<double> xhat(static_cast<std::size_t>(D));
        for (std::size_t r = 0; r < rows; ++r) {
          const double* xr = &x.data[r * static_cast<std::size_t>(D)];
          const double* gr = &g.data[r * static_cast<std::size_t>(D)];
          double mu = 0.0;
          for (int j = 0; j < D; ++j) mu += xr[j];
          mu /= D;
          double var = 0.0;
          for (int j = 0; j < D; ++j) {
            const double d = xr[j] - mu;
            var += d * d;
          }
          var /= D;
          const double inv = 1.0 / std::sqrt(var + eps);
          for (int j = 0; j < D; ++j) xhat[static_cast<std::size_t>(j)] = (xr[j] - mu) * inv;
          if (!dshift.data.empty())
            for (int j = 0; j < D; ++j) dshift.data[static_cast<std::size_t>(j)] += gr[j];
          if (!dscale.data.empty())
            for (int j = 0; j < D; ++j)
              dscale.data[static_cast<std::size_t>(j)] += gr[j] * xhat[static_cast<std::size_t>(j)];
          if (!dx.data.empty()) {
            double m1 = 0.0, m2 = 0.0;
            for (int j = 0; j < D; ++j) {
              const double h = gr[j] * scale.data[static_cast<std::size_t>(j)];
              m1 += h;
              m2 += h * xhat[static_cast<std::size_t>(j)];
            }
            m1 /= D;
            m2 /= D;
            double* dxr = &dx.data[r * static_cast<std::size_t>(D)];
            for (int j = 0; j < D; ++j) {
              const double h = gr[j] * scale.data[static_cast<std::size_t>(j)];
              dxr[j] = inv * (h - m1 - xhat[static_cast<std::size_t>(j)] * m2);
            }
          }
        }
        if (!dx.data.empty()) accm(0, std::move(dx));
        if (!dscale.data.empty()) accm(1, std::move(dscale));
        if (!dshift.data.empty()) accm(2, std::move(dshift));
        break;
      }

      case Op::kDft2d: {
        if (!needs(0)) break;
        const Tensor& a = in(0);
        const int H = a.shape[0], W = a.shape[1], C = a.shape[2];
        const std::size_t n = a.numel();
        // grad = Re(DFT(g_re - i*g_im)): the adjoint of the real-to-complex
        // forward transform under the Eq-1 convention.
        std::vector<double> gim(n), br(n), bi(n);
        for (std::size_t j = 0; j < n; ++j) gim[j] = -g.data[n + j];
        fftcore::dft2d(H, W, C, g.data.data(), gim.data(), br.data(), bi.data(), false);
        Tensor t(a.shape);
        t.data = std::move(br);
        accm(0, std::move(t));
        break;
      }

      case Op::kIdft2dReal: {
        if (!needs(0)) break;
        const Tensor& a = in(0);
        const int H = a.shape[1], W = a.shape[2], C = a.shape[3];
        const std::size_t n = static_cast<std::size_t>(H) * W * C;
        // grad = conj(IDFT(g)) packed as (re, -im).
        std::vector<double> br(n), bi(n);
        fftcore::dft2d(H, W, C, g.data.data(), nullptr, br.data(), bi.data(), true);
        Tensor t(a.shape);
        for (std::size_t j = 0; j < n; ++j) {
          t.data[j] = br[j];
          t.data[n + j] = -bi[j];
        }
        accm(0, std::move(t));
        break;
      }
    }
    // Intermediate buffers are freed as soon as they are consumed; leaf
    // gradients stay alive for collection.
    if (!keep_all_ && node.op != Op::kLeaf) grads[static_cast<std::size_t>(i)] = Tensor();
  }
}

GradMap Graph::backward(Value loss) const {
  GE2AE_REQUIRE(loss.g == this, "backward: loss from a different graph");
  const Tensor& lt = value(loss);
  GE2AE_REQUIRE(lt.numel() == 1, "backward: loss must be scalar, got " + shape_str(lt.shape));
  std::vector<Tensor> grads(nodes_.size());
  grads[static_cast<std::size_t>(loss.id)] = Tensor::scalar(1.0);
  keep_all_ = false;
  backprop(grads, loss.id);

  GradMap out;
  for (const auto& [name, id] : leaves_) {
    const Node& node = nodes_[static_cast<std::size_t>(id)];
    if (!node.requires_grad) continue;
    Tensor& gsum = grads[static_cast<std::size_t>(id)];
    out[name] = gsum.data.empty() ? Tensor(node.out.shape) : std::move(gsum);
  }
  return out;
}

std::vector<Tensor> Graph::backward_all(Value loss) const {
  GE2AE_REQUIRE(loss.g == this, "backward: loss from a different graph");
  const Tensor& lt = value(loss);
  GE2AE_REQUIRE(lt.numel() == 1, "backward: loss must be scalar, got " + shape_str(lt.shape));
  std::vector<Tensor> grads(nodes_.size());
  grads[static_cast<std::size_t>(loss.id)] = Tensor::scalar(1.0);
  keep_all_ = true;
  backprop(grads, loss.id);
  keep_all_ = false;
  for (std::size_t i = 0; i < grads.size(); ++i)
    if (grads[i].data.empty()) grads[i] = Tensor(nodes_[i].out.shape);
  return grads;
}

Value operator+(Value a, Value b) { return a.g->apply(Op::kAdd, {a, b}); }
Value operator-(Value a, Value b) { return a.g->apply(Op::kSub, {a, b}); }
Value operator*(Value a, Value b) { return a.g->apply(Op::kMul, {a, b}); }

namespace ops {

Value matmul(Value a, Value b) { return a.g->apply(Op::kMatmul, {a, b}); }

Value reshape(Value a, std::vector<int> shape) {
  auto at = std::make_shared<OpAttrs>();
  at->shape = std::move(shape);
  return a.g->apply(Op::kReshape, {a}, std::move(at));
}

Value transpose(Value a) { return a.g->apply(Op::kTranspose, {a}); }

Value concat(const std::vector<Value>& xs, int axis) {
  auto at = std::make_shared<OpAttrs>();
  at->axis = axis;
  return xs.front().g->apply(Op::kConcat, xs, std::move(at));
}

Value slice(Value a, int axis, int start, int len) {
  auto at = std::make_shared<OpAttrs>();
  at->axis = axis;
  at->start = start;
  at->len = len;
  return a.g->apply(Op::kSlice, {a}, std::move(at));
}

Value gather_rows(Value a, std::vector<int> idx) {
  auto at = std::make_shared<OpAttrs>();
  at->indices = std::move(idx);
  return a.g->apply(Op::kGatherRows, {a}, std::move(at));
}

Value scatter_rows(Value a, std::vector<int> idx, int rows) {
  auto at = std::make_shared<OpAttrs>();
  at->indices = std::move(idx);
  at->rows = rows;
  return a.g->apply(Op::kScatterRows, {a}, std::move(at));
}

Value mean(Value a) { return a.g->apply(Op::kMean, {a}); }
Value sum(Value a) { return a.g->apply(Op::kSum, {a}); }

Value power(Value a, double p) {
  auto at = std::make_shared<OpAttrs>();
  at->scalar = p;
  return a.g->apply(Op::kPower, {a}, std::move(at));
}

Value sqrt(Value a) { return a.g->apply(Op::kSqrt, {a}); }
Value exp(Value a) { return a.g->apply(Op::kExp, {a}); }
Value gelu(Value a) { return a.g->apply(Op::kGelu, {a}); }
Value softmax(Value a) { return a.g->apply(Op::kSoftmax, {a}); }

Value layer_norm(Value x, Value scale, Value shift, double eps) {
  auto at = std::make_shared<OpAttrs>();
  at->eps = eps;
  return x.g->apply(Op::kLayerNorm, {x, scale, shift}, std::move(at));
}

Value linear(Value x, Value w, Value b) { return x.g->apply(Op::kLinear, {x, w, b}); }

Value scalar_mul(Value a, double s) { return a * a.g->constant(Tensor::scalar(s)); }

Value dft2d(Value image) { return image.g->apply(Op::kDft2d, {image}); }
Value idft2d_real(Value pair) { return pair.g->apply(Op::kIdft2dReal, {pair}); }

}  // namespace ops

}  // namespace ge2ae
