#include "xgft/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace xgft {

#ifndef NDEBUG
#define XGFT_CHECK_FINITE(t, where) \
  assert((t).all_finite() && "non-finite value out of " where)
#else
#define XGFT_CHECK_FINITE(t, where) ((void)0)
#endif

int Graph::push(Node n) {
  XGFT_CHECK_FINITE(n.val, "forward op");
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

const Tensor& Graph::value(int id) const {
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.op == Op::Param) return ps_->at(n.param).value;
  return n.val;
}

const Tensor& Graph::in(const Node& n, int which) const {
  const int id = which == 0 ? n.a : (which == 1 ? n.b : n.c);
  return value(id);
}

void Graph::clear() {
  nodes_.clear();
  param_nodes_.clear();
}

int Graph::param(int param_idx) {
  check(ps_ != nullptr, "graph has no parameter set");
  if (param_nodes_.size() < static_cast<std::size_t>(ps_->size()))
    param_nodes_.resize(static_cast<std::size_t>(ps_->size()), -1);
  int& memo = param_nodes_[static_cast<std::size_t>(param_idx)];
  if (memo >= 0) return memo;
  Node n;
  n.op = Op::Param;
  n.param = param_idx;
  n.out_shape = ps_->at(param_idx).value.shape;
  nodes_.push_back(std::move(n));
  memo = static_cast<int>(nodes_.size()) - 1;
  return memo;
}

int Graph::constant(Tensor t) {
  Node n;
  n.op = Op::Constant;
  n.out_shape = t.shape;
  n.val = std::move(t);
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

int Graph::affine(int x, int w, int b) {
  const Tensor& xv = value(x);
  const Tensor& wv = value(w);
  const Tensor& bv = value(b);
  check(wv.ndim() == 2, "affine: W must be 2-D");
  const int m = wv.rows(), k = wv.cols();
  check(bv.ndim() == 1 && bv.dim(0) == m, "affine: bias shape mismatch");
  const bool vec = xv.ndim() == 1;
  const int B = vec ? 1 : xv.rows();
  const int n = vec ? xv.dim(0) : xv.cols();
  check(n == k, "affine: inner dimensions disagree, x " + shape_str(xv.shape) +
                    " vs W " + shape_str(wv.shape));

  Node nd;
  nd.op = Op::Affine;
  nd.a = x;
  nd.b = w;
  nd.c = b;
  nd.out_shape = vec ? std::vector<int>{m} : std::vector<int>{B, m};
  nd.val = Tensor::zeros(nd.out_shape);
  const double* xp = xv.data.data();
  const double* wp = wv.data.data();
  double* op = nd.val.data.data();
  for (int i = 0; i < B; ++i)
    for (int j = 0; j < m; ++j) {
      double s = bv.data[static_cast<std::size_t>(j)];
      const double* xr = xp + static_cast<std::size_t>(i) * k;
      const double* wr = wp + static_cast<std::size_t>(j) * k;
      for (int t = 0; t < k; ++t) s += wr[t] * xr[t];
      op[static_cast<std::size_t>(i) * m + j] = s;
    }
  return push(std::move(nd));
}

int Graph::linear(int x, int w) {
  const Tensor& xv = value(x);
  const Tensor& wv = value(w);
  check(wv.ndim() == 2 && xv.ndim() == 1 && xv.dim(0) == wv.cols(),
        "linear: shape mismatch");
  const int m = wv.rows(), k = wv.cols();
  Node nd;
  nd.op = Op::Linear;
  nd.a = x;
  nd.b = w;
  nd.out_shape = {m};
  nd.val = Tensor::zeros({m});
  for (int j = 0; j < m; ++j) {
    double s = 0;
    const double* wr = wv.data.data() + static_cast<std::size_t>(j) * k;
    for (int t = 0; t < k; ++t) s += wr[t] * xv.data[static_cast<std::size_t>(t)];
    nd.val.data[static_cast<std::size_t>(j)] = s;
  }
  return push(std::move(nd));
}

int Graph::matmul(int a, int b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  check(av.ndim() == 2 && bv.ndim() == 2 && av.cols() == bv.rows(),
        "matmul: shape mismatch " + shape_str(av.shape) + " x " +
            shape_str(bv.shape));
  const int m = av.rows(), k = av.cols(), n = bv.cols();
  Node nd;
  nd.op = Op::MatMul;
  nd.a = a;
  nd.b = b;
  nd.out_shape = {m, n};
  nd.val = Tensor::zeros({m, n});
  for (int i = 0; i < m; ++i) {
    const double* ar = av.data.data() + static_cast<std::size_t>(i) * k;
    double* outr = nd.val.data.data() + static_cast<std::size_t>(i) * n;
    for (int t = 0; t < k; ++t) {
      const double ait = ar[t];
      if (ait == 0.0) continue;
      const double* br = bv.data.data() + static_cast<std::size_t>(t) * n;
      for (int j = 0; j < n; ++j) outr[j] += ait * br[j];
    }
  }
  return push(std::move(nd));
}

int Graph::conv2d(int x, int f, int stride) {
  const Tensor& xv = value(x);
  const Tensor& fv = value(f);
  check(xv.ndim() == 3 && fv.ndim() == 4, "conv2d: expects x[C,H,W], f[O,C,a,a]");
  const int cin = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
  const int cout = fv.dim(0), a = fv.dim(2);
  check(fv.dim(1) == cin && fv.dim(3) == a, "conv2d: filter shape mismatch");
  check(h >= a && w >= a, "conv2d: kernel larger than input");
  check(stride >= 1, "conv2d: bad stride");
  const int oh = (h - a) / stride + 1;
  const int ow = (w - a) / stride + 1;

  Node nd;
  nd.op = Op::Conv2d;
  nd.a = x;
  nd.b = f;
  nd.i0 = stride;
  nd.out_shape = {cout, oh, ow};
  nd.val = Tensor::zeros(nd.out_shape);
  const double* xp = xv.data.data();
  const double* fp = fv.data.data();
  double* op = nd.val.data.data();
  for (int co = 0; co < cout; ++co)
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox) {
        double s = 0;
        for (int ci = 0; ci < cin; ++ci) {
          const double* xc = xp + (static_cast<std::size_t>(ci) * h +
                                   static_cast<std::size_t>(oy) * stride) *
                                      w +
                             static_cast<std::size_t>(ox) * stride;
          const double* fc = fp + ((static_cast<std::size_t>(co) * cin + ci) * a) * a;
          for (int ky = 0; ky < a; ++ky) {
            const double* xr = xc + static_cast<std::size_t>(ky) * w;
            const double* fr = fc + static_cast<std::size_t>(ky) * a;
            for (int kx = 0; kx < a; ++kx) s += xr[kx] * fr[kx];
          }
        }
        op[(static_cast<std::size_t>(co) * oh + oy) * ow + ox] = s;
      }
  return push(std::move(nd));
}

int Graph::activate(int x, Act kind) {
  const Tensor& xv = value(x);
  Node nd;
  nd.op = Op::Act;
  nd.a = x;
  nd.act = kind;
  nd.out_shape = xv.shape;
  nd.val = Tensor::zeros(xv.shape);
  for (std::size_t i = 0; i < xv.data.size(); ++i) {
    const double v = xv.data[i];
    switch (kind) {
      case Act::Relu: nd.val.data[i] = v > 0 ? v : 0; break;
      case Act::Sigmoid: nd.val.data[i] = 1.0 / (1.0 + std::exp(-v)); break;
      case Act::Tanh: nd.val.data[i] = std::tanh(v); break;
      case Act::Identity: nd.val.data[i] = v; break;
    }
  }
  return push(std::move(nd));
}

namespace {
// Rows of a 1-D tensor: treat it as a single row.
inline void row_view(const Tensor& t, int& rows, int& cols) {
  if (t.ndim() == 1) {
    rows = 1;
    cols = t.dim(0);
  } else {
    rows = t.rows();
    cols = t.cols();
  }
}
}  // namespace

int Graph::softmax_rows(int x) {
  const Tensor& xv = value(x);
  int B, n;
  row_view(xv, B, n);
  check(n >= 1, "softmax_rows: empty row");
  Node nd;
  nd.op = Op::SoftmaxRows;
  nd.a = x;
  nd.out_shape = xv.shape;
  nd.val = Tensor::zeros(xv.shape);
  for (int i = 0; i < B; ++i) {
    const double* xr = xv.data.data() + static_cast<std::size_t>(i) * n;
    double* yr = nd.val.data.data() + static_cast<std::size_t>(i) * n;
    double mx = xr[0];
    for (int j = 1; j < n; ++j) mx = std::max(mx, xr[j]);
    double z = 0;
    for (int j = 0; j < n; ++j) {
      yr[j] = std::exp(xr[j] - mx);
      z += yr[j];
    }
    for (int j = 0; j < n; ++j) yr[j] /= z;
  }
  return push(std::move(nd));
}

int Graph::log_softmax_rows(int x) {
  const Tensor& xv = value(x);
  int B, n;
  row_view(xv, B, n);
  check(n >= 1, "log_softmax_rows: empty row");
  Node nd;
  nd.op = Op::LogSoftmaxRows;
  nd.a = x;
  nd.out_shape = xv.shape;
  nd.val = Tensor::zeros(xv.shape);
  for (int i = 0; i < B; ++i) {
    const double* xr = xv.data.data() + static_cast<std::size_t>(i) * n;
    double* yr = nd.val.data.data() + static_cast<std::size_t>(i) * n;
    double mx = xr[0];
    for (int j = 1; j < n; ++j) mx = std::max(mx, xr[j]);
    double z = 0;
    for (int j = 0; j < n; ++j) z += std::exp(xr[j] - mx);
    const double lz = std::log(z) + mx;
    for (int j = 0; j < n; ++j) yr[j] = xr[j] - lz;
  }
  return push(std::move(nd));
}

int Graph::log_(int x) {
  const Tensor& xv = value(x);
  Node nd;
  nd.op = Op::Log;
  nd.a = x;
  nd.out_shape = xv.shape;
  nd.val = Tensor::zeros(xv.shape);
  for (std::size_t i = 0; i < xv.data.size(); ++i)
    nd.val.data[i] = std::log(xv.data[i]);
  return push(std::move(nd));
}

int Graph::add(int a, int b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  check(av.same_shape(bv), "add: shape mismatch");
  Node nd;
  nd.op = Op::Add;
  nd.a = a;
  nd.b = b;
  nd.out_shape = av.shape;
  nd.val = av;
  nd.val.add_(bv);
  return push(std::move(nd));
}

int Graph::sub(int a, int b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  check(av.same_shape(bv), "sub: shape mismatch");
  Node nd;
  nd.op = Op::Sub;
  nd.a = a;
  nd.b = b;
  nd.out_shape = av.shape;
  nd.val = av;
  for (std::size_t i = 0; i < nd.val.data.size(); ++i) nd.val.data[i] -= bv.data[i];
  return push(std::move(nd));
}

int Graph::mul(int a, int b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  check(av.same_shape(bv), "mul: shape mismatch");
  Node nd;
  nd.op = Op::Mul;
  nd.a = a;
  nd.b = b;
  nd.out_shape = av.shape;
  nd.val = av;
  for (std::size_t i = 0; i < nd.val.data.size(); ++i) nd.val.data[i] *= bv.data[i];
  return push(std::move(nd));
}

int Graph::add_const(int x, double c) {
  const Tensor& xv = value(x);
  Node nd;
  nd.op = Op::AddConst;
  nd.a = x;
  nd.d0 = c;
  nd.out_shape = xv.shape;
  nd.val = xv;
  for (double& v : nd.val.data) v += c;
  return push(std::move(nd));
}

int Graph::scale(int x, double c) {
  const Tensor& xv = value(x);
  Node nd;
  nd.op = Op::Scale;
  nd.a = x;
  nd.d0 = c;
  nd.out_shape = xv.shape;
  nd.val = xv;
  nd.val.scale_(c);
  return push(std::move(nd));
}

int Graph::sum(int x) {
  const Tensor& xv = value(x);
  double s = 0;
  for (double v : xv.data) s += v;
  Node nd;
  nd.op = Op::Sum;
  nd.a = x;
  nd.out_shape = {1};
  nd.val = Tensor::scalar(s);
  return push(std::move(nd));
}

int Graph::pick(int x, int index) {
  const Tensor& xv = value(x);
  check(index >= 0 && index < xv.numel(), "pick: index out of range");
  Node nd;
  nd.op = Op::Pick;
  nd.a = x;
  nd.i0 = index;
  nd.out_shape = {1};
  nd.val = Tensor::scalar(xv.data[static_cast<std::size_t>(index)]);
  return push(std::move(nd));
}

int Graph::slice(int x, int offset, int len) {
  const Tensor& xv = value(x);
  check(offset >= 0 && len >= 1 && offset + len <= xv.numel(),
        "slice: range out of bounds");
  Node nd;
  nd.op = Op::Slice;
  nd.a = x;
  nd.i0 = offset;
  nd.i1 = len;
  nd.out_shape = {len};
  nd.val = Tensor::zeros({len});
  std::memcpy(nd.val.data.data(), xv.data.data() + offset,
              static_cast<std::size_t>(len) * sizeof(double));
  return push(std::move(nd));
}

int Graph::concat(int a, int b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  const int n = static_cast<int>(av.numel() + bv.numel());
  Node nd;
  nd.op = Op::Concat;
  nd.a = a;
  nd.b = b;
  nd.out_shape = {n};
  nd.val = Tensor::zeros({n});
  std::memcpy(nd.val.data.data(), av.data.data(), av.data.size() * sizeof(double));
  std::memcpy(nd.val.data.data() + av.numel(), bv.data.data(),
              bv.data.size() * sizeof(double));
  return push(std::move(nd));
}

int Graph::reshape(int x, std::vector<int> shape) {
  const Tensor& xv = value(x);
  check(shape_numel(shape) == xv.numel(), "reshape: element count mismatch");
  Node nd;
  nd.op = Op::Reshape;
  nd.a = x;
  nd.out_shape = shape;
  nd.val = Tensor(std::move(shape), xv.data);
  return push(std::move(nd));
}

int Graph::append_ones_row(int x) {
  const Tensor& xv = value(x);
  check(xv.ndim() == 2, "append_ones_row: expects 2-D input");
  const int d = xv.rows(), n = xv.cols();
  Node nd;
  nd.op = Op::AppendOnesRow;
  nd.a = x;
  nd.out_shape = {d + 1, n};
  nd.val = Tensor::zeros({d + 1, n});
  std::memcpy(nd.val.data.data(), xv.data.data(), xv.data.size() * sizeof(double));
  for (int j = 0; j < n; ++j)
    nd.val.data[static_cast<std::size_t>(d) * n + j] = 1.0;
  return push(std::move(nd));
}

int Graph::row_scale(int x, int v) {
  const Tensor& xv = value(x);
  const Tensor& vv = value(v);
  check(xv.ndim() == 2 && vv.numel() == xv.rows(), "row_scale: shape mismatch");
  const int d = xv.rows(), n = xv.cols();
  Node nd;
  nd.op = Op::RowScale;
  nd.a = x;
  nd.b = v;
  nd.out_shape = xv.shape;
  nd.val = xv;
  for (int r = 0; r < d; ++r) {
    const double s = vv.data[static_cast<std::size_t>(r)];
    double* row = nd.val.data.data() + static_cast<std::size_t>(r) * n;
    for (int j = 0; j < n; ++j) row[j] *= s;
  }
  return push(std::move(nd));
}

int Graph::row_bias(int x, int v) {
  const Tensor& xv = value(x);
  const Tensor& vv = value(v);
  check(xv.ndim() == 2 && vv.numel() == xv.rows(), "row_bias: shape mismatch");
  const int d = xv.rows(), n = xv.cols();
  Node nd;
  nd.op = Op::RowBias;
  nd.a = x;
  nd.b = v;
  nd.out_shape = xv.shape;
  nd.val = xv;
  for (int r = 0; r < d; ++r) {
    const double s = vv.data[static_cast<std::size_t>(r)];
    double* row = nd.val.data.data() + static_cast<std::size_t>(r) * n;
    for (int j = 0; j < n; ++j) row[j] += s;
  }
  return push(std::move(nd));
}

int Graph::embed_sum(int table, const std::vector<int>& ids) {
  const Tensor& tv = value(table);
  check(tv.ndim() == 2, "embed_sum: table must be 2-D");
  const int v = tv.rows(), e = tv.cols();
  for (int id : ids)
    check(id >= 0 && id < v,
          "embed_sum: token id " + std::to_string(id) + " outside table");
  // canonical summation order makes the pooled embedding bit-identical under
  // token permutations
  std::vector<int> sorted = ids;
  std::sort(sorted.begin(), sorted.end());
  Node nd;
  nd.op = Op::EmbedSum;
  nd.a = table;
  nd.ids = std::move(sorted);
  nd.out_shape = {e};
  nd.val = Tensor::zeros({e});
  for (int id : nd.ids) {
    const double* row = tv.data.data() + static_cast<std::size_t>(id) * e;
    for (int j = 0; j < e; ++j) nd.val.data[static_cast<std::size_t>(j)] += row[j];
  }
  return push(std::move(nd));
}

// ---------------------------------------------------------------------------
// backward
// ---------------------------------------------------------------------------

namespace {
inline Tensor& touch(Tensor& g, const std::vector<int>& shape) {
  if (g.empty()) g = Tensor::zeros(shape);
  return g;
}
}  // namespace

void Graph::backward_node(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  const Tensor& g = n.grad;
  auto grad_of = [&](int input) -> Tensor& {
    Node& m = nodes_[static_cast<std::size_t>(input)];
    return touch(m.grad, m.op == Op::Param ? ps_->at(m.param).value.shape
                                           : m.val.shape);
  };

  switch (n.op) {
    case Op::Constant:
    case Op::Param:
      break;

    case Op::Affine: {
      const Tensor& xv = in(n, 0);
      const Tensor& wv = in(n, 1);
      const bool vec = xv.ndim() == 1;
      const int B = vec ? 1 : xv.rows();
      const int k = wv.cols(), m = wv.rows();
      Tensor& gx = grad_of(n.a);
      Tensor& gw = grad_of(n.b);
      Tensor& gb = grad_of(n.c);
      for (int i = 0; i < B; ++i) {
        const double* gr = g.data.data() + static_cast<std::size_t>(i) * m;
        const double* xr = xv.data.data() + static_cast<std::size_t>(i) * k;
        double* gxr = gx.data.data() + static_cast<std::size_t>(i) * k;
        for (int j = 0; j < m; ++j) {
          const double gj = gr[j];
          if (gj == 0.0) continue;
          gb.data[static_cast<std::size_t>(j)] += gj;
          const double* wr = wv.data.data() + static_cast<std::size_t>(j) * k;
          double* gwr = gw.data.data() + static_cast<std::size_t>(j) * k;
          for (int t = 0; t < k; ++t) {
            gxr[t] += gj * wr[t];
            gwr[t] += gj * xr[t];
          }
        }
      }
      break;
    }

    case Op::Linear: {
      const Tensor& xv = in(n, 0);
      const Tensor& wv = in(n, 1);
      const int k = wv.cols(), m = wv.rows();
      Tensor& gx = grad_of(n.a);
      Tensor& gw = grad_of(n.b);
      for (int j = 0; j < m; ++j) {
        const double gj = g.data[static_cast<std::size_t>(j)];
        if (gj == 0.0) continue;
        const double* wr = wv.data.data() + static_cast<std::size_t>(j) * k;
        double* gwr = gw.data.data() + static_cast<std::size_t>(j) * k;
        for (int t = 0; t < k; ++t) {
          gx.data[static_cast<std::size_t>(t)] += gj * wr[t];
          gwr[t] += gj * xv.data[static_cast<std::size_t>(t)];
        }
      }
      break;
    }

    case Op::MatMul: {
      const Tensor& av = in(n, 0);
      const Tensor& bv = in(n, 1);
      const int m = av.rows(), k = av.cols(), c = bv.cols();
      Tensor& ga = grad_of(n.a);
      Tensor& gb = grad_of(n.b);
      // dA = G·Bᵀ ; dB = Aᵀ·G
      for (int i = 0; i < m; ++i) {
        const double* gr = g.data.data() + static_cast<std::size_t>(i) * c;
        double* gar = ga.data.data() + static_cast<std::size_t>(i) * k;
        const double* ar = av.data.data() + static_cast<std::size_t>(i) * k;
        for (int t = 0; t < k; ++t) {
          const double* br = bv.data.data() + static_cast<std::size_t>(t) * c;
          double* gbr = gb.data.data() + static_cast<std::size_t>(t) * c;
          double s = 0;
          const double at = ar[t];
          for (int j = 0; j < c; ++j) {
            s += gr[j] * br[j];
            gbr[j] += at * gr[j];
          }
          gar[t] += s;
        }
      }
      break;
    }

    case Op::Conv2d: {
      const Tensor& xv = in(n, 0);
      const Tensor& fv = in(n, 1);
      const int stride = n.i0;
      const int cin = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
      const int cout = fv.dim(0), a = fv.dim(2);
      const int oh = n.val.dim(1), ow = n.val.dim(2);
      Tensor& gx = grad_of(n.a);
      Tensor& gf = grad_of(n.b);
      for (int co = 0; co < cout; ++co)
        for (int oy = 0; oy < oh; ++oy)
          for (int ox = 0; ox < ow; ++ox) {
            const double gv =
                g.data[(static_cast<std::size_t>(co) * oh + oy) * ow + ox];
            if (gv == 0.0) continue;
            for (int ci = 0; ci < cin; ++ci) {
              const std::size_t xbase =
                  (static_cast<std::size_t>(ci) * h + oy * stride) * w +
                  static_cast<std::size_t>(ox) * stride;
              const std::size_t fbase =
                  ((static_cast<std::size_t>(co) * cin + ci) * a) * a;
              for (int ky = 0; ky < a; ++ky)
                for (int kx = 0; kx < a; ++kx) {
                  const std::size_t xi = xbase + static_cast<std::size_t>(ky) * w + kx;
                  const std::size_t fi = fbase + static_cast<std::size_t>(ky) * a + kx;
                  gx.data[xi] += gv * fv.data[fi];
                  gf.data[fi] += gv * xv.data[xi];
                }
            }
          }
      break;
    }

    case Op::Act: {
      const Tensor& xv = in(n, 0);
      Tensor& gx = grad_of(n.a);
      switch (n.act) {
        case Act::Relu:
          for (std::size_t i = 0; i < gx.data.size(); ++i)
            if (xv.data[i] > 0) gx.data[i] += g.data[i];
          break;
        case Act::Sigmoid:
          for (std::size_t i = 0; i < gx.data.size(); ++i) {
            const double y = n.val.data[i];
            gx.data[i] += g.data[i] * y * (1.0 - y);
          }
          break;
        case Act::Tanh:
          for (std::size_t i = 0; i < gx.data.size(); ++i) {
            const double y = n.val.data[i];
            gx.data[i] += g.data[i] * (1.0 - y * y);
          }
          break;
        case Act::Identity:
          for (std::size_t i = 0; i < gx.data.size(); ++i) gx.data[i] += g.data[i];
          break;
      }
      break;
    }

    case Op::SoftmaxRows: {
      int B, c;
      row_view(n.val, B, c);
      Tensor& gx = grad_of(n.a);
      for (int i = 0; i < B; ++i) {
        const double* y = n.val.data.data() + static_cast<std::size_t>(i) * c;
        const double* gy = g.data.data() + static_cast<std::size_t>(i) * c;
        double dot = 0;
        for (int j = 0; j < c; ++j) dot += gy[j] * y[j];
        double* gxr = gx.data.data() + static_cast<std::size_t>(i) * c;
        for (int j = 0; j < c; ++j) gxr[j] += y[j] * (gy[j] - dot);
      }
      break;
    }

    case Op::LogSoftmaxRows: {
      int B, c;
      row_view(n.val, B, c);
      Tensor& gx = grad_of(n.a);
      for (int i = 0; i < B; ++i) {
        const double* y = n.val.data.data() + static_cast<std::size_t>(i) * c;
        const double* gy = g.data.data() + static_cast<std::size_t>(i) * c;
        double gsum = 0;
        for (int j = 0; j < c; ++j) gsum += gy[j];
        double* gxr = gx.data.data() + static_cast<std::size_t>(i) * c;
        for (int j = 0; j < c; ++j) gxr[j] += gy[j] - std::exp(y[j]) * gsum;
      }
      break;
    }

    case Op::Log: {
      const Tensor& xv = in(n, 0);
      Tensor& gx = grad_of(n.a);
      for (std::size_t i = 0; i < gx.data.size(); ++i)
        gx.data[i] += g.data[i] / xv.data[i];
      break;
    }

    case Op::Add: {
      Tensor& ga = grad_of(n.a);
      Tensor& gb = grad_of(n.b);
      ga.add_(g);
      gb.add_(g);
      break;
    }

    case Op::Sub: {
      Tensor& ga = grad_of(n.a);
      Tensor& gb = grad_of(n.b);
      ga.add_(g);
      for (std::size_t i = 0; i < gb.data.size(); ++i) gb.data[i] -= g.data[i];
      break;
    }

    case Op::Mul: {
      const Tensor& av = in(n, 0);
      const Tensor& bv = in(n, 1);
      Tensor& ga = grad_of(n.a);
      Tensor& gb = grad_of(n.b);
      for (std::size_t i = 0; i < ga.data.size(); ++i) {
        ga.data[i] += g.data[i] * bv.data[i];
        gb.data[i] += g.data[i] * av.data[i];
      }
      break;
    }

    case Op::AddConst: {
      grad_of(n.a).add_(g);
      break;
    }

    case Op::Scale: {
      Tensor& gx = grad_of(n.a);
      for (std::size_t i = 0; i < gx.data.size(); ++i)
        gx.data[i] += g.data[i] * n.d0;
      break;
    }

    case Op::Sum: {
      Tensor& gx = grad_of(n.a);
      const double gv = g.data[0];
      for (double& v : gx.data) v += gv;
      break;
    }

    case Op::Pick: {
      grad_of(n.a).data[static_cast<std::size_t>(n.i0)] += g.data[0];
      break;
    }

    case Op::Slice: {
      Tensor& gx = grad_of(n.a);
      for (int i = 0; i < n.i1; ++i)
        gx.data[static_cast<std::size_t>(n.i0 + i)] += g.data[static_cast<std::size_t>(i)];
      break;
    }

    case Op::Concat: {
      const long na = in(n, 0).numel();
      Tensor& ga = grad_of(n.a);
      Tensor& gb = grad_of(n.b);
      for (long i = 0; i < na; ++i) ga.data[static_cast<std::size_t>(i)] += g.data[static_cast<std::size_t>(i)];
      const long nb = in(n, 1).numel();
      for (long i = 0; i < nb; ++i)
        gb.data[static_cast<std::size_t>(i)] += g.data[static_cast<std::size_t>(na + i)];
      break;
    }

    case Op::Reshape: {
      Tensor& gx = grad_of(n.a);
      for (std::size_t i = 0; i < gx.data.size(); ++i) gx.data[i] += g.data[i];
      break;
    }

    case Op::AppendOnesRow: {
      const Tensor& xv = in(n, 0);
      Tensor& gx = grad_of(n.a);
      for (std::size_t i = 0; i < xv.data.size(); ++i) gx.data[i] += g.data[i];
      break;
    }

    case Op::RowScale: {
      const Tensor& xv = in(n, 0);
      const Tensor& vv = in(n, 1);
      const int d = xv.rows(), c = xv.cols();
      Tensor& gx = grad_of(n.a);
      Tensor& gv = grad_of(n.b);
      for (int r = 0; r < d; ++r) {
        const double s = vv.data[static_cast<std::size_t>(r)];
        const double* gr = g.data.data() + static_cast<std::size_t>(r) * c;
        const double* xr = xv.data.data() + static_cast<std::size_t>(r) * c;
        double* gxr = gx.data.data() + static_cast<std::size_t>(r) * c;
        double acc = 0;
        for (int j = 0; j < c; ++j) {
          gxr[j] += gr[j] * s;
          acc += gr[j] * xr[j];
        }
        gv.data[static_cast<std::size_t>(r)] += acc;
      }
      break;
    }

    case Op::RowBias: {
      const Tensor& xv = in(n, 0);
      const int d = xv.rows(), c = xv.cols();
      Tensor& gx = grad_of(n.a);
      Tensor& gv = grad_of(n.b);
      for (int r = 0; r < d; ++r) {
        const double* gr = g.data.data() + static_cast<std::size_t>(r) * c;
        double* gxr = gx.data.data() + static_cast<std::size_t>(r) * c;
        double acc = 0;
        for (int j = 0; j < c; ++j) {
          gxr[j] += gr[j];
          acc += gr[j];
        }
        gv.data[static_cast<std::size_t>(r)] += acc;
      }
      break;
    }

    case Op::EmbedSum: {
      const Tensor& tv = in(n, 0);
      const int e = tv.cols();
      Tensor& gt = grad_of(n.a);
      for (int id : n.ids) {
        double* row = gt.data.data() + static_cast<std::size_t>(id) * e;
        for (int j = 0; j < e; ++j) row[j] += g.data[static_cast<std::size_t>(j)];
      }
      break;
    }
  }
}

void Graph::backward(int loss, std::vector<Tensor>& sink, double seed) {
  check(loss >= 0 && loss < size(), "backward: bad loss node");
  check(value(loss).numel() == 1, "backward: loss must be scalar");
  Node& ln = nodes_[static_cast<std::size_t>(loss)];
  touch(ln.grad, {1}).data[0] += seed;
  for (int i = loss; i >= 0; --i) {
    if (nodes_[static_cast<std::size_t>(i)].grad.empty()) continue;
    backward_node(i);
  }
  if (ps_ != nullptr && sink.size() < static_cast<std::size_t>(ps_->size()))
    sink.resize(static_cast<std::size_t>(ps_->size()));
  for (int i = 0; i <= loss; ++i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.param >= 0 && !n.grad.empty()) {
      Tensor& dst = sink[static_cast<std::size_t>(n.param)];
      if (dst.empty())
        dst = n.grad;
      else
        dst.add_(n.grad);
    }
  }
  // Clear transient grads so a second backward on the same tape starts clean.
  for (auto& n : nodes_) n.grad = Tensor();
}

void Graph::backward(int loss, double seed) {
  check(ps_ != nullptr, "backward: graph has no parameter set");
  std::vector<Tensor> sink(static_cast<std::size_t>(ps_->size()));
  backward(loss, sink, seed);
  for (int i = 0; i < ps_->size(); ++i) {
    if (!sink[static_cast<std::size_t>(i)].empty())
      ps_->at(i).grad.add_(sink[static_cast<std::size_t>(i)]);
  }
}

}  // namespace xgft
