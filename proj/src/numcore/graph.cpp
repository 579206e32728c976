#include "gridnav/numcore/graph.hpp"

#include <array>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace numcore {

// ---------------------------------------------------------------------------
// ParamStore

Array& ParamStore::create(const std::string& name, Array init) {
  if (has(name)) throw std::invalid_argument("ParamStore: duplicate parameter '" + name + "'");
  ParamTensor t;
  t.grad = Array(init.shape);
  t.m = Array(init.shape);
  t.v = Array(init.shape);
  t.value = std::move(init);
  auto [it, ok] = table_.emplace(name, std::move(t));
  (void)ok;
  return it->second.value;
}

ParamTensor& ParamStore::entry(const std::string& name) {
  auto it = table_.find(name);
  if (it == table_.end()) throw std::out_of_range("ParamStore: unknown parameter '" + name + "'");
  return it->second;
}

const ParamTensor& ParamStore::entry(const std::string& name) const {
  auto it = table_.find(name);
  if (it == table_.end()) throw std::out_of_range("ParamStore: unknown parameter '" + name + "'");
  return it->second;
}

void ParamStore::zero_grads() {
  for (auto& [k, t] : table_) std::fill(t.grad.data.begin(), t.grad.data.end(), 0.0f);
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(table_.size());
  for (auto& [k, t] : table_) out.push_back(k);
  return out;
}

int64_t ParamStore::param_count() const {
  int64_t n = 0;
  for (auto& [k, t] : table_) n += t.value.numel();
  return n;
}

// ---------------------------------------------------------------------------
// GEMM kernels. All accumulate into C.

namespace {

// C[M,N] += A[M,K] * B[K,N]
void gemm(const float* A, const float* B, float* C, int M, int K, int N) {
  for (int i = 0; i < M; ++i) {
    const float* a = A + static_cast<int64_t>(i) * K;
    float* c = C + static_cast<int64_t>(i) * N;
    for (int k = 0; k < K; ++k) {
      const float av = a[k];
      const float* b = B + static_cast<int64_t>(k) * N;
      for (int j = 0; j < N; ++j) c[j] += av * b[j];
    }
  }
}

// C[M,N] += A[M,K] * B[N,K]^T
void gemm_nt(const float* A, const float* B, float* C, int M, int K, int N) {
  for (int i = 0; i < M; ++i) {
    const float* a = A + static_cast<int64_t>(i) * K;
    float* c = C + static_cast<int64_t>(i) * N;
    for (int j = 0; j < N; ++j) {
      const float* b = B + static_cast<int64_t>(j) * K;
      float acc = 0.0f;
      for (int k = 0; k < K; ++k) acc += a[k] * b[k];
      c[j] += acc;
    }
  }
}

// C[M,N] += A[K,M]^T * B[K,N]
void gemm_tn(const float* A, const float* B, float* C, int M, int K, int N) {
  for (int k = 0; k < K; ++k) {
    const float* a = A + static_cast<int64_t>(k) * M;
    const float* b = B + static_cast<int64_t>(k) * N;
    for (int i = 0; i < M; ++i) {
      const float av = a[i];
      float* c = C + static_cast<int64_t>(i) * N;
      for (int j = 0; j < N; ++j) c[j] += av * b[j];
    }
  }
}

void check_same_shape(const char* op, const Array& a, const Array& b) {
  if (!a.same_shape(b))
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape) +
                                " vs " + shape_str(b.shape));
}

// Split a shape into (rows, cols) around the last axis.
std::pair<int64_t, int64_t> row_view(const Array& a, const char* op) {
  if (a.rank() == 0) throw std::invalid_argument(std::string(op) + ": rank-0 input");
  int64_t cols = a.shape.back();
  int64_t rows = cols == 0 ? 0 : a.numel() / cols;
  return {rows, cols};
}

}  // namespace

// ---------------------------------------------------------------------------
// Var

const Array& Var::value() const { return g_->node(idx_).value; }
const std::vector<int>& Var::shape() const { return g_->node(idx_).value.shape; }

// ---------------------------------------------------------------------------
// Graph plumbing

int Graph::push(Node n) {
  tape_.push_back(std::move(n));
  return static_cast<int>(tape_.size()) - 1;
}

Var Graph::make(const char* op, Array value, std::vector<int> parents,
                std::function<void(Graph&, int)> backprop) {
  Node n;
  n.op = op;
  n.value = std::move(value);
  bool rg = false;
  for (int p : parents) rg = rg || tape_[p].requires_grad;
  n.requires_grad = rg;
  if (rg) n.backprop = std::move(backprop);
  return Var(this, push(std::move(n)));
}

void Graph::ensure_grad(int idx) {
  Node& n = tape_[idx];
  if (n.grad.numel() != n.value.numel()) n.grad = Array(n.value.shape);
}

void Graph::accumulate(int idx, const float* g, int64_t n) {
  ensure_grad(idx);
  float* dst = tape_[idx].grad.data.data();
  for (int64_t i = 0; i < n; ++i) dst[i] += g[i];
}

const Array& Graph::grad(Var v) const {
  const Node& n = node(v.index());
  if (n.grad.numel() != n.value.numel())
    throw std::logic_error("Graph::grad: no gradient recorded for this node");
  return n.grad;
}

Var Graph::input(Array v) {
  Node n;
  n.op = "input";
  n.value = std::move(v);
  return Var(this, push(std::move(n)));
}

Var Graph::param(ParamStore& ps, const std::string& name) {
  Node n;
  n.op = "param";
  n.value = ps.value(name);  // copy; gradient flows back via store/param_name
  n.requires_grad = true;
  n.store = &ps;
  n.param_name = name;
  return Var(this, push(std::move(n)));
}

void Graph::backward(Var loss) {
  if (loss.graph() != this) throw std::invalid_argument("backward: loss from another graph");
  Node& ln = tape_[loss.index()];
  if (ln.value.numel() != 1)
    throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                shape_str(ln.value.shape));
  ensure_grad(loss.index());
  tape_[loss.index()].grad.data[0] = 1.0f;
  for (int i = loss.index(); i >= 0; --i) {
    Node& n = tape_[i];
    if (!n.requires_grad) continue;
    if (n.grad.numel() != n.value.numel()) continue;  // not on the path to the loss
    if (n.backprop) n.backprop(*this, i);
    if (n.store != nullptr) {
      Array& g = n.store->grad(n.param_name);
      for (int64_t k = 0; k < g.numel(); ++k) g.data[k] += n.grad.data[k];
    }
  }
}

// ---------------------------------------------------------------------------
// Elementwise ops

Var Graph::add(Var a, Var b) {
  const Array& av = a.value();
  const Array& bv = b.value();
  bool broadcast = !av.same_shape(bv);
  if (broadcast) {
    if (!(bv.rank() == 1 && av.rank() >= 1 && av.shape.back() == bv.shape[0]))
      throw std::invalid_argument("add: shape mismatch " + shape_str(av.shape) + " vs " +
                                  shape_str(bv.shape));
  }
  Array out = av;
  if (broadcast) {
    auto [rows, cols] = row_view(av, "add");
    for (int64_t r = 0; r < rows; ++r)
      for (int64_t c = 0; c < cols; ++c) out.data[r * cols + c] += bv.data[c];
  } else {
    for (int64_t i = 0; i < out.numel(); ++i) out.data[i] += bv.data[i];
  }
  int ai = a.index(), bi = b.index();
  return make("add", std::move(out), {ai, bi}, [ai, bi, broadcast](Graph& g, int self) {
    const Array& dy = g.node(self).grad;
    if (g.node(ai).requires_grad) g.accumulate(ai, dy.data.data(), dy.numel());
    if (g.node(bi).requires_grad) {
      if (!broadcast) {
        g.accumulate(bi, dy.data.data(), dy.numel());
      } else {
        g.ensure_grad(bi);
        Array& db = g.node(bi).grad;
        int64_t cols = db.numel();
        int64_t rows = dy.numel() / cols;
        for (int64_t r = 0; r < rows; ++r)
          for (int64_t c = 0; c < cols; ++c) db.data[c] += dy.data[r * cols + c];
      }
    }
  });
}

Var Graph::sub(Var a, Var b) {
  check_same_shape("sub", a.value(), b.value());
  Array out = a.value();
  const Array& bv = b.value();
  for (int64_t i = 0; i < out.numel(); ++i) out.data[i] -= bv.data[i];
  int ai = a.index(), bi = b.index();
  return make("sub", std::move(out), {ai, bi}, [ai, bi](Graph& g, int self) {
    const Array& dy = g.node(self).grad;
    if (g.node(ai).requires_grad) g.accumulate(ai, dy.data.data(), dy.numel());
    if (g.node(bi).requires_grad) {
      g.ensure_grad(bi);
      Array& db = g.node(bi).grad;
      for (int64_t i = 0; i < dy.numel(); ++i) db.data[i] -= dy.data[i];
    }
  });
}

Var Graph::mul(Var a, Var b) {
  const Array& av = a.value();
  const Array& bv = b.value();
  bool broadcast = !av.same_shape(bv);
  if (broadcast) {
    if (!(bv.rank() == 1 && av.rank() >= 1 && av.shape.back() == bv.shape[0]))
      throw std::invalid_argument("mul: shape mismatch " + shape_str(av.shape) + " vs " +
                                  shape_str(bv.shape));
  }
  Array out = av;
  if (broadcast) {
    auto [rows, cols] = row_view(av, "mul");
    for (int64_t r = 0; r < rows; ++r)
      for (int64_t c = 0; c < cols; ++c) out.data[r * cols + c] *= bv.data[c];
  } else {
    for (int64_t i = 0; i < out.numel(); ++i) out.data[i] *= bv.data[i];
  }
  int ai = a.index(), bi = b.index();
  return make("mul", std::move(out), {ai, bi}, [ai, bi, broadcast](Graph& g, int self) {
    const Array& dy = g.node(self).grad;
    const Array& av2 = g.node(ai).value;
    const Array& bv2 = g.node(bi).value;
    if (!broadcast) {
      if (g.node(ai).requires_grad) {
        g.ensure_grad(ai);
        Array& da = g.node(ai).grad;
        for (int64_t i = 0; i < dy.numel(); ++i) da.data[i] += dy.data[i] * bv2.data[i];
      }
      if (g.node(bi).requires_grad) {
        g.ensure_grad(bi);
        Array& db = g.node(bi).grad;
        for (int64_t i = 0; i < dy.numel(); ++i) db.data[i] += dy.data[i] * av2.data[i];
      }
    } else {
      int64_t cols = bv2.numel();
      int64_t rows = dy.numel() / cols;
      if (g.node(ai).requires_grad) {
        g.ensure_grad(ai);
        Array& da = g.node(ai).grad;
        for (int64_t r = 0; r < rows; ++r)
          for (int64_t c = 0; c < cols; ++c) da.data[r * cols + c] += dy.data[r * cols + c] * bv2.data[c];
      }
      if (g.node(bi).requires_grad) {
        g.ensure_grad(bi);
        Array& db = g.node(bi).grad;
        for (int64_t r = 0; r < rows; ++r)
          for (int64_t c = 0; c < cols; ++c) db.data[c] += dy.data[r * cols + c] * av2.data[r * cols + c];
      }
    }
  });
}

Var Graph::scale(Var a, float s) {
  Array out = a.value();
  for (float& v : out.data) v *= s;
  int ai = a.index();
  return make("scale", std::move(out), {ai}, [ai, s](Graph& g, int self) {
    const Array& dy = g.node(self).grad;
    g.ensure_grad(ai);
    Array& da = g.node(ai).grad;
    for (int64_t i = 0; i < dy.numel(); ++i) da.data[i] += s * dy.data[i];
  });
}

Var Graph::add_scalar(Var a, float s) {
  Array out = a.value();
  for (float& v : out.data) v += s;
  int ai = a.index();
  return make("add_scalar", std::move(out), {ai}, [ai](Graph& g, int self) {
    const Array& dy = g.node(self).grad;
    g.accumulate(ai, dy.data.data(), dy.numel());
  });
}

// ---------------------------------------------------------------------------
// matmul

Var Graph::matmul(Var a, Var b, bool transpose_b) {
  const Array& av = a.value();
  const Array& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2)
    throw std::invalid_argument("matmul: expected 2-D operands, got " + shape_str(av.shape) +
                                " and " + shape_str(bv.shape));
  int M = av.shape[0], K = av.shape[1];
  int bK = transpose_b ? bv.shape[1] : bv.shape[0];
  int N = transpose_b ? bv.shape[0] : bv.shape[1];
  if (K != bK)
    throw std::invalid_argument("matmul: shape mismatch " + shape_str(av.shape) + " vs " +
                                shape_str(bv.shape) + (transpose_b ? " (transposed)" : ""));
  Array out({M, N});
  if (transpose_b)
    gemm_nt(av.data.data(), bv.data.data(), out.data.data(), M, K, N);
  else
    gemm(av.data.data(), bv.data.data(), out.data.data(), M, K, N);
  int ai = a.index(), bi = b.index();
  return make("matmul", std::move(out), {ai, bi},
              [ai, bi, M, K, N, transpose_b](Graph& g, int self) {
                const Array& dy = g.node(self).grad;
                const Array& A = g.node(ai).value;
                const Array& B = g.node(bi).value;
                if (g.node(ai).requires_grad) {
                  g.ensure_grad(ai);
                  float* dA = g.node(ai).grad.data.data();
                  if (transpose_b)
                    gemm(dy.data.data(), B.data.data(), dA, M, N, K);  // dA += dY * B
                  else
                    gemm_nt(dy.data.data(), B.data.data(), dA, M, N, K);  // dA += dY * B^T
                }
                if (g.node(bi).requires_grad) {
                  g.ensure_grad(bi);
                  float* dB = g.node(bi).grad.data.data();
                  if (transpose_b)
                    gemm_tn(dy.data.data(), A.data.data(), dB, K, M, N);  // dB += dY^T * A
                  else
                    gemm_tn(A.data.data(), dy.data.data(), dB, K, M, N);  // dB += A^T * dY
                }
              });
}

// ---------------------------------------------------------------------------
// conv2d via im2col

Var Graph::conv2d(Var x, Var w, Var bias, int stride, int pad) {
  const Array& xv = x.value();
  const Array& wv = w.value();
  const Array& bv = bias.value();
  if (xv.rank() != 4 || wv.rank() != 4)
    throw std::invalid_argument("conv2d: expected x [N,C,H,W] and w [OC,C,kh,kw], got " +
                                shape_str(xv.shape) + " and " + shape_str(wv.shape));
  int N = xv.shape[0], C = xv.shape[1], H = xv.shape[2], W = xv.shape[3];
  int OC = wv.shape[0], KH = wv.shape[2], KW = wv.shape[3];
  if (wv.shape[1] != C)
    throw std::invalid_argument("conv2d: channel mismatch " + shape_str(xv.shape) + " vs " +
                                shape_str(wv.shape));
  if (bv.rank() != 1 || bv.shape[0] != OC)
    throw std::invalid_argument("conv2d: bias shape " + shape_str(bv.shape) + " expected [" +
                                std::to_string(OC) + "]");
  if (stride < 1) throw std::invalid_argument("conv2d: stride must be >= 1");
  if (KH > H + 2 * pad || KW > W + 2 * pad)
    throw std::invalid_argument("conv2d: kernel " + shape_str(wv.shape) +
                                " larger than padded input " + shape_str(xv.shape) +
                                " with pad " + std::to_string(pad));
  int OH = (H + 2 * pad - KH) / stride + 1;
  int OW = (W + 2 * pad - KW) / stride + 1;
  int64_t ck = static_cast<int64_t>(C) * KH * KW;
  int64_t ohw = static_cast<int64_t>(OH) * OW;

  // im2col buffer kept alive for the backward pass
  auto cols = std::make_shared<std::vector<float>>(static_cast<size_t>(N) * ck * ohw, 0.0f);
  for (int n = 0; n < N; ++n) {
    float* col = cols->data() + n * ck * ohw;
    const float* xn = xv.data.data() + static_cast<int64_t>(n) * C * H * W;
    int64_t row = 0;
    for (int c = 0; c < C; ++c) {
      for (int ki = 0; ki < KH; ++ki) {
        for (int kj = 0; kj < KW; ++kj, ++row) {
          float* dst = col + row * ohw;
          for (int oi = 0; oi < OH; ++oi) {
            int ii = oi * stride + ki - pad;
            if (ii < 0 || ii >= H) continue;  // zero padding
            const float* src = xn + (static_cast<int64_t>(c) * H + ii) * W;
            for (int oj = 0; oj < OW; ++oj) {
              int jj = oj * stride + kj - pad;
              if (jj >= 0 && jj < W) dst[oi * OW + oj] = src[jj];
            }
          }
        }
      }
    }
  }

  Array out({N, OC, OH, OW});
  for (int n = 0; n < N; ++n) {
    float* on = out.data.data() + static_cast<int64_t>(n) * OC * ohw;
    gemm(wv.data.data(), cols->data() + n * ck * ohw, on, OC, static_cast<int>(ck),
         static_cast<int>(ohw));
    for (int oc = 0; oc < OC; ++oc) {
      float b = bv.data[oc];
      float* dst = on + oc * ohw;
      for (int64_t i = 0; i < ohw; ++i) dst[i] += b;
    }
  }

  int xi = x.index(), wi = w.index(), bi = bias.index();
  return make(
      "conv2d", std::move(out), {xi, wi, bi},
      [=](Graph& g, int self) {
        const Array& dy = g.node(self).grad;
        const Array& wv2 = g.node(wi).value;
        if (g.node(bi).requires_grad) {
          g.ensure_grad(bi);
          Array& db = g.node(bi).grad;
          for (int n = 0; n < N; ++n) {
            const float* dn = dy.data.data() + static_cast<int64_t>(n) * OC * ohw;
            for (int oc = 0; oc < OC; ++oc) {
              float acc = 0.0f;
              const float* src = dn + oc * ohw;
              for (int64_t i = 0; i < ohw; ++i) acc += src[i];
              db.data[oc] += acc;
            }
          }
        }
        if (g.node(wi).requires_grad) {
          g.ensure_grad(wi);
          float* dw = g.node(wi).grad.data.data();
          for (int n = 0; n < N; ++n) {
            // dW += dY_n [OC,ohw] * cols_n^T [ohw,ck]
            gemm_nt(dy.data.data() + static_cast<int64_t>(n) * OC * ohw,
                    cols->data() + n * ck * ohw, dw, OC, static_cast<int>(ohw),
                    static_cast<int>(ck));
          }
        }
        if (g.node(xi).requires_grad) {
          g.ensure_grad(xi);
          Array& dx = g.node(xi).grad;
          std::vector<float> dcol(ck * ohw);
          for (int n = 0; n < N; ++n) {
            std::fill(dcol.begin(), dcol.end(), 0.0f);
            // dcols = W^T [ck,OC] * dY_n [OC,ohw]
            gemm_tn(wv2.data.data(), dy.data.data() + static_cast<int64_t>(n) * OC * ohw,
                    dcol.data(), static_cast<int>(ck), OC, static_cast<int>(ohw));
            float* dxn = dx.data.data() + static_cast<int64_t>(n) * C * H * W;
            int64_t row = 0;
            for (int c = 0; c < C; ++c) {
              for (int ki = 0; ki < KH; ++ki) {
                for (int kj = 0; kj < KW; ++kj, ++row) {
                  const float* src = dcol.data() + row * ohw;
                  for (int oi = 0; oi < OH; ++oi) {
                    int ii = oi * stride + ki - pad;
                    if (ii < 0 || ii >= H) continue;
                    float* dst = dxn + (static_cast<int64_t>(c) * H + ii) * W;
                    for (int oj = 0; oj < OW; ++oj) {
                      int jj = oj * stride + kj - pad;
                      if (jj >= 0 && jj < W) dst[jj] += src[oi * OW + oj];
                    }
                  }
                }
              }
            }
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Nonlinearities

Var Graph::relu(Var a) {
  Array out = a.value();
  for (float& v : out.data) v = v > 0.0f ? v : 0.0f;
  int ai = a.index();
  return make("relu", std::move(out), {ai}, [ai](Graph& g, int self) {
    const Array& dy = g.node(self).grad;
    const Array& x = g.node(ai).value;
    g.ensure_grad(ai);
    Array& da = g.node(ai).grad;
    for (int64_t i = 0; i < dy.numel(); ++i)
      if (x.data[i] > 0.0f) da.data[i] += dy.data[i];
  });
}

Var Graph::gelu(Var a) {
  Array out = a.value();
  for (float& v : out.data) {
    float cdf = 0.5f * (1.0f + std::erf(v * 0.70710678f));
    v = v * cdf;
  }
  int ai = a.index();
  return make("gelu", std::move(out), {ai}, [ai](Graph& g, int self) {
    const Array& dy = g.node(self).grad;
    const Array& x = g.node(ai).value;
    g.ensure_grad(ai);
    Array& da = g.node(ai).grad;
    constexpr float kInvSqrt2 = 0.70710678f;
    constexpr float kInvSqrt2Pi = 0.39894228f;
    for (int64_t i = 0; i < dy.numel(); ++i) {
      float v = x.data[i];
      float cdf = 0.5f * (1.0f + std::erf(v * kInvSqrt2));
      float pdf = kInvSqrt2Pi * std::exp(-0.5f * v * v);
      da.data[i] += dy.data[i] * (cdf + v * pdf);
    }
  });
}

Var Graph::softmax(Var a) {
  auto [rows, cols] = row_view(a.value(), "softmax");
  Array out = a.value();
  for (int64_t r = 0; r < rows; ++r) {
    float* p = out.data.data() + r * cols;
    float mx = p[0];
    for (int64_t c = 1; c < cols; ++c) mx = std::max(mx, p[c]);
    float z = 0.0f;
    for (int64_t c = 0; c < cols; ++c) {
      p[c] = std::exp(p[c] - mx);
      z += p[c];
    }
    for (int64_t c = 0; c < cols; ++c) p[c] /= z;
  }
  int ai = a.index();
  int64_t R = rows, C = cols;
  return make("softmax", std::move(out), {ai}, [ai, R, C](Graph& g, int self) {
    const Array& dy = g.node(self).grad;
    const Array& y = g.node(self).value;
    g.ensure_grad(ai);
    Array& da = g.node(ai).grad;
    for (int64_t r = 0; r < R; ++r) {
      const float* yr = y.data.data() + r * C;
      const float* dr = dy.data.data() + r * C;
      float dot = 0.0f;
      for (int64_t c = 0; c < C; ++c) dot += yr[c] * dr[c];
      float* out_r = da.data.data() + r * C;
      for (int64_t c = 0; c < C; ++c) out_r[c] += yr[c] * (dr[c] - dot);
    }
  });
}

Var Graph::layernorm(Var x, Var gain, Var bias) {
  constexpr float kEps = 1e-5f;
  const Array& xv = x.value();
  auto [rows, cols] = row_view(xv, "layernorm");
  const Array& gv = gain.value();
  const Array& bv = bias.value();
  if (gv.rank() != 1 || gv.shape[0] != cols || !gv.same_shape(bv))
    throw std::invalid_argument("layernorm: gain/bias shape " + shape_str(gv.shape) + " vs " +
                                shape_str(bv.shape) + " expected [" + std::to_string(cols) + "]");
  Array out(xv.shape);
  auto xhat = std::make_shared<std::vector<float>>(xv.data.size());
  auto inv_std = std::make_shared<std::vector<float>>(rows);
  for (int64_t r = 0; r < rows; ++r) {
    const float* p = xv.data.data() + r * cols;
    float mu = 0.0f;
    for (int64_t c = 0; c < cols; ++c) mu += p[c];
    mu /= cols;
    float var = 0.0f;
    for (int64_t c = 0; c < cols; ++c) var += (p[c] - mu) * (p[c] - mu);
    var /= cols;
    float is = 1.0f / std::sqrt(var + kEps);
    (*inv_std)[r] = is;
    float* h = xhat->data() + r * cols;
    float* o = out.data.data() + r * cols;
    for (int64_t c = 0; c < cols; ++c) {
      h[c] = (p[c] - mu) * is;
      o[c] = h[c] * gv.data[c] + bv.data[c];
    }
  }
  int xi = x.index(), gi = gain.index(), bi = bias.index();
  int64_t R = rows, C = cols;
  return make("layernorm", std::move(out), {xi, gi, bi},
              [=](Graph& g, int self) {
                const Array& dy = g.node(self).grad;
                const Array& gv2 = g.node(gi).value;
                if (g.node(gi).requires_grad) {
                  g.ensure_grad(gi);
                  Array& dg = g.node(gi).grad;
                  for (int64_t r = 0; r < R; ++r)
                    for (int64_t c = 0; c < C; ++c)
                      dg.data[c] += dy.data[r * C + c] * (*xhat)[r * C + c];
                }
                if (g.node(bi).requires_grad) {
                  g.ensure_grad(bi);
                  Array& db = g.node(bi).grad;
                  for (int64_t r = 0; r < R; ++r)
                    for (int64_t c = 0; c < C; ++c) db.data[c] += dy.data[r * C + c];
                }
                if (g.node(xi).requires_grad) {
                  g.ensure_grad(xi);
                  Array& dx = g.node(xi).grad;
                  for (int64_t r = 0; r < R; ++r) {
                    const float* dr = dy.data.data() + r * C;
                    const float* hr = xhat->data() + r * C;
                    float m1 = 0.0f, m2 = 0.0f;
                    for (int64_t c = 0; c < C; ++c) {
                      float dh = dr[c] * gv2.data[c];
                      m1 += dh;
                      m2 += dh * hr[c];
                    }
                    m1 /= C;
                    m2 /= C;
                    float is = (*inv_std)[r];
                    float* o = dx.data.data() + r * C;
                    for (int64_t c = 0; c < C; ++c) {
                      float dh = dr[c] * gv2.data[c];
                      o[c] += is * (dh - m1 - hr[c] * m2);
                    }
                  }
                }
              });
}

// ---------------------------------------------------------------------------
// Shape ops

Var Graph::reshape(Var a, std::vector<int> s) {
  if (numel_of(s) != a.value().numel())
    throw std::invalid_argument("reshape: cannot view " + shape_str(a.value().shape) + " as " +
                                shape_str(s));
  Array out(std::move(s), a.value().data);
  int ai = a.index();
  return make("reshape", std::move(out), {ai}, [ai](Graph& g, int self) {
    const Array& dy = g.node(self).grad;
    g.accumulate(ai, dy.data.data(), dy.numel());
  });
}

namespace {
// Decompose a shape around an axis into (outer, extent, inner).
std::array<int64_t, 3> axis_view(const std::vector<int>& shape, int axis, const char* op) {
  if (axis < 0 || axis >= static_cast<int>(shape.size()))
    throw std::invalid_argument(std::string(op) + ": axis " + std::to_string(axis) +
                                " out of range for " + shape_str(shape));
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= shape[i];
  for (size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  return {outer, shape[axis], inner};
}
}  // namespace

Var Graph::concat(const std::vector<Var>& parts, int axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  const Array& first = parts[0].value();
  std::vector<int> out_shape = first.shape;
  auto [outer, ext0, inner] = axis_view(first.shape, axis, "concat");
  int64_t total_ext = 0;
  for (const Var& p : parts) {
    const Array& v = p.value();
    if (v.rank() != first.rank())
      throw std::invalid_argument("concat: rank mismatch " + shape_str(v.shape) + " vs " +
                                  shape_str(first.shape));
    for (int d = 0; d < first.rank(); ++d)
      if (d != axis && v.shape[d] != first.shape[d])
        throw std::invalid_argument("concat: shape mismatch " + shape_str(v.shape) + " vs " +
                                    shape_str(first.shape));
    total_ext += v.shape[axis];
  }
  out_shape[axis] = static_cast<int>(total_ext);
  Array out(out_shape);
  std::vector<int> idxs;
  std::vector<int64_t> exts;
  int64_t off = 0;
  for (const Var& p : parts) {
    const Array& v = p.value();
    int64_t ext = v.shape[axis];
    for (int64_t o = 0; o < outer; ++o)
      std::memcpy(out.data.data() + (o * total_ext + off) * inner,
                  v.data.data() + o * ext * inner, sizeof(float) * ext * inner);
    idxs.push_back(p.index());
    exts.push_back(ext);
    off += ext;
  }
  (void)ext0;
  int64_t O = outer, I = inner, T = total_ext;
  return make("concat", std::move(out), idxs, [idxs, exts, O, I, T](Graph& g, int self) {
    const Array& dy = g.node(self).grad;
    int64_t off2 = 0;
    for (size_t k = 0; k < idxs.size(); ++k) {
      int64_t ext = exts[k];
      if (g.node(idxs[k]).requires_grad) {
        g.ensure_grad(idxs[k]);
        Array& dp = g.node(idxs[k]).grad;
        for (int64_t o = 0; o < O; ++o) {
          const float* src = dy.data.data() + (o * T + off2) * I;
          float* dst = dp.data.data() + o * ext * I;
          for (int64_t i = 0; i < ext * I; ++i) dst[i] += src[i];
        }
      }
      off2 += ext;
    }
  });
}

Var Graph::slice(Var a, int axis, int start, int len) {
  const Array& av = a.value();
  auto [outer, ext, inner] = axis_view(av.shape, axis, "slice");
  if (start < 0 || len < 0 || start + len > ext)
    throw std::invalid_argument("slice: range [" + std::to_string(start) + "," +
                                std::to_string(start + len) + ") out of bounds for " +
                                shape_str(av.shape) + " axis " + std::to_string(axis));
  std::vector<int> out_shape = av.shape;
  out_shape[axis] = len;
  Array out(out_shape);
  for (int64_t o = 0; o < outer; ++o)
    std::memcpy(out.data.data() + o * len * inner, av.data.data() + (o * ext + start) * inner,
                sizeof(float) * len * inner);
  int ai = a.index();
  int64_t O = outer, E = ext, I = inner;
  return make("slice", std::move(out), {ai}, [ai, O, E, I, start, len](Graph& g, int self) {
    const Array& dy = g.node(self).grad;
    g.ensure_grad(ai);
    Array& da = g.node(ai).grad;
    for (int64_t o = 0; o < O; ++o) {
      const float* src = dy.data.data() + o * len * I;
      float* dst = da.data.data() + (o * E + start) * I;
      for (int64_t i = 0; i < static_cast<int64_t>(len) * I; ++i) dst[i] += src[i];
    }
  });
}

// ---------------------------------------------------------------------------
// Reductions

Var Graph::mean(Var a) {
  int64_t n = a.value().numel();
  if (n == 0) throw std::invalid_argument("mean: empty input");
  float acc = 0.0f;
  for (float v : a.value().data) acc += v;
  int ai = a.index();
  return make("mean", Array::scalar(acc / n), {ai}, [ai, n](Graph& g, int self) {
    float dy = g.node(self).grad.data[0] / n;
    g.ensure_grad(ai);
    for (float& v : g.node(ai).grad.data) v += dy;
  });
}

Var Graph::sum(Var a) {
  float acc = 0.0f;
  for (float v : a.value().data) acc += v;
  int ai = a.index();
  return make("sum", Array::scalar(acc), {ai}, [ai](Graph& g, int self) {
    float dy = g.node(self).grad.data[0];
    g.ensure_grad(ai);
    for (float& v : g.node(ai).grad.data) v += dy;
  });
}

Var Graph::mean_rows(Var a) {
  const Array& av = a.value();
  auto [rows, cols] = row_view(av, "mean_rows");
  if (cols == 0) throw std::invalid_argument("mean_rows: empty last axis");
  std::vector<int> out_shape(av.shape.begin(), av.shape.end() - 1);
  if (out_shape.empty()) out_shape = {1};
  Array out(out_shape);
  for (int64_t r = 0; r < rows; ++r) {
    const float* p = av.data.data() + r * cols;
    float acc = 0.0f;
    for (int64_t c = 0; c < cols; ++c) acc += p[c];
    out.data[r] = acc / cols;
  }
  int ai = a.index();
  int64_t R = rows, C = cols;
  return make("mean_rows", std::move(out), {ai}, [ai, R, C](Graph& g, int self) {
    const Array& dy = g.node(self).grad;
    g.ensure_grad(ai);
    Array& da = g.node(ai).grad;
    for (int64_t r = 0; r < R; ++r) {
      float d = dy.data[r] / C;
      float* p = da.data.data() + r * C;
      for (int64_t c = 0; c < C; ++c) p[c] += d;
    }
  });
}

Var Graph::mse(Var pred, Var target) {
  Var d = sub(pred, target);
  return mean(mul(d, d));
}

}  // namespace numcore
