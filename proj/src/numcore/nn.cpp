#include "gridnav/numcore/nn.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace numcore {

Array zeros(std::vector<int> shape) { return Array(std::move(shape)); }

Array ones(std::vector<int> shape) { return Array::full(std::move(shape), 1.0f); }

Array trunc_normal(Rng& rng, std::vector<int> shape, float std_dev) {
  Array a(std::move(shape));
  for (float& v : a.data) {
    double z = rng.normal();
    while (std::fabs(z) > 2.0) z = rng.normal();
    v = static_cast<float>(z) * std_dev;
  }
  return a;
}

Array conv_kernel_init(Rng& rng, std::vector<int> shape) {
  if (shape.size() != 4) throw std::invalid_argument("conv_kernel_init: expected 4-D shape");
  int64_t fan_in = static_cast<int64_t>(shape[1]) * shape[2] * shape[3];
  float std_dev = std::sqrt(2.0f / static_cast<float>(fan_in));
  Array a(std::move(shape));
  for (float& v : a.data) v = rng.normalf() * std_dev;
  return a;
}

void create_attention_params(ParamStore& ps, const std::string& prefix, int d_model, Rng& rng) {
  if (ps.has(prefix + ".wq")) return;
  const char* mats[] = {".wq", ".wk", ".wv", ".wo"};
  const char* vecs[] = {".bq", ".bk", ".bv", ".bo"};
  for (const char* m : mats) ps.create(prefix + m, trunc_normal(rng, {d_model, d_model}, 0.02f));
  for (const char* v : vecs) ps.create(prefix + v, zeros({d_model}));
}

AttentionWeights load_attention_params(Graph& g, ParamStore& ps, const std::string& prefix) {
  AttentionWeights w;
  w.wq = g.param(ps, prefix + ".wq");
  w.wk = g.param(ps, prefix + ".wk");
  w.wv = g.param(ps, prefix + ".wv");
  w.wo = g.param(ps, prefix + ".wo");
  w.bq = g.param(ps, prefix + ".bq");
  w.bk = g.param(ps, prefix + ".bk");
  w.bv = g.param(ps, prefix + ".bv");
  w.bo = g.param(ps, prefix + ".bo");
  return w;
}

Var multi_head_attention(Graph& g, Var tokens, const AttentionWeights& w, int n_heads) {
  const auto& shape = tokens.shape();
  if (shape.size() != 2)
    throw std::invalid_argument("multi_head_attention: expected tokens [N,d], got " +
                                shape_str(shape));
  int d = shape[1];
  if (n_heads < 1 || d % n_heads != 0)
    throw std::invalid_argument("multi_head_attention: d_model " + std::to_string(d) +
                                " not divisible by n_heads " + std::to_string(n_heads));
  int dh = d / n_heads;
  Var q = g.add(g.matmul(tokens, w.wq), w.bq);
  Var k = g.add(g.matmul(tokens, w.wk), w.bk);
  Var v = g.add(g.matmul(tokens, w.wv), w.bv);
  float inv_sqrt = 1.0f / std::sqrt(static_cast<float>(dh));
  std::vector<Var> heads;
  heads.reserve(n_heads);
  for (int h = 0; h < n_heads; ++h) {
    Var qh = g.slice(q, 1, h * dh, dh);
    Var kh = g.slice(k, 1, h * dh, dh);
    Var vh = g.slice(v, 1, h * dh, dh);
    Var scores = g.scale(g.matmul(qh, kh, /*transpose_b=*/true), inv_sqrt);
    Var attn = g.softmax(scores);
    heads.push_back(g.matmul(attn, vh));
  }
  Var merged = g.concat(heads, 1);
  return g.add(g.matmul(merged, w.wo), w.bo);
}

void adamw_step(ParamStore& ps, const AdamWConfig& cfg) { adamw_step(ps, cfg, cfg.lr); }

void adamw_step(ParamStore& ps, const AdamWConfig& cfg, float lr) {
  ps.step_count += 1;
  double t = static_cast<double>(ps.step_count);
  float bc1 = 1.0f - static_cast<float>(std::pow(cfg.beta1, t));
  float bc2 = 1.0f - static_cast<float>(std::pow(cfg.beta2, t));
  for (auto& [name, p] : ps.table()) {
    for (int64_t i = 0; i < p.value.numel(); ++i) {
      float gi = p.grad.data[i];
      if (!std::isfinite(gi))
        throw std::runtime_error("adamw_step: non-finite gradient in parameter '" + name + "'");
      float m = cfg.beta1 * p.m.data[i] + (1.0f - cfg.beta1) * gi;
      float v = cfg.beta2 * p.v.data[i] + (1.0f - cfg.beta2) * gi * gi;
      p.m.data[i] = m;
      p.v.data[i] = v;
      float mhat = m / bc1;
      float vhat = v / bc2;
      p.value.data[i] -=
          lr * (mhat / (std::sqrt(vhat) + cfg.eps) + cfg.weight_decay * p.value.data[i]);
    }
  }
}

// ---------------------------------------------------------------------------
// Checkpoint container

namespace {

void write_u32(std::ostream& os, uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }

uint32_t read_u32(std::istream& is, const char* what) {
  uint32_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), 4))
    throw std::runtime_error(std::string("checkpoint: truncated while reading ") + what);
  return v;
}

constexpr char kMagic[4] = {'V', 'N', 'T', 'W'};
constexpr uint32_t kVersion = 1;

}  // namespace

void save_checkpoint(const ParamStore& ps, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("checkpoint: cannot open '" + path + "' for writing");
  os.write(kMagic, 4);
  write_u32(os, kVersion);
  write_u32(os, static_cast<uint32_t>(ps.table().size()));
  for (const auto& [name, p] : ps.table()) {
    write_u32(os, static_cast<uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(os, static_cast<uint32_t>(p.value.shape.size()));
    for (int e : p.value.shape) write_u32(os, static_cast<uint32_t>(e));
    os.write(reinterpret_cast<const char*>(p.value.data.data()),
             static_cast<std::streamsize>(p.value.data.size() * sizeof(float)));
  }
  if (!os) throw std::runtime_error("checkpoint: write failed for '" + path + "'");
}

void load_checkpoint(ParamStore& ps, const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
  char magic[4] = {0, 0, 0, 0};
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("checkpoint: bad magic in '" + path + "'");
  uint32_t version = read_u32(is, "version");
  if (version != kVersion)
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  uint32_t count = read_u32(is, "tensor count");
  for (uint32_t i = 0; i < count; ++i) {
    uint32_t name_len = read_u32(is, "name length");
    std::string name(name_len, '\0');
    if (!is.read(name.data(), name_len)) throw std::runtime_error("checkpoint: truncated name");
    uint32_t rank = read_u32(is, "rank");
    std::vector<int> shape(rank);
    for (uint32_t d = 0; d < rank; ++d) shape[d] = static_cast<int>(read_u32(is, "extent"));
    Array a(shape);
    if (!is.read(reinterpret_cast<char*>(a.data.data()),
                 static_cast<std::streamsize>(a.data.size() * sizeof(float))))
      throw std::runtime_error("checkpoint: truncated payload for tensor '" + name + "'");
    if (ps.has(name)) {
      ParamTensor& t = ps.entry(name);
      if (!t.value.same_shape(a))
        throw std::runtime_error("checkpoint: shape mismatch for tensor '" + name + "'");
      t.value = std::move(a);
      std::fill(t.m.data.begin(), t.m.data.end(), 0.0f);
      std::fill(t.v.data.begin(), t.v.data.end(), 0.0f);
      std::fill(t.grad.data.begin(), t.grad.data.end(), 0.0f);
    } else {
      ps.create(name, std::move(a));
    }
  }
}

}  // namespace numcore
