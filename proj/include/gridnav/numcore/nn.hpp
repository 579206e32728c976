#pragma once

#include <string>

#include "gridnav/numcore/graph.hpp"
#include "gridnav/numcore/rng.hpp"

namespace numcore {

// --- weight initialization ---
Array zeros(std::vector<int> shape);
Array ones(std::vector<int> shape);
// Truncated normal (resampled beyond 2 std), used for projection matrices.
Array trunc_normal(Rng& rng, std::vector<int> shape, float std_dev);
// Fan-in scaled normal for convolution kernels [OC,C,kh,kw].
Array conv_kernel_init(Rng& rng, std::vector<int> shape);

// --- multi-head attention ---
struct AttentionWeights {
  Var wq, wk, wv, wo;  // [d, d]
  Var bq, bk, bv, bo;  // [d]
};

// Registers q/k/v/o projections under `prefix` if absent.
void create_attention_params(ParamStore& ps, const std::string& prefix, int d_model, Rng& rng);
AttentionWeights load_attention_params(Graph& g, ParamStore& ps, const std::string& prefix);

// Self-attention over tokens [N, d]; per-token softmax rows sum to 1.
Var multi_head_attention(Graph& g, Var tokens, const AttentionWeights& w, int n_heads);

// --- optimizer ---
struct AdamWConfig {
  float lr = 5e-4f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
  float weight_decay = 1e-4f;
};

// One decoupled-weight-decay Adam step over every parameter in the store,
// consuming the accumulated gradients. Throws on non-finite gradients,
// naming the offending parameter.
void adamw_step(ParamStore& ps, const AdamWConfig& cfg);
void adamw_step(ParamStore& ps, const AdamWConfig& cfg, float lr_override);

// --- checkpoint container ---
// Magic "VNTW", u32 version, u32 tensor count, then per tensor:
// u32 name length, name bytes, u32 rank, u32 extents, little-endian f32 payload.
void save_checkpoint(const ParamStore& ps, const std::string& path);
void load_checkpoint(ParamStore& ps, const std::string& path);

}  // namespace numcore
