#pragma once

// Independent test oracles. Nothing in here may call into the implementation
// paths it is used to check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gridnav/numcore/array.hpp"
#include "gridnav/numcore/graph.hpp"

namespace oracles {

// Central finite differences of a scalar function along every coordinate.
inline numcore::Array finite_difference(const std::function<float(const numcore::Array&)>& f,
                                        const numcore::Array& x, float eps) {
  numcore::Array g(x.shape);
  numcore::Array xp = x;
  for (int64_t i = 0; i < x.numel(); ++i) {
    xp.data[i] = x.data[i] + eps;
    float fp = f(xp);
    xp.data[i] = x.data[i] - eps;
    float fm = f(xp);
    xp.data[i] = x.data[i];
    g.data[i] = (fp - fm) / (2.0f * eps);
  }
  return g;
}

// Max error of `b` against `a`, relative to the gradient's own scale: each
// coordinate error is divided by max(|a_i|, |b_i|, ||a||_inf). Float32
// forward passes bound how sharply finite differences can resolve
// coordinates that are tiny compared to the gradient vector itself, so the
// vector scale is the meaningful denominator for those.
inline float max_rel_error(const numcore::Array& a, const numcore::Array& b) {
  float scale = 0.0f;
  for (int64_t i = 0; i < a.numel(); ++i)
    scale = std::max({scale, std::fabs(a.data[i]), std::fabs(b.data[i])});
  if (scale == 0.0f) return 0.0f;
  float worst = 0.0f;
  for (int64_t i = 0; i < a.numel(); ++i) {
    float denom = std::max({std::fabs(a.data[i]), std::fabs(b.data[i]), scale});
    worst = std::max(worst, std::fabs(a.data[i] - b.data[i]) / denom);
  }
  return worst;
}

struct FdParamReport {
  float max_rel = 0.0f;
  std::string worst_param;
};

// Checks the gradients already accumulated in `ps` against central finite
// differences of `loss_fn` (which must rebuild the forward pass from the
// store's current values, without calling backward). Errors are measured
// relative to the infinity norm of the full gradient vector, per
// max_rel_error above.
inline FdParamReport fd_check_params(numcore::ParamStore& ps,
                                     const std::function<float()>& loss_fn, float eps = 1e-2f) {
  FdParamReport report;
  float scale = 0.0f;
  for (const std::string& name : ps.names())
    for (float g : ps.grad(name).data) scale = std::max(scale, std::fabs(g));
  if (scale == 0.0f) scale = 1.0f;
  for (const std::string& name : ps.names()) {
    numcore::Array& value = ps.value(name);
    const numcore::Array& grad = ps.grad(name);
    for (int64_t i = 0; i < value.numel(); ++i) {
      float keep = value.data[i];
      value.data[i] = keep + eps;
      float fp = loss_fn();
      value.data[i] = keep - eps;
      float fm = loss_fn();
      value.data[i] = keep;
      float fd = (fp - fm) / (2.0f * eps);
      float denom = std::max({std::fabs(fd), std::fabs(grad.data[i]), scale});
      float rel = std::fabs(fd - grad.data[i]) / denom;
      if (rel > report.max_rel) {
        report.max_rel = rel;
        report.worst_param = name;
      }
    }
  }
  return report;
}

// Directional finite difference over every parameter in the store: perturbs
// all coordinates along a fixed random direction and compares against the
// analytic directional derivative. The aggregate is far less sensitive to
// float32 evaluation noise than per-coordinate differences, which makes it
// the right probe for full training-loss graphs.
inline float fd_directional_rel_error(numcore::ParamStore& ps,
                                      const std::function<float()>& loss_fn, uint64_t seed,
                                      float eps = 1e-3f) {
  numcore::Rng rng(seed);
  std::vector<std::pair<std::string, std::vector<float>>> dirs;
  double norm2 = 0.0;
  for (const std::string& name : ps.names()) {
    std::vector<float> d(ps.value(name).numel());
    for (float& v : d) {
      v = rng.normalf();
      norm2 += static_cast<double>(v) * v;
    }
    dirs.emplace_back(name, std::move(d));
  }
  double inv_norm = 1.0 / std::sqrt(norm2);
  double analytic = 0.0;
  for (auto& [name, d] : dirs) {
    const numcore::Array& g = ps.grad(name);
    for (size_t i = 0; i < d.size(); ++i) {
      d[i] = static_cast<float>(d[i] * inv_norm);
      analytic += static_cast<double>(g.data[i]) * d[i];
    }
  }
  auto shift = [&](float t) {
    for (auto& [name, d] : dirs) {
      numcore::Array& v = ps.value(name);
      for (size_t i = 0; i < d.size(); ++i) v.data[i] += t * d[i];
    }
  };
  shift(eps);
  float fp = loss_fn();
  shift(-2.0f * eps);
  float fm = loss_fn();
  shift(eps);
  double fd = (static_cast<double>(fp) - fm) / (2.0 * eps);
  double denom = std::max(std::fabs(analytic), std::fabs(fd));
  if (denom == 0.0) return 0.0f;
  return static_cast<float>(std::fabs(analytic - fd) / denom);
}

// Pearson correlation on pre-ranked data; ranks computed with average ties.
inline std::vector<double> average_ranks(const std::vector<double>& xs) {
  size_t n = xs.size();
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(n, 0.0);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && xs[order[j + 1]] == xs[order[i]]) ++j;
    double r = 0.5 * (i + j) + 1.0;
    for (size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  auto ra = average_ranks(a);
  auto rb = average_ranks(b);
  size_t n = ra.size();
  double ma = 0, mb = 0;
  for (size_t i = 0; i < n; ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= n;
  mb /= n;
  double num = 0, va = 0, vb = 0;
  for (size_t i = 0; i < n; ++i) {
    num += (ra[i] - ma) * (rb[i] - mb);
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (va == 0 || vb == 0) return 0.0;
  return num / std::sqrt(va * vb);
}

// Chi-squared statistic for a uniform histogram over k bins.
inline double chi2_uniform(const std::vector<int64_t>& counts) {
  int64_t total = 0;
  for (int64_t c : counts) total += c;
  double expected = static_cast<double>(total) / counts.size();
  double stat = 0.0;
  for (int64_t c : counts) stat += (c - expected) * (c - expected) / expected;
  return stat;
}

}  // namespace oracles
