#pragma once

#include <cstdint>

namespace numcore {

// Splittable counter-based generator. Every stochastic component in the
// project derives its stream from a single root seed via split(), so runs
// are reproducible regardless of call interleaving across components.
class Rng {
 public:
  explicit Rng(uint64_t seed);

  // Independent child stream; deterministic in (parent key, tag).
  Rng split(uint64_t tag) const;

  uint64_t next_u64();
  double uniform();                  // [0, 1)
  double normal();                   // standard normal, Box-Muller
  float uniformf() { return static_cast<float>(uniform()); }
  float normalf() { return static_cast<float>(normal()); }
  int uniform_int(int lo, int hi);   // inclusive on both ends
  bool bernoulli(double p);

 private:
  Rng(uint64_t key, uint64_t counter) : key_(key), counter_(counter) {}
  uint64_t key_;
  uint64_t counter_;
};

}  // namespace numcore
