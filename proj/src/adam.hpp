#pragma once

#include <cstdint>
#include <vector>

#include "tensor.hpp"

namespace groundnet {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Bias-corrected Adam over a ParamStore. Moment buffers mirror the store's
// tensors; the step counter increases by one per step() call.
class Adam {
 public:
  explicit Adam(const ParamStore& store, AdamConfig cfg = {});

  // Applies one update using the gradients held in the store.
  // Throws InputError if any tensor has no gradient buffer.
  void step(ParamStore& store);

  int64_t steps() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  int64_t t_ = 0;
  std::vector<Vec> m_;
  std::vector<Vec> v_;
};

}  // namespace groundnet
