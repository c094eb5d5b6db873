#pragma once

#include <string>

#include "tensor.hpp"

namespace groundnet {

// Single-file checkpoint: a small header (format version, model kind,
// construction config, tensor count) followed by named tensors, each as
// UTF-8 name, rank, shape, little-endian 64-bit real payload.
struct LoadedCheckpoint {
  uint32_t version = 0;
  std::string kind;
  std::string config_json;
  ParamStore params;
};

void save_checkpoint(const std::string& path, const std::string& kind,
                     const std::string& config_json, const ParamStore& params);

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace groundnet
