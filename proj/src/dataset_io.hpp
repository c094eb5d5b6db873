#pragma once

#include <string>
#include <vector>

#include "puddleworld.hpp"
#include "shapeworld.hpp"

namespace groundnet {

// PuddleWorld datasets: one JSON record per line with terrain grid, object
// grid, goal, start, instruction text, kind and oracle values.
void write_pw_dataset(const std::string& path,
                      const std::vector<InstructionSample>& samples);
std::vector<InstructionSample> read_pw_dataset(const std::string& path);

// ShapeWorld datasets: JSON-lines metadata (caption, label, shape geometry,
// image index) plus a binary sidecar holding per-image 64*64*3 little-endian
// 64-bit reals at index * image stride.
void write_sw_dataset(const std::string& jsonl_path,
                      const std::string& images_path,
                      const std::vector<SwSample>& samples);
std::vector<SwSample> read_sw_dataset(const std::string& jsonl_path,
                                      const std::string& images_path);

// FNV-1a content hash, used for run manifests.
uint64_t file_hash(const std::string& path);

}  // namespace groundnet
