#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ctct/config.hpp"

namespace ctct {

// Named-tensor container persisted as: magic "CRNNCKPT1\n", u32 config byte
// count + flat key=value config text, u32 record count, then per record:
// u32 name length + UTF-8 name, u32 rank, u64 extents, little-endian f32
// payload. Optimizer state lives under the reserved name prefix "opt/".
struct CheckpointTensor {
  std::string name;
  std::vector<uint64_t> shape;
  std::vector<float> data;
};

struct Checkpoint {
  KeyValueConfig config;
  std::vector<CheckpointTensor> tensors;

  const CheckpointTensor* find(const std::string& name) const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);  // throws Error{BadCheckpoint}

}  // namespace ctct
