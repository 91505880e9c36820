#pragma once

#include <string>
#include <utility>
#include <vector>

#include "blendnet/tensor.hpp"

namespace blendnet {

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

// Checkpoint container: 8-byte magic "BLNDCKPT", one version byte, then a
// sequence of records until EOF. Each record is
//   name_len:u32  name:utf8[name_len]  rank:u32  shape:u32[rank]  data:f64[n]
// with every integer and double little-endian. Record order is preserved.
void save_checkpoint(const std::string& path, const NamedTensors& params);

NamedTensors load_checkpoint(const std::string& path);

// Loads values into an existing parameter list. Every destination name must
// be present with a matching shape; the first mismatch is reported by name.
void load_checkpoint_into(const std::string& path, const NamedTensors& params);

}  // namespace blendnet
