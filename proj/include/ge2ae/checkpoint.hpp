#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "ge2ae/tensor.hpp"

namespace ge2ae::train {

// Binary layout: magic "GE2A", u32 version, u32 config length + UTF-8
// key=value lines, u64 step, u32 tensor count, then per tensor (name-sorted):
// u32 name length + bytes, u8 dtype (0 = f32, 1 = f64), u8 rank, u32 dims,
// raw little-endian data. save(load(x)) is byte-identical.
struct Checkpoint {
  std::uint32_t version = 1;
  std::string config_text;
  std::uint64_t step = 0;
  std::map<std::string, Tensor> tensors;
  std::map<std::string, std::uint8_t> dtypes;  // absent entries default to f64

  std::uint8_t dtype_of(const std::string& name) const {
    auto it = dtypes.find(name);
    return it == dtypes.end() ? 1 : it->second;
  }
};

void save_checkpoint(const Checkpoint& cp, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace ge2ae::train
