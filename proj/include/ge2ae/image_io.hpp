#pragma once

#include <string>

#include "ge2ae/tensor.hpp"

namespace ge2ae::io {

// Binary P6 PPM, maxval 255. Pixels come back as [H,W,3] in [0,1].
Tensor read_ppm(const std::string& path);

// Accepts [H,W,3] or [H,W,1] (replicated to gray); values clamped to [0,1]
// and quantized to bytes.
void write_ppm(const std::string& path, const Tensor& image);

// Min-max rescales an [H,W] or [H,W,1] map into [0,1] before writing.
void write_scaled_map(const std::string& path, const Tensor& map);

}  // namespace ge2ae::io
