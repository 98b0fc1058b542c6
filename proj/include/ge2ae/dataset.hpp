#pragma once

#include <string>
#include <vector>

#include "ge2ae/rng.hpp"
#include "ge2ae/tensor.hpp"

namespace ge2ae::data {

struct ImageRecord {
  Tensor image;  // [H,W,C], values in [0,1]
  int label = -1;
};

enum class Format { kCifar10Bin, kPpmDir };

Format parse_format(const std::string& tag);
std::string format_tag(Format fmt);

// cifar10-bin: 1 label byte + 3072 pixel bytes per record (1024 R, 1024 G,
// 1024 B planes, row-major). Accepts a single .bin file or a directory of
// them, read in filename order. ppm-dir: every P6 file in the directory, in
// filename order, label -1.
std::vector<ImageRecord> ingest_dataset(const std::string& path, Format fmt);

struct CropParams {
  int top = 0, left = 0;
  int height = 0, width = 0;  // crop size in source pixels
  bool flip = false;
};

// RandomResizedCrop draw: scale in [0.2, 1.0] of area, aspect in [3/4, 4/3],
// 10 attempts then whole-frame fallback; plus a fair horizontal-flip draw.
CropParams draw_crop(int H, int W, Rng& rng);

// Crops, bilinearly resizes to out_size x out_size, and optionally flips.
// An identity crop (full frame, same size, no flip) reproduces the input.
Tensor apply_crop_flip(const Tensor& image, const CropParams& crop, int out_size);

Tensor augment(const Tensor& image, int out_size, Rng& rng);

}  // namespace ge2ae::data
