#pragma once

#include <cstdint>
#include <string>

#include "ge2ae/rng.hpp"
#include "ge2ae/tensor.hpp"

namespace ge2ae::data {

// Procedural 10-class image set written in the cifar10-bin record layout.
// Each class pairs a foreground shape with a class-specific background
// grating (orientation + spatial frequency) and palette, with per-sample
// jitter in position, scale, phase, brightness, and pixel noise.
Tensor synth_image(int side, int klass, Rng& rng);

void write_synthetic_cifar(const std::string& path, int count, std::uint64_t seed);

}  // namespace ge2ae::data
