#pragma once

#include <utility>

#include "ge2ae/graph.hpp"
#include "ge2ae/tensor.hpp"

namespace ge2ae::fourier {

// Complex 2D spectrum of an H x W x C signal, indexed (u, v, c). The forward
// transform carries no normalization; the inverse carries the full 1/(HW).
struct Spectrum2D {
  int height = 0, width = 0, channels = 0;
  ComplexTensor values;  // shape {H, W, C}
  bool from_real = false;

  static Spectrum2D wrap(ComplexTensor values, bool from_real = false);
};

// Forward transform. Uses the radix-2 fast path when H and W are powers of
// two, the direct-summation path otherwise.
Spectrum2D dft2d(const Tensor& image);
Spectrum2D dft2d(const ComplexTensor& signal);

// Direct Eq-style summation; quadratic cost, retained as the test oracle.
Spectrum2D dft2d_naive(const Tensor& image);
Spectrum2D dft2d_naive(const ComplexTensor& signal);

ComplexTensor idft2d(const Spectrum2D& spec);
ComplexTensor idft2d_naive(const Spectrum2D& spec);

// Polar decomposition; zero-magnitude entries get phase 0.
std::pair<Tensor, Tensor> amplitude_phase(const Spectrum2D& spec);

// dft2d -> unit amplitude with original phase -> idft2d -> real part.
Tensor phase_only_image(const Tensor& image);

// Cyclic shift by (floor(H/2), floor(W/2)) over the first two axes; moves DC
// to the center for display. Involution on even dims.
Tensor fftshift(const Tensor& grid);
ComplexTensor fftshift(const ComplexTensor& grid);

// Conversions between the complex container and the [2,H,W,C] plane pair used
// by the differentiable graph ops.
Tensor pack_pair(const ComplexTensor& z);
ComplexTensor unpack_pair(const Tensor& pair);

}  // namespace ge2ae::fourier
