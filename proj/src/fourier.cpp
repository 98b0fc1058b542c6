#include "ge2ae/fourier.hpp"

#include <cmath>
#include <stdexcept>

#include "ge2ae/fft_core.hpp"

namespace ge2ae::fourier {

namespace {

void check_image(const Tensor& image) {
  if (image.rank() != 3)
    throw std::invalid_argument("dft2d: expects an [H,W,C] tensor, got " + shape_str(image.shape));
}

void check_signal(const ComplexTensor& z) {
  if (z.shape.size() != 3)
    throw std::invalid_argument("dft2d: expects an [H,W,C] signal, got " + shape_str(z.shape));
}

}  // namespace

Spectrum2D Spectrum2D::wrap(ComplexTensor values, bool from_real) {
  Spectrum2D s;
  if (values.shape.size() != 3)
    throw std::invalid_argument("Spectrum2D: expects [H,W,C] values, got " +
                                shape_str(values.shape));
  s.height = values.shape[0];
  s.width = values.shape[1];
  s.channels = values.shape[2];
  s.from_real = from_real;
  s.values = std::move(values);
  return s;
}

Spectrum2D dft2d(const Tensor& image) {
  check_image(image);
  ComplexTensor out(image.shape);
  fftcore::dft2d(image.shape[0], image.shape[1], image.shape[2], image.data.data(), nullptr,
                 out.re.data(), out.im.data(), false);
  return Spectrum2D::wrap(std::move(out), true);
}

Spectrum2D dft2d(const ComplexTensor& signal) {
  check_signal(signal);
  ComplexTensor out(signal.shape);
  fftcore::dft2d(signal.shape[0], signal.shape[1], signal.shape[2], signal.re.data(),
                 signal.im.data(), out.re.data(), out.im.data(), false);
  return Spectrum2D::wrap(std::move(out), false);
}

Spectrum2D dft2d_naive(const Tensor& image) {
  check_image(image);
  ComplexTensor out(image.shape);
  fftcore::dft2d_naive(image.shape[0], image.shape[1], image.shape[2], image.data.data(), nullptr,
                       out.re.data(), out.im.data(), false);
  return Spectrum2D::wrap(std::move(out), true);
}

Spectrum2D dft2d_naive(const ComplexTensor& signal) {
  check_signal(signal);
  ComplexTensor out(signal.shape);
  fftcore::dft2d_naive(signal.shape[0], signal.shape[1], signal.shape[2], signal.re.data(),
                       signal.im.data(), out.re.data(), out.im.data(), false);
  return Spectrum2D::wrap(std::move(out), false);
}

ComplexTensor idft2d(const Spectrum2D& spec) {
  ComplexTensor out(spec.values.shape);
  fftcore::dft2d(spec.height, spec.width, spec.channels, spec.values.re.data(),
                 spec.values.im.data(), out.re.data(), out.im.data(), true);
  return out;
}

ComplexTensor idft2d_naive(const Spectrum2D& spec) {
  ComplexTensor out(spec.values.shape);
  fftcore::dft2d_naive(spec.height, spec.width, spec.channels, spec.values.re.data(),
                       spec.values.im.data(), out.re.data(), out.im.data(), true);
  return out;
}

std::pair<Tensor, Tensor> amplitude_phase(const Spectrum2D& spec) {
  Tensor amp(spec.values.shape), phase(spec.values.shape);
  for (std::size_t i = 0; i < spec.values.numel(); ++i) {
    const double re = spec.values.re[i];
    const double im = spec.values.im[i];
    amp.data[i] = std::hypot(re, im);
    phase.data[i] = (re == 0.0 && im == 0.0) ? 0.0 : std::atan2(im, re);
  }
  return {std::move(amp), std::move(phase)};
}

Tensor phase_only_image(const Tensor& image) {
  Spectrum2D spec = dft2d(image);
  for (std::size_t i = 0; i < spec.values.numel(); ++i) {
    const double re = spec.values.re[i];
    const double im = spec.values.im[i];
    const double a = std::hypot(re, im);
    if (a == 0.0) {
      spec.values.re[i] = 1.0;  // phase-0 convention for exact zeros
      spec.values.im[i] = 0.0;
    } else {
      spec.values.re[i] = re / a;
      spec.values.im[i] = im / a;
    }
  }
  spec.from_real = false;
  return idft2d(spec).real_part();
}

namespace {

template <class F>
void shifted_copy(const std::vector<int>& shape, F&& assign) {
  const int H = shape[0], W = shape[1];
  std::size_t inner = 1;
  for (std::size_t i = 2; i < shape.size(); ++i) inner *= static_cast<std::size_t>(shape[i]);
  const int sh = H / 2, sw = W / 2;
  for (int h = 0; h < H; ++h) {
    const int h2 = (h + sh) % H;
    for (int w = 0; w < W; ++w) {
      const int w2 = (w + sw) % W;
      const std::size_t src = (static_cast<std::size_t>(h) * W + w) * inner;
      const std::size_t dst = (static_cast<std::size_t>(h2) * W + w2) * inner;
      assign(src, dst, inner);
    }
  }
}

}  // namespace

Tensor fftshift(const Tensor& grid) {
  if (grid.rank() < 2)
    throw std::invalid_argument("fftshift: expects at least an HxW grid, got " +
                                shape_str(grid.shape));
  Tensor out(grid.shape);
  shifted_copy(grid.shape, [&](std::size_t src, std::size_t dst, std::size_t inner) {
    for (std::size_t i = 0; i < inner; ++i) out.data[dst + i] = grid.data[src + i];
  });
  return out;
}

ComplexTensor fftshift(const ComplexTensor& grid) {
  if (grid.shape.size() < 2)
    throw std::invalid_argument("fftshift: expects at least an HxW grid, got " +
                                shape_str(grid.shape));
  ComplexTensor out(grid.shape);
  shifted_copy(grid.shape, [&](std::size_t src, std::size_t dst, std::size_t inner) {
    for (std::size_t i = 0; i < inner; ++i) {
      out.re[dst + i] = grid.re[src + i];
      out.im[dst + i] = grid.im[src + i];
    }
  });
  return out;
}

Tensor pack_pair(const ComplexTensor& z) {
  if (z.shape.size() != 3)
    throw std::invalid_argument("pack_pair: expects [H,W,C], got " + shape_str(z.shape));
  Tensor out({2, z.shape[0], z.shape[1], z.shape[2]});
  const std::size_t n = z.numel();
  for (std::size_t i = 0; i < n; ++i) {
    out.data[i] = z.re[i];
    out.data[n + i] = z.im[i];
  }
  return out;
}

ComplexTensor unpack_pair(const Tensor& pair) {
  if (pair.rank() != 4 || pair.shape[0] != 2)
    throw std::invalid_argument("unpack_pair: expects [2,H,W,C], got " + shape_str(pair.shape));
  ComplexTensor out({pair.shape[1], pair.shape[2], pair.shape[3]});
  const std::size_t n = out.numel();
  for (std::size_t i = 0; i < n; ++i) {
    out.re[i] = pair.data[i];
    out.im[i] = pair.data[n + i];
  }
  return out;
}

}  // namespace ge2ae::fourier
