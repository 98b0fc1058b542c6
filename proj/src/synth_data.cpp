#include "ge2ae/synth_data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace ge2ae::data {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Rgb {
  double r, g, b;
};

const Rgb kForeground[10] = {
    {0.90, 0.25, 0.20}, {0.20, 0.75, 0.30}, {0.25, 0.40, 0.90}, {0.95, 0.80, 0.25},
    {0.80, 0.30, 0.85}, {0.20, 0.85, 0.80}, {0.95, 0.55, 0.20}, {0.55, 0.35, 0.20},
    {0.85, 0.85, 0.85}, {0.30, 0.30, 0.35},
};

const Rgb kBackground[10] = {
    {0.15, 0.30, 0.45}, {0.40, 0.25, 0.15}, {0.45, 0.45, 0.20}, {0.20, 0.20, 0.40},
    {0.25, 0.45, 0.25}, {0.45, 0.20, 0.30}, {0.20, 0.35, 0.35}, {0.35, 0.35, 0.50},
    {0.25, 0.15, 0.30}, {0.50, 0.40, 0.30},
};

double shape_mask(int shape, double dx, double dy, double radius) {
  const double ax = std::fabs(dx), ay = std::fabs(dy);
  switch (shape) {
    case 0:  // disk
      return dx * dx + dy * dy <= radius * radius ? 1.0 : 0.0;
    case 1:  // square
      return std::max(ax, ay) <= radius ? 1.0 : 0.0;
    case 2: {  // ring
      const double d = std::sqrt(dx * dx + dy * dy);
      return (d <= radius && d >= 0.55 * radius) ? 1.0 : 0.0;
    }
    case 3:  // cross
      return (ax <= 0.35 * radius && ay <= radius) || (ay <= 0.35 * radius && ax <= radius) ? 1.0
                                                                                            : 0.0;
    default:  // diagonal stripes clipped to a disk
      if (dx * dx + dy * dy > radius * radius) return 0.0;
      return std::fmod(std::fabs(dx + dy), 4.0) < 2.0 ? 1.0 : 0.0;
  }
}

}  // namespace

Tensor synth_image(int side, int klass, Rng& rng) {
  if (klass < 0 || klass > 9) throw std::invalid_argument("synth_image: class must be 0..9");
  const double theta = klass * (kPi / 10.0);
  const double freq = 2.0 + 2.0 * (klass % 3);
  const int shape = klass % 5;

  const double phase = rng.uniform(0.0, 2.0 * kPi);
  const double cx = side / 2.0 + rng.uniform(-6.0, 6.0);
  const double cy = side / 2.0 + rng.uniform(-6.0, 6.0);
  const double radius = rng.uniform(5.0, 9.0);
  const double brightness = rng.uniform(-0.08, 0.08);
  const double grating_amp = 0.16;
  const double noise_amp = 0.04;

  const Rgb fg = kForeground[klass];
  const Rgb bg = kBackground[klass];
  const double ct = std::cos(theta), st = std::sin(theta);

  Tensor img({side, side, 3});
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      const double proj = (x * ct + y * st) / side;
      const double wave = grating_amp * std::sin(2.0 * kPi * freq * proj + phase);
      const double m = shape_mask(shape, x - cx, y - cy, radius);
      const double base_r = m * fg.r + (1.0 - m) * (bg.r + wave);
      const double base_g = m * fg.g + (1.0 - m) * (bg.g + wave);
      const double base_b = m * fg.b + (1.0 - m) * (bg.b + wave);
      img.at3(y, x, 0) = std::clamp(base_r + brightness + rng.uniform(-noise_amp, noise_amp), 0.0, 1.0);
      img.at3(y, x, 1) = std::clamp(base_g + brightness + rng.uniform(-noise_amp, noise_amp), 0.0, 1.0);
      img.at3(y, x, 2) = std::clamp(base_b + brightness + rng.uniform(-noise_amp, noise_amp), 0.0, 1.0);
    }
  }
  return img;
}

void write_synthetic_cifar(const std::string& path, int count, std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("write_synthetic_cifar: count must be >= 1");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_synthetic_cifar: cannot write " + path);

  // Balanced labels in shuffled order.
  std::vector<int> labels(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) labels[static_cast<std::size_t>(i)] = i % 10;
  Rng label_rng = stream_rng(seed, Stream::kData, 0);
  label_rng.shuffle(labels.data(), labels.size());

  std::vector<unsigned char> record(1 + 3 * 1024);
  for (int i = 0; i < count; ++i) {
    Rng rng = stream_rng(seed, Stream::kData, 1, static_cast<std::uint64_t>(i));
    const int label = labels[static_cast<std::size_t>(i)];
    const Tensor img = synth_image(32, label, rng);
    record[0] = static_cast<unsigned char>(label);
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
          const double v = img.at3(y, x, c);
          record[1 + static_cast<std::size_t>(c) * 1024 + y * 32 + x] =
              static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
        }
    out.write(reinterpret_cast<const char*>(record.data()),
              static_cast<std::streamsize>(record.size()));
  }
  if (!out) throw std::runtime_error("write_synthetic_cifar: write failed for " + path);
}

}  // namespace ge2ae::data
