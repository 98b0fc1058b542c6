#include "ge2ae/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "ge2ae/image_io.hpp"

namespace ge2ae::data {

namespace fs = std::filesystem;

Format parse_format(const std::string& tag) {
  if (tag == "cifar10-bin") return Format::kCifar10Bin;
  if (tag == "ppm-dir") return Format::kPpmDir;
  throw std::invalid_argument("dataset: unknown format '" + tag + "'");
}

std::string format_tag(Format fmt) {
  return fmt == Format::kCifar10Bin ? "cifar10-bin" : "ppm-dir";
}

namespace {

constexpr int kCifarSide = 32;
constexpr std::size_t kCifarRecord = 1 + 3 * 1024;

void read_cifar_file(const std::string& path, std::vector<ImageRecord>& out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("dataset: cannot open " + path);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() % kCifarRecord != 0)
    throw std::runtime_error("dataset: truncated cifar record in " + path + " at byte offset " +
                             std::to_string((bytes.size() / kCifarRecord) * kCifarRecord));
  const std::size_t count = bytes.size() / kCifarRecord;
  out.reserve(out.size() + count);
  for (std::size_t r = 0; r < count; ++r) {
    const unsigned char* rec = reinterpret_cast<const unsigned char*>(&bytes[r * kCifarRecord]);
    ImageRecord record;
    record.label = rec[0];
    record.image = Tensor({kCifarSide, kCifarSide, 3});
    for (int c = 0; c < 3; ++c)
      for (int h = 0; h < kCifarSide; ++h)
        for (int w = 0; w < kCifarSide; ++w)
          record.image.at3(h, w, c) = rec[1 + c * 1024 + h * kCifarSide + w] / 255.0;
    out.push_back(std::move(record));
  }
}

std::vector<std::string> sorted_files(const std::string& dir, const std::string& ext) {
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ext)
      files.push_back(entry.path().string());
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace

std::vector<ImageRecord> ingest_dataset(const std::string& path, Format fmt) {
  std::vector<ImageRecord> out;
  if (fmt == Format::kCifar10Bin) {
    if (fs::is_directory(path)) {
      const auto files = sorted_files(path, ".bin");
      if (files.empty()) throw std::runtime_error("dataset: no .bin files under " + path);
      for (const auto& f : files) read_cifar_file(f, out);
    } else {
      read_cifar_file(path, out);
    }
  } else {
    if (!fs::is_directory(path)) throw std::runtime_error("dataset: " + path + " is not a directory");
    const auto files = sorted_files(path, ".ppm");
    if (files.empty()) throw std::runtime_error("dataset: no .ppm files under " + path);
    for (const auto& f : files) {
      ImageRecord record;
      record.image = io::read_ppm(f);
      record.label = -1;
      out.push_back(std::move(record));
    }
  }
  return out;
}

CropParams draw_crop(int H, int W, Rng& rng) {
  const double area = static_cast<double>(H) * W;
  CropParams cp;
  for (int attempt = 0; attempt < 10; ++attempt) {
    const double target = area * rng.uniform(0.2, 1.0);
    const double log_lo = std::log(3.0 / 4.0), log_hi = std::log(4.0 / 3.0);
    const double aspect = std::exp(rng.uniform(log_lo, log_hi));
    const int w = static_cast<int>(std::lround(std::sqrt(target * aspect)));
    const int h = static_cast<int>(std::lround(std::sqrt(target / aspect)));
    if (w >= 1 && h >= 1 && w <= W && h <= H) {
      cp.top = rng.uniform_int(H - h + 1);
      cp.left = rng.uniform_int(W - w + 1);
      cp.height = h;
      cp.width = w;
      cp.flip = rng.bernoulli(0.5);
      return cp;
    }
  }
  cp.top = 0;
  cp.left = 0;
  cp.height = H;
  cp.width = W;
  cp.flip = rng.bernoulli(0.5);
  return cp;
}

Tensor apply_crop_flip(const Tensor& image, const CropParams& crop, int out_size) {
  if (image.rank() != 3)
    throw std::invalid_argument("augment: expects [H,W,C], got " + shape_str(image.shape));
  const int H = image.shape[0], W = image.shape[1], C = image.shape[2];
  if (crop.top < 0 || crop.left < 0 || crop.height < 1 || crop.width < 1 ||
      crop.top + crop.height > H || crop.left + crop.width > W)
    throw std::invalid_argument("augment: crop region out of bounds");

  Tensor out({out_size, out_size, C});
  const double sy = static_cast<double>(crop.height) / out_size;
  const double sx = static_cast<double>(crop.width) / out_size;
  for (int i = 0; i < out_size; ++i) {
    double fy = (i + 0.5) * sy - 0.5;
    if (fy < 0.0) fy = 0.0;
    if (fy > crop.height - 1) fy = crop.height - 1;
    const int y0 = static_cast<int>(fy);
    const int y1 = y0 + 1 < crop.height ? y0 + 1 : y0;
    const double wy = fy - y0;
    for (int j = 0; j < out_size; ++j) {
      const int jj = crop.flip ? out_size - 1 - j : j;
      double fx = (jj + 0.5) * sx - 0.5;
      if (fx < 0.0) fx = 0.0;
      if (fx > crop.width - 1) fx = crop.width - 1;
      const int x0 = static_cast<int>(fx);
      const int x1 = x0 + 1 < crop.width ? x0 + 1 : x0;
      const double wx = fx - x0;
      for (int c = 0; c < C; ++c) {
        const double v00 = image.at3(crop.top + y0, crop.left + x0, c);
        const double v01 = image.at3(crop.top + y0, crop.left + x1, c);
        const double v10 = image.at3(crop.top + y1, crop.left + x0, c);
        const double v11 = image.at3(crop.top + y1, crop.left + x1, c);
        out.at3(i, j, c) =
            (1 - wy) * ((1 - wx) * v00 + wx * v01) + wy * ((1 - wx) * v10 + wx * v11);
      }
    }
  }
  return out;
}

Tensor augment(const Tensor& image, int out_size, Rng& rng) {
  const CropParams cp = draw_crop(image.shape[0], image.shape[1], rng);
  return apply_crop_flip(image, cp, out_size);
}

}  // namespace ge2ae::data
