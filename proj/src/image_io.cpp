#include "ge2ae/image_io.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace ge2ae::io {

namespace {

int next_token(std::istream& in) {
  // Skips whitespace and '#' comments between header fields.
  for (;;) {
    int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
      continue;
    }
    if (c != EOF && std::isspace(c)) {
      in.get();
      continue;
    }
    break;
  }
  int value = 0;
  if (!(in >> value)) throw std::runtime_error("ppm: malformed header field");
  return value;
}

unsigned char quantize(double v) {
  if (v <= 0.0) return 0;
  if (v >= 1.0) return 255;
  return static_cast<unsigned char>(std::lround(v * 255.0));
}

}  // namespace

Tensor read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("ppm: cannot open " + path);
  char m0 = 0, m1 = 0;
  in.get(m0);
  in.get(m1);
  if (m0 != 'P' || m1 != '6') throw std::runtime_error("ppm: bad magic in " + path);
  const int w = next_token(in);
  const int h = next_token(in);
  const int maxval = next_token(in);
  if (w < 1 || h < 1) throw std::runtime_error("ppm: non-positive dimensions in " + path);
  if (maxval != 255) throw std::runtime_error("ppm: only maxval 255 supported, got " +
                                              std::to_string(maxval));
  in.get();  // single whitespace after maxval
  std::vector<unsigned char> bytes(static_cast<std::size_t>(w) * h * 3);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(in.gcount()) != bytes.size())
    throw std::runtime_error("ppm: truncated pixel data in " + path);
  Tensor img({h, w, 3});
  for (std::size_t i = 0; i < bytes.size(); ++i) img.data[i] = bytes[i] / 255.0;
  return img;
}

void write_ppm(const std::string& path, const Tensor& image) {
  if (image.rank() != 3 || (image.shape[2] != 3 && image.shape[2] != 1))
    throw std::invalid_argument("write_ppm: expects [H,W,3] or [H,W,1], got " +
                                shape_str(image.shape));
  const int h = image.shape[0], w = image.shape[1], c = image.shape[2];
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("ppm: cannot write " + path);
  out << "P6\n" << w << " " << h << "\n255\n";
  std::vector<unsigned char> bytes(static_cast<std::size_t>(w) * h * 3);
  std::size_t o = 0;
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      for (int k = 0; k < 3; ++k)
        bytes[o++] = quantize(image.at3(i, j, c == 3 ? k : 0));
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("ppm: write failed for " + path);
}

void write_scaled_map(const std::string& path, const Tensor& map) {
  if (map.rank() != 2 && !(map.rank() == 3 && map.shape[2] == 1))
    throw std::invalid_argument("write_scaled_map: expects [H,W] or [H,W,1], got " +
                                shape_str(map.shape));
  double lo = map.data[0], hi = map.data[0];
  for (double v : map.data) {
    lo = v < lo ? v : lo;
    hi = v > hi ? v : hi;
  }
  const double span = hi - lo;
  Tensor img({map.shape[0], map.shape[1], 1});
  for (std::size_t i = 0; i < map.numel(); ++i)
    img.data[i] = span > 0.0 ? (map.data[i] - lo) / span : 0.0;
  write_ppm(path, img);
}

}  // namespace ge2ae::io
