#include "ge2ae/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace ge2ae::train {

namespace {

constexpr char kMagic[4] = {'G', 'E', '2', 'A'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

void put_f32(std::string& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;

  void need(std::size_t n, const char* what) {
    if (pos + n > buf.size())
      throw std::runtime_error(std::string("checkpoint: truncated while reading ") + what);
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    pos += 8;
    return v;
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return static_cast<std::uint8_t>(buf[pos++]);
  }
  std::string bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

}  // namespace

void save_checkpoint(const Checkpoint& cp, const std::string& path) {
  std::string out;
  out.append(kMagic, 4);
  put_u32(out, cp.version);
  put_u32(out, static_cast<std::uint32_t>(cp.config_text.size()));
  out += cp.config_text;
  put_u64(out, cp.step);
  put_u32(out, static_cast<std::uint32_t>(cp.tensors.size()));
  for (const auto& [name, t] : cp.tensors) {  // std::map: name-sorted
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    const std::uint8_t dtype = cp.dtype_of(name);
    out.push_back(static_cast<char>(dtype));
    out.push_back(static_cast<char>(t.rank()));
    for (int d : t.shape) put_u32(out, static_cast<std::uint32_t>(d));
    if (dtype == 1) {
      for (double v : t.data) put_f64(out, v);
    } else {
      for (double v : t.data) put_f32(out, static_cast<float>(v));
    }
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot write " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader r{buf};

  const std::string magic = r.bytes(4, "magic");
  if (std::memcmp(magic.data(), kMagic, 4) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  Checkpoint cp;
  cp.version = r.u32("version");
  if (cp.version != 1)
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(cp.version));
  const std::uint32_t cfg_len = r.u32("config length");
  cp.config_text = r.bytes(cfg_len, "config block");
  cp.step = r.u64("step");
  const std::uint32_t count = r.u32("tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = r.u32("tensor name length");
    const std::string name = r.bytes(name_len, "tensor name");
    const std::uint8_t dtype = r.u8("dtype");
    if (dtype > 1)
      throw std::runtime_error("checkpoint: unknown dtype code " + std::to_string(dtype));
    const std::uint8_t rank = r.u8("rank");
    std::vector<int> shape;
    for (int d = 0; d < rank; ++d) shape.push_back(static_cast<int>(r.u32("dim")));
    Tensor t(shape);
    if (dtype == 1) {
      for (auto& v : t.data) {
        const std::uint64_t bits = r.u64("tensor data");
        std::memcpy(&v, &bits, 8);
      }
    } else {
      for (auto& v : t.data) {
        const std::uint32_t bits = r.u32("tensor data");
        float fv;
        std::memcpy(&fv, &bits, 4);
        v = fv;
      }
      cp.dtypes[name] = 0;
    }
    cp.tensors[name] = std::move(t);
  }
  return cp;
}

}  // namespace ge2ae::train
