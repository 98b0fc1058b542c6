#include "ge2ae/fft_core.hpp"

#include <cmath>
#include <cstddef>
#include <unordered_map>
#include <vector>

namespace ge2ae::fftcore {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

struct Plan {
  std::vector<int> bitrev;
  // Twiddles for the forward (-j) kernel, concatenated per stage.
  std::vector<double> tw_re, tw_im;
};

const Plan& plan_for(int n) {
  thread_local std::unordered_map<int, Plan> cache;
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;

  Plan p;
  p.bitrev.resize(n);
  int log2n = 0;
  while ((1 << log2n) < n) ++log2n;
  for (int i = 0; i < n; ++i) {
    int r = 0;
    for (int b = 0; b < log2n; ++b)
      if (i & (1 << b)) r |= 1 << (log2n - 1 - b);
    p.bitrev[i] = r;
  }
  for (int len = 2; len <= n; len <<= 1) {
    const int half = len / 2;
    for (int k = 0; k < half; ++k) {
      const double a = -kTwoPi * k / len;
      p.tw_re.push_back(std::cos(a));
      p.tw_im.push_back(std::sin(a));
    }
  }
  return cache.emplace(n, std::move(p)).first->second;
}

// In-place radix-2 over contiguous re/im arrays of pow2 length.
void fft_pow2(int n, double* re, double* im, bool inverse) {
  if (n == 1) return;
  const Plan& p = plan_for(n);
  for (int i = 0; i < n; ++i) {
    const int j = p.bitrev[i];
    if (j > i) {
      std::swap(re[i], re[j]);
      std::swap(im[i], im[j]);
    }
  }
  std::size_t tw_off = 0;
  for (int len = 2; len <= n; len <<= 1) {
    const int half = len / 2;
    const double* wr = &p.tw_re[tw_off];
    const double* wi = &p.tw_im[tw_off];
    for (int base = 0; base < n; base += len) {
      for (int k = 0; k < half; ++k) {
        const double twr = wr[k];
        const double twi = inverse ? -wi[k] : wi[k];
        const int a = base + k, b = base + k + half;
        const double xr = re[b] * twr - im[b] * twi;
        const double xi = re[b] * twi + im[b] * twr;
        re[b] = re[a] - xr;
        im[b] = im[a] - xi;
        re[a] += xr;
        im[a] += xi;
      }
    }
    tw_off += static_cast<std::size_t>(half);
  }
}

}  // namespace

bool is_pow2(int n) { return n >= 1 && (n & (n - 1)) == 0; }

void dft2d_fast(int H, int W, int C, const double* re_in, const double* im_in, double* re_out,
                double* im_out, bool inverse) {
  const std::size_t n = static_cast<std::size_t>(H) * W * C;
  for (std::size_t i = 0; i < n; ++i) re_out[i] = re_in[i];
  if (im_in) {
    for (std::size_t i = 0; i < n; ++i) im_out[i] = im_in[i];
  } else {
    for (std::size_t i = 0; i < n; ++i) im_out[i] = 0.0;
  }

  const int side = H > W ? H : W;
  std::vector<double> sre(static_cast<std::size_t>(side)), sim(static_cast<std::size_t>(side));

  // Rows: transform along w for each (h, c).
  for (int c = 0; c < C; ++c) {
    for (int h = 0; h < H; ++h) {
      double* rr = re_out + (static_cast<std::size_t>(h) * W) * C + c;
      double* ii = im_out + (static_cast<std::size_t>(h) * W) * C + c;
      for (int w = 0; w < W; ++w) {
        sre[w] = rr[static_cast<std::size_t>(w) * C];
        sim[w] = ii[static_cast<std::size_t>(w) * C];
      }
      fft_pow2(W, sre.data(), sim.data(), inverse);
      for (int w = 0; w < W; ++w) {
        rr[static_cast<std::size_t>(w) * C] = sre[w];
        ii[static_cast<std::size_t>(w) * C] = sim[w];
      }
    }
    // Columns: transform along h for each (w, c).
    for (int w = 0; w < W; ++w) {
      double* rr = re_out + static_cast<std::size_t>(w) * C + c;
      double* ii = im_out + static_cast<std::size_t>(w) * C + c;
      const std::size_t stride = static_cast<std::size_t>(W) * C;
      for (int h = 0; h < H; ++h) {
        sre[h] = rr[static_cast<std::size_t>(h) * stride];
        sim[h] = ii[static_cast<std::size_t>(h) * stride];
      }
      fft_pow2(H, sre.data(), sim.data(), inverse);
      for (int h = 0; h < H; ++h) {
        rr[static_cast<std::size_t>(h) * stride] = sre[h];
        ii[static_cast<std::size_t>(h) * stride] = sim[h];
      }
    }
  }

  if (inverse) {
    const double norm = 1.0 / (static_cast<double>(H) * W);
    for (std::size_t i = 0; i < n; ++i) {
      re_out[i] *= norm;
      im_out[i] *= norm;
    }
  }
}

void dft2d_naive(int H, int W, int C, const double* re_in, const double* im_in, double* re_out,
                 double* im_out, bool inverse) {
  const double sign = inverse ? 1.0 : -1.0;
  const double norm = inverse ? 1.0 / (static_cast<double>(H) * W) : 1.0;
  for (int c = 0; c < C; ++c) {
    for (int u = 0; u < H; ++u) {
      for (int v = 0; v < W; ++v) {
        double acc_re = 0.0, acc_im = 0.0;
        for (int h = 0; h < H; ++h) {
          for (int w = 0; w < W; ++w) {
            const double ang =
                sign * kTwoPi *
                (static_cast<double>(u) * h / H + static_cast<double>(v) * w / W);
            const double cr = std::cos(ang);
            const double ci = std::sin(ang);
            const std::size_t idx = (static_cast<std::size_t>(h) * W + w) * C + c;
            const double xr = re_in[idx];
            const double xi = im_in ? im_in[idx] : 0.0;
            acc_re += xr * cr - xi * ci;
            acc_im += xr * ci + xi * cr;
          }
        }
        const std::size_t out = (static_cast<std::size_t>(u) * W + v) * C + c;
        re_out[out] = acc_re * norm;
        im_out[out] = acc_im * norm;
      }
    }
  }
}

void dft2d(int H, int W, int C, const double* re_in, const double* im_in, double* re_out,
           double* im_out, bool inverse) {
  if (is_pow2(H) && is_pow2(W))
    dft2d_fast(H, W, C, re_in, im_in, re_out, im_out, inverse);
  else
    dft2d_naive(H, W, C, re_in, im_in, re_out, im_out, inverse);
}

}  // namespace ge2ae::fftcore
