#pragma once

namespace ge2ae::fftcore {

bool is_pow2(int n);

// 2D complex transforms over an [H,W,C] row-major buffer (channel fastest),
// applied per channel. Forward uses the e^{-j2pi(uh/H + vw/W)} kernel with no
// normalization; inverse uses e^{+j...} with the 1/(HW) factor. im_in may be
// null for purely real input.
//
// dft2d dispatches to the radix-2 fast path when both H and W are powers of
// two and to the direct-summation path otherwise. The direct path doubles as
// the independent test oracle.
void dft2d(int H, int W, int C, const double* re_in, const double* im_in, double* re_out,
           double* im_out, bool inverse);

void dft2d_fast(int H, int W, int C, const double* re_in, const double* im_in, double* re_out,
                double* im_out, bool inverse);

void dft2d_naive(int H, int W, int C, const double* re_in, const double* im_in, double* re_out,
                 double* im_out, bool inverse);

}  // namespace ge2ae::fftcore
