#pragma once

#include <complex>
#include <vector>

// Complex FFT in double precision: iterative radix-2 for power-of-two sizes,
// Bluestein's chirp-z otherwise, so any slice size works. Inverse transforms
// scale by 1/n.

namespace seganet {

void fft(std::vector<std::complex<double>>& a, bool inverse);

// Row-major [h, w] 2D transform: rows first, then columns.
void fft2(std::vector<std::complex<double>>& data, int height, int width, bool inverse);

}  // namespace seganet
