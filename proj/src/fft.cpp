#include "seganet/fft.hpp"

#include <cmath>
#include <stdexcept>

namespace seganet {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// Iterative Cooley-Tukey, n a power of two.
void fft_radix2(std::vector<std::complex<double>>& a, bool inverse) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? 2.0 : -2.0) * kPi / static_cast<double>(len);
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const std::complex<double> u = a[i + k];
                const std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
    if (inverse)
        for (auto& x : a) x /= static_cast<double>(n);
}

// Bluestein's chirp-z for arbitrary n, built on a power-of-two convolution.
void fft_bluestein(std::vector<std::complex<double>>& a, bool inverse) {
    const std::size_t n = a.size();
    std::size_t m = 1;
    while (m < 2 * n + 1) m <<= 1;

    std::vector<std::complex<double>> chirp(n);
    for (std::size_t k = 0; k < n; ++k) {
        // k^2 mod 2n keeps the angle argument small for large n
        const std::size_t k2 = (k * k) % (2 * n);
        const double ang = (inverse ? 1.0 : -1.0) * kPi * static_cast<double>(k2) /
                           static_cast<double>(n);
        chirp[k] = std::complex<double>(std::cos(ang), std::sin(ang));
    }

    std::vector<std::complex<double>> x(m, {0.0, 0.0}), y(m, {0.0, 0.0});
    for (std::size_t k = 0; k < n; ++k) x[k] = a[k] * chirp[k];
    y[0] = std::conj(chirp[0]);
    for (std::size_t k = 1; k < n; ++k) y[k] = y[m - k] = std::conj(chirp[k]);

    fft_radix2(x, false);
    fft_radix2(y, false);
    for (std::size_t i = 0; i < m; ++i) x[i] *= y[i];
    fft_radix2(x, true);

    for (std::size_t k = 0; k < n; ++k) a[k] = x[k] * chirp[k];
    if (inverse)
        for (auto& v : a) v /= static_cast<double>(n);
}

}  // namespace

void fft(std::vector<std::complex<double>>& a, bool inverse) {
    if (a.empty()) throw std::invalid_argument("fft: empty input");
    if (a.size() == 1) return;
    if (is_pow2(a.size()))
        fft_radix2(a, inverse);
    else
        fft_bluestein(a, inverse);
}

void fft2(std::vector<std::complex<double>>& data, int height, int width, bool inverse) {
    if (height <= 0 || width <= 0 ||
        data.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width))
        throw std::invalid_argument("fft2: dims do not match data");

    std::vector<std::complex<double>> row(static_cast<std::size_t>(width));
    for (int y = 0; y < height; ++y) {
        std::copy(data.begin() + static_cast<std::size_t>(y) * width,
                  data.begin() + static_cast<std::size_t>(y + 1) * width, row.begin());
        fft(row, inverse);
        std::copy(row.begin(), row.end(), data.begin() + static_cast<std::size_t>(y) * width);
    }
    std::vector<std::complex<double>> col(static_cast<std::size_t>(height));
    for (int x = 0; x < width; ++x) {
        for (int y = 0; y < height; ++y) col[y] = data[static_cast<std::size_t>(y) * width + x];
        fft(col, inverse);
        for (int y = 0; y < height; ++y) data[static_cast<std::size_t>(y) * width + x] = col[y];
    }
}

}  // namespace seganet
