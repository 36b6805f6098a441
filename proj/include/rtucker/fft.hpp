#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

namespace rtucker::fft {

using Complex = std::complex<double>;

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline std::size_t next_power_of_two(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// In-place iterative radix-2 transform. `inverse` applies the conjugate
// transform without the 1/n scale.
inline void radix2(std::span<Complex> a, bool inverse) {
  const std::size_t n = a.size();
  if (!is_power_of_two(n)) throw std::invalid_argument("radix2: length must be a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = 2.0 * std::numbers::pi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
    const std::size_t half = len / 2;
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < half; ++k) {
        // Twiddles from the angle directly, avoiding drift from repeated products.
        const Complex w = std::polar(1.0, ang * static_cast<double>(k));
        const Complex u = a[i + k];
        const Complex v = a[i + k + half] * w;
        a[i + k] = u + v;
        a[i + k + half] = u - v;
      }
    }
  }
}

// Bluestein chirp-z transform for arbitrary lengths.
inline void bluestein(std::span<Complex> a, bool inverse) {
  const std::size_t n = a.size();
  const std::size_t len = next_power_of_two(2 * n - 1);
  const double sign = inverse ? 1.0 : -1.0;
  std::vector<Complex> chirp(n);
  for (std::size_t k = 0; k < n; ++k) {
    // k^2 mod 2n keeps the angle argument small for large n.
    const std::size_t k2 = (k * k) % (2 * n);
    chirp[k] = std::polar(1.0, sign * std::numbers::pi * static_cast<double>(k2) / static_cast<double>(n));
  }
  std::vector<Complex> x(len), y(len);
  for (std::size_t k = 0; k < n; ++k) x[k] = a[k] * chirp[k];
  y[0] = std::conj(chirp[0]);
  for (std::size_t k = 1; k < n; ++k) y[k] = y[len - k] = std::conj(chirp[k]);
  radix2(x, false);
  radix2(y, false);
  for (std::size_t k = 0; k < len; ++k) x[k] *= y[k];
  radix2(x, true);
  const double scale = 1.0 / static_cast<double>(len);
  for (std::size_t k = 0; k < n; ++k) a[k] = x[k] * scale * chirp[k];
}

// Unnormalized forward / inverse DFT of any length.
inline void transform(std::span<Complex> a, bool inverse) {
  if (a.empty()) return;
  if (is_power_of_two(a.size())) {
    radix2(a, inverse);
  } else {
    bluestein(a, inverse);
  }
}

inline void forward(std::span<Complex> a) { transform(a, false); }

inline void inverse(std::span<Complex> a) {
  transform(a, true);
  const double scale = 1.0 / static_cast<double>(a.size());
  for (auto& v : a) v *= scale;
}

// Circular convolution out[k] = sum_{i+j = k mod m} a[i] b[j].
inline std::vector<double> circular_convolve_direct(std::span<const double> a, std::span<const double> b) {
  const std::size_t m = a.size();
  if (b.size() != m) throw std::invalid_argument("circular_convolve: lengths differ");
  std::vector<double> out(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    if (a[i] == 0.0) continue;
    for (std::size_t j = 0; j < m; ++j) {
      const std::size_t k = i + j >= m ? i + j - m : i + j;
      out[k] += a[i] * b[j];
    }
  }
  return out;
}

inline std::vector<double> circular_convolve_fft(std::span<const double> a, std::span<const double> b) {
  const std::size_t m = a.size();
  if (b.size() != m) throw std::invalid_argument("circular_convolve: lengths differ");
  std::vector<Complex> fa(a.begin(), a.end()), fb(b.begin(), b.end());
  forward(fa);
  forward(fb);
  for (std::size_t k = 0; k < m; ++k) fa[k] *= fb[k];
  inverse(fa);
  std::vector<double> out(m);
  for (std::size_t k = 0; k < m; ++k) out[k] = fa[k].real();
  return out;
}

}  // namespace rtucker::fft
