#pragma once

// Mixed-radix decimation-in-time FFT for arbitrary lengths.
//
// Forward convention: X[i] = sum_n x[n] * exp(-j 2 pi i n / N), unnormalized.
// Composite lengths are split on their smallest prime factor; prime lengths
// fall back to a direct sum.

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

namespace crossfusor::fft {

using Complex = std::complex<double>;

namespace detail {

inline std::size_t smallest_factor(std::size_t n) {
  if (n % 2 == 0) return 2;
  for (std::size_t f = 3; f * f <= n; f += 2) {
    if (n % f == 0) return f;
  }
  return n;
}

// exp(-j 2 pi m / n) with m reduced mod n to keep the angle small.
inline Complex twiddle(std::size_t m, std::size_t n) {
  const double angle = -2.0 * std::numbers::pi * static_cast<double>(m % n) / static_cast<double>(n);
  return {std::cos(angle), std::sin(angle)};
}

inline void transform(const Complex* in, std::size_t stride, std::size_t n, Complex* out) {
  if (n == 1) {
    out[0] = in[0];
    return;
  }
  const std::size_t radix = smallest_factor(n);
  if (radix == n) {
    for (std::size_t i = 0; i < n; ++i) {
      Complex acc{0.0, 0.0};
      for (std::size_t t = 0; t < n; ++t) acc += in[t * stride] * twiddle(i * t, n);
      out[i] = acc;
    }
    return;
  }
  const std::size_t m = n / radix;
  // Sub-transforms of the radix interleaved subsequences, stored back to back.
  std::vector<Complex> sub(n);
  for (std::size_t r = 0; r < radix; ++r) {
    transform(in + r * stride, stride * radix, m, sub.data() + r * m);
  }
  for (std::size_t i = 0; i < n; ++i) {
    Complex acc{0.0, 0.0};
    for (std::size_t r = 0; r < radix; ++r) acc += sub[r * m + i % m] * twiddle(r * i, n);
    out[i] = acc;
  }
}

}  // namespace detail

inline std::vector<Complex> forward(const std::vector<Complex>& x) {
  std::vector<Complex> out(x.size());
  if (!x.empty()) detail::transform(x.data(), 1, x.size(), out.data());
  return out;
}

inline std::vector<Complex> forward_real(const std::vector<double>& x) {
  return forward(std::vector<Complex>(x.begin(), x.end()));
}

}  // namespace crossfusor::fft
