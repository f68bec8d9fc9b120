#include "tireid/fft.hpp"

#include <cmath>
#include <numbers>

#include "tireid/errors.hpp"

namespace tireid {

void fft_inplace(std::vector<std::complex<double>>& a, bool inverse) {
  const std::size_t n = a.size();
  if (n == 0 || (n & (n - 1)) != 0) throw InvalidInput("fft: size must be a power of two");

  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }

  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = 2.0 * std::numbers::pi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }

  if (inverse) {
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::complex<double>& x : a) x *= inv_n;
  }
}

std::vector<double> causal_convolve_fft(const std::vector<double>& kernel,
                                        const std::vector<double>& u) {
  if (kernel.size() != u.size()) throw InvalidInput("convolve: length mismatch");
  const std::size_t L = u.size();
  if (L == 0) return {};
  std::size_t m = 1;
  while (m < 2 * L - 1) m <<= 1;

  // Real pair trick: pack kernel and input into one complex transform.
  std::vector<std::complex<double>> buf(m, {0.0, 0.0});
  for (std::size_t i = 0; i < L; ++i) buf[i] = {kernel[i], u[i]};
  fft_inplace(buf, false);

  std::vector<std::complex<double>> prod(m);
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t kc = (m - k) & (m - 1);
    const std::complex<double> x = buf[k];
    const std::complex<double> yc = std::conj(buf[kc]);
    const std::complex<double> K = 0.5 * (x + yc);
    const std::complex<double> U = std::complex<double>(0.0, -0.5) * (x - yc);
    prod[k] = K * U;
  }
  fft_inplace(prod, true);

  std::vector<double> out(L);
  for (std::size_t i = 0; i < L; ++i) out[i] = prod[i].real();
  return out;
}

std::vector<double> causal_convolve_direct(const std::vector<double>& kernel,
                                           const std::vector<double>& u) {
  if (kernel.size() != u.size()) throw InvalidInput("convolve: length mismatch");
  const std::size_t L = u.size();
  std::vector<double> out(L, 0.0);
  for (std::size_t k = 0; k < L; ++k) {
    double acc = 0.0;
    for (std::size_t j = 0; j <= k; ++j) acc += kernel[j] * u[k - j];
    out[k] = acc;
  }
  return out;
}

}  // namespace tireid
