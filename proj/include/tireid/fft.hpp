#pragma once

#include <complex>
#include <vector>

namespace tireid {

// In-place iterative radix-2 FFT; a.size() must be a power of two.
void fft_inplace(std::vector<std::complex<double>>& a, bool inverse);

// First L samples of the linear convolution kernel * u (causal part), where
// kernel and u both have length L. FFT with zero padding to >= 2L-1.
std::vector<double> causal_convolve_fft(const std::vector<double>& kernel,
                                        const std::vector<double>& u);

// Serial O(L^2) reference for the same quantity.
std::vector<double> causal_convolve_direct(const std::vector<double>& kernel,
                                           const std::vector<double>& u);

}  // namespace tireid
