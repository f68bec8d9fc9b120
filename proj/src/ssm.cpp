#include "tireid/ssm.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "tireid/errors.hpp"
#include "tireid/fft.hpp"

namespace tireid {

double SsmCore::delta() const { return std::exp(log_delta); }

void SsmCore::validate() const {
  const std::size_t n = A.size();
  if (n == 0 || B.size() != n || C.size() != n) {
    throw InvalidInput("SsmCore: A/B/C dimension mismatch");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!(A[i].real() < 0.0)) {
      throw InvalidInput("SsmCore: Re(A[" + std::to_string(i) + "]) must be negative");
    }
  }
  const double d = delta();
  if (!(d > kMinDelta && d < kMaxDelta)) {
    throw InvalidInput("SsmCore: Delta = " + std::to_string(d) + " outside (1e-5, 1)");
  }
}

std::vector<std::complex<double>> hippo_diag_init(int N) {
  if (N < 2 || N % 2 != 0) {
    throw InvalidInput("hippo_diag_init: N must be even and >= 2, got " + std::to_string(N));
  }
  std::vector<std::complex<double>> a(static_cast<std::size_t>(N));
  for (int n = 0; n < N; ++n) {
    a[static_cast<std::size_t>(n)] = {-0.5, std::numbers::pi * static_cast<double>(n)};
  }
  return a;
}

std::complex<double> cexpm1(std::complex<double> z) {
  // exp(z) - 1 = (expm1(x) cos y - 2 sin^2(y/2)) + i e^x sin y
  const double x = z.real(), y = z.imag();
  const double sy2 = std::sin(0.5 * y);
  return {std::expm1(x) * std::cos(y) - 2.0 * sy2 * sy2, std::exp(x) * std::sin(y)};
}

DiscretizedCore discretize(const SsmCore& core) {
  core.validate();
  const double d = core.delta();
  const std::size_t n = core.A.size();
  DiscretizedCore out;
  out.A_bar.resize(n);
  out.C_bar.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::complex<double> a = core.A[i];
    if (std::abs(a) < 1e-12) {
      throw InvalidInput("discretize: |A[" + std::to_string(i) + "]| below 1e-12 (not invertible)");
    }
    const std::complex<double> em1 = cexpm1(d * a);
    out.A_bar[i] = em1 + 1.0;
    out.C_bar[i] = core.C[i] * em1 / a;
  }
  return out;
}

std::vector<double> ssm_kernel(const SsmCore& core, int L) {
  if (L < 1) throw InvalidInput("ssm_kernel: L must be >= 1");
  const DiscretizedCore disc = discretize(core);
  const std::size_t n = core.A.size();

  std::vector<double> k(static_cast<std::size_t>(L), 0.0);
  std::vector<std::complex<double>> p(core.B.begin(), core.B.end());
  for (int step = 0; step < L; ++step) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      acc += disc.C_bar[i].real() * p[i].real() - disc.C_bar[i].imag() * p[i].imag();
    }
    k[static_cast<std::size_t>(step)] = 2.0 * acc;
    for (std::size_t i = 0; i < n; ++i) p[i] *= disc.A_bar[i];
  }
  return k;
}

std::vector<double> conv_apply(const std::vector<double>& kernel, const std::vector<double>& u,
                               double D_f) {
  if (kernel.size() != u.size()) throw InvalidInput("conv_apply: length mismatch");
  std::vector<double> y = causal_convolve_fft(kernel, u);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += D_f * u[i];
  return y;
}

double recurrent_step(const DiscretizedCore& disc, const SsmCore& core, RecurrentState& state,
                      double u) {
  const std::size_t n = disc.A_bar.size();
  if (state.h.size() != n) {
    if (state.h.empty()) {
      state.h.assign(n, {0.0, 0.0});
    } else {
      throw InvalidInput("recurrent_step: state dimension mismatch");
    }
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    state.h[i] = disc.A_bar[i] * state.h[i] + core.B[i] * u;
    acc += disc.C_bar[i].real() * state.h[i].real() - disc.C_bar[i].imag() * state.h[i].imag();
  }
  return 2.0 * acc + core.D_f * u;
}

}  // namespace tireid
