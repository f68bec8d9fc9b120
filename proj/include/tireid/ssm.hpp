#pragma once

#include <complex>
#include <vector>

namespace tireid {

inline constexpr double kMinDelta = 1e-5;
inline constexpr double kMaxDelta = 1.0;

// One diagonal complex state-space channel: dh/dt = A h + B u, y = C h + D u,
// with learnable step size Delta = exp(log_delta).
struct SsmCore {
  std::vector<std::complex<double>> A;  // diagonal entries, Re < 0
  std::vector<std::complex<double>> B;
  std::vector<std::complex<double>> C;
  double D_f = 0.0;
  double log_delta = 0.0;

  int state_dim() const { return static_cast<int>(A.size()); }
  double delta() const;
  void validate() const;
};

// Diagonal linear HiPPO variant: A_n = -1/2 + i pi n, n = 0..N-1. N even.
std::vector<std::complex<double>> hippo_diag_init(int N);

struct DiscretizedCore {
  std::vector<std::complex<double>> A_bar;  // exp(Delta A)
  std::vector<std::complex<double>> C_bar;  // C (exp(Delta A) - 1) / A
};

// Zero-order-hold step: A_bar = exp(Delta A); the integration factor
// (exp(Delta A) - I) A^-1 is folded into C. Requires |A_n| > 0.
DiscretizedCore discretize(const SsmCore& core);

// K_k = 2 Re( sum_n C_bar_n A_bar_n^k B_n ), k = 0..L-1. The factor 2 realifies
// the implicit conjugate-pair half of the spectrum.
std::vector<double> ssm_kernel(const SsmCore& core, int L);

// y_k = sum_{j<=k} K_j u_{k-j} + D_f u_k via FFT.
std::vector<double> conv_apply(const std::vector<double>& kernel, const std::vector<double>& u,
                               double D_f);

// h' = A_bar h + B u; y = 2 Re(C_bar . h') + D_f u.
struct RecurrentState {
  std::vector<std::complex<double>> h;
};

double recurrent_step(const DiscretizedCore& disc, const SsmCore& core, RecurrentState& state,
                      double u);

// exp(z) - 1 without cancellation for small |z|.
std::complex<double> cexpm1(std::complex<double> z);

}  // namespace tireid
