#pragma once

#include <optional>
#include <vector>

#include "tireid/dynamics.hpp"
#include "tireid/model.hpp"
#include "tireid/neldermead.hpp"
#include "tireid/telemetry.hpp"
#include "tireid/train.hpp"
#include "tireid/vision.hpp"

namespace tireid {

struct SweepConfig {
  double v_x_bar = 0.0;  // constant sweep speed [m/s]; <= 0 selects mean telemetry v_x
  double delta_max = 0.12;            // terminal steering [rad]
  double duration = 20.0;             // [s]
  double T_s = 0.01;                  // [s]
  int settle_window = 50;             // samples dropped from the front
  double qss_omega_dot_tol = 0.05;    // [rad/s^2]

  void validate() const;
};

struct SweepPoint {
  double alpha;    // slip angle [rad]
  double fy_norm;  // F_y / F_z
};

struct SweepDataset {
  std::vector<SweepPoint> front;
  std::vector<SweepPoint> rear;
};

// Quasi-steady-state axle forces from yaw-rate balance.
struct AxleForces {
  double front;  // [N]
  double rear;   // [N]
};

AxleForces steady_state_forces(double v_x, double omega, double delta, const VehicleParams& p);

// Retained sample indices: past the settle window, with finite-difference
// |domega/dt| < tol and |dv_y/dt| < 10 * tol.
std::vector<std::size_t> quasi_steady_filter(const std::vector<VehicleState>& traj,
                                             const SweepConfig& cfg);

// Linear steering sweep of the residual-corrected model at constant speed;
// residual == nullptr runs the bare nominal model. Emits per-axle
// (slip angle, normalized force) pairs at quasi-steady samples.
SweepDataset virtual_sweep(const TireParams& tires, const ResidualNet* residual,
                           const VehicleParams& p, const SweepConfig& cfg);

struct PacejkaBounds {
  AxlePacejka lo{1.0, 1.01, 1e-3, -5.0};
  AxlePacejka hi{30.0, 2.5, 1.6, 1.0};
};

struct FitOptions {
  NmOptions nm{.max_iter = 2000, .f_tol = 1e-12, .initial_step = {1.0, 0.1, 0.05, 0.1}};
  double penalty_weight = 1e3;
  PacejkaBounds bounds;
  // Fit only |alpha| <= this (the scored range). Data deeper into saturation
  // splits off a spurious constant-slope basin of the formula.
  double fit_alpha_max = 0.25;
};

struct FitResult {
  AxlePacejka coeffs;
  double loss = 0.0;  // mean squared normalized-force error, no penalty
  int nm_iterations = 0;
  bool converged = false;
};

FitResult fit_axle(const std::vector<SweepPoint>& data, const AxlePacejka& init,
                   const FitOptions& opts);

struct OuterIterate {
  TireParams tires;
  double fit_loss_front = 0.0;
  double fit_loss_rear = 0.0;
  int nm_iter_front = 0;
  int nm_iter_rear = 0;
  double residual_val_loss = 0.0;
  double max_rel_change = 0.0;
  SweepDataset sweep;
};

struct IdentifyOptions {
  TrainConfig train;
  SweepConfig sweep;
  FitOptions fit;
  int max_outer = 10;
  double param_tol = 1e-3;
};

struct IdentifyReport {
  std::vector<OuterIterate> iterates;
  TireParams final_tires{};
  int outer_iterations = 0;
  bool converged = false;
  bool warm_started = false;
  double mu_hat = 0.0;
  double wall_time_s = 0.0;
};

// Closed loop: (re)train the residual net on current-parameter residuals,
// sweep the corrected model, fit each axle, repeat until the largest relative
// coefficient change drops below param_tol or max_outer is reached. When a
// sweep goes unstable it is retried once with delta_max halved.
// initial_model, when given, is used verbatim for the first iteration.
IdentifyReport identify_iterative(const TelemetryLog& log, const VehicleParams& p,
                                  TireParams init, const std::optional<FrictionPrior>& prior,
                                  const IdentifyOptions& opts,
                                  const ResidualNet* initial_model = nullptr);

}  // namespace tireid
