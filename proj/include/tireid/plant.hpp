#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "tireid/dynamics.hpp"
#include "tireid/telemetry.hpp"

namespace tireid {

struct NoiseStd {
  double v_y = 0.0;    // [m/s]
  double omega = 0.0;  // [rad/s]
};

// Ground-truth plant: single-track dynamics with true tire parameters plus a
// first-order tire-force lag (relaxation length sigma_rel) that the nominal
// model does not know about. Measurement noise is applied to the recorded
// telemetry only; the plant itself evolves noise-free.
struct PlantConfig {
  VehicleParams vehicle{1500.0, 2250.0, 1.2, 1.3, 9.81};
  TireParams true_tires{{10.0, 1.9, 0.8, 0.97}, {12.0, 1.7, 0.8, 0.95}};
  double sigma_rel = 0.6;  // relaxation length [m]; 0 disables the lag
  NoiseStd noise_std{0.005, 0.002};
  std::uint64_t seed = 0;
  double dt_plant = 1e-3;  // inner integration step [s]
  double T_s = 1e-2;       // telemetry sample interval [s]
  double v_x0 = 20.0;      // constant longitudinal speed [m/s]

  void validate() const;
};

struct Pose {
  double x = 0.0;
  double y = 0.0;
  double psi = 0.0;
};

struct PlantState {
  VehicleState kinematic{20.0, 0.0, 0.0};
  Pose pose;
  double F_yf = 0.0;  // lagged front axle force [N]
  double F_yr = 0.0;  // lagged rear axle force [N]
};

PlantState plant_initial_state(const PlantConfig& cfg);

// One RK4 step of length cfg.dt_plant with the steering held constant.
// With sigma_rel = 0 the axle forces are algebraic and the lateral dynamics
// reduce exactly to the nominal model.
PlantState step_plant(const PlantState& s, double delta, const PlantConfig& cfg);

struct Path {
  std::vector<std::array<double, 2>> waypoints;

  void validate() const;
};

// Pure-pursuit steering law: first intersection of the lookahead circle with
// the path, searched forward from search_hint (advanced in place, monotone).
// Throws PathExhausted when the remaining path never leaves the circle.
double pure_pursuit_steer(const Pose& pose, const Path& path, double lookahead,
                          double wheelbase, std::size_t& search_hint);

enum class ManeuverKind { sine_sweep, slalom, ramp };

struct ManeuverSpec {
  ManeuverKind kind = ManeuverKind::sine_sweep;
  double duration = 30.0;   // [s]
  double amplitude = 0.08;  // [rad]
  double f0 = 0.1;          // sweep start frequency [Hz]
  double f1 = 0.8;          // sweep end frequency [Hz]
  double period = 4.0;      // slalom period [s]
};

// Deterministic open-loop steering sequence, one entry per T_s interval.
std::vector<double> make_maneuver(const ManeuverSpec& spec, double T_s);

struct PurePursuitSpec {
  Path path;
  double lookahead = 8.0;  // [m]
};

// Steps the plant at dt_plant, samples every T_s. Gaussian noise (cfg.seed)
// is added to recorded v_y and omega only. Log length = floor(duration/T_s)+1.
TelemetryLog collect_telemetry(const PlantConfig& cfg, const std::vector<double>& steering,
                               double duration);
TelemetryLog collect_telemetry(const PlantConfig& cfg, const PurePursuitSpec& pursuit,
                               double duration);

}  // namespace tireid
