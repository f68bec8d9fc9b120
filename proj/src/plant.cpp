#include "tireid/plant.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "tireid/errors.hpp"
#include "tireid/rng.hpp"

namespace tireid {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw InvalidInput(msg);
}

struct PlantDerivs {
  double dv_y, domega, dx, dy, dpsi, dF_yf, dF_yr;
};

struct ForcePair {
  double front, rear;
};

// Steady-state axle forces from the true tire curves.
ForcePair steady_forces(const VehicleState& k, double delta, const PlantConfig& cfg) {
  const SlipAngles a = slip_angles(k, delta, cfg.vehicle);
  const AxleLoads fz = axle_loads(cfg.vehicle);
  return {fz.front * pacejka_normalized(a.front, cfg.true_tires.front),
          fz.rear * pacejka_normalized(a.rear, cfg.true_tires.rear)};
}

PlantDerivs plant_derivative(const PlantState& s, double delta, const PlantConfig& cfg) {
  PlantDerivs d{};
  const VehicleState& k = s.kinematic;
  const double cd = std::cos(delta);

  if (cfg.sigma_rel > 0.0) {
    const ForcePair ss = steady_forces(k, delta, cfg);
    const double rate = k.v_x / cfg.sigma_rel;
    d.dF_yf = (ss.front - s.F_yf) * rate;
    d.dF_yr = (ss.rear - s.F_yr) * rate;
    d.dv_y = (s.F_yr + s.F_yf * cd - cfg.vehicle.m * k.v_x * k.omega) / cfg.vehicle.m;
    d.domega = (s.F_yf * cfg.vehicle.l_f * cd - s.F_yr * cfg.vehicle.l_r) / cfg.vehicle.I_z;
  } else {
    // Lag disabled: identical code path to the nominal model.
    const LateralDerivatives lat = state_derivative(k, delta, cfg.true_tires, cfg.vehicle);
    d.dv_y = lat.dv_y;
    d.domega = lat.domega;
  }

  d.dx = k.v_x * std::cos(s.pose.psi) - k.v_y * std::sin(s.pose.psi);
  d.dy = k.v_x * std::sin(s.pose.psi) + k.v_y * std::cos(s.pose.psi);
  d.dpsi = k.omega;
  return d;
}

PlantState apply(const PlantState& s, const PlantDerivs& d, double h) {
  PlantState out = s;
  out.kinematic.v_y += h * d.dv_y;
  out.kinematic.omega += h * d.domega;
  out.pose.x += h * d.dx;
  out.pose.y += h * d.dy;
  out.pose.psi += h * d.dpsi;
  out.F_yf += h * d.dF_yf;
  out.F_yr += h * d.dF_yr;
  return out;
}

}  // namespace

void PlantConfig::validate() const {
  vehicle.validate();
  true_tires.validate();
  require(sigma_rel >= 0.0, "plant.sigma_rel must be >= 0");
  require(noise_std.v_y >= 0.0, "plant.noise_std.v_y must be >= 0");
  require(noise_std.omega >= 0.0, "plant.noise_std.omega must be >= 0");
  require(dt_plant > 0.0, "plant.dt_plant must be positive");
  require(dt_plant <= T_s, "plant.dt_plant must not exceed plant.T_s");
  require(T_s >= 0.005 && T_s <= 0.05, "plant.T_s out of [0.005, 0.05]");
  require(v_x0 > kMinLongitudinalSpeed, "plant.v_x0 too small");
  const double n = T_s / dt_plant;
  require(std::abs(n - std::round(n)) < 1e-9, "plant.T_s must be an integer multiple of plant.dt_plant");
}

PlantState plant_initial_state(const PlantConfig& cfg) {
  PlantState s;
  s.kinematic = {cfg.v_x0, 0.0, 0.0};
  if (cfg.sigma_rel == 0.0) {
    const ForcePair ss = steady_forces(s.kinematic, 0.0, cfg);
    s.F_yf = ss.front;
    s.F_yr = ss.rear;
  }
  return s;
}

PlantState step_plant(const PlantState& s, double delta, const PlantConfig& cfg) {
  if (!(s.kinematic.v_x > kMinLongitudinalSpeed)) {
    throw InvalidInput("step_plant: v_x at or below " + std::to_string(kMinLongitudinalSpeed));
  }
  const double h = cfg.dt_plant;
  const PlantDerivs k1 = plant_derivative(s, delta, cfg);
  const PlantDerivs k2 = plant_derivative(apply(s, k1, 0.5 * h), delta, cfg);
  const PlantDerivs k3 = plant_derivative(apply(s, k2, 0.5 * h), delta, cfg);
  const PlantDerivs k4 = plant_derivative(apply(s, k3, h), delta, cfg);

  PlantState out = s;
  const auto rk = [h](double a, double b, double c, double d) {
    return h / 6.0 * (a + 2.0 * b + 2.0 * c + d);
  };
  out.kinematic.v_y += rk(k1.dv_y, k2.dv_y, k3.dv_y, k4.dv_y);
  out.kinematic.omega += rk(k1.domega, k2.domega, k3.domega, k4.domega);
  out.pose.x += rk(k1.dx, k2.dx, k3.dx, k4.dx);
  out.pose.y += rk(k1.dy, k2.dy, k3.dy, k4.dy);
  out.pose.psi += rk(k1.dpsi, k2.dpsi, k3.dpsi, k4.dpsi);
  if (cfg.sigma_rel > 0.0) {
    out.F_yf += rk(k1.dF_yf, k2.dF_yf, k3.dF_yf, k4.dF_yf);
    out.F_yr += rk(k1.dF_yr, k2.dF_yr, k3.dF_yr, k4.dF_yr);
  } else {
    const ForcePair ss = steady_forces(out.kinematic, delta, cfg);
    out.F_yf = ss.front;
    out.F_yr = ss.rear;
  }
  return out;
}

void Path::validate() const {
  require(waypoints.size() >= 2, "Path needs at least 2 waypoints");
  for (std::size_t i = 1; i < waypoints.size(); ++i) {
    const double dx = waypoints[i][0] - waypoints[i - 1][0];
    const double dy = waypoints[i][1] - waypoints[i - 1][1];
    require(dx * dx + dy * dy > 0.0, "Path waypoints " + std::to_string(i - 1) + " and " +
                                         std::to_string(i) + " coincide");
  }
}

double pure_pursuit_steer(const Pose& pose, const Path& path, double lookahead,
                          double wheelbase, std::size_t& search_hint) {
  require(lookahead > 0.0, "pure_pursuit: lookahead must be positive");
  const auto dist2 = [&](const std::array<double, 2>& w) {
    const double dx = w[0] - pose.x;
    const double dy = w[1] - pose.y;
    return dx * dx + dy * dy;
  };
  const double L2 = lookahead * lookahead;

  std::size_t j = std::max<std::size_t>(search_hint, 1);
  while (j < path.waypoints.size() && dist2(path.waypoints[j]) < L2) ++j;
  if (j >= path.waypoints.size()) {
    throw PathExhausted("pure_pursuit: vehicle beyond path end");
  }

  // Interpolate on the segment crossing the circle (larger root = forward).
  const std::array<double, 2>& a = path.waypoints[j - 1];
  const std::array<double, 2>& b = path.waypoints[j];
  const double ex = b[0] - a[0], ey = b[1] - a[1];
  const double fx = a[0] - pose.x, fy = a[1] - pose.y;
  const double qa = ex * ex + ey * ey;
  const double qb = 2.0 * (ex * fx + ey * fy);
  const double qc = fx * fx + fy * fy - L2;
  const double disc = qb * qb - 4.0 * qa * qc;
  double s = 1.0;
  if (disc >= 0.0) {
    s = std::clamp((-qb + std::sqrt(disc)) / (2.0 * qa), 0.0, 1.0);
  }
  const double tx = a[0] + s * ex;
  const double ty = a[1] + s * ey;
  search_hint = j - 1;

  const double lx = std::cos(pose.psi) * (tx - pose.x) + std::sin(pose.psi) * (ty - pose.y);
  const double ly = -std::sin(pose.psi) * (tx - pose.x) + std::cos(pose.psi) * (ty - pose.y);
  const double alpha_h = std::atan2(ly, lx);
  const double delta = std::atan(2.0 * wheelbase * std::sin(alpha_h) / lookahead);
  return std::clamp(delta, -kMaxSteer, kMaxSteer);
}

std::vector<double> make_maneuver(const ManeuverSpec& spec, double T_s) {
  require(T_s > 0.0, "maneuver: T_s must be positive");
  const auto count = static_cast<std::size_t>(std::floor(spec.duration / T_s));
  require(count >= 100, "maneuver: duration/T_s must yield at least 100 samples");
  require(spec.amplitude >= 0.0 && spec.amplitude <= kMaxSteer,
          "maneuver.amplitude outside [0, " + std::to_string(kMaxSteer) + "]");

  std::vector<double> delta(count);
  switch (spec.kind) {
    case ManeuverKind::ramp:
      for (std::size_t k = 0; k < count; ++k) {
        delta[k] = spec.amplitude * static_cast<double>(k) / static_cast<double>(count - 1);
      }
      break;
    case ManeuverKind::slalom:
      require(spec.period > 0.0, "maneuver.period must be positive");
      for (std::size_t k = 0; k < count; ++k) {
        const double t = static_cast<double>(k) * T_s;
        delta[k] = spec.amplitude * std::sin(2.0 * std::numbers::pi * t / spec.period);
      }
      break;
    case ManeuverKind::sine_sweep:
      require(spec.f0 > 0.0 && spec.f1 >= spec.f0, "maneuver: need 0 < f0 <= f1");
      for (std::size_t k = 0; k < count; ++k) {
        const double t = static_cast<double>(k) * T_s;
        const double phase = 2.0 * std::numbers::pi *
                             (spec.f0 * t + 0.5 * (spec.f1 - spec.f0) * t * t / spec.duration);
        delta[k] = spec.amplitude * std::sin(phase);
      }
      break;
  }
  return delta;
}

namespace {

TelemetryLog run_plant(const PlantConfig& cfg, double duration,
                       const std::vector<double>* steering, const PurePursuitSpec* pursuit) {
  cfg.validate();
  require(duration > 0.0, "collect_telemetry: duration must be positive");
  const auto intervals = static_cast<std::size_t>(std::floor(duration / cfg.T_s));
  require(intervals >= 1, "collect_telemetry: duration shorter than one sample interval");
  if (steering) {
    require(steering->size() >= intervals,
            "collect_telemetry: steering sequence shorter than duration/T_s");
  }
  const auto n_sub = static_cast<std::size_t>(std::llround(cfg.T_s / cfg.dt_plant));

  Rng noise(cfg.seed);
  TelemetryLog log;
  log.T_s = cfg.T_s;
  log.records.reserve(intervals + 1);

  PlantState s = plant_initial_state(cfg);
  std::size_t hint = 0;
  double delta = 0.0;

  const auto record = [&](std::size_t k, double d) {
    TelemetryRecord r;
    r.t = static_cast<double>(k) * cfg.T_s;
    r.v_x = s.kinematic.v_x;
    r.v_y = s.kinematic.v_y + cfg.noise_std.v_y * noise.normal();
    r.omega = s.kinematic.omega + cfg.noise_std.omega * noise.normal();
    r.delta = d;
    log.records.push_back(r);
  };

  for (std::size_t k = 0; k < intervals; ++k) {
    if (steering) {
      delta = std::clamp((*steering)[k], -kMaxSteer, kMaxSteer);
    } else {
      delta = pure_pursuit_steer(s.pose, pursuit->path, pursuit->lookahead,
                                 cfg.vehicle.wheelbase(), hint);
    }
    record(k, delta);
    for (std::size_t i = 0; i < n_sub; ++i) s = step_plant(s, delta, cfg);
  }
  record(intervals, delta);
  return log;
}

}  // namespace

TelemetryLog collect_telemetry(const PlantConfig& cfg, const std::vector<double>& steering,
                               double duration) {
  return run_plant(cfg, duration, &steering, nullptr);
}

TelemetryLog collect_telemetry(const PlantConfig& cfg, const PurePursuitSpec& pursuit,
                               double duration) {
  pursuit.path.validate();
  return run_plant(cfg, duration, nullptr, &pursuit);
}

}  // namespace tireid
