#include "tireid/dynamics.hpp"

#include <cmath>
#include <string>

#include "tireid/errors.hpp"

namespace tireid {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw InvalidInput(msg);
}

void check_speed(double v_x) {
  if (!(v_x > kMinLongitudinalSpeed)) {
    throw InvalidInput("v_x must exceed " + std::to_string(kMinLongitudinalSpeed) +
                       " m/s, got " + std::to_string(v_x));
  }
}

}  // namespace

void VehicleParams::validate() const {
  require(m > 0.0, "VehicleParams.m must be positive");
  require(I_z > 0.0, "VehicleParams.I_z must be positive");
  require(l_f > 0.0, "VehicleParams.l_f must be positive");
  require(l_r > 0.0, "VehicleParams.l_r must be positive");
  require(g > 0.0, "VehicleParams.g must be positive");
}

void AxlePacejka::validate() const {
  require(B >= 1.0 && B <= 30.0, "AxlePacejka.B out of [1, 30]");
  require(C > 1.0 && C <= 2.5, "AxlePacejka.C out of (1, 2.5]");
  require(D > 0.0 && D <= 1.6, "AxlePacejka.D out of (0, 1.6]");
  require(E <= 1.0, "AxlePacejka.E must be <= 1");
}

void TireParams::validate() const {
  front.validate();
  rear.validate();
}

SlipAngles slip_angles(const VehicleState& s, double delta, const VehicleParams& p) {
  check_speed(s.v_x);
  const double af = delta - std::atan((s.v_y + p.l_f * s.omega) / s.v_x);
  const double ar = -std::atan((s.v_y - p.l_r * s.omega) / s.v_x);
  return {af, ar};
}

double pacejka_normalized(double alpha, const AxlePacejka& c) {
  const double ba = c.B * alpha;
  const double arg = ba - c.E * (ba - std::atan(ba));
  return c.D * std::sin(c.C * std::atan(arg));
}

AxleLoads axle_loads(const VehicleParams& p) {
  const double w = p.m * p.g / p.wheelbase();
  return {w * p.l_r, w * p.l_f};
}

LateralDerivatives state_derivative(const VehicleState& s, double delta,
                                    const TireParams& tires, const VehicleParams& p) {
  const SlipAngles a = slip_angles(s, delta, p);
  const AxleLoads fz = axle_loads(p);
  const double fyf = fz.front * pacejka_normalized(a.front, tires.front);
  const double fyr = fz.rear * pacejka_normalized(a.rear, tires.rear);
  const double cd = std::cos(delta);
  const double dv_y = (fyr + fyf * cd - p.m * s.v_x * s.omega) / p.m;
  const double domega = (fyf * p.l_f * cd - fyr * p.l_r) / p.I_z;
  return {dv_y, domega};
}

VehicleState step_nominal(const VehicleState& s, double delta, const TireParams& tires,
                          const VehicleParams& p, double dt) {
  if (!(dt > 0.0 && dt <= kMaxStepDt)) {
    throw InvalidInput("dt must lie in (0, " + std::to_string(kMaxStepDt) + "], got " +
                       std::to_string(dt));
  }
  check_speed(s.v_x);

  const auto f = [&](double v_y, double omega) {
    return state_derivative({s.v_x, v_y, omega}, delta, tires, p);
  };
  const LateralDerivatives k1 = f(s.v_y, s.omega);
  const LateralDerivatives k2 = f(s.v_y + 0.5 * dt * k1.dv_y, s.omega + 0.5 * dt * k1.domega);
  const LateralDerivatives k3 = f(s.v_y + 0.5 * dt * k2.dv_y, s.omega + 0.5 * dt * k2.domega);
  const LateralDerivatives k4 = f(s.v_y + dt * k3.dv_y, s.omega + dt * k3.domega);

  VehicleState out = s;
  out.v_y += dt / 6.0 * (k1.dv_y + 2.0 * k2.dv_y + 2.0 * k3.dv_y + k4.dv_y);
  out.omega += dt / 6.0 * (k1.domega + 2.0 * k2.domega + 2.0 * k3.domega + k4.domega);
  return out;
}

std::vector<VehicleState> simulate_nominal(const VehicleState& initial,
                                           const std::vector<double>& steering,
                                           const TireParams& tires,
                                           const VehicleParams& p, double dt) {
  require(!steering.empty(), "simulate_nominal: steering sequence is empty");
  std::vector<VehicleState> traj;
  traj.reserve(steering.size() + 1);
  traj.push_back(initial);
  for (std::size_t k = 0; k < steering.size(); ++k) {
    try {
      traj.push_back(step_nominal(traj.back(), steering[k], tires, p, dt));
    } catch (const InvalidInput& e) {
      throw InvalidInput("simulate_nominal: step " + std::to_string(k) + ": " + e.what());
    }
  }
  return traj;
}

}  // namespace tireid
