#pragma once

#include <vector>

namespace tireid {

// Slip angles are ill-conditioned at low speed; v_x at or below this is
// rejected at every operation boundary.
inline constexpr double kMinLongitudinalSpeed = 0.5;  // [m/s]
inline constexpr double kMaxSteer = 0.6;              // [rad]
inline constexpr double kMaxStepDt = 0.05;            // [s]

struct VehicleParams {
  double m;    // mass [kg]
  double I_z;  // yaw inertia [kg m^2]
  double l_f;  // CoG to front axle [m]
  double l_r;  // CoG to rear axle [m]
  double g = 9.81;

  double wheelbase() const { return l_f + l_r; }
  void validate() const;
};

// Magic-formula coefficients per axle. D is the normalized peak (friction
// level); forces are D * F_z with static axle loads.
struct AxlePacejka {
  double B;  // stiffness
  double C;  // shape
  double D;  // peak, normalized by axle load
  double E;  // curvature

  void validate() const;
};

struct TireParams {
  AxlePacejka front;
  AxlePacejka rear;

  void validate() const;
};

struct VehicleState {
  double v_x;    // longitudinal velocity [m/s], exogenous
  double v_y;    // lateral velocity [m/s]
  double omega;  // yaw rate [rad/s]
};

struct SlipAngles {
  double front;  // [rad]
  double rear;   // [rad]
};

struct AxleLoads {
  double front;  // [N]
  double rear;   // [N]
};

struct LateralDerivatives {
  double dv_y;    // [m/s^2]
  double domega;  // [rad/s^2]
};

SlipAngles slip_angles(const VehicleState& s, double delta, const VehicleParams& p);

// Normalized lateral force D sin(C atan(B a - E (B a - atan(B a)))).
double pacejka_normalized(double alpha, const AxlePacejka& c);

// Static loads from the lever rule; front + rear = m g.
AxleLoads axle_loads(const VehicleParams& p);

LateralDerivatives state_derivative(const VehicleState& s, double delta,
                                    const TireParams& tires, const VehicleParams& p);

// One classical RK4 step of (v_y, omega) with v_x and delta held constant.
VehicleState step_nominal(const VehicleState& s, double delta, const TireParams& tires,
                          const VehicleParams& p, double dt);

// Rollout: output[0] = initial, output[k+1] = step(output[k], steering[k]).
std::vector<VehicleState> simulate_nominal(const VehicleState& initial,
                                           const std::vector<double>& steering,
                                           const TireParams& tires,
                                           const VehicleParams& p, double dt);

}  // namespace tireid
