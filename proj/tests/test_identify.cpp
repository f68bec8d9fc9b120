#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "tireid/errors.hpp"
#include "tireid/identify.hpp"
#include "tireid/plant.hpp"
#include "tireid/rng.hpp"

using namespace tireid;

namespace {

const VehicleParams kParams{1500.0, 2250.0, 1.2, 1.3, 9.81};

}  // namespace

TEST_CASE("steady-state forces: zero yaw rate gives zero forces") {
  const AxleForces f = steady_state_forces(20.0, 0.0, 0.05, kParams);
  CHECK(f.front == 0.0);
  CHECK(f.rear == 0.0);
}

TEST_CASE("steady-state forces: frozen hand evaluation") {
  const AxleForces f = steady_state_forces(20.0, 0.2, 0.05, kParams);
  CHECK(f.front == doctest::Approx(3123.904066634399).epsilon(1e-12));
  CHECK(f.rear == doctest::Approx(2880.0).epsilon(1e-12));
}

TEST_CASE("steady-state forces: zero steering force ratio is l_r/l_f") {
  const AxleForces f = steady_state_forces(25.0, 0.13, 0.0, kParams);
  CHECK(f.front / f.rear == doctest::Approx(1.3 / 1.2).epsilon(1e-14));
}

TEST_CASE("steady-state forces: steep steering rejected") {
  CHECK_THROWS_AS(steady_state_forces(20.0, 0.1, 1.1, kParams), InvalidInput);
}

TEST_CASE("eq-15 consistency at constant-steering equilibria in the linear region") {
  const TireParams tires{{10.0, 1.9, 0.8, 0.97}, {12.0, 1.7, 0.8, 0.95}};
  const AxleLoads fz = axle_loads(kParams);
  for (const double delta : {0.005, 0.01, 0.02, 0.03}) {
    // Settle to the constant-delta equilibrium.
    VehicleState s{20.0, 0.0, 0.0};
    for (int i = 0; i < 800; ++i) s = step_nominal(s, delta, tires, kParams, 0.01);
    const SlipAngles a = slip_angles(s, delta, kParams);
    REQUIRE(std::abs(a.front) <= 0.05);
    REQUIRE(std::abs(a.rear) <= 0.05);
    const double fyf_model = fz.front * pacejka_normalized(a.front, tires.front);
    const double fyr_model = fz.rear * pacejka_normalized(a.rear, tires.rear);
    const AxleForces f = steady_state_forces(s.v_x, s.omega, delta, kParams);
    CHECK(f.front == doctest::Approx(fyf_model).epsilon(0.02));
    CHECK(f.rear == doctest::Approx(fyr_model).epsilon(0.02));
  }
}

TEST_CASE("quasi-steady filter: settle window and transients") {
  SweepConfig cfg;
  cfg.settle_window = 10;
  cfg.T_s = 0.01;
  cfg.qss_omega_dot_tol = 0.05;

  std::vector<VehicleState> traj(100, {20.0, 0.1, 0.2});
  // Inject a step transient in omega at index 50.
  for (std::size_t k = 50; k < 60; ++k) {
    traj[k].omega = 0.2 + 0.05 * static_cast<double>(k - 49);
  }
  for (std::size_t k = 60; k < 100; ++k) traj[k].omega = 0.75;

  const auto keep = quasi_steady_filter(traj, cfg);
  REQUIRE(!keep.empty());
  CHECK(keep.front() == 10);  // first post-settle index
  for (std::size_t k : keep) {
    CHECK((k < 49 || k > 60));
  }
}

TEST_CASE("quasi-steady filter: infinite tolerance keeps all post-settle indices") {
  SweepConfig cfg;
  cfg.settle_window = 5;
  cfg.T_s = 0.01;
  cfg.qss_omega_dot_tol = INFINITY;
  std::vector<VehicleState> traj(40, {20.0, 0.0, 0.0});
  Rng rng(3);
  for (auto& s : traj) {
    s.v_y = rng.normal();
    s.omega = rng.normal();
  }
  const auto keep = quasi_steady_filter(traj, cfg);
  CHECK(keep.size() == 35);
  CHECK(keep.front() == 5);
  CHECK(keep.back() == 39);
}

TEST_CASE("virtual sweep: bare nominal model reproduces the tire curve below the peak") {
  const TireParams tires{{10.0, 1.9, 0.8, 0.97}, {12.0, 1.7, 0.8, 0.95}};
  SweepConfig cfg;
  cfg.v_x_bar = 20.0;
  const SweepDataset data = virtual_sweep(tires, nullptr, kParams, cfg);
  REQUIRE(data.front.size() >= 20);
  REQUIRE(data.rear.size() >= 20);
  double worst_f = 0.0, worst_r = 0.0;
  double max_af = 0.0;
  for (const SweepPoint& pt : data.front) {
    max_af = std::max(max_af, std::abs(pt.alpha));
    if (std::abs(pt.alpha) < 0.15) {
      worst_f = std::max(worst_f,
                         std::abs(pt.fy_norm - pacejka_normalized(pt.alpha, tires.front)));
    }
  }
  for (const SweepPoint& pt : data.rear) {
    if (std::abs(pt.alpha) < 0.12) {
      worst_r = std::max(worst_r,
                         std::abs(pt.fy_norm - pacejka_normalized(pt.alpha, tires.rear)));
    }
  }
  CHECK(worst_f < 0.02);
  CHECK(worst_r < 0.02);
  // The default ramp pushes the front axle past its peak slip angle.
  CHECK(max_af > 0.18);
}

TEST_CASE("virtual sweep: zero terminal steering stays at the origin") {
  const TireParams tires{{10.0, 1.9, 0.8, 0.97}, {12.0, 1.7, 0.8, 0.95}};
  SweepConfig cfg;
  cfg.v_x_bar = 20.0;
  cfg.delta_max = 0.0;
  const SweepDataset data = virtual_sweep(tires, nullptr, kParams, cfg);
  for (const SweepPoint& pt : data.front) {
    CHECK(std::abs(pt.alpha) < 1e-12);
    CHECK(std::abs(pt.fy_norm) < 1e-12);
  }
}

TEST_CASE("virtual sweep: a zero-output residual model changes nothing") {
  const TireParams tires{{10.0, 1.9, 0.8, 0.97}, {12.0, 1.7, 0.8, 0.95}};
  auto net = make_net({"s4", 8, 8, 16, 0.0, 0.01}, 3);
  std::span<double> p = net->params();
  for (std::size_t i = p.size() - 18; i < p.size(); ++i) p[i] = 0.0;  // zero decoder
  SweepConfig cfg;
  cfg.v_x_bar = 20.0;
  const SweepDataset with = virtual_sweep(tires, net.get(), kParams, cfg);
  const SweepDataset without = virtual_sweep(tires, nullptr, kParams, cfg);
  REQUIRE(with.front.size() == without.front.size());
  for (std::size_t i = 0; i < with.front.size(); ++i) {
    CHECK(with.front[i].alpha == without.front[i].alpha);
    CHECK(with.front[i].fy_norm == without.front[i].fy_norm);
  }
}

namespace {

std::vector<SweepPoint> synth_points(const AxlePacejka& truth, double alpha_max, int n) {
  std::vector<SweepPoint> pts;
  for (int i = 0; i < n; ++i) {
    const double a = -alpha_max + 2.0 * alpha_max * static_cast<double>(i) /
                                      static_cast<double>(n - 1);
    pts.push_back({a, pacejka_normalized(a, truth)});
  }
  return pts;
}

}  // namespace

TEST_CASE("fit: noiseless data recovers the generating parameters") {
  const AxlePacejka truth{10.0, 1.9, 0.8, 0.97};
  const auto pts = synth_points(truth, 0.15, 60);
  const FitResult r = fit_axle(pts, {8.0, 1.5, 0.7, 0.5}, FitOptions{});
  CHECK(std::abs(r.coeffs.D - truth.D) / truth.D < 0.01);
  CHECK(std::abs(r.coeffs.B - truth.B) / truth.B < 0.05);
  CHECK(std::abs(r.coeffs.C - truth.C) / truth.C < 0.05);
  CHECK(std::abs(r.coeffs.E - truth.E) / std::abs(truth.E) < 0.05);
}

TEST_CASE("fit: all-zero data drives D to its floor") {
  std::vector<SweepPoint> pts;
  for (int i = 0; i < 40; ++i) pts.push_back({-0.2 + 0.01 * i, 0.0});
  const FitResult r = fit_axle(pts, {8.0, 1.5, 0.3, 0.5}, FitOptions{});
  CHECK(r.coeffs.D <= 0.05);
}

TEST_CASE("fit: starting at the optimum is cheap and exact") {
  const AxlePacejka truth{10.0, 1.9, 0.8, 0.97};
  const auto pts = synth_points(truth, 0.15, 60);
  const FitResult r = fit_axle(pts, truth, FitOptions{});
  CHECK(r.loss < 1e-12);
  CHECK(r.nm_iterations < 800);
}

TEST_CASE("fit: output always satisfies the coefficient bounds") {
  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<SweepPoint> pts;
    for (int i = 0; i < 30; ++i) {
      pts.push_back({rng.uniform(-0.25, 0.25), rng.uniform(-1.2, 1.2)});
    }
    const FitResult r = fit_axle(pts, {8.0, 1.5, 0.51, 0.5}, FitOptions{});
    CHECK_NOTHROW(r.coeffs.validate());
  }
}

TEST_CASE("fit: warm-start basin invariance on clean single-axle data") {
  const AxlePacejka truth{10.0, 1.9, 0.8, 0.97};
  const auto pts = synth_points(truth, 0.2, 80);
  FitOptions opts;
  opts.nm.max_iter = 2000;
  AxlePacejka cold{8.0, 1.5, 0.51, 0.5};
  AxlePacejka warm{8.0, 1.5, 0.80, 0.5};
  const FitResult rc = fit_axle(pts, cold, opts);
  const FitResult rw = fit_axle(pts, warm, opts);
  CHECK(std::abs(rc.coeffs.B - rw.coeffs.B) / rw.coeffs.B < 0.01);
  CHECK(std::abs(rc.coeffs.C - rw.coeffs.C) / rw.coeffs.C < 0.01);
  CHECK(std::abs(rc.coeffs.D - rw.coeffs.D) / rw.coeffs.D < 0.01);
  CHECK(std::abs(rc.coeffs.E - rw.coeffs.E) / std::abs(rw.coeffs.E) < 0.01);
}

TEST_CASE("fit: too few points rejected") {
  std::vector<SweepPoint> pts(5, {0.01, 0.1});
  CHECK_THROWS_AS(fit_axle(pts, {8.0, 1.5, 0.51, 0.5}, FitOptions{}), InvalidInput);
}

TEST_CASE("identify: fixed point when initialized at the truth on a clean plant") {
  PlantConfig plant;
  plant.sigma_rel = 0.0;
  plant.noise_std = {0.0, 0.0};
  plant.dt_plant = 0.01;  // match the nominal discretization exactly
  const auto steering = make_maneuver({ManeuverKind::sine_sweep, 12.0, 0.08, 0.1, 0.8},
                                      plant.T_s);
  const TelemetryLog log = collect_telemetry(plant, steering, 12.0);

  IdentifyOptions opts;
  opts.train.window = 32;
  opts.train.steps = 250;
  opts.train.batch = 16;
  opts.train.d_model = 8;
  opts.train.state_dim = 8;
  opts.train.dropout = 0.0;
  const IdentifyReport report =
      identify_iterative(log, plant.vehicle, plant.true_tires, std::nullopt, opts);
  CHECK(report.outer_iterations == 1);
  CHECK(report.converged);
  CHECK(report.iterates.back().fit_loss_front < 1e-4);
  CHECK(report.iterates.back().fit_loss_rear < 1e-4);
}

TEST_CASE("identify: warm start overrides the initial D on both axles") {
  PlantConfig plant;
  plant.sigma_rel = 0.0;
  plant.noise_std = {0.0, 0.0};
  plant.dt_plant = 0.01;
  const auto steering = make_maneuver({ManeuverKind::sine_sweep, 12.0, 0.08, 0.1, 0.8},
                                      plant.T_s);
  const TelemetryLog log = collect_telemetry(plant, steering, 12.0);

  IdentifyOptions opts;
  opts.train.window = 32;
  opts.train.steps = 200;
  opts.train.batch = 8;
  opts.train.d_model = 8;
  opts.train.state_dim = 8;
  opts.train.dropout = 0.0;
  opts.max_outer = 1;

  const FrictionPrior prior{0.8, PriorSource::manual};
  const TireParams init{{8.0, 1.5, 0.51, 0.5}, {8.0, 1.5, 0.51, 0.5}};
  const IdentifyReport report =
      identify_iterative(log, plant.vehicle, init, prior, opts);
  CHECK(report.warm_started);
  CHECK(report.mu_hat == 0.8);
  CHECK(report.outer_iterations >= 1);
}
