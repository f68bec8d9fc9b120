#include "tireid/identify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include "tireid/errors.hpp"
#include "tireid/plant.hpp"

namespace tireid {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw InvalidInput(msg);
}

double clamped(double v, double lo, double hi) { return std::clamp(v, lo, hi); }

}  // namespace

void SweepConfig::validate() const {
  require(delta_max >= 0.0 && delta_max <= kMaxSteer, "sweep.delta_max outside [0, steering limit]");
  require(T_s > 0.0 && T_s <= kMaxStepDt, "sweep.T_s out of range");
  require(duration / T_s >= 200.0, "sweep.duration/T_s must be >= 200");
  require(settle_window >= 0, "sweep.settle_window must be >= 0");
  require(qss_omega_dot_tol > 0.0, "sweep.qss_omega_dot_tol must be positive");
}

AxleForces steady_state_forces(double v_x, double omega, double delta, const VehicleParams& p) {
  if (!(v_x > kMinLongitudinalSpeed)) {
    throw InvalidInput("steady_state_forces: v_x at or below " +
                       std::to_string(kMinLongitudinalSpeed));
  }
  const double cd = std::cos(delta);
  if (!(std::abs(cd) > 0.5)) {
    throw InvalidInput("steady_state_forces: |cos(delta)| <= 0.5");
  }
  const double ml = p.m / p.wheelbase();
  return {ml * p.l_r * v_x * omega / cd, ml * p.l_f * v_x * omega};
}

std::vector<std::size_t> quasi_steady_filter(const std::vector<VehicleState>& traj,
                                             const SweepConfig& cfg) {
  require(traj.size() >= 3, "quasi_steady_filter: trajectory must have >= 3 samples");
  const double vy_tol = 10.0 * cfg.qss_omega_dot_tol;  // paired tolerance, [m/s^2]
  const std::size_t n = traj.size();
  std::vector<std::size_t> keep;
  keep.reserve(n);
  for (std::size_t k = static_cast<std::size_t>(cfg.settle_window); k < n; ++k) {
    // Symmetric difference over up to +-5 samples; the wide stencil keeps the
    // estimate robust to sample-scale jitter from the residual correction.
    const std::size_t w = std::min({std::size_t{5}, k, n - 1 - k});
    double domega, dv_y;
    if (w == 0) {
      const std::size_t a = k == 0 ? 0 : k - 1;
      const std::size_t b = k == 0 ? 1 : k;
      domega = (traj[b].omega - traj[a].omega) / cfg.T_s;
      dv_y = (traj[b].v_y - traj[a].v_y) / cfg.T_s;
    } else {
      const double span = 2.0 * static_cast<double>(w) * cfg.T_s;
      domega = (traj[k + w].omega - traj[k - w].omega) / span;
      dv_y = (traj[k + w].v_y - traj[k - w].v_y) / span;
    }
    if (std::abs(domega) < cfg.qss_omega_dot_tol && std::abs(dv_y) < vy_tol) {
      keep.push_back(k);
    }
  }
  return keep;
}

SweepDataset virtual_sweep(const TireParams& tires, const ResidualNet* residual,
                           const VehicleParams& p, const SweepConfig& cfg) {
  cfg.validate();
  tires.validate();
  p.validate();
  require(cfg.v_x_bar > 1.0, "sweep.v_x_bar must exceed 1 m/s");

  const std::vector<double> steering =
      make_maneuver({ManeuverKind::ramp, cfg.duration, cfg.delta_max}, cfg.T_s);

  std::vector<VehicleState> traj;
  traj.reserve(steering.size() + 1);
  traj.push_back({cfg.v_x_bar, 0.0, 0.0});
  std::unique_ptr<ResidualStream> stream;
  if (residual != nullptr) stream = residual->make_stream();

  // Residual accelerations beyond ~0.5 g have no physical reading; bounding
  // the per-step correction keeps a poorly extrapolating net from blowing up
  // the autoregressive rollout.
  const double cap_vy = 0.5 * p.g * cfg.T_s;
  const double cap_om = 0.5 * p.g / (0.5 * p.wheelbase()) * cfg.T_s;
  for (std::size_t k = 0; k < steering.size(); ++k) {
    const VehicleState& s = traj.back();
    std::array<double, 2> corr{0.0, 0.0};
    if (stream) corr = stream->step({s.v_x, s.v_y, s.omega, steering[k]});
    VehicleState next = step_nominal(s, steering[k], tires, p, cfg.T_s);
    next.v_y += std::clamp(corr[0], -cap_vy, cap_vy);
    next.omega += std::clamp(corr[1], -cap_om, cap_om);
    if (!(std::abs(next.v_y) <= next.v_x) || !std::isfinite(next.v_y) ||
        !std::isfinite(next.omega)) {
      throw NumericFailure("virtual_sweep: corrected model unstable at step " +
                           std::to_string(k));
    }
    traj.push_back(next);
  }

  const std::vector<std::size_t> keep = quasi_steady_filter(traj, cfg);
  const AxleLoads fz = axle_loads(p);

  // Force synthesis from the full lateral/yaw balance with finite-difference
  // state rates. At exact quasi-steady samples the rate terms vanish and this
  // reduces to the algebraic steady-state expressions; keeping them removes
  // the O(ramp-rate) systematic error that otherwise swamps the shallow
  // (B, C, E) structure of the tire curve.
  SweepDataset data;
  data.front.reserve(keep.size());
  data.rear.reserve(keep.size());
  const std::size_t n = traj.size();
  for (std::size_t k : keep) {
    // The zero-order-hold staircase makes the state at sample k track the
    // continuous ramp delayed by half a sample; pair it with the midpoint of
    // the adjacent steering values to cancel that phase bias.
    const std::size_t ks = std::min(k, steering.size() - 1);
    const double delta = ks > 0 ? 0.5 * (steering[ks - 1] + steering[ks]) : steering[0];
    const VehicleState& s = traj[k];
    const std::size_t w = std::min({std::size_t{5}, k, n - 1 - k});
    double dv_y = 0.0, domega = 0.0;
    if (w > 0) {
      const double span = 2.0 * static_cast<double>(w) * cfg.T_s;
      dv_y = (traj[k + w].v_y - traj[k - w].v_y) / span;
      domega = (traj[k + w].omega - traj[k - w].omega) / span;
    }
    const double cd = std::cos(delta);
    const double lat = p.m * (dv_y + s.v_x * s.omega);
    const double yaw = p.I_z * domega;
    const double fyf = (p.l_r * lat + yaw) / (p.wheelbase() * cd);
    const double fyr = (p.l_f * lat - yaw) / p.wheelbase();
    const SlipAngles a = slip_angles(s, delta, p);
    data.front.push_back({a.front, fyf / fz.front});
    data.rear.push_back({a.rear, fyr / fz.rear});
  }
  return data;
}

FitResult fit_axle(const std::vector<SweepPoint>& all_points, const AxlePacejka& init,
                   const FitOptions& opts) {
  std::vector<SweepPoint> data;
  data.reserve(all_points.size());
  for (const SweepPoint& pt : all_points) {
    if (std::abs(pt.alpha) <= opts.fit_alpha_max) data.push_back(pt);
  }
  require(data.size() >= 8, "fit_axle: need at least 8 points, got " + std::to_string(data.size()));
  init.validate();

  const AxlePacejka& lo = opts.bounds.lo;
  const AxlePacejka& hi = opts.bounds.hi;
  const double w = opts.penalty_weight;

  const auto objective = [&](std::span<const double> x) {
    const AxlePacejka c{x[0], x[1], x[2], x[3]};
    double mse = 0.0;
    for (const SweepPoint& pt : data) {
      const double e = pacejka_normalized(pt.alpha, c) - pt.fy_norm;
      mse += e * e;
    }
    mse /= static_cast<double>(data.size());
    const double lob[4] = {lo.B, lo.C, lo.D, lo.E};
    const double hib[4] = {hi.B, hi.C, hi.D, hi.E};
    double pen = 0.0;
    for (int j = 0; j < 4; ++j) {
      const double under = std::max(0.0, lob[j] - x[static_cast<std::size_t>(j)]);
      const double over = std::max(0.0, x[static_cast<std::size_t>(j)] - hib[j]);
      pen += under * under + over * over;
    }
    return mse + w * pen;
  };

  int total_iters = 0;
  bool converged = false;

  // Restarted simplex: a collapsed simplex in the flat (B, C, E) valley is
  // re-expanded at the incumbent until the objective stops improving.
  const auto polish = [&](std::vector<double> x0) {
    NmResult best = nelder_mead(objective, x0, opts.nm);
    total_iters += best.iterations;
    for (int round = 1; round < 8; ++round) {
      const NmResult nm = nelder_mead(objective, best.x, opts.nm);
      total_iters += nm.iterations;
      const double improvement = best.f - nm.f;
      best = nm;
      if (improvement <= std::max(1e-16, 1e-6 * best.f)) break;
    }
    return best;
  };

  NmResult best = polish({init.B, init.C, init.D, init.E});
  converged = best.converged;

  // The magic formula is nearly degenerate along curves of constant slope
  // B*C*D; distinct (C, E) combinations index distinct shallow basins. Rescan
  // over them with the slope and peak held to the incumbent's and keep the
  // lowest objective.
  if (best.f > 1e-12) {
    const double slope = best.x[0] * best.x[1] * best.x[2];
    const double e_inc = best.x[3];
    for (const double c_try : {1.2, 1.55, 1.9, 2.25}) {
      for (const double e_try : {e_inc, 0.9}) {
        const double b_try = clamped(slope / (c_try * best.x[2]), lo.B, hi.B);
        const NmResult cand = polish({b_try, c_try, best.x[2], e_try});
        if (cand.f < best.f) {
          best = cand;
          converged = cand.converged;
        }
      }
    }
  }
  const std::vector<double>& x = best.x;

  FitResult out;
  out.coeffs = {clamped(x[0], lo.B, hi.B), clamped(x[1], lo.C, hi.C),
                clamped(x[2], lo.D, hi.D), clamped(x[3], lo.E, hi.E)};
  out.nm_iterations = total_iters;
  out.converged = converged;
  double mse = 0.0;
  for (const SweepPoint& pt : data) {
    const double e = pacejka_normalized(pt.alpha, out.coeffs) - pt.fy_norm;
    mse += e * e;
  }
  out.loss = mse / static_cast<double>(data.size());
  return out;
}

IdentifyReport identify_iterative(const TelemetryLog& log, const VehicleParams& p,
                                  TireParams init, const std::optional<FrictionPrior>& prior,
                                  const IdentifyOptions& opts,
                                  const ResidualNet* initial_model) {
  const auto t0 = std::chrono::steady_clock::now();
  log.validate();
  p.validate();
  init.validate();
  opts.train.validate();
  require(opts.max_outer >= 1, "identify.max_outer must be >= 1");
  require(opts.param_tol > 0.0, "identify.param_tol must be positive");

  IdentifyReport report;
  if (prior.has_value()) {
    const double d0 = warm_start_D(*prior);
    init.front.D = d0;
    init.rear.D = d0;
    report.warm_started = true;
    report.mu_hat = prior->mu_hat;
  }

  SweepConfig sweep_cfg = opts.sweep;
  if (sweep_cfg.v_x_bar <= 0.0) sweep_cfg.v_x_bar = log.mean_v_x();

  TireParams current = init;
  for (int outer = 1; outer <= opts.max_outer; ++outer) {
    OuterIterate it;

    // (1) Residual learning on the current nominal parameters.
    ResidualDataset dataset;
    try {
      dataset = build_residual_dataset(log, current, p, opts.train.window);
    } catch (const InvalidInput& e) {
      throw InvalidInput("identify[dataset stage, outer " + std::to_string(outer) + "]: " +
                         e.what());
    }
    std::unique_ptr<ResidualNet> net;
    if (outer == 1 && initial_model != nullptr) {
      net = initial_model->clone();
      const std::size_t n = dataset.windows.size();
      std::size_t n_val = static_cast<std::size_t>(
          std::llround(opts.train.val_fraction * static_cast<double>(n)));
      n_val = std::clamp<std::size_t>(n_val, 1, n - 1);
      it.residual_val_loss = dataset_loss(*net, dataset, n - n_val, n, true);
    } else {
      net = make_net(opts.train.net_spec(), opts.train.seed);
      try {
        const TrainResult tr = train(*net, dataset, opts.train);
        it.residual_val_loss = tr.final_val_loss;
      } catch (const NumericFailure& e) {
        throw NumericFailure("identify[training stage, outer " + std::to_string(outer) + "]: " +
                             e.what());
      }
    }

    // (2) Virtual steering sweep of the corrected model.
    SweepDataset sweep;
    try {
      sweep = virtual_sweep(current, net.get(), p, sweep_cfg);
    } catch (const NumericFailure&) {
      SweepConfig retry = sweep_cfg;
      retry.delta_max *= 0.5;
      try {
        sweep = virtual_sweep(current, net.get(), p, retry);
      } catch (const NumericFailure& e) {
        throw NumericFailure("identify[sweep stage, outer " + std::to_string(outer) +
                             ", after delta_max halving]: " + e.what());
      }
    }

    // (3) Per-axle Pacejka extraction.
    FitResult ff, fr;
    try {
      ff = fit_axle(sweep.front, current.front, opts.fit);
      fr = fit_axle(sweep.rear, current.rear, opts.fit);
    } catch (const InvalidInput& e) {
      throw InvalidInput("identify[fit stage, outer " + std::to_string(outer) + "]: " + e.what());
    }

    const TireParams next{ff.coeffs, fr.coeffs};
    const double olds[8] = {current.front.B, current.front.C, current.front.D, current.front.E,
                            current.rear.B,  current.rear.C,  current.rear.D,  current.rear.E};
    const double news[8] = {next.front.B, next.front.C, next.front.D, next.front.E,
                            next.rear.B,  next.rear.C,  next.rear.D,  next.rear.E};
    double change = 0.0;
    for (int j = 0; j < 8; ++j) {
      change = std::max(change, std::abs(news[j] - olds[j]) / std::max(std::abs(olds[j]), 0.1));
    }

    it.tires = next;
    it.fit_loss_front = ff.loss;
    it.fit_loss_rear = fr.loss;
    it.nm_iter_front = ff.nm_iterations;
    it.nm_iter_rear = fr.nm_iterations;
    it.max_rel_change = change;
    it.sweep = std::move(sweep);
    report.iterates.push_back(std::move(it));

    current = next;
    if (change < opts.param_tol) {
      report.converged = true;
      break;
    }
  }

  report.final_tires = current;
  report.outer_iterations = static_cast<int>(report.iterates.size());
  report.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace tireid
