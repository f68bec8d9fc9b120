#include "tireid/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "tireid/errors.hpp"

namespace tireid {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw InvalidInput(msg);
}

double jnum(const nlohmann::json& v, const std::string& path) {
  if (!v.is_number()) throw InvalidInput(path + ": expected a number");
  return v.get<double>();
}

int jint(const nlohmann::json& v, const std::string& path) {
  if (!v.is_number_integer()) throw InvalidInput(path + ": expected an integer");
  return v.get<int>();
}

std::uint64_t juint(const nlohmann::json& v, const std::string& path) {
  if (!v.is_number_unsigned() && !v.is_number_integer()) {
    throw InvalidInput(path + ": expected a non-negative integer");
  }
  const auto x = v.get<std::int64_t>();
  if (x < 0) throw InvalidInput(path + ": expected a non-negative integer");
  return static_cast<std::uint64_t>(x);
}

std::string jstr(const nlohmann::json& v, const std::string& path) {
  if (!v.is_string()) throw InvalidInput(path + ": expected a string");
  return v.get<std::string>();
}

AxlePacejka axle_from_json(const nlohmann::json& v, const std::string& path) {
  if (!v.is_object()) throw InvalidInput(path + ": expected an object");
  AxlePacejka out{};
  bool got[4] = {false, false, false, false};
  for (const auto& [key, val] : v.items()) {
    if (key == "B") {
      out.B = jnum(val, path + ".B");
      got[0] = true;
    } else if (key == "C") {
      out.C = jnum(val, path + ".C");
      got[1] = true;
    } else if (key == "D") {
      out.D = jnum(val, path + ".D");
      got[2] = true;
    } else if (key == "E") {
      out.E = jnum(val, path + ".E");
      got[3] = true;
    } else {
      throw InvalidInput(path + "." + key + ": unknown key");
    }
  }
  require(got[0] && got[1] && got[2] && got[3], path + ": needs B, C, D, E");
  return out;
}

nlohmann::json axle_to_json(const AxlePacejka& a) {
  return {{"B", a.B}, {"C", a.C}, {"D", a.D}, {"E", a.E}};
}

}  // namespace

void ManeuverConfig::validate() const {
  require(kind == "sine_sweep" || kind == "slalom" || kind == "ramp" || kind == "pure_pursuit",
          "maneuver.kind `" + kind +
              "` unknown; valid values: sine_sweep, slalom, ramp, pure_pursuit");
  require(duration > 0.0, "maneuver.duration must be positive");
  require(amplitude >= 0.0 && amplitude <= kMaxSteer, "maneuver.amplitude out of range");
  if (kind == "sine_sweep") require(f0 > 0.0 && f1 >= f0, "maneuver: need 0 < f0 <= f1");
  if (kind == "slalom") require(period > 0.0, "maneuver.period must be positive");
  if (kind == "pure_pursuit") {
    require(path_amplitude >= 0.0, "maneuver.path_amplitude must be >= 0");
    require(path_wavelength > 0.0, "maneuver.path_wavelength must be positive");
    require(lookahead > 0.0, "maneuver.lookahead must be positive");
  }
}

IdentifyOptions RunConfig::identify_options() const {
  IdentifyOptions opts;
  opts.train = train;
  opts.sweep = sweep;
  opts.fit = fit;
  opts.max_outer = outer.max_outer;
  opts.param_tol = outer.param_tol;
  return opts;
}

void RunConfig::apply_global_seed(std::uint64_t s) {
  seed = s;
  plant.seed = s;
  train.seed = s + 1;
}

RunConfig run_config_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw InvalidInput("config root: expected an object");
  RunConfig cfg;
  bool seed_given = false;

  for (const auto& [key, v] : doc.items()) {
    if (key == "schema_version") {
      require(jint(v, "schema_version") == kSchemaVersion, "schema_version: unsupported value");
    } else if (key == "seed") {
      cfg.seed = juint(v, "seed");
      seed_given = true;
    } else if (key == "plant") {
      require(v.is_object(), "plant: expected an object");
      bool plant_seed_given = false;
      for (const auto& [pk, pv] : v.items()) {
        const std::string path = "plant." + pk;
        if (pk == "m") cfg.plant.vehicle.m = jnum(pv, path);
        else if (pk == "I_z") cfg.plant.vehicle.I_z = jnum(pv, path);
        else if (pk == "l_f") cfg.plant.vehicle.l_f = jnum(pv, path);
        else if (pk == "l_r") cfg.plant.vehicle.l_r = jnum(pv, path);
        else if (pk == "g") cfg.plant.vehicle.g = jnum(pv, path);
        else if (pk == "true_tires") cfg.plant.true_tires = tires_from_json(pv, path);
        else if (pk == "sigma_rel") cfg.plant.sigma_rel = jnum(pv, path);
        else if (pk == "noise_std_vy") cfg.plant.noise_std.v_y = jnum(pv, path);
        else if (pk == "noise_std_omega") cfg.plant.noise_std.omega = jnum(pv, path);
        else if (pk == "seed") { cfg.plant.seed = juint(pv, path); plant_seed_given = true; }
        else if (pk == "dt_plant") cfg.plant.dt_plant = jnum(pv, path);
        else if (pk == "T_s") cfg.plant.T_s = jnum(pv, path);
        else if (pk == "v_x0") cfg.plant.v_x0 = jnum(pv, path);
        else throw InvalidInput(path + ": unknown key");
      }
      if (!plant_seed_given) cfg.plant.seed = cfg.seed;
    } else if (key == "maneuver") {
      require(v.is_object(), "maneuver: expected an object");
      for (const auto& [mk, mv] : v.items()) {
        const std::string path = "maneuver." + mk;
        if (mk == "kind") cfg.maneuver.kind = jstr(mv, path);
        else if (mk == "duration") cfg.maneuver.duration = jnum(mv, path);
        else if (mk == "amplitude") cfg.maneuver.amplitude = jnum(mv, path);
        else if (mk == "f0") cfg.maneuver.f0 = jnum(mv, path);
        else if (mk == "f1") cfg.maneuver.f1 = jnum(mv, path);
        else if (mk == "period") cfg.maneuver.period = jnum(mv, path);
        else if (mk == "path_amplitude") cfg.maneuver.path_amplitude = jnum(mv, path);
        else if (mk == "path_wavelength") cfg.maneuver.path_wavelength = jnum(mv, path);
        else if (mk == "lookahead") cfg.maneuver.lookahead = jnum(mv, path);
        else throw InvalidInput(path + ": unknown key");
      }
    } else if (key == "prior") {
      require(v.is_object(), "prior: expected an object");
      for (const auto& [vk, vv] : v.items()) {
        const std::string path = "prior." + vk;
        if (vk == "mu") {
          if (!vv.is_null()) cfg.prior.mu = jnum(vv, path);
        } else if (vk == "file") {
          if (!vv.is_null()) cfg.prior.file = jstr(vv, path);
        } else if (vk == "basis_file") {
          if (!vv.is_null()) cfg.prior.basis_file = jstr(vv, path);
        } else {
          throw InvalidInput(path + ": unknown key");
        }
      }
    } else if (key == "init_tires") {
      cfg.init_tires = tires_from_json(v, "init_tires");
    } else if (key == "train") {
      require(v.is_object(), "train: expected an object");
      bool train_seed_given = false;
      for (const auto& [tk, tv] : v.items()) {
        const std::string path = "train." + tk;
        if (tk == "arch") cfg.train.arch = jstr(tv, path);
        else if (tk == "learning_rate") cfg.train.learning_rate = jnum(tv, path);
        else if (tk == "steps") cfg.train.steps = jint(tv, path);
        else if (tk == "batch") cfg.train.batch = jint(tv, path);
        else if (tk == "dropout") cfg.train.dropout = jnum(tv, path);
        else if (tk == "seed") { cfg.train.seed = juint(tv, path); train_seed_given = true; }
        else if (tk == "val_fraction") cfg.train.val_fraction = jnum(tv, path);
        else if (tk == "val_every") cfg.train.val_every = jint(tv, path);
        else if (tk == "window") cfg.train.window = jint(tv, path);
        else if (tk == "d_model") cfg.train.d_model = jint(tv, path);
        else if (tk == "state_dim") cfg.train.state_dim = jint(tv, path);
        else if (tk == "hidden") cfg.train.hidden = jint(tv, path);
        else if (tk == "delta_init") cfg.train.delta_init = jnum(tv, path);
        else throw InvalidInput(path + ": unknown key");
      }
      if (!train_seed_given) cfg.train.seed = cfg.seed + 1;
    } else if (key == "sweep") {
      require(v.is_object(), "sweep: expected an object");
      for (const auto& [sk, sv] : v.items()) {
        const std::string path = "sweep." + sk;
        if (sk == "v_x_bar") cfg.sweep.v_x_bar = sv.is_null() ? 0.0 : jnum(sv, path);
        else if (sk == "delta_max") cfg.sweep.delta_max = jnum(sv, path);
        else if (sk == "duration") cfg.sweep.duration = jnum(sv, path);
        else if (sk == "T_s") cfg.sweep.T_s = jnum(sv, path);
        else if (sk == "settle_window") cfg.sweep.settle_window = jint(sv, path);
        else if (sk == "qss_omega_dot_tol") cfg.sweep.qss_omega_dot_tol = jnum(sv, path);
        else throw InvalidInput(path + ": unknown key");
      }
    } else if (key == "nm") {
      require(v.is_object(), "nm: expected an object");
      for (const auto& [nk, nv] : v.items()) {
        const std::string path = "nm." + nk;
        if (nk == "reflection") cfg.fit.nm.reflection = jnum(nv, path);
        else if (nk == "expansion") cfg.fit.nm.expansion = jnum(nv, path);
        else if (nk == "contraction") cfg.fit.nm.contraction = jnum(nv, path);
        else if (nk == "shrink") cfg.fit.nm.shrink = jnum(nv, path);
        else if (nk == "max_iter") cfg.fit.nm.max_iter = jint(nv, path);
        else if (nk == "f_tol") cfg.fit.nm.f_tol = jnum(nv, path);
        else if (nk == "initial_step") {
          if (!nv.is_array() || nv.size() != 4) {
            throw InvalidInput(path + ": expected an array of 4 numbers");
          }
          cfg.fit.nm.initial_step.clear();
          for (std::size_t i = 0; i < 4; ++i) {
            cfg.fit.nm.initial_step.push_back(jnum(nv.at(i), path));
          }
        } else if (nk == "penalty_weight") {
          cfg.fit.penalty_weight = jnum(nv, path);
        } else {
          throw InvalidInput(path + ": unknown key");
        }
      }
    } else if (key == "outer") {
      require(v.is_object(), "outer: expected an object");
      for (const auto& [ok, ov] : v.items()) {
        const std::string path = "outer." + ok;
        if (ok == "max_outer") cfg.outer.max_outer = jint(ov, path);
        else if (ok == "param_tol") cfg.outer.param_tol = jnum(ov, path);
        else throw InvalidInput(path + ": unknown key");
      }
    } else {
      throw InvalidInput(key + ": unknown key");
    }
  }

  if (seed_given && !doc.contains("plant")) cfg.plant.seed = cfg.seed;
  if (seed_given && !doc.contains("train")) cfg.train.seed = cfg.seed + 1;

  cfg.plant.validate();
  cfg.maneuver.validate();
  cfg.init_tires.validate();
  cfg.train.validate();
  cfg.sweep.validate();
  cfg.fit.nm.validate();
  require(cfg.fit.penalty_weight > 0.0, "nm.penalty_weight must be positive");
  require(cfg.outer.max_outer >= 1, "outer.max_outer must be >= 1");
  require(cfg.outer.param_tol > 0.0, "outer.param_tol must be positive");
  return cfg;
}

nlohmann::json run_config_to_json(const RunConfig& cfg) {
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["seed"] = cfg.seed;
  j["plant"] = {
      {"m", cfg.plant.vehicle.m},
      {"I_z", cfg.plant.vehicle.I_z},
      {"l_f", cfg.plant.vehicle.l_f},
      {"l_r", cfg.plant.vehicle.l_r},
      {"g", cfg.plant.vehicle.g},
      {"true_tires", tires_to_json(cfg.plant.true_tires)},
      {"sigma_rel", cfg.plant.sigma_rel},
      {"noise_std_vy", cfg.plant.noise_std.v_y},
      {"noise_std_omega", cfg.plant.noise_std.omega},
      {"seed", cfg.plant.seed},
      {"dt_plant", cfg.plant.dt_plant},
      {"T_s", cfg.plant.T_s},
      {"v_x0", cfg.plant.v_x0},
  };
  j["maneuver"] = {
      {"kind", cfg.maneuver.kind},          {"duration", cfg.maneuver.duration},
      {"amplitude", cfg.maneuver.amplitude}, {"f0", cfg.maneuver.f0},
      {"f1", cfg.maneuver.f1},              {"period", cfg.maneuver.period},
      {"path_amplitude", cfg.maneuver.path_amplitude},
      {"path_wavelength", cfg.maneuver.path_wavelength},
      {"lookahead", cfg.maneuver.lookahead},
  };
  j["prior"] = {
      {"mu", cfg.prior.mu.has_value() ? nlohmann::json(*cfg.prior.mu) : nlohmann::json()},
      {"file", cfg.prior.file.empty() ? nlohmann::json() : nlohmann::json(cfg.prior.file)},
      {"basis_file",
       cfg.prior.basis_file.empty() ? nlohmann::json() : nlohmann::json(cfg.prior.basis_file)},
  };
  j["init_tires"] = tires_to_json(cfg.init_tires);
  j["train"] = {
      {"arch", cfg.train.arch},
      {"learning_rate", cfg.train.learning_rate},
      {"steps", cfg.train.steps},
      {"batch", cfg.train.batch},
      {"dropout", cfg.train.dropout},
      {"seed", cfg.train.seed},
      {"val_fraction", cfg.train.val_fraction},
      {"val_every", cfg.train.val_every},
      {"window", cfg.train.window},
      {"d_model", cfg.train.d_model},
      {"state_dim", cfg.train.state_dim},
      {"hidden", cfg.train.hidden},
      {"delta_init", cfg.train.delta_init},
  };
  j["sweep"] = {
      {"v_x_bar", cfg.sweep.v_x_bar},
      {"delta_max", cfg.sweep.delta_max},
      {"duration", cfg.sweep.duration},
      {"T_s", cfg.sweep.T_s},
      {"settle_window", cfg.sweep.settle_window},
      {"qss_omega_dot_tol", cfg.sweep.qss_omega_dot_tol},
  };
  j["nm"] = {
      {"reflection", cfg.fit.nm.reflection},
      {"expansion", cfg.fit.nm.expansion},
      {"contraction", cfg.fit.nm.contraction},
      {"shrink", cfg.fit.nm.shrink},
      {"max_iter", cfg.fit.nm.max_iter},
      {"f_tol", cfg.fit.nm.f_tol},
      {"initial_step", cfg.fit.nm.initial_step.empty()
                           ? std::vector<double>{1.0, 0.1, 0.05, 0.1}
                           : cfg.fit.nm.initial_step},
      {"penalty_weight", cfg.fit.penalty_weight},
  };
  j["outer"] = {{"max_outer", cfg.outer.max_outer}, {"param_tol", cfg.outer.param_tol}};
  return j;
}

RunConfig load_run_config(const std::string& path) {
  return run_config_from_json(read_json_file(path));
}

TelemetryLog run_simulation(const RunConfig& cfg) {
  cfg.maneuver.validate();
  if (cfg.maneuver.kind == "pure_pursuit") {
    PurePursuitSpec pursuit;
    pursuit.lookahead = cfg.maneuver.lookahead;
    const double length =
        cfg.maneuver.duration * cfg.plant.v_x0 + 4.0 * cfg.maneuver.lookahead + 50.0;
    const double ds = 1.0;
    const auto count = static_cast<std::size_t>(std::ceil(length / ds)) + 1;
    pursuit.path.waypoints.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      const double x = static_cast<double>(i) * ds;
      pursuit.path.waypoints.push_back(
          {x, cfg.maneuver.path_amplitude *
                  std::sin(2.0 * std::numbers::pi * x / cfg.maneuver.path_wavelength)});
    }
    return collect_telemetry(cfg.plant, pursuit, cfg.maneuver.duration);
  }

  ManeuverSpec spec;
  spec.kind = cfg.maneuver.kind == "slalom"
                  ? ManeuverKind::slalom
                  : (cfg.maneuver.kind == "ramp" ? ManeuverKind::ramp : ManeuverKind::sine_sweep);
  spec.duration = cfg.maneuver.duration;
  spec.amplitude = cfg.maneuver.amplitude;
  spec.f0 = cfg.maneuver.f0;
  spec.f1 = cfg.maneuver.f1;
  spec.period = cfg.maneuver.period;
  const std::vector<double> steering = make_maneuver(spec, cfg.plant.T_s);
  return collect_telemetry(cfg.plant, steering, cfg.maneuver.duration);
}

nlohmann::json truth_sidecar_json(const RunConfig& cfg) {
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["vehicle"] = {{"m", cfg.plant.vehicle.m},
                  {"I_z", cfg.plant.vehicle.I_z},
                  {"l_f", cfg.plant.vehicle.l_f},
                  {"l_r", cfg.plant.vehicle.l_r},
                  {"g", cfg.plant.vehicle.g}};
  j["true_tires"] = tires_to_json(cfg.plant.true_tires);
  j["plant"] = {{"sigma_rel", cfg.plant.sigma_rel},
                {"noise_std_vy", cfg.plant.noise_std.v_y},
                {"noise_std_omega", cfg.plant.noise_std.omega},
                {"seed", cfg.plant.seed},
                {"dt_plant", cfg.plant.dt_plant},
                {"T_s", cfg.plant.T_s},
                {"v_x0", cfg.plant.v_x0}};
  return j;
}

TruthSidecar truth_sidecar_from_json(const nlohmann::json& doc) {
  TruthSidecar out{};
  if (!doc.contains("vehicle") || !doc.contains("true_tires")) {
    throw InvalidInput("truth sidecar: needs `vehicle` and `true_tires`");
  }
  const auto& v = doc.at("vehicle");
  out.vehicle = {jnum(v.at("m"), "vehicle.m"), jnum(v.at("I_z"), "vehicle.I_z"),
                 jnum(v.at("l_f"), "vehicle.l_f"), jnum(v.at("l_r"), "vehicle.l_r"),
                 jnum(v.at("g"), "vehicle.g")};
  out.true_tires = tires_from_json(doc.at("true_tires"), "true_tires");
  out.vehicle.validate();
  out.true_tires.validate();
  return out;
}

nlohmann::json tires_to_json(const TireParams& t) {
  return {{"front", axle_to_json(t.front)}, {"rear", axle_to_json(t.rear)}};
}

TireParams tires_from_json(const nlohmann::json& doc, const std::string& path) {
  if (!doc.is_object() || !doc.contains("front") || !doc.contains("rear")) {
    throw InvalidInput(path + ": expected {front, rear}");
  }
  return {axle_from_json(doc.at("front"), path + ".front"),
          axle_from_json(doc.at("rear"), path + ".rear")};
}

nlohmann::json report_to_json(const IdentifyReport& report) {
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["converged"] = report.converged;
  j["outer_iterations"] = report.outer_iterations;
  j["warm_started"] = report.warm_started;
  j["mu_hat"] = report.mu_hat;
  j["wall_time_s"] = report.wall_time_s;
  j["final_tires"] = tires_to_json(report.final_tires);
  nlohmann::json iters = nlohmann::json::array();
  for (std::size_t i = 0; i < report.iterates.size(); ++i) {
    const OuterIterate& it = report.iterates[i];
    iters.push_back({{"outer", i + 1},
                     {"tires", tires_to_json(it.tires)},
                     {"fit_loss_front", it.fit_loss_front},
                     {"fit_loss_rear", it.fit_loss_rear},
                     {"nm_iter_front", it.nm_iter_front},
                     {"nm_iter_rear", it.nm_iter_rear},
                     {"residual_val_loss", it.residual_val_loss},
                     {"max_rel_change", it.max_rel_change}});
  }
  j["iterations"] = std::move(iters);
  return j;
}

IdentifyReport report_from_json(const nlohmann::json& doc) {
  IdentifyReport r;
  r.converged = doc.at("converged").get<bool>();
  r.outer_iterations = doc.at("outer_iterations").get<int>();
  r.warm_started = doc.at("warm_started").get<bool>();
  r.mu_hat = doc.at("mu_hat").get<double>();
  r.wall_time_s = doc.at("wall_time_s").get<double>();
  r.final_tires = tires_from_json(doc.at("final_tires"), "final_tires");
  for (const auto& it : doc.at("iterations")) {
    OuterIterate oi;
    oi.tires = tires_from_json(it.at("tires"), "iterations.tires");
    oi.fit_loss_front = it.at("fit_loss_front").get<double>();
    oi.fit_loss_rear = it.at("fit_loss_rear").get<double>();
    oi.nm_iter_front = it.at("nm_iter_front").get<int>();
    oi.nm_iter_rear = it.at("nm_iter_rear").get<int>();
    oi.residual_val_loss = it.at("residual_val_loss").get<double>();
    oi.max_rel_change = it.at("max_rel_change").get<double>();
    r.iterates.push_back(std::move(oi));
  }
  return r;
}

namespace {

constexpr double kGridMax = 0.25;
constexpr int kGridPoints = 501;

}  // namespace

double curve_rmse(const AxlePacejka& a, const AxlePacejka& b) {
  double acc = 0.0;
  for (int i = 0; i < kGridPoints; ++i) {
    const double alpha = -kGridMax + 2.0 * kGridMax * static_cast<double>(i) /
                                         static_cast<double>(kGridPoints - 1);
    const double e = pacejka_normalized(alpha, a) - pacejka_normalized(alpha, b);
    acc += e * e;
  }
  return std::sqrt(acc / static_cast<double>(kGridPoints));
}

EvalMetrics evaluate_fit(const TireParams& fitted, const TireParams& truth,
                         int outer_iterations, bool converged) {
  EvalMetrics m;
  m.fyf_rmse = curve_rmse(fitted.front, truth.front);
  m.fyr_rmse = curve_rmse(fitted.rear, truth.rear);
  const auto pct = [](double fit, double tru) {
    return 100.0 * std::abs(fit - tru) / std::max(std::abs(tru), 1e-12);
  };
  m.front_err_pct = {pct(fitted.front.B, truth.front.B), pct(fitted.front.C, truth.front.C),
                     pct(fitted.front.D, truth.front.D), pct(fitted.front.E, truth.front.E)};
  m.rear_err_pct = {pct(fitted.rear.B, truth.rear.B), pct(fitted.rear.C, truth.rear.C),
                    pct(fitted.rear.D, truth.rear.D), pct(fitted.rear.E, truth.rear.E)};
  m.outer_iterations = outer_iterations;
  m.converged = converged;
  return m;
}

nlohmann::json metrics_to_json(const EvalMetrics& m) {
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["fyf_rmse"] = m.fyf_rmse;
  j["fyr_rmse"] = m.fyr_rmse;
  j["coeff_error_pct"] = {{"front", axle_to_json(m.front_err_pct)},
                          {"rear", axle_to_json(m.rear_err_pct)}};
  j["outer_iterations"] = m.outer_iterations;
  j["converged"] = m.converged;
  return j;
}

void write_sweep_csv(const SweepDataset& sweep, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InvalidInput("cannot open for writing: " + path);
  os << "axle,alpha,fy_norm\n";
  char buf[96];
  for (const SweepPoint& pt : sweep.front) {
    std::snprintf(buf, sizeof(buf), "front,%.12g,%.12g\n", pt.alpha, pt.fy_norm);
    os << buf;
  }
  for (const SweepPoint& pt : sweep.rear) {
    std::snprintf(buf, sizeof(buf), "rear,%.12g,%.12g\n", pt.alpha, pt.fy_norm);
    os << buf;
  }
}

void write_curves_csv(const TireParams& fitted, const TireParams& truth,
                      const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InvalidInput("cannot open for writing: " + path);
  os << "alpha,fyf_fit,fyf_true,fyr_fit,fyr_true\n";
  char buf[160];
  for (int i = 0; i < kGridPoints; ++i) {
    const double alpha = -kGridMax + 2.0 * kGridMax * static_cast<double>(i) /
                                         static_cast<double>(kGridPoints - 1);
    std::snprintf(buf, sizeof(buf), "%.12g,%.12g,%.12g,%.12g,%.12g\n", alpha,
                  pacejka_normalized(alpha, fitted.front), pacejka_normalized(alpha, truth.front),
                  pacejka_normalized(alpha, fitted.rear), pacejka_normalized(alpha, truth.rear));
    os << buf;
  }
}

void write_json_file(const nlohmann::json& doc, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InvalidInput("cannot open for writing: " + path);
  os << doc.dump(2) << "\n";
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InvalidInput("cannot open file: " + path);
  try {
    nlohmann::json doc;
    is >> doc;
    return doc;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(path + ": JSON parse error: " + e.what());
  }
}

}  // namespace tireid
