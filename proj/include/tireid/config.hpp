#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "tireid/identify.hpp"
#include "tireid/plant.hpp"
#include "tireid/train.hpp"

namespace tireid {

inline constexpr int kSchemaVersion = 1;

struct ManeuverConfig {
  std::string kind = "sine_sweep";  // sine_sweep | slalom | ramp | pure_pursuit
  double duration = 30.0;
  double amplitude = 0.08;
  double f0 = 0.1;
  double f1 = 0.8;
  double period = 4.0;
  // pure-pursuit route: sinusoidal centerline y = A sin(2 pi x / wavelength)
  double path_amplitude = 15.0;
  double path_wavelength = 200.0;
  double lookahead = 8.0;

  void validate() const;
};

struct PriorConfig {
  std::optional<double> mu;  // manual friction override
  std::string file;          // per-frame probability CSV
  std::string basis_file;    // JSON basis sidecar
};

struct OuterConfig {
  int max_outer = 10;
  double param_tol = 1e-3;
};

struct RunConfig {
  std::uint64_t seed = 42;
  PlantConfig plant;
  ManeuverConfig maneuver;
  PriorConfig prior;
  TireParams init_tires{{8.0, 1.5, 0.51, 0.5}, {8.0, 1.5, 0.51, 0.5}};
  TrainConfig train;
  SweepConfig sweep;
  FitOptions fit;
  OuterConfig outer;

  IdentifyOptions identify_options() const;
  // Re-derives subordinate seeds: plant.seed = seed, train.seed = seed + 1.
  void apply_global_seed(std::uint64_t s);
};

RunConfig run_config_from_json(const nlohmann::json& doc);
nlohmann::json run_config_to_json(const RunConfig& cfg);
RunConfig load_run_config(const std::string& path);

// Telemetry generation per the maneuver config.
TelemetryLog run_simulation(const RunConfig& cfg);

// Ground-truth sidecar for oracle scoring.
nlohmann::json truth_sidecar_json(const RunConfig& cfg);
struct TruthSidecar {
  VehicleParams vehicle;
  TireParams true_tires;
};
TruthSidecar truth_sidecar_from_json(const nlohmann::json& doc);

nlohmann::json tires_to_json(const TireParams& t);
TireParams tires_from_json(const nlohmann::json& doc, const std::string& path);

nlohmann::json report_to_json(const IdentifyReport& report);
IdentifyReport report_from_json(const nlohmann::json& doc);

// Normalized-force RMSE between two tire curves on a dense slip-angle grid.
double curve_rmse(const AxlePacejka& a, const AxlePacejka& b);

struct EvalMetrics {
  double fyf_rmse = 0.0;
  double fyr_rmse = 0.0;
  AxlePacejka front_err_pct{};
  AxlePacejka rear_err_pct{};
  int outer_iterations = 0;
  bool converged = false;
};

EvalMetrics evaluate_fit(const TireParams& fitted, const TireParams& truth,
                         int outer_iterations, bool converged);
nlohmann::json metrics_to_json(const EvalMetrics& m);

// CSV `axle,alpha,fy_norm` rows for one sweep dataset.
void write_sweep_csv(const SweepDataset& sweep, const std::string& path);
// CSV `alpha,fyf_fit,fyf_true,fyr_fit,fyr_true` over the dense grid.
void write_curves_csv(const TireParams& fitted, const TireParams& truth,
                      const std::string& path);

void write_json_file(const nlohmann::json& doc, const std::string& path);
nlohmann::json read_json_file(const std::string& path);

}  // namespace tireid
