#include "tireid/telemetry.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "tireid/dynamics.hpp"
#include "tireid/errors.hpp"

namespace tireid {

void TelemetryLog::validate() const {
  if (records.size() < 2) throw InvalidInput("TelemetryLog needs at least 2 records");
  if (!(T_s > 0.0)) throw InvalidInput("TelemetryLog.T_s must be positive");
  for (std::size_t k = 0; k < records.size(); ++k) {
    const TelemetryRecord& r = records[k];
    if (std::abs(r.t - static_cast<double>(k) * T_s) > 1e-9) {
      throw InvalidInput("TelemetryLog: t[" + std::to_string(k) + "] deviates from k*T_s");
    }
    if (!(r.v_x > kMinLongitudinalSpeed)) {
      throw InvalidInput("TelemetryLog: v_x[" + std::to_string(k) + "] at or below " +
                         std::to_string(kMinLongitudinalSpeed) + " m/s");
    }
  }
}

double TelemetryLog::mean_v_x() const {
  double sum = 0.0;
  for (const TelemetryRecord& r : records) sum += r.v_x;
  return records.empty() ? 0.0 : sum / static_cast<double>(records.size());
}

void write_telemetry_csv(const TelemetryLog& log, std::ostream& os) {
  os << "t,vx,vy,omega,delta\n";
  char buf[256];
  // 17 significant digits: the parsed values are bit-identical to the written
  // ones, so t_k = k*T_s survives the round trip exactly.
  for (const TelemetryRecord& r : log.records) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g\n", r.t, r.v_x, r.v_y,
                  r.omega, r.delta);
    os << buf;
  }
}

void write_telemetry_csv(const TelemetryLog& log, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InvalidInput("cannot open for writing: " + path);
  write_telemetry_csv(log, os);
}

TelemetryLog read_telemetry_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw InvalidInput("telemetry CSV is empty");
  if (line == "t,vx,vy,omega,delta\r") line.pop_back();
  if (line != "t,vx,vy,omega,delta") {
    throw InvalidInput("telemetry CSV header mismatch, got: " + line);
  }
  TelemetryLog log;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    TelemetryRecord r{};
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf", &r.t, &r.v_x, &r.v_y, &r.omega,
                    &r.delta) != 5) {
      throw InvalidInput("telemetry CSV parse error at line " + std::to_string(lineno));
    }
    log.records.push_back(r);
  }
  if (log.records.size() >= 2) log.T_s = log.records[1].t - log.records[0].t;
  log.validate();
  return log;
}

TelemetryLog read_telemetry_csv(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InvalidInput("cannot open telemetry file: " + path);
  return read_telemetry_csv(is);
}

}  // namespace tireid
