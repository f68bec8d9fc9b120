#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tireid {

struct TelemetryRecord {
  double t;      // [s], always k * T_s
  double v_x;    // [m/s]
  double v_y;    // [m/s]
  double omega;  // [rad/s]
  double delta;  // [rad], input held over [t_k, t_k + T_s)
};

struct TelemetryLog {
  double T_s = 0.0;
  std::vector<TelemetryRecord> records;

  std::size_t size() const { return records.size(); }
  void validate() const;
  double mean_v_x() const;
};

// CSV with header `t,vx,vy,omega,delta`, LF line endings, >= 9 significant digits.
void write_telemetry_csv(const TelemetryLog& log, std::ostream& os);
void write_telemetry_csv(const TelemetryLog& log, const std::string& path);
TelemetryLog read_telemetry_csv(std::istream& is);
TelemetryLog read_telemetry_csv(const std::string& path);

}  // namespace tireid
