#pragma once

#include <functional>
#include <span>
#include <vector>

namespace tireid {

struct NmOptions {
  double reflection = 1.0;
  double expansion = 2.0;
  double contraction = 0.5;
  double shrink = 0.5;
  int max_iter = 2000;
  double f_tol = 1e-10;                // simplex spread termination
  std::vector<double> initial_step{};  // per-coordinate offsets; empty = 0.1 each

  void validate() const;
};

struct NmResult {
  std::vector<double> x;
  double f = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> best_history;  // best objective value after each iteration
};

// Standard downhill simplex. Deterministic: vertex ordering ties are broken by
// insertion index, the best vertex is never discarded.
NmResult nelder_mead(const std::function<double(std::span<const double>)>& objective,
                     std::vector<double> x0, const NmOptions& opts);

}  // namespace tireid
