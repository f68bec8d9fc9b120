#include "tireid/neldermead.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "tireid/errors.hpp"

namespace tireid {

void NmOptions::validate() const {
  if (!(reflection > 0.0 && expansion > 0.0 && contraction > 0.0 && shrink > 0.0)) {
    throw InvalidInput("NmOptions: coefficients must be positive");
  }
  if (max_iter < 1) throw InvalidInput("NmOptions.max_iter must be >= 1");
  if (!(f_tol >= 0.0)) throw InvalidInput("NmOptions.f_tol must be >= 0");
}

NmResult nelder_mead(const std::function<double(std::span<const double>)>& objective,
                     std::vector<double> x0, const NmOptions& opts) {
  opts.validate();
  const std::size_t n = x0.size();
  if (n == 0) throw InvalidInput("nelder_mead: empty start point");
  if (!opts.initial_step.empty() && opts.initial_step.size() != n) {
    throw InvalidInput("NmOptions.initial_step size mismatch");
  }

  std::vector<std::vector<double>> verts;
  verts.reserve(n + 1);
  verts.push_back(x0);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> v = x0;
    v[i] += opts.initial_step.empty() ? 0.1 : opts.initial_step[i];
    verts.push_back(std::move(v));
  }
  std::vector<double> fv(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    fv[i] = objective(verts[i]);
    if (!std::isfinite(fv[i])) {
      throw InvalidInput("nelder_mead: objective non-finite at initial simplex vertex " +
                         std::to_string(i));
    }
  }

  // order[] ranks vertices best..worst; ties broken by smaller index.
  std::vector<std::size_t> order(n + 1);
  const auto sort_order = [&] {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
  };

  NmResult res;
  res.best_history.reserve(static_cast<std::size_t>(opts.max_iter));

  std::vector<double> centroid(n), xr(n), xe(n), xc(n);
  int iter = 0;
  for (; iter < opts.max_iter; ++iter) {
    sort_order();
    const double spread = fv[order[n]] - fv[order[0]];
    if (spread < opts.f_tol) {
      res.converged = true;
      res.best_history.push_back(fv[order[0]]);
      ++iter;
      break;
    }

    const std::size_t worst = order[n];
    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t j = 0; j < n; ++j) centroid[j] += verts[order[r]][j];
    }
    for (double& cj : centroid) cj /= static_cast<double>(n);

    for (std::size_t j = 0; j < n; ++j) {
      xr[j] = centroid[j] + opts.reflection * (centroid[j] - verts[worst][j]);
    }
    const double fr = objective(xr);

    bool need_shrink = false;
    if (fr < fv[order[0]]) {
      for (std::size_t j = 0; j < n; ++j) {
        xe[j] = centroid[j] + opts.expansion * (xr[j] - centroid[j]);
      }
      const double fe = objective(xe);
      if (fe < fr) {
        verts[worst] = xe;
        fv[worst] = fe;
      } else {
        verts[worst] = xr;
        fv[worst] = fr;
      }
    } else if (fr < fv[order[n - 1]]) {
      verts[worst] = xr;
      fv[worst] = fr;
    } else if (fr < fv[worst]) {
      // outside contraction
      for (std::size_t j = 0; j < n; ++j) {
        xc[j] = centroid[j] + opts.contraction * (xr[j] - centroid[j]);
      }
      const double fc = objective(xc);
      if (fc <= fr) {
        verts[worst] = xc;
        fv[worst] = fc;
      } else {
        need_shrink = true;
      }
    } else {
      // inside contraction
      for (std::size_t j = 0; j < n; ++j) {
        xc[j] = centroid[j] - opts.contraction * (centroid[j] - verts[worst][j]);
      }
      const double fc = objective(xc);
      if (fc < fv[worst]) {
        verts[worst] = xc;
        fv[worst] = fc;
      } else {
        need_shrink = true;
      }
    }

    if (need_shrink) {
      // The best vertex is kept, so the running best never regresses.
      for (std::size_t i = 0; i <= n; ++i) {
        if (i == order[0]) continue;
        for (std::size_t j = 0; j < n; ++j) {
          verts[i][j] = verts[order[0]][j] + opts.shrink * (verts[i][j] - verts[order[0]][j]);
        }
        fv[i] = objective(verts[i]);
      }
    }
    res.best_history.push_back(*std::min_element(fv.begin(), fv.end()));
  }

  sort_order();
  res.x = verts[order[0]];
  res.f = fv[order[0]];
  res.iterations = iter;
  return res;
}

}  // namespace tireid
