#pragma once

// Operating-point search: coarse grid over (I, delta_x, delta_z) followed by
// Nelder-Mead refinement from the best cell.  This is a heuristic; it gives
// no global-optimality guarantee.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <tuple>
#include <vector>

#include "fpqsdc/errors.hpp"
#include "fpqsdc/parallel.hpp"
#include "fpqsdc/params.hpp"
#include "fpqsdc/security.hpp"

namespace fpqsdc {

struct Bounds {
  double lo = 0;
  double hi = 0;
};

struct SearchSpace {
  Bounds intensity{1e-3, 0.5};
  Bounds delta_x{0.01 * kPi, 0.15 * kPi};
  Bounds delta_z{0.01 * kPi, 0.15 * kPi};
  int grid_intensity = 12;  // log-spaced
  int grid_delta_x = 10;
  int grid_delta_z = 10;
  int refine_iterations = 60;

  void validate() const {
    using detail::require;
    require(intensity.lo > 0 && intensity.lo < intensity.hi && intensity.hi <= 0.5,
            "intensity search range must satisfy 0 < lo < hi <= 0.5");
    for (const Bounds* b : {&delta_x, &delta_z})
      require(b->lo > 0 && b->lo < b->hi && b->hi <= 0.15 * kPi + 1e-12,
              "delta search range must satisfy 0 < lo < hi <= 0.15 pi");
    require(grid_intensity >= 2 && grid_delta_x >= 2 && grid_delta_z >= 2,
            "grid resolutions must be at least 2");
    require(refine_iterations >= 0, "refine_iterations must be non-negative");
  }
};

struct OperatingPoint {
  double intensity = 0;
  double delta_x = 0;
  double delta_z = 0;
};

// Points are snapped to 1e-6 in I and in delta / pi before evaluation, so a
// cached value is exactly what a fresh evaluation at the stored point gives.
inline OperatingPoint snap(const OperatingPoint& p) {
  auto r = [](double v) { return std::round(v * 1e6) / 1e6; };
  return {r(p.intensity), r(p.delta_x / kPi) * kPi, r(p.delta_z / kPi) * kPi};
}

struct TraceEntry {
  std::string stage;  // grid | refine
  int step = 0;
  OperatingPoint point;
  double rate = 0;
};

struct OptResult {
  double attenuation_db = 0;
  OperatingPoint best;
  double rate = 0;
  double grid_best_rate = 0;
  bool beyond_cutoff = false;
  int evaluations = 0;         // distinct pipeline runs
  int failed_evaluations = 0;  // pipeline errors, scored as rate 0
  std::vector<TraceEntry> trace;
};

// Memoized rate at one attenuation.  Thread-safe.
class RateObjective {
 public:
  RateObjective(SystemParams sys, double attenuation_db, EvalOptions opt = {})
      : sys_(sys), attenuation_db_(attenuation_db), opt_(opt) {
    opt_.exploit_symmetry = true;
  }

  double attenuation_db() const { return attenuation_db_; }

  double operator()(const OperatingPoint& raw) {
    const OperatingPoint p = snap(raw);
    const auto key = std::make_tuple(std::llround(p.intensity * 1e6),
                                     std::llround(p.delta_x / kPi * 1e6),
                                     std::llround(p.delta_z / kPi * 1e6));
    {
      std::lock_guard lock(mutex_);
      auto it = cache_.find(key);
      if (it != cache_.end()) return it->second;
    }
    double rate = 0;
    bool failed = false;
    try {
      rate = evaluate(sys_, SourceParams::from_point(p.intensity, p.delta_x, p.delta_z),
                      attenuation_db_, opt_)
                 .rate;
    } catch (const InvariantError&) {
      throw;
    } catch (const std::exception&) {
      failed = true;
    }
    std::lock_guard lock(mutex_);
    auto [it, inserted] = cache_.emplace(key, rate);
    if (inserted) {
      ++evaluations_;
      if (failed) ++failures_;
    }
    return it->second;
  }

  int evaluations() const {
    std::lock_guard lock(mutex_);
    return evaluations_;
  }
  int failures() const {
    std::lock_guard lock(mutex_);
    return failures_;
  }

 private:
  SystemParams sys_;
  double attenuation_db_;
  EvalOptions opt_;
  mutable std::mutex mutex_;
  std::map<std::tuple<long long, long long, long long>, double> cache_;
  int evaluations_ = 0;
  int failures_ = 0;
};

namespace detail {

using Unit = std::array<double, 3>;

inline OperatingPoint from_unit(const SearchSpace& s, const Unit& u) {
  const double li = std::log(s.intensity.lo), hi = std::log(s.intensity.hi);
  auto lin = [](const Bounds& b, double t) { return b.lo + t * (b.hi - b.lo); };
  return {std::exp(li + u[0] * (hi - li)), lin(s.delta_x, u[1]), lin(s.delta_z, u[2])};
}

inline Unit clamp_unit(Unit u) {
  for (double& v : u) v = std::clamp(v, 0.0, 1.0);
  return u;
}

}  // namespace detail

inline OptResult optimize(RateObjective& objective, const SearchSpace& space, unsigned jobs = 1) {
  space.validate();
  OptResult res;
  res.attenuation_db = objective.attenuation_db();

  // Coarse grid, evaluated in parallel into fixed slots.
  const int ni = space.grid_intensity, nx = space.grid_delta_x, nz = space.grid_delta_z;
  const std::size_t total = static_cast<std::size_t>(ni) * nx * nz;
  std::vector<detail::Unit> units(total);
  for (int a = 0; a < ni; ++a)
    for (int b = 0; b < nx; ++b)
      for (int c = 0; c < nz; ++c)
        units[(static_cast<std::size_t>(a) * nx + b) * nz + c] = {
            static_cast<double>(a) / (ni - 1), static_cast<double>(b) / (nx - 1),
            static_cast<double>(c) / (nz - 1)};
  std::vector<double> rates(total);
  parallel_for(total, jobs, [&](std::size_t i) {
    rates[i] = objective(detail::from_unit(space, units[i]));
  });
  std::size_t best = 0;
  for (std::size_t i = 0; i < total; ++i) {
    res.trace.push_back({"grid", static_cast<int>(i), snap(detail::from_unit(space, units[i])), rates[i]});
    if (rates[i] > rates[best]) best = i;
  }
  res.grid_best_rate = rates[best];
  res.best = snap(detail::from_unit(space, units[best]));
  res.rate = rates[best];

  if (res.rate > 0 && space.refine_iterations > 0) {
    // Nelder-Mead on the unit cube, maximizing the rate.
    const std::array<double, 3> step = {1.0 / (ni - 1), 1.0 / (nx - 1), 1.0 / (nz - 1)};
    std::array<detail::Unit, 4> simplex;
    std::array<double, 4> value;
    simplex[0] = units[best];
    for (int d = 0; d < 3; ++d) {
      simplex[d + 1] = simplex[0];
      simplex[d + 1][d] += simplex[0][d] + step[d] <= 1.0 ? step[d] : -step[d];
    }
    auto f = [&](const detail::Unit& u) { return objective(detail::from_unit(space, u)); };
    for (int v = 0; v < 4; ++v) value[v] = f(simplex[v]);

    for (int it = 0; it < space.refine_iterations; ++it) {
      std::array<int, 4> order = {0, 1, 2, 3};
      std::sort(order.begin(), order.end(), [&](int a, int b) { return value[a] > value[b]; });
      const int worst = order[3];
      detail::Unit centroid{0, 0, 0};
      for (int v = 0; v < 3; ++v)
        for (int d = 0; d < 3; ++d) centroid[d] += simplex[order[v]][d] / 3;
      auto along = [&](double t) {
        detail::Unit u;
        for (int d = 0; d < 3; ++d) u[d] = centroid[d] + t * (simplex[worst][d] - centroid[d]);
        return detail::clamp_unit(u);
      };
      const detail::Unit xr = along(-1.0);
      const double fr = f(xr);
      if (fr > value[order[0]]) {
        const detail::Unit xe = along(-2.0);
        const double fe = f(xe);
        if (fe > fr) {
          simplex[worst] = xe;
          value[worst] = fe;
        } else {
          simplex[worst] = xr;
          value[worst] = fr;
        }
      } else if (fr > value[order[2]]) {
        simplex[worst] = xr;
        value[worst] = fr;
      } else {
        const detail::Unit xc = fr > value[worst] ? along(-0.5) : along(0.5);
        const double fc = f(xc);
        if (fc > std::max(fr, value[worst])) {
          simplex[worst] = xc;
          value[worst] = fc;
        } else {
          const detail::Unit& top = simplex[order[0]];
          for (int v = 1; v < 4; ++v) {
            const int idx = order[v];
            for (int d = 0; d < 3; ++d) simplex[idx][d] = top[d] + 0.5 * (simplex[idx][d] - top[d]);
            value[idx] = f(simplex[idx]);
          }
        }
      }
      int top = 0;
      for (int v = 1; v < 4; ++v)
        if (value[v] > value[top]) top = v;
      if (value[top] > res.rate) {
        res.rate = value[top];
        res.best = snap(detail::from_unit(space, simplex[top]));
      }
      res.trace.push_back({"refine", it, res.best, res.rate});
    }
  }
  res.beyond_cutoff = !(res.rate > 0);
  res.evaluations = objective.evaluations();
  res.failed_evaluations = objective.failures();
  return res;
}

inline OptResult optimize(const SystemParams& sys, double attenuation_db, const SearchSpace& space,
                          const EvalOptions& opt = {}, unsigned jobs = 1) {
  RateObjective objective(sys, attenuation_db, opt);
  return optimize(objective, space, jobs);
}

// --- Maximum distance -------------------------------------------------------------

struct BisectionStep {
  double lo_db = 0, hi_db = 0;
  double rate_lo = 0, rate_hi = 0;
};

struct DistanceResult {
  double attenuation_db = 0;  // largest attenuation with a positive rate found
  double km = 0;
  OperatingPoint best;        // operating point at attenuation_db (passive search only)
  double rate = 0;
  std::vector<BisectionStep> steps;
};

// Bisection on attenuation.  `positive(db)` returns the best rate found at
// db; the bracket keeps rate(lo) > 0 >= rate(hi).  Stops at `resolution_km`.
inline DistanceResult bisect_distance(const SystemParams& sys, double lo_db, double hi_db,
                                      const std::function<double(double)>& positive,
                                      double resolution_km = 0.1) {
  if (!(lo_db >= 0 && hi_db > lo_db)) throw InvariantError("distance bracket must satisfy 0 <= lo < hi");
  DistanceResult out;
  double r_lo = positive(lo_db);
  if (!(r_lo > 0)) {
    // No positive rate even at the lower end: fall back to the back-to-back limit.
    if (lo_db > 0) {
      lo_db = 0;
      r_lo = positive(0);
    }
    if (!(r_lo > 0)) return out;
  }
  double r_hi = positive(hi_db);
  while (r_hi > 0) {
    lo_db = hi_db;
    r_lo = r_hi;
    hi_db *= 2;
    if (hi_db > 400) throw NumericalError("rate stays positive beyond 400 dB");
    r_hi = positive(hi_db);
  }
  const double resolution_db = km_to_attenuation(sys, resolution_km);
  out.steps.push_back({lo_db, hi_db, r_lo, r_hi});
  while (hi_db - lo_db > resolution_db) {
    const double mid = 0.5 * (lo_db + hi_db);
    const double r = positive(mid);
    if (r > 0) {
      lo_db = mid;
      r_lo = r;
    } else {
      hi_db = mid;
      r_hi = r;
    }
    out.steps.push_back({lo_db, hi_db, r_lo, r_hi});
  }
  out.attenuation_db = lo_db;
  out.km = attenuation_to_km(sys, lo_db);
  out.rate = r_lo;
  return out;
}

// Passive source.  Each probe first refines from the last positive operating
// point; any positive value certifies the probe, otherwise the full grid
// search decides.
inline DistanceResult max_distance(const SystemParams& sys, const SearchSpace& space,
                                   const EvalOptions& opt = {}, unsigned jobs = 1,
                                   double lo_db = 0, double hi_db = 20) {
  OptResult last_positive;
  bool have_positive = false;
  auto probe = [&](double db) {
    RateObjective objective(sys, db, opt);
    if (have_positive) {
      SearchSpace local = space;
      // A one-cell grid around the previous optimum, then refinement.
      const double fi = std::log(last_positive.best.intensity / space.intensity.lo) /
                        std::log(space.intensity.hi / space.intensity.lo);
      const double fx = (last_positive.best.delta_x - space.delta_x.lo) / (space.delta_x.hi - space.delta_x.lo);
      const double fz = (last_positive.best.delta_z - space.delta_z.lo) / (space.delta_z.hi - space.delta_z.lo);
      const double w = 0.1;
      auto sub = [&](double f, const Bounds& b, bool log_scale) {
        const double a = std::clamp(f - w, 0.0, 1.0), c = std::clamp(f + w, 0.0, 1.0);
        if (log_scale)
          return Bounds{b.lo * std::pow(b.hi / b.lo, a), b.lo * std::pow(b.hi / b.lo, c)};
        return Bounds{b.lo + a * (b.hi - b.lo), b.lo + c * (b.hi - b.lo)};
      };
      local.intensity = sub(fi, space.intensity, true);
      local.delta_x = sub(fx, space.delta_x, false);
      local.delta_z = sub(fz, space.delta_z, false);
      local.grid_intensity = local.grid_delta_x = local.grid_delta_z = 3;
      const OptResult warm = optimize(objective, local, jobs);
      if (warm.rate > 0) {
        last_positive = warm;
        return warm.rate;
      }
    }
    const OptResult full = optimize(objective, space, jobs);
    if (full.rate > 0) {
      last_positive = full;
      have_positive = true;
    }
    return full.rate;
  };
  DistanceResult out = bisect_distance(sys, lo_db, hi_db, probe);
  out.best = last_positive.best;
  return out;
}

inline DistanceResult active_max_distance(const SystemParams& sys, double lo_db = 0,
                                          double hi_db = 20) {
  return bisect_distance(sys, lo_db, hi_db,
                         [&](double db) { return optimize_active(sys, db).capacity; });
}

}  // namespace fpqsdc
