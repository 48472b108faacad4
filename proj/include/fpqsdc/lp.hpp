#pragma once

// Decoy-state linear programs and a small dense simplex solver.
//
// Variables are the n-photon yields (or error yields) of the three
// intensity classes, x[i * (n_cut + 1) + n], each boxed in [0, 1].

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "fpqsdc/errors.hpp"
#include "fpqsdc/states.hpp"

namespace fpqsdc {

enum class RowSense { le, ge, eq };

struct LpRow {
  std::vector<double> coeffs;  // dense, one per variable
  RowSense sense = RowSense::le;
  double rhs = 0;
  std::string label;
};

struct LpProblem {
  std::vector<std::string> names;
  std::vector<double> objective;  // minimized unless maximize is set
  bool maximize = false;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<LpRow> rows;

  std::size_t size() const { return names.size(); }

  std::size_t add_variable(std::string name, double lo = 0.0, double hi = 1.0) {
    names.push_back(std::move(name));
    objective.push_back(0.0);
    lower.push_back(lo);
    upper.push_back(hi);
    for (LpRow& r : rows) r.coeffs.push_back(0.0);
    return names.size() - 1;
  }

  LpRow& add_row(RowSense sense, double rhs, std::string label) {
    rows.push_back({std::vector<double>(size(), 0.0), sense, rhs, std::move(label)});
    return rows.back();
  }

  void validate() const {
    const std::size_t n = size();
    if (objective.size() != n || lower.size() != n || upper.size() != n)
      throw InvariantError("LP variable arrays have inconsistent sizes");
    for (std::size_t j = 0; j < n; ++j)
      if (!(std::isfinite(lower[j]) && std::isfinite(upper[j]) && lower[j] <= upper[j]))
        throw InvariantError("LP variable " + names[j] + " has invalid bounds");
    for (const LpRow& r : rows) {
      if (r.coeffs.size() != n) throw InvariantError("LP row " + r.label + " has wrong width");
      if (!std::isfinite(r.rhs)) throw InvariantError("LP row " + r.label + " has non-finite rhs");
      for (double c : r.coeffs)
        if (!std::isfinite(c)) throw InvariantError("LP row " + r.label + " is not finite");
    }
  }
};

enum class LpStatus { optimal, infeasible, unbounded };

inline const char* to_string(LpStatus s) {
  switch (s) {
    case LpStatus::optimal: return "optimal";
    case LpStatus::infeasible: return "infeasible";
    case LpStatus::unbounded: return "unbounded";
  }
  return "?";
}

struct LpSolution {
  LpStatus status = LpStatus::infeasible;
  double objective = 0;
  std::vector<double> x;
  int pivots = 0;
  double max_violation = 0;
};

// Largest violation of rows and bounds by x.
inline double constraint_violation(const LpProblem& p, const std::vector<double>& x) {
  double worst = 0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    worst = std::max(worst, p.lower[j] - x[j]);
    worst = std::max(worst, x[j] - p.upper[j]);
  }
  for (const LpRow& r : p.rows) {
    double lhs = 0;
    for (std::size_t j = 0; j < p.size(); ++j) lhs += r.coeffs[j] * x[j];
    switch (r.sense) {
      case RowSense::le: worst = std::max(worst, lhs - r.rhs); break;
      case RowSense::ge: worst = std::max(worst, r.rhs - lhs); break;
      case RowSense::eq: worst = std::max(worst, std::abs(lhs - r.rhs)); break;
    }
  }
  return worst;
}

inline bool is_feasible(const LpProblem& p, const std::vector<double>& x, double tol = 1e-9) {
  return x.size() == p.size() && constraint_violation(p, x) <= tol;
}

namespace detail {

// Dense tableau with the objective in the last row and the rhs in the last column.
class Tableau {
 public:
  Tableau(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), a_((rows + 1) * (cols + 1), 0.0) {}
  double& operator()(std::size_t r, std::size_t c) { return a_[r * (cols_ + 1) + c]; }
  double operator()(std::size_t r, std::size_t c) const { return a_[r * (cols_ + 1) + c]; }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  void pivot(std::size_t pr, std::size_t pc) {
    const double inv = 1.0 / (*this)(pr, pc);
    for (std::size_t c = 0; c <= cols_; ++c) (*this)(pr, c) *= inv;
    (*this)(pr, pc) = 1.0;
    for (std::size_t r = 0; r <= rows_; ++r) {
      if (r == pr) continue;
      const double f = (*this)(r, pc);
      if (f == 0.0) continue;
      for (std::size_t c = 0; c <= cols_; ++c) (*this)(r, c) -= f * (*this)(pr, c);
      (*this)(r, pc) = 0.0;
    }
  }

 private:
  std::size_t rows_, cols_;
  std::vector<double> a_;
};

constexpr double kPivotTol = 1e-12;
constexpr double kCostTol = 1e-12;

// Bland's rule simplex on the columns allowed by `usable`.  Returns false if unbounded.
inline bool run_simplex(Tableau& t, std::vector<std::size_t>& basis,
                        const std::vector<bool>& usable, int& pivots) {
  const std::size_t m = t.rows();
  const std::size_t obj = m;
  for (;;) {
    std::size_t enter = t.cols();
    for (std::size_t c = 0; c < t.cols(); ++c) {
      if (usable[c] && t(obj, c) < -kCostTol) {
        enter = c;
        break;
      }
    }
    if (enter == t.cols()) return true;
    std::size_t leave = m;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < m; ++r) {
      const double a = t(r, enter);
      if (a <= kPivotTol) continue;
      const double ratio = t(r, t.cols()) / a;
      if (ratio < best - 1e-15 ||
          (std::abs(ratio - best) <= 1e-15 && leave < m && basis[r] < basis[leave])) {
        best = ratio;
        leave = r;
      }
    }
    if (leave == m) return false;
    t.pivot(leave, enter);
    basis[leave] = enter;
    ++pivots;
    if (pivots > 100000) throw NumericalError("simplex exceeded the pivot budget");
  }
}

}  // namespace detail

// Two-phase dense simplex.  Variables are shifted to x' = x - lower; finite
// upper bounds become explicit rows.  Rows are scaled to unit max coefficient.
inline LpSolution solve_lp(const LpProblem& p) {
  p.validate();
  const std::size_t n = p.size();

  struct Row {
    std::vector<double> a;
    RowSense sense;
    double b;
  };
  std::vector<Row> rows;
  for (const LpRow& r : p.rows) {
    Row row{r.coeffs, r.sense, r.rhs};
    for (std::size_t j = 0; j < n; ++j) row.b -= r.coeffs[j] * p.lower[j];
    rows.push_back(std::move(row));
  }
  for (std::size_t j = 0; j < n; ++j) {
    Row row{std::vector<double>(n, 0.0), RowSense::le, p.upper[j] - p.lower[j]};
    row.a[j] = 1.0;
    rows.push_back(std::move(row));
  }
  for (Row& r : rows) {
    double scale = 0;
    for (double v : r.a) scale = std::max(scale, std::abs(v));
    if (scale > 0) {
      for (double& v : r.a) v /= scale;
      r.b /= scale;
    }
    if (r.b < 0) {
      for (double& v : r.a) v = -v;
      r.b = -r.b;
      if (r.sense == RowSense::le) r.sense = RowSense::ge;
      else if (r.sense == RowSense::ge) r.sense = RowSense::le;
    }
  }

  const std::size_t m = rows.size();
  std::size_t n_slack = 0, n_art = 0;
  for (const Row& r : rows) {
    if (r.sense != RowSense::eq) ++n_slack;
    if (r.sense != RowSense::le) ++n_art;
  }
  const std::size_t cols = n + n_slack + n_art;
  const std::size_t art0 = n + n_slack;
  detail::Tableau t(m, cols);
  std::vector<std::size_t> basis(m);
  std::size_t s = n, a = art0;
  for (std::size_t i = 0; i < m; ++i) {
    const Row& r = rows[i];
    for (std::size_t j = 0; j < n; ++j) t(i, j) = r.a[j];
    t(i, cols) = r.b;
    if (r.sense == RowSense::le) {
      t(i, s) = 1.0;
      basis[i] = s++;
    } else {
      if (r.sense == RowSense::ge) t(i, s++) = -1.0;
      t(i, a) = 1.0;
      basis[i] = a++;
    }
  }

  LpSolution sol;
  // Phase 1: minimize the sum of artificials.
  for (std::size_t i = 0; i < m; ++i) {
    if (basis[i] < art0) continue;
    for (std::size_t c = 0; c <= cols; ++c)
      if (c < art0 || c == cols) t(m, c) -= t(i, c);
  }
  std::vector<bool> usable(cols, true);
  detail::run_simplex(t, basis, usable, sol.pivots);
  if (-t(m, cols) > 1e-10) {
    sol.status = LpStatus::infeasible;
    return sol;
  }
  // Drive zero-level artificials out of the basis where possible.
  for (std::size_t i = 0; i < m; ++i) {
    if (basis[i] < art0) continue;
    for (std::size_t c = 0; c < art0; ++c) {
      if (std::abs(t(i, c)) > 1e-9) {
        t.pivot(i, c);
        basis[i] = c;
        ++sol.pivots;
        break;
      }
    }
  }
  for (std::size_t c = art0; c < cols; ++c) usable[c] = false;

  // Phase 2.
  const double sign = p.maximize ? -1.0 : 1.0;
  for (std::size_t c = 0; c <= cols; ++c) t(m, c) = 0.0;
  for (std::size_t j = 0; j < n; ++j) t(m, j) = sign * p.objective[j];
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t bc = basis[i];
    const double f = t(m, bc);
    if (f == 0.0) continue;
    for (std::size_t c = 0; c <= cols; ++c) t(m, c) -= f * t(i, c);
  }
  if (!detail::run_simplex(t, basis, usable, sol.pivots)) {
    sol.status = LpStatus::unbounded;
    return sol;
  }

  sol.x.assign(n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    if (basis[i] < n) sol.x[basis[i]] = t(i, cols);
  for (std::size_t j = 0; j < n; ++j)
    sol.x[j] = std::clamp(sol.x[j] + p.lower[j], p.lower[j], p.upper[j]);
  sol.objective = 0;
  for (std::size_t j = 0; j < n; ++j) sol.objective += p.objective[j] * sol.x[j];
  sol.max_violation = constraint_violation(p, sol.x);
  sol.status = LpStatus::optimal;
  return sol;
}

// Plain-text dump, one line per item:
//   var <name> <lower> <upper> <objective coefficient>
//   row <label> <le|ge|eq> <rhs> : <coef> <name> ...   (zero coefficients omitted)
inline void dump_lp(std::ostream& os, const LpProblem& p) {
  os.precision(17);
  os << (p.maximize ? "maximize" : "minimize") << "\n";
  for (std::size_t j = 0; j < p.size(); ++j)
    os << "var " << p.names[j] << " " << p.lower[j] << " " << p.upper[j] << " " << p.objective[j]
       << "\n";
  for (const LpRow& r : p.rows) {
    const char* s = r.sense == RowSense::le ? "le" : r.sense == RowSense::ge ? "ge" : "eq";
    os << "row " << r.label << " " << s << " " << r.rhs << " :";
    for (std::size_t j = 0; j < p.size(); ++j)
      if (r.coeffs[j] != 0.0) os << " " << r.coeffs[j] << " " << p.names[j];
    os << "\n";
  }
}

// --- Decoy LPs -----------------------------------------------------------------

// What the LP sees of one intensity class.
struct ClassGain {
  std::vector<double> poisson;  // <P_I(n)>, n = 0..n_cut
  double gain = 0;              // <Q^BA> or <E Q^BA>
};

enum class DecoyKind { yield, error_yield };

inline std::size_t decoy_index(int klass, int n, int n_cut) {
  return static_cast<std::size_t>(klass) * (n_cut + 1) + n;
}

// Yield LP: minimize Y1 of the signal class.  Error LP: maximize e1Y1.
// Ties across classes hold for n < couple_from; larger n are coupled by the
// trace distances.  With fewer than three classes only the gain sandwich of
// each class remains besides the ties.
inline LpProblem build_decoy_lp(DecoyKind kind, const std::vector<ClassGain>& classes,
                                const TraceDistanceTable& dist, int n_cut) {
  if (classes.empty()) throw InvariantError("decoy LP needs at least one intensity class");
  for (const ClassGain& c : classes) {
    if (c.poisson.size() != static_cast<std::size_t>(n_cut) + 1)
      throw InvariantError("decoy LP class statistics do not match n_cut");
    if (!(c.gain >= 0 && c.gain <= 1)) throw InvariantError("decoy LP gain must lie in [0, 1]");
  }
  if (classes.size() > 1 && dist.n_cut() < n_cut)
    throw InvariantError("trace distance table does not reach n_cut");
  const int couple_from = kind == DecoyKind::yield ? 2 : 1;
  const char* prefix = kind == DecoyKind::yield ? "Y" : "eY";
  static const char* cls[] = {"d1", "d2", "s"};
  const int nc = static_cast<int>(classes.size());
  const int signal = nc - 1;

  LpProblem p;
  for (int i = 0; i < nc; ++i)
    for (int n = 0; n <= n_cut; ++n)
      p.add_variable(std::string(prefix) + std::to_string(n) + "_" + (nc == 3 ? cls[i] : std::to_string(i)));

  for (int i = 0; i < nc; ++i) {
    const ClassGain& c = classes[i];
    double covered = 0;
    for (double v : c.poisson) covered += v;
    const std::string tag = nc == 3 ? cls[i] : std::to_string(i);
    LpRow& up = p.add_row(RowSense::le, c.gain, "gain_upper_" + tag);
    for (int n = 0; n <= n_cut; ++n) up.coeffs[decoy_index(i, n, n_cut)] = c.poisson[n];
    LpRow& lo = p.add_row(RowSense::ge, c.gain - std::max(0.0, 1 - covered), "gain_lower_" + tag);
    for (int n = 0; n <= n_cut; ++n) lo.coeffs[decoy_index(i, n, n_cut)] = c.poisson[n];
  }
  for (int n = 0; n < couple_from; ++n)
    for (int i = 1; i < nc; ++i) {
      LpRow& r = p.add_row(RowSense::eq, 0.0, "tie_n" + std::to_string(n) + "_" + std::to_string(i));
      r.coeffs[decoy_index(0, n, n_cut)] = 1;
      r.coeffs[decoy_index(i, n, n_cut)] = -1;
    }
  for (int n = couple_from; n <= n_cut; ++n)
    for (int i = 0; i < nc; ++i)
      for (int j = i + 1; j < nc; ++j) {
        const double d = dist(n, i, j);
        const std::string tag = "couple_n" + std::to_string(n) + "_" + std::to_string(i) + std::to_string(j);
        LpRow& a = p.add_row(RowSense::le, d, tag + "_plus");
        a.coeffs[decoy_index(i, n, n_cut)] = 1;
        a.coeffs[decoy_index(j, n, n_cut)] = -1;
        LpRow& b = p.add_row(RowSense::le, d, tag + "_minus");
        b.coeffs[decoy_index(i, n, n_cut)] = -1;
        b.coeffs[decoy_index(j, n, n_cut)] = 1;
      }
  p.objective[decoy_index(signal, 1, n_cut)] = 1.0;
  p.maximize = kind == DecoyKind::error_yield;
  return p;
}

inline LpProblem build_yield_lp(const std::vector<ClassGain>& classes, const TraceDistanceTable& dist,
                                int n_cut) {
  return build_decoy_lp(DecoyKind::yield, classes, dist, n_cut);
}

inline LpProblem build_error_lp(const std::vector<ClassGain>& classes, const TraceDistanceTable& dist,
                                int n_cut) {
  return build_decoy_lp(DecoyKind::error_yield, classes, dist, n_cut);
}

// Stacks per-class n-photon values into an LP point.
inline std::vector<double> decoy_point(const std::vector<std::vector<double>>& per_class) {
  std::vector<double> x;
  for (const auto& v : per_class) x.insert(x.end(), v.begin(), v.end());
  return x;
}

class LpFailure : public NumericalError {
 public:
  LpFailure(const std::string& what, LpStatus status) : NumericalError(what), status_(status) {}
  LpStatus status() const { return status_; }

 private:
  LpStatus status_;
};

struct SinglePhotonBounds {
  double y1_min = 0;
  double e1y1_max = 0;
  double e1_max = 0.5;
  bool single_photon_guarantee = false;  // false when y1_min is zero
};

// Inputs for one basis: union-of-states class gains for the yield LP and,
// per state, error-click gains for the error LP.
struct DecoyInputs {
  int n_cut = 7;
  std::vector<ClassGain> yield_classes;
  TraceDistanceTable yield_distances;
  std::vector<std::vector<ClassGain>> error_classes;  // per state
  std::vector<TraceDistanceTable> error_distances;    // per state
};

inline SinglePhotonBounds single_photon_bounds(const DecoyInputs& in) {
  const LpSolution y = solve_lp(build_yield_lp(in.yield_classes, in.yield_distances, in.n_cut));
  if (y.status != LpStatus::optimal)
    throw LpFailure(std::string("yield LP is ") + to_string(y.status), y.status);
  SinglePhotonBounds b;
  b.y1_min = std::max(0.0, y.objective);
  for (std::size_t k = 0; k < in.error_classes.size(); ++k) {
    const LpSolution e =
        solve_lp(build_error_lp(in.error_classes[k], in.error_distances[k], in.n_cut));
    if (e.status != LpStatus::optimal)
      throw LpFailure(std::string("error-yield LP is ") + to_string(e.status), e.status);
    b.e1y1_max = std::max(b.e1y1_max, e.objective);
  }
  b.single_photon_guarantee = b.y1_min > 0;
  b.e1_max = b.single_photon_guarantee ? std::clamp(b.e1y1_max / b.y1_min, 0.0, 0.5) : 0.5;
  return b;
}

}  // namespace fpqsdc
