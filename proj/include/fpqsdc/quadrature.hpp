#pragma once

// Tensor-product Gauss-Legendre integration with dyadic refinement.
//
// Gauss-Legendre nodes are interior to the interval, so integrands with
// integrable endpoint singularities are never evaluated on the singular
// boundary.  Callers remove inverse-square-root endpoint behaviour with a
// change of variables before handing the integrand over (see source.hpp).

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <valarray>
#include <vector>

#include "fpqsdc/errors.hpp"

namespace fpqsdc {

struct GaussRule {
  std::vector<double> x;  // nodes on (-1, 1), ascending
  std::vector<double> w;
};

namespace detail {

inline GaussRule compute_gauss_legendre(int n) {
  GaussRule rule;
  rule.x.resize(n);
  rule.w.resize(n);
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 1; j <= n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double step = p0 / dp;
      z -= step;
      if (std::abs(step) < 1e-16) break;
    }
    {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 1; j <= n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
    }
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    rule.x[i] = -z;
    rule.x[n - 1 - i] = z;
    rule.w[i] = w;
    rule.w[n - 1 - i] = w;
  }
  if (n % 2 == 1) rule.x[n / 2] = 0.0;
  return rule;
}

}  // namespace detail

// Cached n-point rule on [-1, 1].  References stay valid for the program lifetime.
inline const GaussRule& gauss_legendre(int n) {
  if (n < 1) throw InvariantError("Gauss-Legendre rule needs at least one node");
  static std::mutex mutex;
  static std::map<int, GaussRule> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, detail::compute_gauss_legendre(n)).first;
  return it->second;
}

// Nodes and weights mapped onto [a, b].
struct MappedRule {
  std::vector<double> x;
  std::vector<double> w;
};

inline MappedRule gauss_on(int n, double a, double b) {
  const GaussRule& g = gauss_legendre(n);
  MappedRule r;
  r.x.resize(n);
  r.w.resize(n);
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  for (int i = 0; i < n; ++i) {
    r.x[i] = mid + half * g.x[i];
    r.w[i] = half * g.w[i];
  }
  return r;
}

struct Rect {
  double x_lo = 0, x_hi = 0;
  double y_lo = 0, y_hi = 0;

  bool empty() const { return !(x_hi > x_lo) || !(y_hi > y_lo); }
};

struct QuadratureSpec {
  int nodes = 16;  // starting nodes per axis
  int max_nodes = 512;
  double rel_tol = 1e-7;
  double abs_tol = 1e-15;

  void validate() const {
    if (nodes < 8) throw InvariantError("quadrature needs at least 8 nodes per axis");
    if (max_nodes < nodes) throw InvariantError("max_nodes must be >= nodes");
    if (!(rel_tol > 0)) throw InvariantError("quadrature tolerance must be positive");
  }
};

template <class T>
struct Estimate {
  T value{};
  double achieved_tolerance = 0;  // relative change at the final doubling
  int nodes = 0;                  // nodes per axis of the accepted estimate
};

class QuadratureError : public NumericalError {
 public:
  QuadratureError(const std::string& what, double previous, double last)
      : NumericalError(what), previous_(previous), last_(last) {}
  double previous() const { return previous_; }
  double last() const { return last_; }

 private:
  double previous_;
  double last_;
};

// Convergence helpers for scalar and vector-valued estimates.
namespace detail {

inline double relative_change(double prev, double cur, double abs_tol) {
  return std::abs(cur - prev) / std::max(std::abs(cur), abs_tol);
}

inline double relative_change(const std::valarray<double>& prev, const std::valarray<double>& cur,
                              double abs_tol) {
  double worst = 0;
  for (std::size_t i = 0; i < cur.size(); ++i)
    worst = std::max(worst, relative_change(prev[i], cur[i], abs_tol));
  return worst;
}

inline bool within(double prev, double cur, double rel, double abs) {
  return std::abs(cur - prev) <= rel * std::abs(cur) + abs;
}

inline bool within(const std::valarray<double>& prev, const std::valarray<double>& cur, double rel,
                   double abs) {
  for (std::size_t i = 0; i < cur.size(); ++i)
    if (!within(prev[i], cur[i], rel, abs)) return false;
  return true;
}

inline double headline(double v) { return v; }
inline double headline(const std::valarray<double>& v) { return v.size() ? v[0] : 0.0; }

template <class T>
T zero_like(const T& sample) {
  if constexpr (std::is_same_v<T, double>) {
    return 0.0;
  } else {
    return T(0.0, sample.size());
  }
}

}  // namespace detail

// Fixed n x n tensor rule.  The summation order is fixed (x outer, y inner),
// so results are bit-reproducible for a given n.
template <class G>
auto tensor_gauss(G&& g, const Rect& r, int n) {
  using T = std::decay_t<decltype(g(0.0, 0.0))>;
  const MappedRule rx = gauss_on(n, r.x_lo, r.x_hi);
  const MappedRule ry = gauss_on(n, r.y_lo, r.y_hi);
  T total{};
  bool first = true;
  for (int i = 0; i < n; ++i) {
    T row{};
    bool row_first = true;
    for (int j = 0; j < n; ++j) {
      T v = g(rx.x[i], ry.x[j]);
      v *= ry.w[j];
      if (row_first) {
        row = std::move(v);
        row_first = false;
      } else {
        row += v;
      }
    }
    row *= rx.w[i];
    if (first) {
      total = std::move(row);
      first = false;
    } else {
      total += row;
    }
  }
  return total;
}

// Doubles the nodes per axis until two successive estimates agree to the
// requested tolerance.  An empty rectangle integrates to zero without
// evaluating the integrand.
template <class G>
auto refine_until(G&& g, const Rect& r, const QuadratureSpec& spec) {
  using T = std::decay_t<decltype(g(0.0, 0.0))>;
  spec.validate();
  Estimate<T> out;
  if (r.empty()) {
    if constexpr (std::is_same_v<T, double>) {
      out.value = 0.0;
    } else {
      // Size unknown without evaluating; sample the integrand once at the corner.
      out.value = detail::zero_like(g(r.x_lo, r.y_lo));
    }
    out.nodes = 0;
    return out;
  }
  int n = spec.nodes;
  T prev = tensor_gauss(g, r, n);
  while (2 * n <= spec.max_nodes) {
    T cur = tensor_gauss(g, r, 2 * n);
    n *= 2;
    if (detail::within(prev, cur, spec.rel_tol, spec.abs_tol)) {
      out.achieved_tolerance = detail::relative_change(prev, cur, spec.abs_tol);
      out.value = std::move(cur);
      out.nodes = n;
      return out;
    }
    prev = std::move(cur);
    if (2 * n > spec.max_nodes) {
      // One more rule would exceed the budget: report the last two estimates.
      break;
    }
  }
  // prev holds the finest estimate computed; recompute the one before it for the message.
  const T coarser = tensor_gauss(g, r, n / 2);
  std::ostringstream msg;
  msg << "quadrature did not converge within " << spec.max_nodes
      << " nodes per axis; last two estimates " << detail::headline(coarser) << " and "
      << detail::headline(prev);
  throw QuadratureError(msg.str(), detail::headline(coarser), detail::headline(prev));
}

template <class G>
auto integrate_2d(G&& g, const Rect& r, const QuadratureSpec& spec = {}) {
  return refine_until(std::forward<G>(g), r, spec).value;
}

}  // namespace fpqsdc
