#pragma once

// Fully passive source statistics.
//
// Four phase-random coherent pulses interfere into a single pulse of random
// intensity I and random polarization (theta, phi).  With u = cos^2 of the
// first half phase difference and w = cos^2 of the second, I = 2vt (u + w)
// and tan(theta/2) = sqrt(w/u); u and w are independent arcsine variables.
// The joint density restricted to I <= 2vt (half of all pulses, by the
// u -> 1-u, w -> 1-w symmetry) is
//
//   f(I, theta) = 1 / (vt pi^2 sqrt(1 - s cos^2(theta/2)) sqrt(1 - s sin^2(theta/2))),
//   s = I / 2vt,
//
// normalized on I in (0, 2vt], theta in [0, pi]; phi is uniform and
// independent.  Selection probabilities use the unconditional phi density
// 1/(2 pi).

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <valarray>
#include <vector>

#include "fpqsdc/errors.hpp"
#include "fpqsdc/params.hpp"
#include "fpqsdc/quadrature.hpp"

namespace fpqsdc {

inline constexpr double kPi = std::numbers::pi;

enum class Basis { Z, X, Y };
enum class IntensityClass { d1, d2, s };

inline constexpr Basis kBases[] = {Basis::Z, Basis::X, Basis::Y};
inline constexpr IntensityClass kClasses[] = {IntensityClass::d1, IntensityClass::d2,
                                              IntensityClass::s};

inline const char* to_string(Basis b) {
  switch (b) {
    case Basis::Z: return "Z";
    case Basis::X: return "X";
    case Basis::Y: return "Y";
  }
  return "?";
}

inline const char* to_string(IntensityClass c) {
  switch (c) {
    case IntensityClass::d1: return "d1";
    case IntensityClass::d2: return "d2";
    case IntensityClass::s: return "s";
  }
  return "?";
}

// State label within a basis: index 0 is H / D / R, index 1 is V / A / L.
inline const char* state_name(Basis b, int state) {
  static const char* names[3][2] = {{"H", "V"}, {"D", "A"}, {"R", "L"}};
  return names[static_cast<int>(b)][state];
}

struct Range {
  double lo = 0;
  double hi = 0;
  double width() const { return hi - lo; }
};

// One (theta, phi) box of a selection region, tied to the state it selects.
// phi is stored as a center plus half-width so that every box sees the same
// offsets; half_width >= pi means the full circle.
struct AngleBox {
  int state = 0;
  Range theta;
  double phi_center = 0;
  double phi_half_width = kPi;

  bool full_circle() const { return phi_half_width >= kPi; }
  double phi_fraction() const { return full_circle() ? 1.0 : phi_half_width / kPi; }
};

struct SelectionInterval {
  Basis basis = Basis::Z;
  IntensityClass klass = IntensityClass::s;
  std::optional<int> state;  // empty: union of both states of the basis
  Range intensity;           // (lo, hi]; closed at 0 for the d1 class
  double vt_product = 0.5;
  std::vector<AngleBox> boxes;

  std::string label() const {
    std::string s = std::string("S_") + to_string(basis);
    if (state) s += std::string(",") + state_name(basis, *state);
    return s + "^" + to_string(klass);
  }
};

inline Range intensity_range(const SourceParams& src, IntensityClass c) {
  switch (c) {
    case IntensityClass::d1: return {0.0, src.i_vac};
    case IntensityClass::d2: return {src.i_vac, src.i_d};
    case IntensityClass::s: return {src.i_d, src.intensity_max};
  }
  return {};
}

inline AngleBox state_box(const SourceParams& src, Basis basis, int state) {
  AngleBox box;
  box.state = state;
  if (basis == Basis::Z) {
    const double dz = std::min(src.delta_z, kPi);
    box.theta = state == 0 ? Range{0.0, dz} : Range{kPi - dz, kPi};
    box.phi_center = 0;
    box.phi_half_width = kPi;
  } else {
    box.theta = {std::max(0.0, kPi / 2 - src.delta_x), std::min(kPi, kPi / 2 + src.delta_x)};
    const double base = basis == Basis::X ? 0.0 : kPi / 2;
    box.phi_center = base + state * kPi;
    box.phi_half_width = src.delta_x;
  }
  return box;
}

inline SelectionInterval make_interval(const SourceParams& src, Basis basis, IntensityClass klass,
                                       std::optional<int> state = std::nullopt) {
  SelectionInterval iv;
  iv.basis = basis;
  iv.klass = klass;
  iv.state = state;
  iv.intensity = intensity_range(src, klass);
  iv.vt_product = src.vt_product;
  if (state) {
    iv.boxes.push_back(state_box(src, basis, *state));
  } else {
    iv.boxes.push_back(state_box(src, basis, 0));
    iv.boxes.push_back(state_box(src, basis, 1));
  }
  return iv;
}

// The whole support: every pulse with I <= 2vt.
inline SelectionInterval full_domain_interval(double vt_product) {
  SelectionInterval iv;
  iv.basis = Basis::Z;
  iv.klass = IntensityClass::s;
  iv.intensity = {0.0, 2 * vt_product};
  iv.vt_product = vt_product;
  AngleBox box;
  box.theta = {0.0, kPi};
  iv.boxes.push_back(box);
  return iv;
}

inline double density(double intensity, double theta, double vt_product) {
  if (!(intensity > 0) || intensity > 2 * vt_product || theta < 0 || theta > kPi)
    throw DomainError("density evaluated outside I in (0, 2vt], theta in [0, pi]");
  const double s = intensity / (2 * vt_product);
  const double c = std::cos(theta / 2);
  const double sn = std::sin(theta / 2);
  const double a = 1 - s * c * c;
  const double b = 1 - s * sn * sn;
  if (!(a > 0) || !(b > 0)) throw DomainError("density is singular at this point");
  return 1.0 / (vt_product * kPi * kPi * std::sqrt(a) * std::sqrt(b));
}

// --- Phase sampler -----------------------------------------------------------

struct BlochSample {
  double intensity = 0;
  double theta = 0;
  double phi = 0;
  double psi = 0;  // global phase; statistics never depend on it
};

// Maps the four input phases to the output pulse.  I ranges over [0, 4vt].
inline BlochSample bloch_from_phases(double alpha, double beta, double gamma, double delta,
                                     double vt_product) {
  using cd = std::complex<double>;
  const double scale = std::sqrt(vt_product / 2);
  const cd amp_h = scale * (std::polar(1.0, alpha) + std::polar(1.0, beta));
  const cd amp_v = scale * (std::polar(1.0, gamma) + std::polar(1.0, delta));
  const double mod_h = std::abs(amp_h);
  const double mod_v = std::abs(amp_v);
  BlochSample out;
  out.intensity = mod_h * mod_h + mod_v * mod_v;
  out.theta = 2 * std::atan2(mod_v, mod_h);
  auto wrap = [](double x) {
    x = std::fmod(x, 2 * kPi);
    return x < 0 ? x + 2 * kPi : x;
  };
  const double arg_h = mod_h > 0 ? std::arg(amp_h) : 0.0;
  const double arg_v = mod_v > 0 ? std::arg(amp_v) : 0.0;
  out.phi = wrap(arg_v - arg_h);
  out.psi = wrap(arg_h);
  return out;
}

// Uniform double in [0, 1) from the top 53 bits; avoids implementation-defined
// distribution objects so sample streams match across standard libraries.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Streams phase-random pulses, keeping those on the density support
// I <= 2vt so that the samples follow f exactly.  About half the draws are kept.
class SourceSampler {
 public:
  SourceSampler(std::uint64_t seed, double vt_product) : rng_(seed), vt_(vt_product) {}

  BlochSample next() {
    const double two_pi = 2 * kPi;
    for (;;) {
      const double a = two_pi * uniform01(rng_);
      const double b = two_pi * uniform01(rng_);
      const double g = two_pi * uniform01(rng_);
      const double d = two_pi * uniform01(rng_);
      const BlochSample s = bloch_from_phases(a, b, g, d, vt_);
      if (s.intensity > 0 && s.intensity <= 2 * vt_) return s;
    }
  }

 private:
  std::mt19937_64 rng_;
  double vt_;
};

inline std::vector<BlochSample> sample_source(std::uint64_t seed, std::size_t count,
                                              double vt_product) {
  if (count < 1) throw InvariantError("sample count must be at least 1");
  SourceSampler sampler(seed, vt_product);
  std::vector<BlochSample> out;
  out.reserve(count);
  while (out.size() < count) out.push_back(sampler.next());
  return out;
}

inline bool contains(const SelectionInterval& iv, const BlochSample& s) {
  const bool in_i = iv.intensity.lo <= 0 ? s.intensity <= iv.intensity.hi
                                         : (s.intensity > iv.intensity.lo &&
                                            s.intensity <= iv.intensity.hi);
  if (!in_i) return false;
  for (const AngleBox& box : iv.boxes) {
    if (s.theta < box.theta.lo || s.theta > box.theta.hi) continue;
    if (box.full_circle()) return true;
    double off = std::remainder(s.phi - box.phi_center, 2 * kPi);
    if (std::abs(off) <= box.phi_half_width) return true;
  }
  return false;
}

// --- Quadrature rule over a selection interval -------------------------------
//
// The (I, theta) part uses, for each theta, the substitution
//   1 - a s = a y^2,  a = max(cos^2(theta/2), sin^2(theta/2)),
// which absorbs the inverse-square-root factor that blows up at I = 2vt near
// the poles.  The remaining factor 1/sqrt(1 - (1-a) s) is bounded by sqrt(2).
// Theta ranges straddling pi/2 are split there so a stays smooth.

struct PlaneNode {
  double intensity;
  double theta;
  double cos_theta;
  double sin_theta;
  double weight;  // f dI dtheta
  int box;
};

struct PhiNode {
  double offset;
  double cos_offset;
  double weight;  // dphi / 2pi
};

struct IntervalRule {
  Basis basis = Basis::Z;
  std::vector<PlaneNode> plane;
  std::vector<std::vector<PhiNode>> phi;  // per box
  std::vector<double> box_plane_mass;     // integral of f over each box's (I, theta) region
  int nodes = 0;

  double probability() const {
    double p = 0;
    for (std::size_t b = 0; b < phi.size(); ++b) {
      double frac = 0;
      for (const PhiNode& n : phi[b]) frac += n.weight;
      p += box_plane_mass[b] * frac;
    }
    return p;
  }
};

namespace detail {

// Radial panels in s.  Ranges starting at I = 0 are graded geometrically:
// dark counts make click ratios change on the scale I ~ Pd / eta, far below
// the class width.
inline std::vector<Range> radial_panels(double s_lo, double s_hi) {
  if (s_lo > 0) return {{s_lo, s_hi}};
  constexpr int kLevels = 8;
  std::vector<Range> out;
  double lo = 0, hi = s_hi * std::pow(0.1, kLevels);
  out.push_back({lo, hi});
  for (int k = 0; k < kLevels; ++k) {
    lo = hi;
    hi *= 10;
    out.push_back({lo, k + 1 == kLevels ? s_hi : hi});
  }
  return out;
}

inline void append_plane_nodes(std::vector<PlaneNode>& out, double& mass, int box, Range theta,
                               Range intensity, double vt, int n) {
  if (!(theta.hi > theta.lo) || !(intensity.hi > intensity.lo)) return;
  const double s_lo = intensity.lo / (2 * vt);
  const double s_hi = std::min(intensity.hi / (2 * vt), 1.0);
  if (!(s_hi > s_lo)) return;
  const std::vector<Range> panels = radial_panels(s_lo, s_hi);
  const bool upper = theta.lo >= kPi / 2;  // sub-range lies in [pi/2, pi]
  const MappedRule rt = gauss_on(n, theta.lo, theta.hi);
  const GaussRule& gy = gauss_legendre(n);
  for (int i = 0; i < n; ++i) {
    const double t = rt.x[i];
    const double c = std::cos(t / 2);
    const double sn = std::sin(t / 2);
    const double a = upper ? sn * sn : c * c;
    const double o = 1 - a;
    const double cos_t = std::cos(t);
    const double sin_t = std::sin(t);
    for (const Range& panel : panels) {
      const double y_lo = std::sqrt(std::max(0.0, 1 - a * panel.hi));
      const double y_hi = std::sqrt(std::max(0.0, 1 - a * panel.lo));
      const double half = 0.5 * (y_hi - y_lo);
      const double mid = 0.5 * (y_hi + y_lo);
      for (int j = 0; j < n; ++j) {
        const double y = mid + half * gy.x[j];
        const double s = (1 - y * y) / a;
        const double jac = 4.0 / (kPi * kPi * a * std::sqrt(1 - o * s));
        const double w = rt.w[i] * half * gy.w[j] * jac;
        out.push_back({2 * vt * s, t, cos_t, sin_t, w, box});
        mass += w;
      }
    }
  }
}

}  // namespace detail

// Builds the tensor rule with n nodes per axis in theta and radius, and n/2
// (at least 8) in phi for X/Y boxes.
inline IntervalRule make_rule(const SelectionInterval& iv, int n) {
  IntervalRule rule;
  rule.basis = iv.basis;
  rule.nodes = n;
  rule.phi.resize(iv.boxes.size());
  rule.box_plane_mass.assign(iv.boxes.size(), 0.0);
  for (std::size_t b = 0; b < iv.boxes.size(); ++b) {
    const AngleBox& box = iv.boxes[b];
    Range th{std::max(0.0, box.theta.lo), std::min(kPi, box.theta.hi)};
    if (th.lo < kPi / 2 && th.hi > kPi / 2) {
      detail::append_plane_nodes(rule.plane, rule.box_plane_mass[b], static_cast<int>(b),
                                 {th.lo, kPi / 2}, iv.intensity, iv.vt_product, n);
      detail::append_plane_nodes(rule.plane, rule.box_plane_mass[b], static_cast<int>(b),
                                 {kPi / 2, th.hi}, iv.intensity, iv.vt_product, n);
    } else {
      detail::append_plane_nodes(rule.plane, rule.box_plane_mass[b], static_cast<int>(b), th,
                                 iv.intensity, iv.vt_product, n);
    }
    if (iv.basis == Basis::Z) {
      // Nothing in the Z basis depends on phi.
      rule.phi[b].push_back({0.0, 1.0, box.phi_fraction()});
    } else {
      const double hw = std::min(box.phi_half_width, kPi);
      // The phi integrand is a smooth function of cos(offset) on a short arc.
      const int nphi = std::max(8, n / 2);
      const MappedRule rp = gauss_on(nphi, -hw, hw);
      for (int k = 0; k < nphi; ++k)
        rule.phi[b].push_back({rp.x[k], std::cos(rp.x[k]), rp.w[k] / (2 * kPi)});
    }
  }
  return rule;
}

// Runs compute(rule) at n, 2n, 4n, ... until successive results agree.
template <class Compute>
Estimate<std::valarray<double>> refine_interval(const SelectionInterval& iv,
                                                const QuadratureSpec& spec, Compute&& compute) {
  spec.validate();
  int n = spec.nodes;
  std::valarray<double> prev = compute(make_rule(iv, n));
  while (2 * n <= spec.max_nodes) {
    std::valarray<double> cur = compute(make_rule(iv, 2 * n));
    n *= 2;
    if (detail::within(prev, cur, spec.rel_tol, spec.abs_tol)) {
      Estimate<std::valarray<double>> out;
      out.achieved_tolerance = detail::relative_change(prev, cur, spec.abs_tol);
      out.value = std::move(cur);
      out.nodes = n;
      return out;
    }
    prev = std::move(cur);
  }
  throw QuadratureError("interval quadrature did not converge for " + iv.label(),
                        detail::headline(prev), detail::headline(prev));
}

inline double interval_probability(const SelectionInterval& iv, const QuadratureSpec& spec = {}) {
  auto est = refine_interval(iv, spec, [](const IntervalRule& r) {
    return std::valarray<double>{r.probability()};
  });
  return est.value[0];
}

// P_I(n) = e^{-I} I^n / n! for n = 0..n_max, by recurrence.
inline void poisson_row(double intensity, int n_max, double* out) {
  double p = std::exp(-intensity);
  out[0] = p;
  for (int n = 1; n <= n_max; ++n) {
    p *= intensity / n;
    out[n] = p;
  }
}

// Interval average of P_I(n) for n = 0..n_max, normalized by the selection probability.
inline std::vector<double> poisson_moments(const SelectionInterval& iv, int n_max,
                                           const QuadratureSpec& spec = {}) {
  if (n_max < 0) throw InvariantError("photon number must be non-negative");
  auto est = refine_interval(iv, spec, [n_max](const IntervalRule& r) {
    std::valarray<double> acc(0.0, n_max + 2);
    std::vector<double> row(n_max + 1);
    for (const PlaneNode& node : r.plane) {
      double phi_w = 0;
      for (const PhiNode& pn : r.phi[node.box]) phi_w += pn.weight;
      const double w = node.weight * phi_w;
      poisson_row(node.intensity, n_max, row.data());
      acc[0] += w;
      for (int n = 0; n <= n_max; ++n) acc[n + 1] += w * row[n];
    }
    return acc;
  });
  const double p = est.value[0];
  if (!(p > 0)) throw DomainError("Poisson moment of an empty interval " + iv.label());
  std::vector<double> out(n_max + 1);
  for (int n = 0; n <= n_max; ++n) out[n] = est.value[n + 1] / p;
  return out;
}

inline double poisson_moment(const SelectionInterval& iv, int n, const QuadratureSpec& spec = {}) {
  return poisson_moments(iv, n, spec)[n];
}

}  // namespace fpqsdc
