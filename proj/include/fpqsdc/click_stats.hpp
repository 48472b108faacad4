#pragma once

// Detector click statistics for a two-detector measurement in basis K.
//
// A pulse of intensity I in state a†(theta, phi) reaches the detectors with
// efficiency eta_chan.  With |f(k)|^2 + |f(l)|^2 = 1 the single-click gains are
//
//   Q_k = (1-Pd) e^{-I eta_chan eta_D |f(l)|^2} - (1-Pd)^2 e^{-I eta_chan eta_D}
//   Q_l = the same with k and l exchanged
//   E_k = (e_d Q_k + (1 - e_d) Q_l) / (Q_k + Q_l)
//
// Q_k is evaluated as (1-Pd) e^{-x} (expm1(x |f(k)|^2) + Pd), x = I eta_chan eta_D,
// which avoids cancellation at low intensity.

#include <cmath>
#include <span>
#include <valarray>
#include <vector>

#include "fpqsdc/errors.hpp"
#include "fpqsdc/params.hpp"
#include "fpqsdc/quadrature.hpp"
#include "fpqsdc/source.hpp"

namespace fpqsdc {

struct ClickModel {
  double eta_det = 0.7;
  double dark_count = 8e-8;
  double channel_efficiency = 1.0;  // eta^chan
  double misalignment = 0.0;        // e_d of the measuring party

  void validate() const {
    if (!(eta_det >= 0 && eta_det <= 1)) throw InvariantError("eta_det must lie in [0, 1]");
    if (!(dark_count >= 0 && dark_count <= 1))
      throw InvariantError("dark_count must lie in [0, 1]");
    if (!(channel_efficiency >= 0 && channel_efficiency <= 1))
      throw InvariantError("channel efficiency must lie in [0, 1]");
    if (!(misalignment >= 0 && misalignment < 0.5))
      throw InvariantError("misalignment must lie in [0, 0.5)");
  }
};

// Alice measures the first round, Bob the second.
inline ClickModel click_model(const SystemParams& p, const ChannelSpec& ch) {
  ClickModel m;
  m.eta_det = p.eta_det;
  m.dark_count = p.dark_count;
  m.channel_efficiency = ch.efficiency;
  m.misalignment = ch.round == Round::BA ? p.err_opt_a : p.err_opt_b;
  return m;
}

struct ClickPair {
  double k = 0;
  double l = 0;
};

// Probability that n photons at the detectors click only detector k (resp. l).
inline ClickPair click_prob_state(int n, double f2_k, double f2_l, const ClickModel& m) {
  if (n < 0) throw InvariantError("photon number must be non-negative");
  if (std::abs(f2_k + f2_l - 1) > 1e-12)
    throw InvariantError("projection weights must sum to one");
  const double keep = 1 - m.dark_count;
  const double q = std::pow(1 - m.eta_det, n);
  ClickPair out;
  out.k = keep * ((std::pow(1 - f2_l * m.eta_det, n) - q) + m.dark_count * q);
  out.l = keep * ((std::pow(1 - f2_k * m.eta_det, n) - q) + m.dark_count * q);
  return out;
}

// Squared projection |f(k)|^2 of a†(theta, phi) on the state k of a box,
// with phi measured from the box's own phi center.
inline double projection_weight(Basis basis, int state, double cos_theta, double sin_theta,
                                double cos_phi_offset) {
  if (basis == Basis::Z) return state == 0 ? 0.5 * (1 + cos_theta) : 0.5 * (1 - cos_theta);
  return 0.5 * (1 + sin_theta * cos_phi_offset);
}

inline double basis_phi_center(Basis basis, int state) {
  if (basis == Basis::Z) return 0.0;
  return (basis == Basis::X ? 0.0 : kPi / 2) + state * kPi;
}

struct PointGain {
  double q = 0;    // Q^chan = Q_k + Q_l
  double e = 0;    // E_k^chan
  double q_k = 0;
  double q_l = 0;
  double eq() const { return e * q; }
};

namespace detail {

// base = (1 - Pd) e^{-x}, x = I eta_chan eta_D
inline PointGain gain_with_base(double x, double base, double f2_k, const ClickModel& m) {
  PointGain g;
  g.q_k = base * (std::expm1(x * f2_k) + m.dark_count);
  g.q_l = base * (std::expm1(x * (1 - f2_k)) + m.dark_count);
  g.q = g.q_k + g.q_l;
  const double err = m.misalignment * g.q_k + (1 - m.misalignment) * g.q_l;
  g.e = g.q > 0 ? err / g.q : 0.0;
  return g;
}

}  // namespace detail

inline PointGain gain_from_projection(double intensity, double f2_k, const ClickModel& m) {
  const double x = intensity * m.channel_efficiency * m.eta_det;
  return detail::gain_with_base(x, (1 - m.dark_count) * std::exp(-x), f2_k, m);
}

// Gain and error rate of the pulse (I, theta, phi) measured in basis K,
// error counted against state k (index 0 or 1 of the basis).
inline PointGain gain_error_pointwise(double intensity, double theta, double phi, Basis basis,
                                      int state, const ClickModel& m) {
  if (!(intensity >= 0)) throw DomainError("intensity must be non-negative");
  if (theta < 0 || theta > kPi) throw DomainError("theta must lie in [0, pi]");
  const double off = phi - basis_phi_center(basis, state);
  const double f2 = projection_weight(basis, state, std::cos(theta), std::sin(theta), std::cos(off));
  return gain_from_projection(intensity, f2, m);
}

struct IntervalStats {
  double p_select = 0;
  double q_gain = 0;      // <Q>
  double e_rate = 0;      // <E>, the interval average of the pointwise error rate
  double eq_product = 0;  // <E Q>, the average error-click probability
  std::vector<double> poisson;  // <P_I(n)> for n = 0..n_cut
};

// Interval statistics for several channel models sharing one quadrature pass.
inline std::vector<IntervalStats> interval_stats(const SelectionInterval& iv,
                                                 std::span<const ClickModel> models, int n_cut,
                                                 const QuadratureSpec& spec = {}) {
  for (const ClickModel& m : models) m.validate();
  const std::size_t nm = models.size();
  const std::size_t np = static_cast<std::size_t>(n_cut) + 1;
  auto compute = [&](const IntervalRule& r) {
    std::valarray<double> acc(0.0, 1 + 3 * nm + np);
    std::vector<double> row(np), xs(nm), bases(nm);
    for (const PlaneNode& node : r.plane) {
      const int state = iv.boxes[node.box].state;
      for (std::size_t k = 0; k < nm; ++k) {
        xs[k] = node.intensity * models[k].channel_efficiency * models[k].eta_det;
        bases[k] = (1 - models[k].dark_count) * std::exp(-xs[k]);
      }
      double phi_mass = 0;
      for (const PhiNode& pn : r.phi[node.box]) {
        const double w = node.weight * pn.weight;
        phi_mass += pn.weight;
        const double f2 =
            projection_weight(iv.basis, state, node.cos_theta, node.sin_theta, pn.cos_offset);
        for (std::size_t k = 0; k < nm; ++k) {
          const PointGain g = detail::gain_with_base(xs[k], bases[k], f2, models[k]);
          acc[1 + 3 * k] += w * g.q;
          acc[2 + 3 * k] += w * g.e;
          acc[3 + 3 * k] += w * g.eq();
        }
      }
      const double w = node.weight * phi_mass;
      acc[0] += w;
      poisson_row(node.intensity, n_cut, row.data());
      for (std::size_t n = 0; n < np; ++n) acc[1 + 3 * nm + n] += w * row[n];
    }
    return acc;
  };
  const std::valarray<double> v = refine_interval(iv, spec, compute).value;
  const double p = v[0];
  if (!(p > 0)) throw DomainError("interval statistics of an empty interval " + iv.label());
  std::vector<IntervalStats> out(nm);
  for (std::size_t k = 0; k < nm; ++k) {
    IntervalStats& s = out[k];
    s.p_select = p;
    s.q_gain = v[1 + 3 * k] / p;
    s.e_rate = v[2 + 3 * k] / p;
    s.eq_product = v[3 + 3 * k] / p;
    s.poisson.resize(np);
    for (std::size_t n = 0; n < np; ++n) s.poisson[n] = v[1 + 3 * nm + n] / p;
  }
  return out;
}

inline IntervalStats interval_stats(const SelectionInterval& iv, const ClickModel& model,
                                    int n_cut, const QuadratureSpec& spec = {}) {
  return interval_stats(iv, std::span<const ClickModel>(&model, 1), n_cut, spec).front();
}

// --- Theoretical n-photon yields (used as an LP feasibility oracle) ---------

// How interval averages of n-photon quantities are weighted.
//   interval_average: (1/<P>) int Y_n f
//   photon_number:    int P_I(n) Y_n f / int P_I(n) f, the yield of the
//                     n-photon component actually emitted in the interval
enum class YieldWeighting { interval_average, photon_number };

struct YieldPoint {
  std::vector<double> yield;        // Y_n
  std::vector<double> error_yield;  // e_n Y_n against state k
};

inline YieldPoint yields_pointwise(double f2_k, const ClickModel& m, int n_cut) {
  const double a = m.channel_efficiency * m.eta_det;
  const double keep = 1 - m.dark_count;
  YieldPoint y;
  y.yield.resize(n_cut + 1);
  y.error_yield.resize(n_cut + 1);
  for (int n = 0; n <= n_cut; ++n) {
    const double pl = std::pow(1 - a * (1 - f2_k), n);
    const double pk = std::pow(1 - a * f2_k, n);
    const double q = std::pow(1 - a, n);
    // Factored as keep * ((p - q) + dark * q) to avoid cancellation at small dark counts.
    const double dl = (pl - q) + m.dark_count * q;
    const double dk = (pk - q) + m.dark_count * q;
    y.yield[n] = keep * (dl + dk);
    y.error_yield[n] = keep * (m.misalignment * dl + (1 - m.misalignment) * dk);
  }
  return y;
}

inline YieldPoint theoretical_yields(const SelectionInterval& iv, const ClickModel& m, int n_cut,
                                     YieldWeighting weighting = YieldWeighting::photon_number,
                                     const QuadratureSpec& spec = {}) {
  m.validate();
  const std::size_t np = static_cast<std::size_t>(n_cut) + 1;
  auto compute = [&](const IntervalRule& r) {
    // [norm_n (np), yield_n (np), error_yield_n (np)]
    std::valarray<double> acc(0.0, 3 * np);
    std::vector<double> row(np);
    for (const PlaneNode& node : r.plane) {
      const int state = iv.boxes[node.box].state;
      poisson_row(node.intensity, n_cut, row.data());
      for (const PhiNode& pn : r.phi[node.box]) {
        const double w = node.weight * pn.weight;
        const double f2 =
            projection_weight(iv.basis, state, node.cos_theta, node.sin_theta, pn.cos_offset);
        const YieldPoint y = yields_pointwise(f2, m, n_cut);
        for (std::size_t n = 0; n < np; ++n) {
          const double wn = weighting == YieldWeighting::photon_number ? w * row[n] : w;
          acc[n] += wn;
          acc[np + n] += wn * y.yield[n];
          acc[2 * np + n] += wn * y.error_yield[n];
        }
      }
    }
    return acc;
  };
  QuadratureSpec local = spec;
  local.abs_tol = std::max(local.abs_tol, 1e-300);
  const std::valarray<double> v = refine_interval(iv, local, compute).value;
  YieldPoint out;
  out.yield.resize(np);
  out.error_yield.resize(np);
  for (std::size_t n = 0; n < np; ++n) {
    out.yield[n] = v[n] > 0 ? v[np + n] / v[n] : 0.0;
    out.error_yield[n] = v[n] > 0 ? v[2 * np + n] / v[n] : 0.0;
  }
  return out;
}

}  // namespace fpqsdc
