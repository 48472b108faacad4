#pragma once

// Wiretap secrecy capacity per basis and the per-pulse transmission rate.
//
//   C_K = Q^BAB [1 - h(E^BAB)] - Q1^BAE h(2 e1) - Q2+^BAE
//
// with Eve's gains bounded by the first-round gains at Alice.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "fpqsdc/click_stats.hpp"
#include "fpqsdc/errors.hpp"
#include "fpqsdc/lp.hpp"
#include "fpqsdc/params.hpp"
#include "fpqsdc/source.hpp"
#include "fpqsdc/states.hpp"

namespace fpqsdc {

inline double binary_entropy(double x) {
  if (!(x >= 0 && x <= 1)) throw DomainError("binary entropy needs an argument in [0, 1]");
  if (x == 0 || x == 1) return 0.0;
  return -x * std::log2(x) - (1 - x) * std::log2(1 - x);
}

inline double mutual_info_ab(double q_bab, double e_bab) {
  if (!(e_bab >= 0 && e_bab <= 1)) throw DomainError("error rate must lie in [0, 1]");
  return q_bab * (1 - binary_entropy(e_bab));
}

inline double mutual_info_ab(const IntervalStats& bab) {
  return mutual_info_ab(bab.q_gain, bab.e_rate);
}

// Zero-photon yield at Alice: dark counts in either of two detectors.
inline double zero_photon_yield(const SystemParams& p) {
  return 2 * p.dark_count * (1 - p.dark_count);
}

struct EveBoundInputs {
  double q_ba = 0;   // <Q^BA> of the signal interval
  double p0 = 0;     // <P_I(0)>
  double p1 = 0;     // <P_I(1)>
  double y0_alice = 0;
  double kappa = 1;  // eve_advantage
};

struct EveInfo {
  double q1 = 0;   // single-photon gain Eve can hold
  double q2 = 0;   // multi-photon gain, fully leaked
  double h1 = 1;   // information per single photon, h(2 e1) capped at 1
  double total() const { return q1 * h1 + q2; }
};

// Q1 = [P1 Y1 - P1 Y0]+ kappa; Q2+ = [Q^BA - P0 Y0 - P1 Y1 - (1 - P0 - P1) Y0]+ kappa.
// Dark counts are credited against every photon number, so only the part of
// the gain produced by real photons is charged to Eve.
inline EveInfo eve_info(const SinglePhotonBounds& b, const EveBoundInputs& in) {
  EveInfo e;
  const double y1 = b.y1_min;
  e.q1 = std::max(0.0, in.p1 * y1 - in.p1 * in.y0_alice) * in.kappa;
  e.q2 = std::max(0.0, in.q_ba - in.p0 * in.y0_alice - in.p1 * y1 -
                           (1 - in.p0 - in.p1) * in.y0_alice) *
         in.kappa;
  e.h1 = b.e1_max >= 0.25 ? 1.0 : binary_entropy(2 * b.e1_max);
  return e;
}

inline double capacity(double i_ab, const EveInfo& eve) {
  return std::max(0.0, i_ab - eve.total());
}

struct BasisReport {
  Basis basis = Basis::Z;
  double p_select = 0;  // both states of the signal interval
  double q_ba = 0, e_ba = 0;
  double q_bab = 0, e_bab = 0;
  double p0 = 0, p1 = 0;
  double i_ab = 0;
  EveInfo eve;
  double i_ae = 0;
  SinglePhotonBounds bounds;
  double capacity = 0;
};

inline double transmission_rate(const std::array<BasisReport, 3>& bases) {
  double r = 0;
  for (const BasisReport& b : bases) r += b.p_select * b.capacity;
  return r;
}

struct EvalOptions {
  MatrixMode mode = MatrixMode::full;
  YieldWeighting weighting = YieldWeighting::photon_number;
  QuadratureSpec quadrature{};
  // Shortcuts for the optimizer: copy X results to Y and the first state of
  // an X/Y basis to the second.  Both are exact by construction.
  bool exploit_symmetry = false;
};

struct SecrecyReport {
  double attenuation_db = 0;
  SystemParams system;
  SourceParams source;
  EvalOptions options;
  std::array<BasisReport, 3> bases;
  double rate = 0;
};

// Everything the decoy LPs and the capacity need for one basis.
struct BasisInputs {
  std::array<IntervalStats, 3> union_ba, union_bab;          // per class
  std::array<std::array<IntervalStats, 3>, 2> state_ba;      // [state][class]
  DecoyInputs decoy;
};

namespace detail {

inline IntervalStats merge_stats(const IntervalStats& a, const IntervalStats& b) {
  IntervalStats m;
  m.p_select = a.p_select + b.p_select;
  const double wa = a.p_select / m.p_select, wb = b.p_select / m.p_select;
  m.q_gain = wa * a.q_gain + wb * b.q_gain;
  m.e_rate = wa * a.e_rate + wb * b.e_rate;
  m.eq_product = wa * a.eq_product + wb * b.eq_product;
  m.poisson.resize(a.poisson.size());
  for (std::size_t n = 0; n < a.poisson.size(); ++n)
    m.poisson[n] = wa * a.poisson[n] + wb * b.poisson[n];
  return m;
}

inline TraceDistanceTable distances_from(
    const std::array<std::vector<PhotonDensityMatrix>, 3>& rho, int n_cut) {
  std::vector<std::vector<PhotonDensityMatrix>> v(rho.begin(), rho.end());
  return trace_distance_table(v, n_cut);
}

}  // namespace detail

// With `mirror_states`, X and Y bases compute their second state by copying
// the first: the two boxes differ only in phi center, and every statistic
// is computed from phi offsets, so the copy equals a fresh computation.
inline BasisInputs basis_inputs(const SystemParams& sys, const SourceParams& src,
                                const ChannelPair& ch, Basis basis, const EvalOptions& opt,
                                bool mirror_states = false) {
  const int n_cut = sys.n_cut;
  const std::array<ClickModel, 2> models = {click_model(sys, ch.ba), click_model(sys, ch.bab)};
  const bool mirror = mirror_states && basis != Basis::Z;
  BasisInputs in;
  in.decoy.n_cut = n_cut;
  std::array<std::array<IntervalStats, 3>, 2> state_bab;
  std::array<std::array<std::vector<PhotonDensityMatrix>, 3>, 2> state_rho;
  std::array<std::vector<PhotonDensityMatrix>, 3> union_rho;
  for (int i = 0; i < 3; ++i) {
    const IntensityClass klass = kClasses[i];
    for (int k = 0; k < 2; ++k) {
      const SelectionInterval iv = make_interval(src, basis, klass, k);
      if (k == 0 || !mirror) {
        const auto st = interval_stats(iv, models, n_cut, opt.quadrature);
        in.state_ba[k][i] = st[0];
        state_bab[k][i] = st[1];
      } else {
        in.state_ba[1][i] = in.state_ba[0][i];
        state_bab[1][i] = state_bab[0][i];
      }
      state_rho[k][i] = density_matrices(iv, n_cut, opt.mode, opt.weighting, opt.quadrature);
    }
    in.union_ba[i] = detail::merge_stats(in.state_ba[0][i], in.state_ba[1][i]);
    in.union_bab[i] = detail::merge_stats(state_bab[0][i], state_bab[1][i]);
    for (int n = 0; n <= n_cut; ++n) union_rho[i].push_back(mix(state_rho[0][i][n], state_rho[1][i][n]));
  }
  for (int i = 0; i < 3; ++i)
    in.decoy.yield_classes.push_back({in.union_ba[i].poisson, in.union_ba[i].q_gain});
  in.decoy.yield_distances = detail::distances_from(union_rho, n_cut);
  in.decoy.error_classes.resize(2);
  for (int k = 0; k < 2; ++k) {
    for (int i = 0; i < 3; ++i)
      in.decoy.error_classes[k].push_back({in.state_ba[k][i].poisson, in.state_ba[k][i].eq_product});
    if (k == 1 && mirror)
      in.decoy.error_distances.push_back(in.decoy.error_distances[0]);
    else
      in.decoy.error_distances.push_back(detail::distances_from(state_rho[k], n_cut));
  }
  return in;
}

inline BasisReport assemble_basis(const SystemParams& sys, Basis basis, const BasisInputs& in,
                                  const SinglePhotonBounds& bounds) {
  const IntervalStats& s_ba = in.union_ba[2];
  const IntervalStats& s_bab = in.union_bab[2];
  BasisReport r;
  r.basis = basis;
  r.p_select = s_ba.p_select;
  r.q_ba = s_ba.q_gain;
  r.e_ba = s_ba.e_rate;
  r.q_bab = s_bab.q_gain;
  r.e_bab = s_bab.e_rate;
  r.p0 = s_ba.poisson[0];
  r.p1 = s_ba.poisson[1];
  r.i_ab = mutual_info_ab(s_bab);
  r.bounds = bounds;
  r.eve = eve_info(bounds, {r.q_ba, r.p0, r.p1, zero_photon_yield(sys), sys.eve_advantage});
  r.i_ae = r.eve.total();
  r.capacity = capacity(r.i_ab, r.eve);
  return r;
}

inline BasisReport evaluate_basis(const SystemParams& sys, const SourceParams& src,
                                  const ChannelPair& ch, Basis basis, const EvalOptions& opt) {
  const BasisInputs in = basis_inputs(sys, src, ch, basis, opt, opt.exploit_symmetry);
  return assemble_basis(sys, basis, in, single_photon_bounds(in.decoy));
}

// Full pipeline at one operating point.
inline SecrecyReport evaluate(const SystemParams& sys, const SourceParams& src,
                              double attenuation_db, const EvalOptions& opt = {}) {
  sys.validate();
  src.validate();
  opt.quadrature.validate();
  const ChannelPair ch = derive_channel(sys, attenuation_db);
  SecrecyReport rep;
  rep.attenuation_db = attenuation_db;
  rep.system = sys;
  rep.source = src;
  rep.options = opt;
  rep.bases[0] = evaluate_basis(sys, src, ch, Basis::Z, opt);
  rep.bases[1] = evaluate_basis(sys, src, ch, Basis::X, opt);
  if (opt.exploit_symmetry) {
    rep.bases[2] = rep.bases[1];
    rep.bases[2].basis = Basis::Y;
  } else {
    rep.bases[2] = evaluate_basis(sys, src, ch, Basis::Y, opt);
  }
  rep.rate = transmission_rate(rep.bases);
  return rep;
}

// --- Actively modulated reference -----------------------------------------------
//
// A single-intensity Poisson source with perfect polarization states and
// ideal decoy estimation: Y1 and e1 are the exact single-photon values.

struct ActiveReport {
  double mu = 0;
  double q_bab = 0, e_bab = 0, q_ba = 0;
  double y1 = 0, e1 = 0;
  double i_ab = 0;
  EveInfo eve;
  double capacity = 0;
};

inline ActiveReport active_baseline(const SystemParams& sys, double mu, double attenuation_db) {
  if (!(mu > 0) || !std::isfinite(mu)) throw InvariantError("active intensity must be positive");
  const ChannelPair ch = derive_channel(sys, attenuation_db);
  const ClickModel ba = click_model(sys, ch.ba);
  const ClickModel bab = click_model(sys, ch.bab);
  ActiveReport r;
  r.mu = mu;
  const PointGain g_bab = gain_from_projection(mu, 1.0, bab);
  const PointGain g_ba = gain_from_projection(mu, 1.0, ba);
  r.q_bab = g_bab.q;
  r.e_bab = g_bab.e;
  r.q_ba = g_ba.q;
  const YieldPoint y = yields_pointwise(1.0, ba, 1);
  r.y1 = y.yield[1];
  r.e1 = r.y1 > 0 ? std::clamp(y.error_yield[1] / r.y1, 0.0, 0.5) : 0.5;
  r.i_ab = mutual_info_ab(r.q_bab, r.e_bab);
  SinglePhotonBounds b;
  b.y1_min = r.y1;
  b.e1y1_max = y.error_yield[1];
  b.e1_max = r.e1;
  b.single_photon_guarantee = r.y1 > 0;
  const double p0 = std::exp(-mu);
  r.eve = eve_info(b, {r.q_ba, p0, mu * p0, zero_photon_yield(sys), sys.eve_advantage});
  r.capacity = capacity(r.i_ab, r.eve);
  return r;
}

// Best mu on a log grid over [1e-4, 1] refined by golden-section search in log mu.
inline ActiveReport optimize_active(const SystemParams& sys, double attenuation_db) {
  const int grid = 200;
  const double lo = std::log(1e-4), hi = 0.0;
  auto cap = [&](double log_mu) { return active_baseline(sys, std::exp(log_mu), attenuation_db).capacity; };
  int best = 0;
  double best_c = -1;
  for (int i = 0; i < grid; ++i) {
    const double c = cap(lo + (hi - lo) * i / (grid - 1));
    if (c > best_c) {
      best_c = c;
      best = i;
    }
  }
  const double step = (hi - lo) / (grid - 1);
  double a = lo + step * std::max(0, best - 1);
  double b = lo + step * std::min(grid - 1, best + 1);
  const double g = (std::sqrt(5.0) - 1) / 2;
  double x1 = b - g * (b - a), x2 = a + g * (b - a);
  double f1 = cap(x1), f2 = cap(x2);
  for (int it = 0; it < 80 && b - a > 1e-10; ++it) {
    if (f1 >= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - g * (b - a);
      f1 = cap(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + g * (b - a);
      f2 = cap(x2);
    }
  }
  const double x = f1 >= f2 ? x1 : x2;
  ActiveReport r = active_baseline(sys, std::exp(x), attenuation_db);
  if (r.capacity < best_c) r = active_baseline(sys, std::exp(lo + step * best), attenuation_db);
  return r;
}

}  // namespace fpqsdc
