#pragma once

// Oracle checks run by `fpqsdc validate`.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "fpqsdc/click_stats.hpp"
#include "fpqsdc/lp.hpp"
#include "fpqsdc/oracles.hpp"
#include "fpqsdc/security.hpp"
#include "fpqsdc/source.hpp"
#include "fpqsdc/states.hpp"

namespace fpqsdc {

struct CheckResult {
  std::string name;
  bool passed = false;
  nlohmann::json detail;
};

// Theoretical n-photon values stacked in LP variable order.
struct TheoryPoints {
  std::vector<double> yield;                    // yield LP, union of states
  std::vector<std::vector<double>> error_yield; // error LP, per state
  double y1_signal = 0;                         // union signal Y1
  double e1y1_signal = 0;                       // worst state's signal e1Y1
};

inline TheoryPoints theory_points(const SystemParams& sys, const SourceParams& src,
                                  const ChannelPair& ch, Basis basis,
                                  const QuadratureSpec& spec = {}) {
  const ClickModel m = click_model(sys, ch.ba);
  TheoryPoints t;
  std::vector<std::vector<double>> y(3);
  std::vector<std::vector<std::vector<double>>> ey(2, std::vector<std::vector<double>>(3));
  for (int i = 0; i < 3; ++i) {
    y[i] = theoretical_yields(make_interval(src, basis, kClasses[i]), m, sys.n_cut,
                              YieldWeighting::photon_number, spec)
               .yield;
    for (int k = 0; k < 2; ++k)
      ey[k][i] = theoretical_yields(make_interval(src, basis, kClasses[i], k), m, sys.n_cut,
                                    YieldWeighting::photon_number, spec)
                     .error_yield;
  }
  t.yield = decoy_point(y);
  t.y1_signal = y[2][1];
  for (int k = 0; k < 2; ++k) {
    t.error_yield.push_back(decoy_point(ey[k]));
    t.e1y1_signal = std::max(t.e1y1_signal, ey[k][2][1]);
  }
  return t;
}

inline HermitianMatrix random_hermitian(std::size_t dim, std::mt19937_64& rng) {
  HermitianMatrix h(dim);
  for (std::size_t r = 0; r < dim; ++r) {
    h(r, r) = 2 * uniform01(rng) - 1;
    for (std::size_t c = r + 1; c < dim; ++c) {
      const cplx z(2 * uniform01(rng) - 1, 2 * uniform01(rng) - 1);
      h(r, c) = z;
      h(c, r) = std::conj(z);
    }
  }
  return h;
}

// Monte Carlo agreement uses 4 standard errors, taken at the closed-form
// probability, so that verdicts do not depend on the seed in practice.
inline std::vector<CheckResult> run_validation(const SystemParams& sys, const SourceParams& src,
                                               std::uint64_t seed, std::size_t samples) {
  std::vector<CheckResult> out;
  const double k_sigma = 4.0;

  {
    const double p = interval_probability(full_domain_interval(src.vt_product));
    out.push_back({"density_normalization", std::abs(p - 1) <= 1e-6, {{"integral", p}}});
  }

  for (Basis b : {Basis::Z, Basis::X}) {
    const SelectionInterval iv = make_interval(src, b, IntensityClass::s);
    const double q = interval_probability(iv);
    const auto mc = oracle::interval_probability_mc(iv, seed, samples);
    out.push_back({std::string("interval_probability_mc_") + to_string(b),
                   mc.agrees_binomial(q, k_sigma),
                   {{"quadrature", q}, {"monte_carlo", mc.mean}, {"std_error", mc.std_error}}});
  }

  {
    const ChannelPair ch = derive_channel(sys, 2.0);
    ClickModel m = click_model(sys, ch.ba);
    for (Basis b : {Basis::Z, Basis::X}) {
      const SelectionInterval iv = make_interval(src, b, IntensityClass::s);
      const IntervalStats st = interval_stats(iv, m, sys.n_cut);
      const auto sim = oracle::click_mc(iv, m, seed + 1, samples);
      out.push_back({std::string("click_statistics_mc_") + to_string(b),
                     sim.gain.agrees_binomial(st.q_gain, k_sigma) &&
                         sim.error_gain.agrees_binomial(st.eq_product, k_sigma),
                     {{"q_closed_form", st.q_gain},
                      {"q_monte_carlo", sim.gain.mean},
                      {"q_std_error", sim.gain.std_error},
                      {"eq_closed_form", st.eq_product},
                      {"eq_monte_carlo", sim.error_gain.mean},
                      {"eq_std_error", sim.error_gain.std_error}}});
    }
  }

  {
    double worst = 0;
    ClickModel m;
    m.dark_count = sys.dark_count;
    m.eta_det = sys.eta_det;
    for (int n = 0; n <= 10; ++n)
      for (double f : {0.0, 0.1, 0.5, 0.93, 1.0}) {
        const ClickPair a = click_prob_state(n, f, 1 - f, m);
        const ClickPair e = oracle::click_prob_enumerated(n, f, m);
        worst = std::max({worst, std::abs(a.k - e.k), std::abs(a.l - e.l)});
      }
    out.push_back({"click_probability_enumeration", worst <= 1e-12, {{"max_abs_diff", worst}}});
  }

  for (double db : {2.0, 4.0, 6.0}) {
    const ChannelPair ch = derive_channel(sys, db);
    for (Basis b : {Basis::Z, Basis::X}) {
      EvalOptions opt;
      const BasisInputs in = basis_inputs(sys, src, ch, b, opt);
      const TheoryPoints th = theory_points(sys, src, ch, b);
      const LpProblem ylp = build_yield_lp(in.decoy.yield_classes, in.decoy.yield_distances, sys.n_cut);
      bool feasible = is_feasible(ylp, th.yield);
      double viol = constraint_violation(ylp, th.yield);
      for (int k = 0; k < 2; ++k) {
        const LpProblem elp =
            build_error_lp(in.decoy.error_classes[k], in.decoy.error_distances[k], sys.n_cut);
        feasible = feasible && is_feasible(elp, th.error_yield[k]);
        viol = std::max(viol, constraint_violation(elp, th.error_yield[k]));
      }
      const SinglePhotonBounds bd = single_photon_bounds(in.decoy);
      const bool sound = bd.y1_min <= th.y1_signal + 1e-12 && bd.e1y1_max >= th.e1y1_signal - 1e-12;
      char name[64];
      std::snprintf(name, sizeof name, "lp_theory_feasible_%s_%gdB", to_string(b), db);
      out.push_back({name,
                     feasible && sound,
                     {{"max_violation", viol},
                      {"y1_min", bd.y1_min},
                      {"y1_theory", th.y1_signal},
                      {"e1y1_max", bd.e1y1_max},
                      {"e1y1_theory", th.e1y1_signal}}});
    }
  }

  {
    // Residuals on every difference matrix the LP uses at 2 dB, plus random
    // matrices against the characteristic polynomial.
    double worst_rel = 0;
    for (Basis b : {Basis::Z, Basis::X})
      for (int i = 0; i < 3; ++i) {
        const auto rho = density_matrices(make_interval(src, b, kClasses[i]), sys.n_cut);
        const auto ref = density_matrices(make_interval(src, b, IntensityClass::s), sys.n_cut);
        for (int n = 0; n <= sys.n_cut; ++n) {
          const EigenResult e = hermitian_eigen(rho[n].entries - ref[n].entries);
          if (e.scale > 0) worst_rel = std::max(worst_rel, e.residual / e.scale);
        }
      }
    std::mt19937_64 rng(seed);
    double worst_root = 0;
    for (int t = 0; t < 5; ++t) {
      const HermitianMatrix h = random_hermitian(4, rng);
      const auto roots = oracle::eigenvalues_by_char_poly(h);
      const auto eig = hermitian_eigen(h).values;
      if (roots.size() != eig.size()) {
        worst_root = 1;
        continue;
      }
      for (std::size_t i = 0; i < roots.size(); ++i)
        worst_root = std::max(worst_root, std::abs(roots[i] - eig[i]));
    }
    out.push_back({"eigensolver",
                   worst_rel <= 1e-10 && worst_root <= 1e-9,
                   {{"max_relative_residual", worst_rel}, {"max_root_diff", worst_root}}});
  }
  return out;
}

}  // namespace fpqsdc
