#pragma once

// Independent reference computations: phase-level and photon-level Monte
// Carlo, brute-force photon counting, and a characteristic-polynomial
// eigenvalue finder.  They share no integration code with the model.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "fpqsdc/click_stats.hpp"
#include "fpqsdc/source.hpp"
#include "fpqsdc/states.hpp"

namespace fpqsdc::oracle {

struct MeanEstimate {
  double mean = 0;
  double std_error = 0;
  std::size_t samples = 0;

  // |mean - reference| within k standard errors (with a floor for exact zeros).
  bool agrees(double reference, double k = 3.0) const {
    return std::abs(mean - reference) <= k * std_error + 1e-15;
  }

  // Same test for a mean of 0/1 indicators, with the standard error taken
  // at the reference probability so that zero observed events stay testable.
  bool agrees_binomial(double reference, double k = 3.0) const {
    if (samples < 1) return false;
    const double se = std::sqrt(reference * (1 - reference) / static_cast<double>(samples));
    return std::abs(mean - reference) <= k * se + 1e-15;
  }
};

// Fraction of source pulses falling in the interval.
inline MeanEstimate interval_probability_mc(const SelectionInterval& iv, std::uint64_t seed,
                                            std::size_t samples) {
  if (samples < 1) throw InvariantError("sample count must be at least 1");
  SourceSampler sampler(seed, iv.vt_product);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < samples; ++i) hits += contains(iv, sampler.next()) ? 1 : 0;
  MeanEstimate e;
  e.samples = samples;
  e.mean = static_cast<double>(hits) / samples;
  e.std_error = std::sqrt(e.mean * (1 - e.mean) / samples);
  return e;
}

// Poisson variate by inversion; intensities here are small.
inline int poisson_draw(double mean, std::mt19937_64& rng) {
  const double u = uniform01(rng);
  double p = std::exp(-mean), cdf = p;
  int n = 0;
  while (u > cdf && n < 1000) {
    ++n;
    p *= mean / n;
    cdf += p;
  }
  return n;
}

struct ClickSimulation {
  MeanEstimate gain;        // single clicks per accepted pulse
  MeanEstimate error_gain;  // error clicks per accepted pulse
  MeanEstimate error_rate;  // pulse average of P(error | single click)
  std::size_t accepted = 0;
};

// Draws `trials` source pulses, keeps those in the interval, and follows each
// photon through the channel and the two-detector measurement.  A single
// click counts as an error on the wrong detector unless flipped by
// misalignment, and on the right detector if flipped.
//
// For the first `conditional_pulses` accepted pulses the measurement is also
// repeated until a single click occurs; the error indicator of that click
// samples the pointwise error rate, so its mean estimates <E>.
inline ClickSimulation click_mc(const SelectionInterval& iv, const ClickModel& m, std::uint64_t seed,
                                std::size_t trials, std::size_t conditional_pulses = 0) {
  if (trials < 1) throw InvariantError("trial count must be at least 1");
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  SourceSampler sampler(seed, iv.vt_product);

  // One measurement of the pulse: {single click, error click}.
  auto measure = [&](double intensity, double to_k) {
    const int n = poisson_draw(intensity, rng);
    bool hit_k = uniform01(rng) < m.dark_count;
    bool hit_l = uniform01(rng) < m.dark_count;
    for (int p = 0; p < n; ++p) {
      if (uniform01(rng) >= m.channel_efficiency) continue;
      const bool at_k = uniform01(rng) < to_k;
      if (uniform01(rng) >= m.eta_det) continue;
      (at_k ? hit_k : hit_l) = true;
    }
    if (hit_k == hit_l) return std::pair<bool, bool>{false, false};
    const bool flipped = uniform01(rng) < m.misalignment;
    return std::pair<bool, bool>{true, hit_l != flipped};
  };

  double clicks = 0, errors = 0, cond_errors = 0;
  std::size_t accepted = 0, conditioned = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    const BlochSample s = sampler.next();
    if (!contains(iv, s)) continue;
    ++accepted;
    // Which state's box holds the pulse decides the reference detector.
    int state = 0;
    for (const AngleBox& box : iv.boxes) {
      if (s.theta < box.theta.lo || s.theta > box.theta.hi) continue;
      if (!box.full_circle() &&
          std::abs(std::remainder(s.phi - box.phi_center, 2 * kPi)) > box.phi_half_width)
        continue;
      state = box.state;
      break;
    }
    // Probability a photon lands on the reference detector k.
    const double off = s.phi - basis_phi_center(iv.basis, state);
    const double to_k =
        projection_weight(iv.basis, state, std::cos(s.theta), std::sin(s.theta), std::cos(off));
    const auto [c, e] = measure(s.intensity, to_k);
    clicks += c;
    errors += e;
    if (conditioned < conditional_pulses) {
      for (long attempt = 0; attempt < 100000000L; ++attempt) {
        const auto [cc, ce] = measure(s.intensity, to_k);
        if (!cc) continue;
        cond_errors += ce;
        ++conditioned;
        break;
      }
    }
  }
  ClickSimulation out;
  out.accepted = accepted;
  // Indicators are 0/1, so the variance is p(1 - p).
  auto fill = [](MeanEstimate& est, double hits, std::size_t count) {
    est.samples = count;
    if (count < 2) return;
    est.mean = hits / count;
    est.std_error = std::sqrt(est.mean * (1 - est.mean) / count);
  };
  fill(out.gain, clicks, accepted);
  fill(out.error_gain, errors, accepted);
  fill(out.error_rate, cond_errors, conditioned);
  return out;
}

// Brute-force single-click probabilities for n photons at the detectors:
// enumerate how many photons are detected at k and at l.
inline ClickPair click_prob_enumerated(int n, double f2_k, const ClickModel& m) {
  const double pk = f2_k * m.eta_det;
  const double pl = (1 - f2_k) * m.eta_det;
  const double pn = 1 - m.eta_det;
  ClickPair out;
  std::vector<double> lf(n + 1, 0.0);
  for (int i = 1; i <= n; ++i) lf[i] = lf[i - 1] + std::log(static_cast<double>(i));
  auto term = [&](int a, int b) {
    const int c = n - a - b;
    double logp = lf[n] - lf[a] - lf[b] - lf[c];
    double p = std::exp(logp);
    p *= std::pow(pk, a) * std::pow(pl, b) * std::pow(pn, c);
    return p;
  };
  const double d = m.dark_count;
  for (int a = 0; a <= n; ++a)
    for (int b = 0; a + b <= n; ++b) {
      const double p = term(a, b);
      const double k_fires = a > 0 ? 1.0 : d;
      const double l_fires = b > 0 ? 1.0 : d;
      out.k += p * k_fires * (1 - l_fires);
      out.l += p * l_fires * (1 - k_fires);
    }
  return out;
}

// det(H - lambda I) by Gaussian elimination with partial pivoting.  Real for
// Hermitian H and real lambda.
inline double char_poly(const HermitianMatrix& h, double lambda) {
  const std::size_t n = h.dim();
  std::vector<cplx> a(n * n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) a[r * n + c] = h(r, c) - (r == c ? lambda : 0.0);
  cplx det = 1.0;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    for (std::size_t r = k + 1; r < n; ++r)
      if (std::abs(a[r * n + k]) > std::abs(a[piv * n + k])) piv = r;
    if (std::abs(a[piv * n + k]) == 0.0) return 0.0;
    if (piv != k) {
      for (std::size_t c = 0; c < n; ++c) std::swap(a[k * n + c], a[piv * n + c]);
      det = -det;
    }
    det *= a[k * n + k];
    for (std::size_t r = k + 1; r < n; ++r) {
      const cplx f = a[r * n + k] / a[k * n + k];
      for (std::size_t c = k; c < n; ++c) a[r * n + c] -= f * a[k * n + c];
    }
  }
  return det.real();
}

// Eigenvalues as sign changes of det(H - lambda I) on a fine scan of the
// Gershgorin range, refined by bisection.  Assumes simple eigenvalues.
inline std::vector<double> eigenvalues_by_char_poly(const HermitianMatrix& h, int scan = 20000) {
  double radius = 0;
  for (std::size_t r = 0; r < h.dim(); ++r) {
    double row = 0;
    for (std::size_t c = 0; c < h.dim(); ++c) row += std::abs(h(r, c));
    radius = std::max(radius, row);
  }
  const double lo = -radius - 1e-6, hi = radius + 1e-6;
  std::vector<double> roots;
  double x0 = lo, f0 = char_poly(h, x0);
  for (int i = 1; i <= scan; ++i) {
    const double x1 = lo + (hi - lo) * i / scan;
    const double f1 = char_poly(h, x1);
    if (f0 == 0.0) {
      roots.push_back(x0);
    } else if ((f0 < 0) != (f1 < 0) && f1 != 0.0) {
      double a = x0, b = x1, fa = f0;
      for (int it = 0; it < 200 && b - a > 1e-15 * std::max(1.0, std::abs(a)); ++it) {
        const double mid = 0.5 * (a + b);
        const double fm = char_poly(h, mid);
        if ((fm < 0) == (fa < 0)) {
          a = mid;
          fa = fm;
        } else {
          b = mid;
        }
      }
      roots.push_back(0.5 * (a + b));
    }
    x0 = x1;
    f0 = f1;
  }
  return roots;
}

}  // namespace fpqsdc::oracle
