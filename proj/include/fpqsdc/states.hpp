#pragma once

// Post-selected n-photon states of the passive source and trace distances
// between intensity classes.
//
// Fock basis ordering: index m is |m>_H |n-m>_V, m = 0..n.  For the pulse
// a†(theta, phi) the n-photon projector has entries
//
//   sqrt(C(n,m1) C(n,m2)) cos(theta/2)^(m1+m2) sin(theta/2)^(2n-m1-m2) e^{-i phi (m1-m2)}.
//
// The density is independent of phi, so each entry factors into a
// (I, theta) integral and a closed-form phi integral per box.

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <valarray>
#include <vector>

#include "fpqsdc/click_stats.hpp"
#include "fpqsdc/errors.hpp"
#include "fpqsdc/quadrature.hpp"
#include "fpqsdc/source.hpp"

namespace fpqsdc {

using cplx = std::complex<double>;

enum class MatrixMode { full, paper_diagonal };

inline const char* to_string(MatrixMode m) {
  return m == MatrixMode::full ? "full" : "paper_diagonal";
}

// Small dense complex matrix, row-major.
class HermitianMatrix {
 public:
  HermitianMatrix() = default;
  explicit HermitianMatrix(std::size_t dim) : dim_(dim), data_(dim * dim) {}

  std::size_t dim() const { return dim_; }
  cplx& operator()(std::size_t r, std::size_t c) { return data_[r * dim_ + c]; }
  const cplx& operator()(std::size_t r, std::size_t c) const { return data_[r * dim_ + c]; }

  double trace() const {
    double t = 0;
    for (std::size_t i = 0; i < dim_; ++i) t += data_[i * dim_ + i].real();
    return t;
  }

  double hermiticity_defect() const {
    double worst = 0;
    for (std::size_t r = 0; r < dim_; ++r)
      for (std::size_t c = 0; c < dim_; ++c)
        worst = std::max(worst, std::abs((*this)(r, c) - std::conj((*this)(c, r))));
    return worst;
  }

  double frobenius() const {
    double s = 0;
    for (const cplx& v : data_) s += std::norm(v);
    return std::sqrt(s);
  }

  HermitianMatrix operator-(const HermitianMatrix& o) const {
    HermitianMatrix out(dim_);
    for (std::size_t i = 0; i < data_.size(); ++i) out.data_[i] = data_[i] - o.data_[i];
    return out;
  }

 private:
  std::size_t dim_ = 0;
  std::vector<cplx> data_;
};

struct PhotonDensityMatrix {
  int photons = 0;
  HermitianMatrix entries;
  double weight = 0;  // mass of the interval under the weighting used, before normalization
  double trace() const { return entries.trace(); }
};

// Normalized mixture of two states of the same photon number, by their weights.
inline PhotonDensityMatrix mix(const PhotonDensityMatrix& a, const PhotonDensityMatrix& b) {
  if (a.photons != b.photons) throw InvariantError("cannot mix states of different photon number");
  PhotonDensityMatrix out;
  out.photons = a.photons;
  out.weight = a.weight + b.weight;
  if (!(out.weight > 0)) throw DomainError("mixture of states with zero weight");
  const double wa = a.weight / out.weight, wb = b.weight / out.weight;
  const std::size_t dim = a.entries.dim();
  out.entries = HermitianMatrix(dim);
  for (std::size_t r = 0; r < dim; ++r)
    for (std::size_t c = 0; c < dim; ++c)
      out.entries(r, c) = wa * a.entries(r, c) + wb * b.entries(r, c);
  return out;
}

// --- Hermitian eigensolver ----------------------------------------------------
//
// Cyclic Jacobi on the real symmetric embedding [[A, -B], [B, A]] of
// H = A + iB.  Every eigenvalue of H appears twice in the embedding.

struct EigenResult {
  std::vector<double> values;   // ascending, dim of H
  double residual = 0;          // ||M V - V Lambda||_F of the embedding
  double scale = 0;             // ||M||_F
  int sweeps = 0;
};

inline EigenResult hermitian_eigen(const HermitianMatrix& h, int max_sweeps = 100) {
  const std::size_t n = h.dim();
  const std::size_t m = 2 * n;
  std::vector<double> a(m * m), v(m * m, 0.0);
  auto A = [&](std::size_t r, std::size_t c) -> double& { return a[r * m + c]; };
  auto V = [&](std::size_t r, std::size_t c) -> double& { return v[r * m + c]; };
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) {
      // Symmetrize to absorb rounding-level non-Hermiticity.
      const cplx z = 0.5 * (h(r, c) + std::conj(h(c, r)));
      A(r, c) = z.real();
      A(r + n, c + n) = z.real();
      A(r, c + n) = -z.imag();
      A(r + n, c) = z.imag();
    }
  const std::vector<double> original = a;
  for (std::size_t i = 0; i < m; ++i) V(i, i) = 1.0;

  double scale = 0;
  for (double x : a) scale += x * x;
  scale = std::sqrt(scale);

  EigenResult out;
  out.scale = scale;
  int sweep = 0;
  for (; sweep < max_sweeps; ++sweep) {
    double off = 0;
    for (std::size_t p = 0; p < m; ++p)
      for (std::size_t q = p + 1; q < m; ++q) off += A(p, q) * A(p, q);
    if (std::sqrt(off) <= 1e-15 * scale || scale == 0) break;
    for (std::size_t p = 0; p < m; ++p) {
      for (std::size_t q = p + 1; q < m; ++q) {
        const double apq = A(p, q);
        if (std::abs(apq) < 1e-300) continue;
        const double theta = (A(q, q) - A(p, p)) / (2 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1));
        const double c = 1 / std::sqrt(t * t + 1);
        const double s = t * c;
        for (std::size_t k = 0; k < m; ++k) {
          const double akp = A(k, p), akq = A(k, q);
          A(k, p) = c * akp - s * akq;
          A(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < m; ++k) {
          const double apk = A(p, k), aqk = A(q, k);
          A(p, k) = c * apk - s * aqk;
          A(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < m; ++k) {
          const double vkp = V(k, p), vkq = V(k, q);
          V(k, p) = c * vkp - s * vkq;
          V(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  out.sweeps = sweep;

  // Residual against the original embedding.
  double res = 0;
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < m; ++c) {
      double mv = 0;
      for (std::size_t k = 0; k < m; ++k) mv += original[r * m + k] * V(k, c);
      const double d = mv - V(r, c) * A(c, c);
      res += d * d;
    }
  out.residual = std::sqrt(res);
  if (sweep == max_sweeps && out.residual > 1e-10 * std::max(scale, 1e-300))
    throw NumericalError("Jacobi eigensolver did not converge; residual " +
                         std::to_string(out.residual));

  std::vector<double> all(m);
  for (std::size_t i = 0; i < m; ++i) all[i] = A(i, i);
  std::sort(all.begin(), all.end());
  out.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.values[i] = 0.5 * (all[2 * i] + all[2 * i + 1]);
  return out;
}

// Sum of absolute eigenvalues of the difference (trace-norm convention, <= 2).
inline double trace_distance(const PhotonDensityMatrix& a, const PhotonDensityMatrix& b) {
  if (a.photons != b.photons || a.entries.dim() != b.entries.dim())
    throw InvariantError("trace distance needs matrices of the same photon number");
  const EigenResult e = hermitian_eigen(a.entries - b.entries);
  double d = 0;
  for (double l : e.values) d += std::abs(l);
  return d;
}

// --- Density matrices of selection intervals ---------------------------------

namespace detail {

inline double binomial(int n, int k) {
  double r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// (1/2pi) * integral of e^{-i phi d} over the box.
inline cplx phi_factor(const AngleBox& box, int d) {
  if (d == 0) return box.phi_fraction();
  if (box.full_circle()) return 0.0;
  const double mag = std::sin(d * box.phi_half_width) / (kPi * d);
  return std::polar(mag, -box.phi_center * d);
}

}  // namespace detail

// Normalized n-photon states of the interval for n = 0..n_max, from one
// quadrature pass.  `weighting` selects whether pulses contribute in
// proportion to their selection weight only, or to the probability that
// they carry n photons.
inline std::vector<PhotonDensityMatrix> density_matrices(
    const SelectionInterval& iv, int n_max, MatrixMode mode = MatrixMode::full,
    YieldWeighting weighting = YieldWeighting::interval_average, const QuadratureSpec& spec = {}) {
  if (n_max < 0) throw InvariantError("photon number must be non-negative");
  const std::size_t nb = iv.boxes.size();
  const std::size_t np = static_cast<std::size_t>(n_max) + 1;

  // For photon number n and box b: the (I, theta) moments
  //   M[j] = int w c^j s^(2n-j),  j = 0..2n,
  // followed by the box mass int w.  Entry (m1, m2) uses j = m1 + m2.
  std::vector<std::size_t> offset(np + 1, 0);
  for (std::size_t n = 0; n < np; ++n) offset[n + 1] = offset[n] + nb * (2 * n + 2);
  auto slot = [&](std::size_t n, std::size_t b) { return offset[n] + b * (2 * n + 2); };

  auto compute = [&](const IntervalRule& r) {
    std::valarray<double> acc(0.0, offset[np]);
    std::vector<double> cpow(2 * np), spow(2 * np), row(np);
    for (const PlaneNode& node : r.plane) {
      const double c = std::cos(node.theta / 2);
      const double s = std::sin(node.theta / 2);
      cpow[0] = spow[0] = 1;
      for (std::size_t j = 1; j < 2 * np; ++j) {
        cpow[j] = cpow[j - 1] * c;
        spow[j] = spow[j - 1] * s;
      }
      poisson_row(node.intensity, n_max, row.data());
      for (std::size_t n = 0; n < np; ++n) {
        const double w =
            weighting == YieldWeighting::photon_number ? node.weight * row[n] : node.weight;
        const std::size_t base = slot(n, static_cast<std::size_t>(node.box));
        for (std::size_t j = 0; j <= 2 * n; ++j) acc[base + j] += w * cpow[j] * spow[2 * n - j];
        acc[base + 2 * n + 1] += w;
      }
    }
    return acc;
  };
  QuadratureSpec local = spec;
  local.abs_tol = 1e-300;
  const std::valarray<double> mom = refine_interval(iv, local, compute).value;

  std::vector<PhotonDensityMatrix> out(np);
  for (std::size_t n = 0; n < np; ++n) {
    const std::size_t dim = n + 1;
    std::vector<double> binom_root(dim);
    for (std::size_t m = 0; m < dim; ++m)
      binom_root[m] = std::sqrt(detail::binomial(static_cast<int>(n), static_cast<int>(m)));
    PhotonDensityMatrix& rho = out[n];
    rho.photons = static_cast<int>(n);
    rho.entries = HermitianMatrix(dim);
    double norm = 0;
    for (std::size_t b = 0; b < nb; ++b) {
      const AngleBox& box = iv.boxes[b];
      const std::size_t base = slot(n, b);
      norm += mom[base + 2 * n + 1] * box.phi_fraction();
      for (std::size_t m1 = 0; m1 < dim; ++m1)
        for (std::size_t m2 = 0; m2 < dim; ++m2) {
          if (mode == MatrixMode::paper_diagonal && m1 != m2) continue;
          const cplx ph = detail::phi_factor(box, static_cast<int>(m1) - static_cast<int>(m2));
          if (ph == cplx(0.0)) continue;
          rho.entries(m1, m2) += binom_root[m1] * binom_root[m2] * mom[base + m1 + m2] * ph;
        }
    }
    if (!(norm > 0)) throw DomainError("density matrix of an empty interval " + iv.label());
    rho.weight = norm;
    for (std::size_t r = 0; r < dim; ++r)
      for (std::size_t c = 0; c < dim; ++c) rho.entries(r, c) /= norm;
  }
  return out;
}

inline PhotonDensityMatrix density_matrix(const SelectionInterval& iv, int n,
                                          MatrixMode mode = MatrixMode::full,
                                          YieldWeighting weighting = YieldWeighting::interval_average,
                                          const QuadratureSpec& spec = {}) {
  return density_matrices(iv, n, mode, weighting, spec)[static_cast<std::size_t>(n)];
}

// Mixture over the signal-side region I in (0, I_s] of several bases, each
// basis weighted by the (I, theta) mass of its theta region with phi taken
// conditionally inside the basis.  This is the weighting behind the
// closed-form rho_1 and rho_2 of the basis union.
inline PhotonDensityMatrix basis_union_matrix(const SourceParams& src, int n,
                                              std::span<const Basis> bases,
                                              MatrixMode mode = MatrixMode::paper_diagonal,
                                              const QuadratureSpec& spec = {}) {
  PhotonDensityMatrix out;
  out.photons = n;
  out.entries = HermitianMatrix(static_cast<std::size_t>(n) + 1);
  double total = 0;
  for (Basis b : bases) {
    SelectionInterval iv = make_interval(src, b, IntensityClass::s);
    iv.intensity = {0.0, src.intensity_max};
    const std::valarray<double> box_mass =
        refine_interval(iv, spec, [](const IntervalRule& r) {
          return std::valarray<double>(r.box_plane_mass.data(), r.box_plane_mass.size());
        }).value;
    // States sharing a theta band (X and Y) count the band once.
    double mass = 0;
    for (std::size_t k = 0; k < iv.boxes.size(); ++k) {
      bool repeat = false;
      for (std::size_t j = 0; j < k; ++j)
        repeat = repeat || (iv.boxes[j].theta.lo == iv.boxes[k].theta.lo &&
                            iv.boxes[j].theta.hi == iv.boxes[k].theta.hi);
      if (!repeat) mass += box_mass[k];
    }
    const PhotonDensityMatrix rho = density_matrix(iv, n, mode, YieldWeighting::interval_average, spec);
    for (std::size_t r = 0; r <= static_cast<std::size_t>(n); ++r)
      for (std::size_t c = 0; c <= static_cast<std::size_t>(n); ++c)
        out.entries(r, c) += mass * rho.entries(r, c);
    total += mass;
  }
  for (std::size_t r = 0; r <= static_cast<std::size_t>(n); ++r)
    for (std::size_t c = 0; c <= static_cast<std::size_t>(n); ++c) out.entries(r, c) /= total;
  return out;
}

inline PhotonDensityMatrix two_photon_matrix(const SourceParams& src,
                                             MatrixMode mode = MatrixMode::paper_diagonal,
                                             const QuadratureSpec& spec = {}) {
  const Basis all[] = {Basis::Z, Basis::X, Basis::Y};
  return basis_union_matrix(src, 2, all, mode, spec);
}

// D(rho_i^n, rho_j^n) for the three intensity classes d1, d2, s.
class TraceDistanceTable {
 public:
  TraceDistanceTable() = default;
  explicit TraceDistanceTable(int n_cut) : n_cut_(n_cut), d_((n_cut + 1) * 9, 0.0) {}

  int n_cut() const { return n_cut_; }
  double operator()(int n, int i, int j) const { return d_[index(n, i, j)]; }
  void set(int n, int i, int j, double v) {
    d_[index(n, i, j)] = v;
    d_[index(n, j, i)] = v;
  }
  void scale(double factor) {
    for (double& v : d_) v *= factor;
  }

 private:
  std::size_t index(int n, int i, int j) const {
    return static_cast<std::size_t>(n) * 9 + static_cast<std::size_t>(i) * 3 + j;
  }
  int n_cut_ = 0;
  std::vector<double> d_;
};

// Builds the table from per-class matrices: classes[i][n].
inline TraceDistanceTable trace_distance_table(
    const std::vector<std::vector<PhotonDensityMatrix>>& classes, int n_cut) {
  TraceDistanceTable t(n_cut);
  for (int n = 0; n <= n_cut; ++n)
    for (std::size_t i = 0; i < classes.size(); ++i)
      for (std::size_t j = i + 1; j < classes.size(); ++j)
        t.set(n, static_cast<int>(i), static_cast<int>(j),
              trace_distance(classes[i][n], classes[j][n]));
  return t;
}

}  // namespace fpqsdc
