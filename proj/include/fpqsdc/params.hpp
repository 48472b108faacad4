#pragma once

// Device, source and channel parameters shared by every stage of the model.
//
// Attenuations are round-trip figures in dB: the first transmission round
// (Bob to Alice, "BA") crosses the fiber once and sees half of the figure,
// the second round (Bob to Alice to Bob, "BAB") crosses it twice.

#include <cmath>
#include <numbers>
#include <string>

#include "fpqsdc/errors.hpp"

namespace fpqsdc {

struct SystemParams {
  double eta_opt_ba = 0.21;
  double eta_opt_bab = 0.088;
  double dark_count = 8e-8;
  double err_opt_a = 0.0131;
  double err_opt_b = 0.0026;
  double eta_det = 0.7;
  double fiber_loss_db_per_km = 0.2;  // one direction
  double eve_advantage = 1.0;         // max{1, gamma_E / gamma_A}
  int n_cut = 7;
  double pulse_rate_hz = 1.0;  // scales per-pulse rates to bit/s in reports

  void validate() const;
};

// Post-selection geometry of the passive source.  Interval boundaries are
// absolute intensities: d1 = [0, i_vac], d2 = (i_vac, i_d], s = (i_d, intensity_max].
struct SourceParams {
  double intensity_max = 0.0895;
  double i_vac = 0.05 * 0.0895;
  double i_d = 0.1 * 0.0895;
  double delta_x = 0.0490 * std::numbers::pi;
  double delta_z = 0.0546 * std::numbers::pi;
  double vt_product = 0.0895 / 2;

  static constexpr double kVacRatio = 0.05;
  static constexpr double kDecoyRatio = 0.1;

  // Operating point with the default boundary ratios and 2vt = I_s.
  static SourceParams from_point(double intensity, double delta_x, double delta_z) {
    SourceParams s;
    s.intensity_max = intensity;
    s.i_vac = kVacRatio * intensity;
    s.i_d = kDecoyRatio * intensity;
    s.delta_x = delta_x;
    s.delta_z = delta_z;
    s.vt_product = intensity / 2;
    return s;
  }

  // Upper end of the intensity support, 2vt.
  double support_max() const { return 2 * vt_product; }

  void validate() const;
};

enum class Round { BA, BAB };

inline const char* to_string(Round r) { return r == Round::BA ? "BA" : "BAB"; }

struct ChannelSpec {
  Round round = Round::BA;
  double attenuation_db = 0.0;
  double transmittance = 1.0;  // 10^(-attenuation/10)
  double efficiency = 1.0;     // transmittance * intrinsic optical efficiency
};

inline double db_to_transmittance(double db) { return std::pow(10.0, -db / 10.0); }

struct ChannelPair {
  ChannelSpec ba;
  ChannelSpec bab;
};

// Splits a round-trip attenuation between the two transmission rounds.
inline ChannelPair derive_channel(const SystemParams& params, double total_attenuation_db) {
  if (!(total_attenuation_db >= 0.0) || !std::isfinite(total_attenuation_db))
    throw InvariantError("attenuation must be a finite non-negative dB figure");
  ChannelPair out;
  out.ba.round = Round::BA;
  out.ba.attenuation_db = total_attenuation_db / 2;
  out.ba.transmittance = db_to_transmittance(out.ba.attenuation_db);
  out.ba.efficiency = out.ba.transmittance * params.eta_opt_ba;
  out.bab.round = Round::BAB;
  out.bab.attenuation_db = total_attenuation_db;
  out.bab.transmittance = db_to_transmittance(out.bab.attenuation_db);
  out.bab.efficiency = out.bab.transmittance * params.eta_opt_bab;
  return out;
}

inline double attenuation_to_km(const SystemParams& p, double total_attenuation_db) {
  return total_attenuation_db / (2 * p.fiber_loss_db_per_km);
}

inline double km_to_attenuation(const SystemParams& p, double km) {
  return km * 2 * p.fiber_loss_db_per_km;
}

namespace detail {

inline void require(bool ok, const std::string& message) {
  if (!ok) throw InvariantError(message);
}

}  // namespace detail

inline void SystemParams::validate() const {
  using detail::require;
  require(eta_opt_ba > 0 && eta_opt_ba <= 1, "eta_opt_ba must lie in (0, 1]");
  require(eta_opt_bab > 0 && eta_opt_bab <= 1, "eta_opt_bab must lie in (0, 1]");
  require(dark_count >= 0 && dark_count < 1, "dark_count must lie in [0, 1)");
  require(err_opt_a >= 0 && err_opt_a < 0.5, "err_opt_a must lie in [0, 0.5)");
  require(err_opt_b >= 0 && err_opt_b < 0.5, "err_opt_b must lie in [0, 0.5)");
  require(eta_det > 0 && eta_det <= 1, "eta_det must lie in (0, 1]");
  require(fiber_loss_db_per_km > 0 && std::isfinite(fiber_loss_db_per_km),
          "fiber_loss_db_per_km must be positive");
  require(eve_advantage >= 1 && std::isfinite(eve_advantage), "eve_advantage must be >= 1");
  require(n_cut >= 2 && n_cut <= 40, "n_cut must lie in [2, 40]");
  require(pulse_rate_hz > 0 && std::isfinite(pulse_rate_hz), "pulse_rate_hz must be positive");
}

inline void SourceParams::validate() const {
  using detail::require;
  constexpr double half_pi = std::numbers::pi / 2;
  require(delta_x > 0, "delta_x must be positive");
  require(delta_x < half_pi, "delta_x must be below pi/2");
  require(delta_z > 0, "delta_z must be positive");
  require(delta_z < half_pi, "delta_z must be below pi/2");
  require(std::isfinite(intensity_max) && intensity_max > 0, "intensity_max must be positive");
  require(i_vac >= 0, "i_vac must be non-negative");
  require(i_vac < i_d && i_d < intensity_max,
          "interval boundaries must satisfy 0 <= i_vac < i_d < intensity_max");
  require(std::isfinite(vt_product) && 2 * vt_product >= intensity_max * (1 - 1e-12),
          "vt_product must satisfy 2*vt >= intensity_max");
}

}  // namespace fpqsdc
