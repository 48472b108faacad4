#pragma once

// Serialization of reports: JSON, CSV rows, SVG plots and run manifests.
// Column meanings are listed in docs/columns.md.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fpqsdc/optimizer.hpp"
#include "fpqsdc/security.hpp"
#include "fpqsdc/states.hpp"

namespace fpqsdc {

inline constexpr const char* kToolkitVersion = "1.0.0";

// 64-bit FNV-1a, printed as 16 hex digits.
inline std::string fnv1a_hex(const std::string& data) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string run_id(const std::string& command, const std::string& canonical_config,
                          std::uint64_t seed) {
  return fnv1a_hex(command + "\n" + canonical_config + "\n" + std::to_string(seed));
}

// Fixed-format number so that CSV output is byte-stable.
inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10e", v);
  return buf;
}

// --- JSON ---------------------------------------------------------------------

inline nlohmann::json to_json(const SystemParams& p) {
  return {{"eta_opt_ba", p.eta_opt_ba},     {"eta_opt_bab", p.eta_opt_bab},
          {"dark_count", p.dark_count},     {"err_opt_a", p.err_opt_a},
          {"err_opt_b", p.err_opt_b},       {"eta_det", p.eta_det},
          {"fiber_loss_db_per_km", p.fiber_loss_db_per_km},
          {"eve_advantage", p.eve_advantage}, {"n_cut", p.n_cut},
          {"pulse_rate_hz", p.pulse_rate_hz}};
}

inline nlohmann::json to_json(const SourceParams& s) {
  return {{"intensity_max", s.intensity_max}, {"i_vac", s.i_vac},
          {"i_d", s.i_d},                     {"delta_x", s.delta_x},
          {"delta_z", s.delta_z},             {"delta_x_over_pi", s.delta_x / kPi},
          {"delta_z_over_pi", s.delta_z / kPi}, {"vt_product", s.vt_product}};
}

inline nlohmann::json to_json(const BasisReport& b) {
  return {{"basis", to_string(b.basis)},
          {"p_select", b.p_select},
          {"q_ba", b.q_ba},
          {"e_ba", b.e_ba},
          {"q_bab", b.q_bab},
          {"e_bab", b.e_bab},
          {"p0", b.p0},
          {"p1", b.p1},
          {"i_ab", b.i_ab},
          {"i_ae", b.i_ae},
          {"q1_eve", b.eve.q1},
          {"q2_eve", b.eve.q2},
          {"h1", b.eve.h1},
          {"y1_min", b.bounds.y1_min},
          {"e1y1_max", b.bounds.e1y1_max},
          {"e1_max", b.bounds.e1_max},
          {"single_photon_guarantee", b.bounds.single_photon_guarantee},
          {"capacity", b.capacity}};
}

inline nlohmann::json to_json(const SecrecyReport& r) {
  nlohmann::json bases = nlohmann::json::array();
  for (const BasisReport& b : r.bases) bases.push_back(to_json(b));
  return {{"attenuation_db", r.attenuation_db},
          {"distance_km", attenuation_to_km(r.system, r.attenuation_db)},
          {"mode", to_string(r.options.mode)},
          {"params", to_json(r.system)},
          {"source", to_json(r.source)},
          {"bases", bases},
          {"rate", r.rate},
          {"rate_bps", r.rate * r.system.pulse_rate_hz}};
}

inline nlohmann::json to_json(const OptResult& o) {
  return {{"attenuation_db", o.attenuation_db},
          {"intensity", o.best.intensity},
          {"delta_x", o.best.delta_x},
          {"delta_z", o.best.delta_z},
          {"delta_x_over_pi", o.best.delta_x / kPi},
          {"delta_z_over_pi", o.best.delta_z / kPi},
          {"rate", o.rate},
          {"grid_best_rate", o.grid_best_rate},
          {"beyond_cutoff", o.beyond_cutoff},
          {"evaluations", o.evaluations},
          {"failed_evaluations", o.failed_evaluations}};
}

// Matrix as an array of rows of [re, im] pairs.
inline nlohmann::json to_json(const PhotonDensityMatrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t r = 0; r < m.entries.dim(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t c = 0; c < m.entries.dim(); ++c)
      row.push_back({m.entries(r, c).real(), m.entries(r, c).imag()});
    rows.push_back(row);
  }
  return {{"n", m.photons}, {"entries", rows}};
}

// --- CSV -----------------------------------------------------------------------

inline std::vector<std::string> report_columns() {
  std::vector<std::string> cols = {"run_id",   "attenuation_db", "distance_km", "mode",
                                   "optimized", "intensity",     "delta_x_over_pi",
                                   "delta_z_over_pi", "rate",    "rate_bps"};
  for (const char* b : {"z", "x", "y"})
    for (const char* f : {"p_select", "capacity", "i_ab", "i_ae", "q1_eve", "q2_eve", "y1_min",
                          "e1_max", "q_ba", "e_ba", "q_bab", "e_bab"})
      cols.push_back(std::string(b) + "_" + f);
  return cols;
}

inline std::string csv_header() {
  std::string out;
  for (const std::string& c : report_columns()) out += (out.empty() ? "" : ",") + c;
  return out + "\n";
}

inline std::string csv_row(const std::string& id, const SecrecyReport& r, bool optimized) {
  std::vector<std::string> f = {id,
                                num(r.attenuation_db),
                                num(attenuation_to_km(r.system, r.attenuation_db)),
                                to_string(r.options.mode),
                                optimized ? "1" : "0",
                                num(r.source.intensity_max),
                                num(r.source.delta_x / kPi),
                                num(r.source.delta_z / kPi),
                                num(r.rate),
                                num(r.rate * r.system.pulse_rate_hz)};
  for (const BasisReport& b : r.bases)
    for (double v : {b.p_select, b.capacity, b.i_ab, b.i_ae, b.eve.q1, b.eve.q2, b.bounds.y1_min,
                     b.bounds.e1_max, b.q_ba, b.e_ba, b.q_bab, b.e_bab})
      f.push_back(num(v));
  std::string out;
  for (const std::string& s : f) out += (out.empty() ? "" : ",") + s;
  return out + "\n";
}

inline std::string trace_csv(const OptResult& o) {
  std::string out = "stage,step,intensity,delta_x_over_pi,delta_z_over_pi,rate\n";
  for (const TraceEntry& t : o.trace)
    out += t.stage + "," + std::to_string(t.step) + "," + num(t.point.intensity) + "," +
           num(t.point.delta_x / kPi) + "," + num(t.point.delta_z / kPi) + "," + num(t.rate) + "\n";
  return out;
}

// --- SVG -----------------------------------------------------------------------

struct PlotSeries {
  std::string name;
  std::string color;
  std::vector<double> x;
  std::vector<double> y;  // non-positive values are skipped on the log axis
};

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// Line plot with a linear x axis and a log10 y axis.
inline std::string svg_log_plot(const std::vector<PlotSeries>& series, const std::string& x_label,
                                const std::string& y_label) {
  const double W = 640, H = 420, L = 80, R = 150, T = 20, B = 50;
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const PlotSeries& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      if (s.y[i] > 0) {
        y0 = std::min(y0, std::log10(s.y[i]));
        y1 = std::max(y1, std::log10(s.y[i]));
      }
    }
  if (!(x1 > x0)) {
    x0 = 0;
    x1 = 1;
  }
  if (!(y1 >= y0)) {
    y0 = -10;
    y1 = 0;
  }
  y0 = std::floor(y0);
  y1 = std::ceil(y1);
  if (y1 == y0) y1 = y0 + 1;
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double ly) { return H - B - (ly - y0) / (y1 - y0) * (H - T - B); };

  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  os << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\""
     << H - T - B << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int d = static_cast<int>(y0); d <= static_cast<int>(y1); ++d) {
    os << "<line x1=\"" << L << "\" y1=\"" << py(d) << "\" x2=\"" << W - R << "\" y2=\"" << py(d)
       << "\" stroke=\"#ddd\"/>\n";
    os << "<text x=\"" << L - 6 << "\" y=\"" << py(d) + 4 << "\" text-anchor=\"end\">1e" << d
       << "</text>\n";
  }
  for (int k = 0; k <= 5; ++k) {
    const double x = x0 + (x1 - x0) * k / 5;
    os << "<text x=\"" << px(x) << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">"
       << std::setprecision(3) << std::defaultfloat << x << std::fixed << std::setprecision(2)
       << "</text>\n";
  }
  os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">"
     << xml_escape(x_label) << "</text>\n";
  os << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
     << (T + H - B) / 2 << ")\">" << xml_escape(y_label) << "</text>\n";
  int legend = 0;
  for (const PlotSeries& s : series) {
    os << "<polyline fill=\"none\" stroke=\"" << xml_escape(s.color) << "\" stroke-width=\"1.5\" points=\"";
    bool first = true;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!(s.y[i] > 0)) continue;
      os << (first ? "" : " ") << px(s.x[i]) << "," << py(std::log10(s.y[i]));
      first = false;
    }
    os << "\"/>\n";
    const double ly = T + 16 + 18 * legend++;
    os << "<line x1=\"" << W - R + 10 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 30 << "\" y2=\""
       << ly << "\" stroke=\"" << xml_escape(s.color) << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << W - R + 36 << "\" y=\"" << ly + 4 << "\">" << xml_escape(s.name)
       << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

// --- Manifest ------------------------------------------------------------------

struct RunManifest {
  std::string command;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string timestamp;
  std::string version = kToolkitVersion;
  std::vector<std::string> outputs;
  std::string run_id;
};

inline std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline nlohmann::json to_json(const RunManifest& m) {
  return {{"command", m.command}, {"config_hash", m.config_hash}, {"seed", m.seed},
          {"timestamp", m.timestamp}, {"toolkit_version", m.version}, {"outputs", m.outputs},
          {"run_id", m.run_id}};
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

}  // namespace fpqsdc
