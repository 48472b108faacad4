// fpqsdc: command-line driver for the passive-source secrecy rate model.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 validation failure
// (including operating points that violate source invariants).

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fpqsdc/config.hpp"
#include "fpqsdc/optimizer.hpp"
#include "fpqsdc/parallel.hpp"
#include "fpqsdc/report.hpp"
#include "fpqsdc/security.hpp"
#include "fpqsdc/validation.hpp"

using namespace fpqsdc;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitValidation = 2;

struct Common {
  std::string config_path;
  std::string out = "fpqsdc";
  unsigned jobs = 0;
};

RunConfig load(const Common& c) {
  return c.config_path.empty() ? default_config() : load_config(c.config_path);
}

std::string command_line(int argc, char** argv) {
  std::string s;
  for (int i = 1; i < argc; ++i) s += (i > 1 ? " " : "") + std::string(argv[i]);
  return s;
}

void write_manifest(const std::string& out, const std::string& command, const RunConfig& cfg,
                    std::vector<std::string> outputs) {
  RunManifest m;
  m.command = command;
  m.config_hash = fnv1a_hex(cfg.canonical);
  m.seed = cfg.seed;
  m.timestamp = utc_timestamp();
  m.run_id = run_id(command, cfg.canonical, cfg.seed);
  const std::string path = out + ".manifest.json";
  outputs.push_back(path);
  m.outputs = outputs;
  write_text(path, to_json(m).dump(2) + "\n");
}

MatrixMode parse_mode(const std::string& s) {
  if (s == "full") return MatrixMode::full;
  if (s == "paper_diagonal") return MatrixMode::paper_diagonal;
  throw ConfigError("mode must be full or paper_diagonal");
}

// --- evaluate ---------------------------------------------------------------------

struct EvaluateArgs {
  Common common;
  double attenuation_db = 2.0;
  std::string intensity, delta_x, delta_z, mode;
  bool dump_matrices = false;
  bool dump_lp = false;
};

int run_evaluate(const EvaluateArgs& a, const std::string& command) {
  RunConfig cfg = load(a.common);
  SourceParams src = cfg.source;
  const bool point = !a.intensity.empty() || !a.delta_x.empty() || !a.delta_z.empty();
  if (point) {
    const double I = a.intensity.empty() ? src.intensity_max : std::stod(a.intensity);
    const double dx = a.delta_x.empty() ? src.delta_x : parse_angle(a.delta_x);
    const double dz = a.delta_z.empty() ? src.delta_z : parse_angle(a.delta_z);
    src = SourceParams::from_point(I, dx, dz);
  }
  src.validate();  // InvariantError -> exit 2
  EvalOptions opt;
  opt.mode = a.mode.empty() ? cfg.mode : parse_mode(a.mode);
  const SecrecyReport rep = evaluate(cfg.params, src, a.attenuation_db, opt);
  const std::string id = run_id(command, cfg.canonical, cfg.seed);
  std::vector<std::string> outputs = {a.common.out + ".json", a.common.out + ".csv"};
  json j = to_json(rep);
  j["run_id"] = id;
  write_text(a.common.out + ".json", j.dump(2) + "\n");
  write_text(a.common.out + ".csv", csv_header() + csv_row(id, rep, false));

  if (a.dump_matrices) {
    json dump = json::object();
    for (Basis b : kBases)
      for (IntensityClass c : kClasses)
        for (int k = 0; k < 2; ++k) {
          const SelectionInterval iv = make_interval(src, b, c, k);
          json list = json::array();
          for (const auto& m : density_matrices(iv, cfg.params.n_cut, opt.mode, opt.weighting))
            list.push_back(to_json(m));
          dump[iv.label()] = list;
        }
    outputs.push_back(a.common.out + ".matrices.json");
    write_text(outputs.back(), dump.dump(1) + "\n");
  }
  if (a.dump_lp) {
    std::ostringstream os;
    const ChannelPair ch = derive_channel(cfg.params, a.attenuation_db);
    for (Basis b : kBases) {
      const BasisInputs in = basis_inputs(cfg.params, src, ch, b, opt);
      os << "# basis " << to_string(b) << " yield LP\n";
      dump_lp(os, build_yield_lp(in.decoy.yield_classes, in.decoy.yield_distances, cfg.params.n_cut));
      for (int k = 0; k < 2; ++k) {
        os << "# basis " << to_string(b) << " error LP, state " << state_name(b, k) << "\n";
        dump_lp(os, build_error_lp(in.decoy.error_classes[k], in.decoy.error_distances[k],
                                   cfg.params.n_cut));
      }
    }
    outputs.push_back(a.common.out + ".lp.txt");
    write_text(outputs.back(), os.str());
  }
  write_manifest(a.common.out, command, cfg, outputs);
  std::printf("rate %.6e per pulse (Z %.4e, X %.4e, Y %.4e)\n", rep.rate, rep.bases[0].capacity,
              rep.bases[1].capacity, rep.bases[2].capacity);
  return kExitOk;
}

// --- sweep ------------------------------------------------------------------------

struct SweepArgs {
  Common common;
  std::optional<double> from_db, to_db, step_db;
  bool optimize = false;
  bool baseline = false;
  std::string plot;
};

int run_sweep(const SweepArgs& a, const std::string& command) {
  RunConfig cfg = load(a.common);
  if (a.from_db) cfg.sweep.from_db = *a.from_db;
  if (a.to_db) cfg.sweep.to_db = *a.to_db;
  if (a.step_db) cfg.sweep.step_db = *a.step_db;
  try {
    cfg.sweep.validate();
  } catch (const InvariantError& e) {
    throw ConfigError(e.what());
  }
  const std::vector<double> points = cfg.sweep.points();
  if (points.empty()) throw ConfigError("empty sweep");
  const unsigned jobs = resolve_jobs(a.common.jobs);
  EvalOptions opt;
  opt.mode = cfg.mode;

  std::vector<SecrecyReport> reports(points.size());
  if (a.optimize) {
    // Grid evaluations inside each optimization run in parallel.
    for (std::size_t i = 0; i < points.size(); ++i) {
      const OptResult o = optimize(cfg.params, points[i], cfg.search, opt, jobs);
      SourceParams src = o.beyond_cutoff ? cfg.source
                                         : SourceParams::from_point(o.best.intensity, o.best.delta_x,
                                                                    o.best.delta_z);
      reports[i] = evaluate(cfg.params, src, points[i], opt);
      std::fprintf(stderr, "%6.2f dB  rate %.4e\n", points[i], reports[i].rate);
    }
  } else {
    parallel_for(points.size(), jobs, [&](std::size_t i) {
      reports[i] = evaluate(cfg.params, cfg.source, points[i], opt);
    });
  }
  std::vector<ActiveReport> active;
  if (a.baseline)
    for (double db : points) active.push_back(optimize_active(cfg.params, db));

  const std::string id = run_id(command, cfg.canonical, cfg.seed);
  std::string header = csv_header();
  if (a.baseline) header.insert(header.size() - 1, ",active_mu,active_capacity");
  std::string csv = header;
  for (std::size_t i = 0; i < points.size(); ++i) {
    std::string row = csv_row(id, reports[i], a.optimize);
    if (a.baseline) row.insert(row.size() - 1, "," + num(active[i].mu) + "," + num(active[i].capacity));
    csv += row;
  }
  std::vector<std::string> outputs = {a.common.out + ".csv"};
  write_text(outputs[0], csv);
  if (!a.plot.empty()) {
    std::vector<PlotSeries> series;
    PlotSeries passive{"passive", "#1f77b4", {}, {}};
    for (const SecrecyReport& r : reports) {
      passive.x.push_back(r.attenuation_db);
      passive.y.push_back(r.rate);
    }
    series.push_back(passive);
    if (a.baseline) {
      PlotSeries act{"active", "#d62728", {}, {}};
      for (std::size_t i = 0; i < points.size(); ++i) {
        act.x.push_back(points[i]);
        act.y.push_back(active[i].capacity);
      }
      series.push_back(act);
    }
    write_text(a.plot, svg_log_plot(series, "attenuation (dB)", "rate (bits per pulse)"));
    outputs.push_back(a.plot);
  }
  write_manifest(a.common.out, command, cfg, outputs);
  return kExitOk;
}

// --- optimize ---------------------------------------------------------------------

struct OptimizeArgs {
  Common common;
  double attenuation_db = 2.0;
  std::string trace;
};

int run_optimize(const OptimizeArgs& a, const std::string& command) {
  RunConfig cfg = load(a.common);
  EvalOptions opt;
  opt.mode = cfg.mode;
  const OptResult o = optimize(cfg.params, a.attenuation_db, cfg.search, opt, resolve_jobs(a.common.jobs));
  json j = to_json(o);
  j["run_id"] = run_id(command, cfg.canonical, cfg.seed);
  std::vector<std::string> outputs = {a.common.out + ".json"};
  write_text(outputs[0], j.dump(2) + "\n");
  if (!a.trace.empty()) {
    write_text(a.trace, trace_csv(o));
    outputs.push_back(a.trace);
  }
  write_manifest(a.common.out, command, cfg, outputs);
  std::printf("%s\n", j.dump(2).c_str());
  return kExitOk;
}

// --- distance ---------------------------------------------------------------------

struct DistanceArgs {
  Common common;
  double lo_db = 0;
  double hi_db = 20;
};

int run_distance(const DistanceArgs& a, const std::string& command) {
  RunConfig cfg = load(a.common);
  EvalOptions opt;
  opt.mode = cfg.mode;
  const DistanceResult passive =
      max_distance(cfg.params, cfg.search, opt, resolve_jobs(a.common.jobs), a.lo_db, a.hi_db);
  const DistanceResult active = active_max_distance(cfg.params, a.lo_db, a.hi_db);
  json steps = json::array();
  for (const BisectionStep& s : passive.steps)
    steps.push_back({{"lo_db", s.lo_db}, {"hi_db", s.hi_db}, {"rate_lo", s.rate_lo}, {"rate_hi", s.rate_hi}});
  json j = {{"passive_km", passive.km},
            {"passive_attenuation_db", passive.attenuation_db},
            {"passive_best", {{"intensity", passive.best.intensity},
                              {"delta_x_over_pi", passive.best.delta_x / kPi},
                              {"delta_z_over_pi", passive.best.delta_z / kPi},
                              {"rate", passive.rate}}},
            {"active_km", active.km},
            {"active_attenuation_db", active.attenuation_db},
            {"ratio", active.km > 0 ? passive.km / active.km : 0.0},
            {"bisection", steps},
            {"run_id", run_id(command, cfg.canonical, cfg.seed)}};
  write_text(a.common.out + ".json", j.dump(2) + "\n");
  write_manifest(a.common.out, command, cfg, {a.common.out + ".json"});
  std::printf("%s\n", j.dump(2).c_str());
  return kExitOk;
}

// --- ncut-sensitivity --------------------------------------------------------------

struct NcutArgs {
  Common common;
  double attenuation_db = 2.0;
};

int run_ncut(const NcutArgs& a, const std::string& command) {
  RunConfig cfg = load(a.common);
  EvalOptions opt;
  opt.mode = cfg.mode;
  json rows = json::array();
  std::string csv = "run_id,n_cut,rate,z_y1_min,z_e1_max,x_y1_min,x_e1_max\n";
  const std::string id = run_id(command, cfg.canonical, cfg.seed);
  for (int n : {5, 7, 10}) {
    SystemParams sys = cfg.params;
    sys.n_cut = n;
    const SecrecyReport r = evaluate(sys, cfg.source, a.attenuation_db, opt);
    rows.push_back({{"n_cut", n}, {"rate", r.rate},
                    {"z_y1_min", r.bases[0].bounds.y1_min}, {"z_e1_max", r.bases[0].bounds.e1_max},
                    {"x_y1_min", r.bases[1].bounds.y1_min}, {"x_e1_max", r.bases[1].bounds.e1_max}});
    csv += id + "," + std::to_string(n) + "," + num(r.rate) + "," + num(r.bases[0].bounds.y1_min) +
           "," + num(r.bases[0].bounds.e1_max) + "," + num(r.bases[1].bounds.y1_min) + "," +
           num(r.bases[1].bounds.e1_max) + "\n";
  }
  write_text(a.common.out + ".csv", csv);
  write_manifest(a.common.out, command, cfg, {a.common.out + ".csv"});
  std::printf("%s\n", rows.dump(2).c_str());
  return kExitOk;
}

// --- validate ---------------------------------------------------------------------

struct ValidateArgs {
  Common common;
  std::optional<std::uint64_t> seed;
  std::size_t samples = 1000000;
};

int run_validate(const ValidateArgs& a, const std::string& command) {
  RunConfig cfg = load(a.common);
  const std::uint64_t seed = a.seed.value_or(cfg.seed);
  if (a.samples < 1000) throw ConfigError("--samples must be at least 1000");
  const auto checks = run_validation(cfg.params, cfg.source, seed, a.samples);
  json list = json::array();
  json failed = json::array();
  for (const CheckResult& c : checks) {
    list.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
    if (!c.passed) failed.push_back(c.name);
  }
  json j = {{"seed", seed}, {"samples", a.samples}, {"checks", list},
            {"failed", failed}, {"passed", failed.empty()},
            {"run_id", run_id(command, cfg.canonical, seed)}};
  std::printf("%s\n", j.dump(2).c_str());
  return failed.empty() ? kExitOk : kExitValidation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Secrecy rate model for QSDC with a fully passive source"};
  app.require_subcommand(1);
  const std::string command = command_line(argc, argv);

  auto add_common = [](CLI::App* sub, Common& c, bool with_jobs) {
    sub->add_option("--config", c.config_path, "JSON configuration file")->check(CLI::ExistingFile);
    sub->add_option("--out", c.out, "output path prefix");
    if (with_jobs) sub->add_option("--jobs", c.jobs, "worker threads (0: all cores; FP_QSDC_JOBS overrides)");
  };

  EvaluateArgs ev;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "evaluate one operating point");
  add_common(evaluate_cmd, ev.common, false);
  evaluate_cmd->add_option("--attenuation-db", ev.attenuation_db, "round-trip attenuation in dB")->required();
  evaluate_cmd->add_option("--intensity", ev.intensity, "maximum intensity I_s");
  evaluate_cmd->add_option("--delta-x", ev.delta_x, "X/Y interval half-width (radians or e.g. 0.049pi)");
  evaluate_cmd->add_option("--delta-z", ev.delta_z, "Z interval width (radians or e.g. 0.0546pi)");
  evaluate_cmd->add_option("--mode", ev.mode, "density matrix mode")->check(CLI::IsMember({"full", "paper_diagonal"}));
  evaluate_cmd->add_flag("--dump-matrices", ev.dump_matrices, "write density matrices as JSON");
  evaluate_cmd->add_flag("--dump-lp", ev.dump_lp, "write the decoy LPs as text");

  SweepArgs sw;
  auto* sweep_cmd = app.add_subcommand("sweep", "rate versus attenuation");
  add_common(sweep_cmd, sw.common, true);
  sweep_cmd->add_option("--from-db", sw.from_db, "first attenuation");
  sweep_cmd->add_option("--to-db", sw.to_db, "last attenuation");
  sweep_cmd->add_option("--step-db", sw.step_db, "attenuation step");
  sweep_cmd->add_flag("--optimize", sw.optimize, "optimize the operating point at every attenuation");
  sweep_cmd->add_flag("--baseline", sw.baseline, "add the actively modulated reference");
  sweep_cmd->add_option("--plot", sw.plot, "write an SVG plot to this path");

  OptimizeArgs op;
  auto* optimize_cmd = app.add_subcommand("optimize", "optimize (I, delta_x, delta_z) at one attenuation");
  add_common(optimize_cmd, op.common, true);
  optimize_cmd->add_option("--attenuation-db", op.attenuation_db, "round-trip attenuation in dB")->required();
  optimize_cmd->add_option("--trace", op.trace, "write the optimizer trace as CSV");

  DistanceArgs di;
  auto* distance_cmd = app.add_subcommand("distance", "maximum distance, passive and active");
  add_common(distance_cmd, di.common, true);
  distance_cmd->add_option("--from-db", di.lo_db, "lower end of the initial bracket");
  distance_cmd->add_option("--to-db", di.hi_db, "upper end of the initial bracket");

  NcutArgs nc;
  auto* ncut_cmd = app.add_subcommand("ncut-sensitivity", "rate for n_cut in {5, 7, 10}");
  add_common(ncut_cmd, nc.common, false);
  ncut_cmd->add_option("--attenuation-db", nc.attenuation_db, "round-trip attenuation in dB");

  ValidateArgs va;
  auto* validate_cmd = app.add_subcommand("validate", "run the oracle checks");
  add_common(validate_cmd, va.common, false);
  validate_cmd->add_option("--seed", va.seed, "Monte Carlo seed");
  validate_cmd->add_option("--samples", va.samples, "Monte Carlo samples per check");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*evaluate_cmd) return run_evaluate(ev, command);
    if (*sweep_cmd) return run_sweep(sw, command);
    if (*optimize_cmd) return run_optimize(op, command);
    if (*distance_cmd) return run_distance(di, command);
    if (*ncut_cmd) return run_ncut(nc, command);
    if (*validate_cmd) return run_validate(va, command);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const InvariantError& e) {
    std::fprintf(stderr, "invalid: %s\n", e.what());
    return kExitValidation;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: bad number: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "failed: %s\n", e.what());
    return kExitValidation;
  }
  return kExitUsage;
}
