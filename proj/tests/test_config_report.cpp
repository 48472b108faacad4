#include <gtest/gtest.h>

#include <regex>

#include "fpqsdc/config.hpp"
#include "fpqsdc/report.hpp"

using namespace fpqsdc;
using nlohmann::json;

namespace {

const double kPiV = std::numbers::pi;

std::string config_error(const json& j) {
  try {
    config_from_json(j);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

// Tag-balance check: every element is closed in order or self-closed.
bool well_formed(const std::string& xml) {
  std::vector<std::string> stack;
  std::size_t pos = 0;
  while ((pos = xml.find('<', pos)) != std::string::npos) {
    const std::size_t end = xml.find('>', pos);
    if (end == std::string::npos) return false;
    std::string tag = xml.substr(pos + 1, end - pos - 1);
    pos = end + 1;
    if (tag.empty()) return false;
    if (tag[0] == '/') {
      if (stack.empty() || stack.back() != tag.substr(1)) return false;
      stack.pop_back();
    } else if (tag.back() != '/') {
      stack.push_back(tag.substr(0, tag.find(' ')));
    }
  }
  return stack.empty();
}

}  // namespace

TEST(Config, EmptyConfigGivesDefaults) {
  const RunConfig c = default_config();
  EXPECT_DOUBLE_EQ(c.params.eta_det, 0.7);
  EXPECT_DOUBLE_EQ(c.source.intensity_max, 0.0895);
  EXPECT_EQ(c.mode, MatrixMode::full);
  EXPECT_EQ(c.seed, 1u);
  EXPECT_EQ(c.sweep.points().size(), 17u);
}

TEST(Config, AnglesAcceptMultiplesOfPi) {
  EXPECT_DOUBLE_EQ(parse_angle("0.049pi"), 0.049 * kPiV);
  EXPECT_DOUBLE_EQ(parse_angle("0.049*pi"), 0.049 * kPiV);
  EXPECT_DOUBLE_EQ(parse_angle(" 0.5 pi "), 0.5 * kPiV);
  EXPECT_DOUBLE_EQ(parse_angle("pi"), kPiV);
  EXPECT_DOUBLE_EQ(parse_angle("0.1"), 0.1);
  EXPECT_THROW(parse_angle("abc"), ConfigError);
  EXPECT_THROW(parse_angle(""), ConfigError);
  EXPECT_THROW(parse_angle("0.1pie"), ConfigError);
}

TEST(Config, ReadsEverySection) {
  const json j = json::parse(R"({
    "params": {"eta_det": 0.6, "n_cut": 9, "eve_advantage": 1.2},
    "source": {"intensity_max": 0.05, "delta_x": "0.03pi", "delta_z": 0.1},
    "sweep": {"from_db": 1, "to_db": 3, "step_db": 1},
    "search": {"intensity": [0.01, 0.2], "delta_x": ["0.02pi", "0.1pi"], "grid": [4, 5, 6], "refine_iterations": 7},
    "mode": "paper_diagonal",
    "seed": 42})");
  const RunConfig c = config_from_json(j);
  EXPECT_DOUBLE_EQ(c.params.eta_det, 0.6);
  EXPECT_EQ(c.params.n_cut, 9);
  EXPECT_DOUBLE_EQ(c.source.delta_x, 0.03 * kPiV);
  EXPECT_DOUBLE_EQ(c.source.delta_z, 0.1);
  EXPECT_DOUBLE_EQ(c.source.i_vac, 0.05 * 0.05);
  EXPECT_DOUBLE_EQ(c.source.vt_product, 0.025);
  EXPECT_EQ(c.sweep.points(), (std::vector<double>{1, 2, 3}));
  EXPECT_DOUBLE_EQ(c.search.delta_x.hi, 0.1 * kPiV);
  EXPECT_EQ(c.search.grid_delta_z, 6);
  EXPECT_EQ(c.search.refine_iterations, 7);
  EXPECT_EQ(c.mode, MatrixMode::paper_diagonal);
  EXPECT_EQ(c.seed, 42u);
}

TEST(Config, UnknownFieldsAreNamed) {
  EXPECT_EQ(config_error(json::parse(R"({"params": {"eta_dett": 0.7}})")), "unknown field 'params.eta_dett'");
  EXPECT_EQ(config_error(json::parse(R"({"extra": 1})")), "unknown field 'config.extra'");
  EXPECT_NE(config_error(json::parse(R"({"search": {"gird": [2, 2, 2]}})")).find("search.gird"),
            std::string::npos);
}

TEST(Config, InvalidValuesAreConfigErrors) {
  EXPECT_NE(config_error(json::parse(R"({"params": {"eta_det": 1.5}})")).find("eta_det"), std::string::npos);
  EXPECT_NE(config_error(json::parse(R"({"params": {"eta_det": "high"}})")).find("params.eta_det"),
            std::string::npos);
  EXPECT_NE(config_error(json::parse(R"({"source": {"delta_x": 0}})")).find("delta_x"), std::string::npos);
  EXPECT_NE(config_error(json::parse(R"({"sweep": {"from_db": 5, "to_db": 1}})")), "");
  EXPECT_NE(config_error(json::parse(R"({"mode": "diagonal"})")).find("mode"), std::string::npos);
  EXPECT_NE(config_error(json::parse(R"({"seed": -3})")).find("seed"), std::string::npos);
  EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
}

TEST(Config, SampleConfigLoads) {
  const RunConfig c = load_config(std::string(FPQSDC_SOURCE_DIR) + "/configs/default.json");
  EXPECT_NEAR(c.source.delta_x, 0.049 * kPiV, 1e-15);
  EXPECT_NEAR(c.source.delta_z, 0.0546 * kPiV, 1e-15);
  EXPECT_EQ(c.sweep.points().size(), 17u);
}

TEST(Report, CsvHeaderListsDocumentedColumns) {
  const std::string h = csv_header();
  EXPECT_EQ(h.rfind("run_id,attenuation_db,distance_km,mode,optimized,intensity,", 0), 0u);
  EXPECT_EQ(report_columns().size(), 10u + 3 * 12);
  EXPECT_NE(h.find("y_e_bab\n"), std::string::npos);
}

TEST(Report, RowsAreFixedFormat) {
  SecrecyReport r;
  r.attenuation_db = 2;
  r.source = SourceParams{};
  r.rate = 5.76e-5;
  const std::string row = csv_row("abc", r, true);
  std::size_t commas = 0;
  for (char c : row) commas += c == ',';
  EXPECT_EQ(commas + 1, report_columns().size());
  EXPECT_NE(row.find(",5.7600000000e-05,"), std::string::npos);
  EXPECT_NE(row.find("abc,2.0000000000e+00,5.0000000000e+00,full,1,"), std::string::npos);
  EXPECT_EQ(num(0.0), "0.0000000000e+00");
}

TEST(Report, RunIdDependsOnCommandConfigAndSeed) {
  const std::string a = run_id("sweep", "{}", 1);
  EXPECT_EQ(a, run_id("sweep", "{}", 1));
  EXPECT_NE(a, run_id("sweep", "{}", 2));
  EXPECT_NE(a, run_id("evaluate", "{}", 1));
  EXPECT_EQ(a.size(), 16u);
  EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
}

TEST(Report, SvgIsWellFormed) {
  PlotSeries s{"passive <fp>", "#1f77b4", {0, 1, 2, 3}, {1e-4, 5e-5, 0.0, 1e-6}};
  PlotSeries t{"active", "#d62728", {0, 1, 2, 3}, {2e-4, 1e-4, 4e-5, 2e-6}};
  const std::string svg = svg_log_plot({s, t}, "attenuation (dB)", "rate & more");
  EXPECT_TRUE(well_formed(svg));
  EXPECT_TRUE(std::regex_search(svg, std::regex("^<svg[^>]*xmlns=\"http://www.w3.org/2000/svg\"")));
  EXPECT_NE(svg.find("passive &lt;fp&gt;"), std::string::npos);
  EXPECT_NE(svg.find("rate &amp; more"), std::string::npos);
  EXPECT_EQ(std::count(svg.begin(), svg.end(), '\n') > 10, true);
  EXPECT_TRUE(well_formed(svg_log_plot({}, "x", "y")));
}

TEST(Report, JsonCarriesMatrices) {
  PhotonDensityMatrix m;
  m.photons = 1;
  m.entries = HermitianMatrix(2);
  m.entries(0, 1) = cplx(0.1, -0.2);
  m.entries(1, 0) = cplx(0.1, 0.2);
  const json j = to_json(m);
  EXPECT_EQ(j["n"], 1);
  EXPECT_DOUBLE_EQ(j["entries"][0][1][1].get<double>(), -0.2);
}
