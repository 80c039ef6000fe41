#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "app/commands.hpp"
#include "app/run_config.hpp"
#include "calibration_generator.hpp"
#include "wqed/errors.hpp"
#include "wqed/map_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace wqed;
using namespace wqed::app;

namespace {

fs::path scratch(const std::string& name) {
  const char* base = std::getenv("WQED_TEST_TMP");
  const fs::path dir = fs::path(base ? base : fs::temp_directory_path().string()) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string config_error(const json& j) {
  try {
    parse_run_config(j);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::config);
    return e.what();
  }
  FAIL("expected a config error");
  return {};
}

int run_tool(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(WQED_BINARY) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void write_config(const fs::path& path, const json& j) {
  std::ofstream(path) << j.dump(2);
}

json read_json(const fs::path& path) { return json::parse(read_text_file(path)); }

std::vector<fs::path> files_with(const fs::path& dir, const std::string& ext) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ext) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST_CASE("config errors name the offending key") {
  CHECK(config_error({{"emitter", {{"bogus", 1}}}}).find("emitter.bogus") != std::string::npos);
  CHECK(config_error({{"emitter", {{"beta", 1.5}}}}).find("emitter") != std::string::npos);
  CHECK(config_error({{"pulse", {{"sigma_ns", "long"}}}}).find("pulse.sigma_ns") != std::string::npos);
  CHECK(config_error({{"map", {{"channels", {"tx"}}}}}).find("map.channels") != std::string::npos);
  CHECK(config_error({{"synthesis", {{"format", "hdf5"}}}}).find("synthesis") != std::string::npos);
  CHECK(config_error({{"nonsense", 3}}).find("nonsense") != std::string::npos);
}

TEST_CASE("normalized config round trips") {
  const json in = {{"emitter", {{"beta", 0.8}, {"gamma_deph_per_ns", 0.2}, {"detuning_MHz", 100.0}}},
                   {"pulse", {{"sigma_over_tau", {0.44, 2.0}}}},
                   {"map", {{"d_t_ns", 0.04}, {"channels", {"tt", "tr"}}}},
                   {"seed", 9}};
  const RunConfig c = parse_run_config(in);
  CHECK(c.emitter.beta == 0.8);
  CHECK(c.emitter.delta_e == doctest::Approx(2.0 * M_PI * 0.1));
  CHECK(c.pulses().size() == 2);
  CHECK(c.pulses()[1].sigma == doctest::Approx(2.0 / c.emitter.gamma_total));
  CHECK(c.acquisition.gate() == kCliGateWidth);
  CHECK(to_json(parse_run_config(to_json(c))) == to_json(c));
}

TEST_CASE("simulate writes maps and reproduces them byte for byte") {
  const fs::path a = scratch("simulate_a");
  const fs::path b = scratch("simulate_b");
  json j = {{"pulse", {{"sigma_over_tau", {0.44, 1.5}}}}, {"map", {{"d_t_ns", 0.04}}}};
  std::ostringstream log;
  for (const auto& dir : {a, b}) {
    j["output_dir"] = dir.string();
    CHECK(cmd_simulate(parse_run_config(j), log) == 0);
  }
  const auto maps = files_with(a, ".cmap");
  CHECK(maps.size() == 4);
  for (const auto& m : maps) CHECK(read_text_file(m) == read_text_file(b / m.filename()));
  for (const auto& c : files_with(a, ".csv")) CHECK(read_text_file(c) == read_text_file(b / c.filename()));

  const json manifest = read_json(a / "manifest.json");
  CHECK(manifest["command"] == "simulate");
  CHECK(manifest["config_hash"] == read_json(b / "manifest.json")["config_hash"]);
  CHECK(manifest["outputs"].size() >= 4);
  CHECK(manifest["runs"][1]["maps"][0]["diagonal_band_ratio"].get<double>() > 1.0);
}

TEST_CASE("analyze finds factorizable reference maps and keeps going past bad files") {
  const fs::path sim = scratch("analyze_sim");
  std::ostringstream log;
  const RunConfig sc = parse_run_config(
      {{"pulse", {{"sigma_over_tau", {1.0}}}}, {"map", {{"d_t_ns", 0.04}}}, {"output_dir", sim.string()}});
  REQUIRE(cmd_simulate(sc, log) == 0);

  const fs::path out = scratch("analyze_out");
  const RunConfig ac = parse_run_config({{"output_dir", out.string()}});
  AnalyzeOptions o;
  o.inputs = {sim / "ref_tt_0.cmap", sim / "missing.cmap", sim / "g2_tt_0.cmap"};
  CHECK(cmd_analyze(ac, o, log) == 3);
  const json res = read_json(out / "schmidt_results.json");
  REQUIRE(res["results"].size() == 2);
  CHECK(res["errors"].size() == 1);
  CHECK(res["results"][0]["t_c"].get<double>() < 1e-6);
  CHECK(res["results"][1]["t_c"].get<double>() > 0.05);
  CHECK(fs::exists(out / "tc_table.csv"));
}

TEST_CASE("analyze refuses mixed map kinds and Monte Carlo on densities") {
  const fs::path dir = scratch("analyze_mixed");
  CorrelationMap d;
  d.d_t = 0.1;
  d.values = Eigen::MatrixXd::Ones(8, 8);
  CorrelationMap c = d;
  c.kind = MapKind::counts;
  write_map(dir / "d.cmap", d);
  write_map(dir / "c.cmap", c);
  const RunConfig ac = parse_run_config({{"output_dir", (dir / "out").string()}});
  std::ostringstream log;
  AnalyzeOptions o;
  o.inputs = {dir / "d.cmap", dir / "c.cmap"};
  CHECK_THROWS_AS(cmd_analyze(ac, o, log), Error);
  o.inputs = {dir / "d.cmap"};
  o.monte_carlo = 200;
  try {
    cmd_analyze(ac, o, log);
    FAIL("expected a config error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::config);
  }
}

TEST_CASE("calibrate recovers the critical photon number from scan files") {
  const fs::path dir = scratch("calibrate");
  const oracle::SaturationTruth t;
  std::vector<double> grid;
  for (int k = 0; k < 41; ++k) grid.push_back(-5.0 * t.gamma + 0.25 * t.gamma * k);
  write_scan_csv(dir / "scans.csv", oracle::saturation_scans(t, {0.5, 2.0, 5.0, 10.0, 20.0}, grid, 0.0, 1));
  const RunConfig c = parse_run_config({{"emitter", {{"gamma_total_per_ns", t.gamma}}},
                                        {"output_dir", (dir / "out").string()}});
  CalibrateOptions o;
  o.scans = {dir / "scans.csv"};
  std::ostringstream log;
  REQUIRE(cmd_calibrate(c, o, log) == 0);
  const json r = read_json(dir / "out" / "saturation_report.json");
  CHECK(r["n_c"].get<double>() == doctest::Approx(t.n_c()).epsilon(0.05));
  CHECK(r["gamma_total"]["provenance"] == "external");
  CHECK(r["calibration"]["beta"].get<double>() == doctest::Approx(t.beta).epsilon(0.05));
  CHECK(fs::exists(dir / "out" / "saturation_table.csv"));
}

TEST_CASE("tool exit codes") {
  const fs::path dir = scratch("exit_codes");
  const fs::path log = dir / "log.txt";
  CHECK(run_tool("--version", log) == 0);
  CHECK(read_text_file(log).find(tool_version()) != std::string::npos);
  CHECK(run_tool("simulate --no-such-flag", log) == 2);

  write_config(dir / "bad.json", {{"emitter", {{"beta", 2.0}}}});
  CHECK(run_tool("simulate -c " + (dir / "bad.json").string(), log) == 2);
  CHECK(read_text_file(log).find("bad.json") != std::string::npos);

  std::ofstream(dir / "scan.csv") << "power_uW,detuning_MHz,counts\n1,0,10\n";
  CHECK(run_tool("calibrate --mode shift -o " + (dir / "out").string() + " " + (dir / "scan.csv").string(), log) == 2);
  CHECK(run_tool("analyze -o " + (dir / "out").string() + " " + (dir / "none.cmap").string(), log) == 3);
}

TEST_CASE("synthesized tags ingest into coincidence maps") {
  const fs::path dir = scratch("tags");
  const json j = {{"pulse", {{"sigma_ns", 0.34}}},
                  {"map", {{"d_t_ns", 0.02}, {"window_ns", {-2.5, 2.5}}}},
                  {"synthesis", {{"pulses", 100000}, {"mean_photons", 0.3}}},
                  {"seed", 4},
                  {"output_dir", (dir / "synth").string()}};
  std::ostringstream log;
  REQUIRE(cmd_synth_tags(parse_run_config(j), {}, log) == 0);
  const fs::path tags = dir / "synth" / "tags.bin";
  REQUIRE(fs::exists(tags));
  CHECK(fs::exists(dir / "synth" / "tags.bin.json"));
  CHECK(fs::exists(dir / "synth" / "noiseless_tt.cmap"));

  IngestOptions o;
  o.inputs = {tags};
  o.channels = {ChannelPair::parse("tt"), ChannelPair::parse("tr")};
  const RunConfig ic = parse_run_config({{"output_dir", (dir / "ingest").string()}});
  REQUIRE(cmd_ingest(ic, o, log) == 0);
  const auto same = read_map(dir / "ingest" / "counts_tt_same_pulse_tags.cmap");
  CHECK(same.kind == MapKind::counts);
  CHECK(same.total() > 50.0);
  const json rep = read_json(dir / "ingest" / "ingest_report.json");
  CHECK(rep["files"][0]["ingest"]["clock_ticks"] == 100000);
}
