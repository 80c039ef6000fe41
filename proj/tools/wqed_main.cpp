#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "app/commands.hpp"
#include "app/run_config.hpp"
#include "wqed/errors.hpp"
#include "wqed/map_io.hpp"

namespace {

using nlohmann::json;
using namespace wqed;
using namespace wqed::app;

// Options shared by every subcommand. Command-line values are written into the
// config JSON before it is parsed, so they get the same validation.
struct Common {
  std::string config;
  std::string output;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;

  void add(CLI::App* app) {
    app->add_option("-c,--config", config, "run configuration (JSON)")->check(CLI::ExistingFile);
    app->add_option("-o,--output", output, "output directory (config: output_dir)");
    app->add_option("--seed", seed, "base random seed (config: seed)");
    app->add_option("--threads", threads, "worker threads, 0 = all cores (config: threads)");
  }

  json load() const {
    json j = json::object();
    if (!config.empty()) {
      try {
        j = json::parse(read_text_file(config));
      } catch (const json::parse_error& e) {
        fail(ErrorKind::config, config + ": " + e.what());
      }
    }
    if (!output.empty()) j["output_dir"] = output;
    if (seed) j["seed"] = *seed;
    if (threads) j["threads"] = *threads;
    return j;
  }
};

RunConfig finish(const Common& common, const json& j) {
  try {
    return parse_run_config(j);
  } catch (const Error& e) {
    fail(e.kind(), (common.config.empty() ? std::string("config") : common.config) + ": " + e.what());
  }
}

template <class T>
void set_if(json& j, std::initializer_list<const char*> path, const std::optional<T>& v) {
  if (!v) return;
  json* node = &j;
  for (const char* key : path) node = &(*node)[key];
  *node = *v;
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Waveguide QED photon-correlation simulation and analysis"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(tool_version()));

  // simulate
  Common sim_common;
  std::optional<std::vector<double>> sim_sweep;
  std::optional<std::string> sim_channels;
  std::optional<double> sim_dt, sim_mean, sim_beta, sim_sigma;
  auto* sim = app.add_subcommand("simulate", "simulate g2 and reference maps, line cuts, G1 traces");
  sim_common.add(sim);
  sim->add_option("--sigma-over-tau", sim_sweep, "pulse length sweep (pulse.sigma_over_tau)");
  sim->add_option("--sigma-ns", sim_sigma, "pulse length (pulse.sigma_ns)");
  sim->add_option("--channels", sim_channels, "comma separated pairs, e.g. tt,rr (map.channels)");
  sim->add_option("--d-t", sim_dt, "map bin in ns (map.d_t_ns)");
  sim->add_option("--mean-photons", sim_mean, "photons per pulse (pulse.mean_photons)");
  sim->add_option("--beta", sim_beta, "coupling fraction (emitter.beta)");

  // analyze
  Common an_common;
  std::vector<std::string> an_inputs;
  std::optional<int> an_mc, an_rebin;
  std::optional<double> an_jt, an_jr;
  bool an_no_adaptive = false;
  auto* an = app.add_subcommand("analyze", "Schmidt decomposition and T_c of correlation maps");
  an_common.add(an);
  an->add_option("maps", an_inputs, "map files (.cmap)")->required();
  an->add_option("--monte-carlo", an_mc, "Poisson resamples (counts maps only)");
  an->add_flag("--no-adaptive", an_no_adaptive, "keep native bins or --rebin");
  an->add_option("--rebin", an_rebin, "fixed superbin factor (pipeline.rebin_factor)");
  an->add_option("--jitter-t", an_jt, "transmission detector jitter FWHM, ns");
  an->add_option("--jitter-r", an_jr, "reflection detector jitter FWHM, ns");

  // calibrate
  Common cal_common;
  std::vector<std::string> cal_scans;
  std::string cal_mode = "saturation";
  std::optional<std::string> cal_file, cal_drift, cal_role;
  std::optional<double> cal_gamma, cal_beta, cal_control;
  auto* cal = app.add_subcommand("calibrate", "saturation fit or control-shift extraction");
  cal_common.add(cal);
  cal->add_option("scans", cal_scans, "scan CSV files")->required();
  cal->add_option("--mode", cal_mode, "saturation | shift")
      ->check(CLI::IsMember({"saturation", "shift"}));
  cal->add_option("--calibration", cal_file, "saturation_report.json (shift mode)");
  cal->add_option("--drift", cal_drift, "drift CSV power_uW,center_MHz (shift mode)");
  cal->add_option("--role", cal_role, "role for files without a role column");
  cal->add_option("--gamma-total", cal_gamma, "external decay rate, 1/ns");
  cal->add_option("--fixed-beta", cal_beta, "hold beta fixed in the saturation fit");
  cal->add_option("--control-detuning-MHz", cal_control, "control detuning (shift mode)");

  // ingest
  Common in_common;
  std::vector<std::string> in_inputs;
  std::string in_channels = "tt";
  std::string in_selection = "same_pulse,subsequent_pulse";
  std::optional<double> in_dt, in_gate;
  auto* in = app.add_subcommand("ingest", "clock-reference time tags and build coincidence maps");
  in_common.add(in);
  in->add_option("tags", in_inputs, "tag files (sidecar <file>.json next to each)")->required();
  in->add_option("--channels", in_channels, "comma separated pairs");
  in->add_option("--selection", in_selection, "same_pulse and/or subsequent_pulse");
  in->add_option("--d-t", in_dt, "histogram bin, ns (map.d_t_ns)");
  in->add_option("--gate-width", in_gate, "coincidence gate, ns (acquisition.gate_width_ns)");

  // synth-tags
  Common sy_common;
  std::size_t sy_index = 0;
  std::optional<std::uint64_t> sy_pulses;
  std::optional<double> sy_mean;
  bool sy_csv = false;
  auto* sy = app.add_subcommand("synth-tags", "simulate a pulse and draw a time-tag stream");
  sy_common.add(sy);
  sy->add_option("--pulse-index", sy_index, "entry of the sigma_over_tau sweep");
  sy->add_option("--pulses", sy_pulses, "number of pulses (synthesis.pulses)");
  sy->add_option("--mean-photons", sy_mean, "clicks per pulse (synthesis.mean_photons)");
  sy->add_flag("--csv", sy_csv, "write the CSV debug format");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*sim) {
      json j = sim_common.load();
      set_if(j, {"pulse", "sigma_over_tau"}, sim_sweep);
      set_if(j, {"pulse", "sigma_ns"}, sim_sigma);
      set_if(j, {"map", "d_t_ns"}, sim_dt);
      set_if(j, {"pulse", "mean_photons"}, sim_mean);
      set_if(j, {"emitter", "beta"}, sim_beta);
      if (sim_channels) j["map"]["channels"] = split(*sim_channels);
      return cmd_simulate(finish(sim_common, j), std::cout);
    }
    if (*an) {
      json j = an_common.load();
      set_if(j, {"pipeline", "rebin_factor"}, an_rebin);
      set_if(j, {"pipeline", "jitter_t_fwhm_ns"}, an_jt);
      set_if(j, {"pipeline", "jitter_r_fwhm_ns"}, an_jr);
      if (an_no_adaptive || an_rebin) j["pipeline"]["adaptive_bin"] = false;
      AnalyzeOptions o;
      for (const auto& s : an_inputs) o.inputs.emplace_back(s);
      o.monte_carlo = an_mc;
      return cmd_analyze(finish(an_common, j), o, std::cout);
    }
    if (*cal) {
      json j = cal_common.load();
      set_if(j, {"calibration", "gamma_total_per_ns"}, cal_gamma);
      set_if(j, {"calibration", "fixed_beta"}, cal_beta);
      set_if(j, {"calibration", "control_detuning_MHz"}, cal_control);
      CalibrateOptions o;
      o.mode = cal_mode == "shift" ? CalibrateMode::shift : CalibrateMode::saturation;
      for (const auto& s : cal_scans) o.scans.emplace_back(s);
      if (cal_file) o.calibration = *cal_file;
      if (cal_drift) o.drift = *cal_drift;
      if (cal_role) o.default_role = parse_scan_role(*cal_role);
      return cmd_calibrate(finish(cal_common, j), o, std::cout);
    }
    if (*in) {
      json j = in_common.load();
      set_if(j, {"map", "d_t_ns"}, in_dt);
      set_if(j, {"acquisition", "gate_width_ns"}, in_gate);
      IngestOptions o;
      for (const auto& s : in_inputs) o.inputs.emplace_back(s);
      o.channels.clear();
      for (const auto& c : split(in_channels)) o.channels.push_back(ChannelPair::parse(c));
      o.selections.clear();
      for (const auto& s : split(in_selection)) o.selections.push_back(parse_pair_selection(s));
      return cmd_ingest(finish(in_common, j), o, std::cout);
    }
    if (*sy) {
      json j = sy_common.load();
      set_if(j, {"synthesis", "pulses"}, sy_pulses);
      set_if(j, {"synthesis", "mean_photons"}, sy_mean);
      if (sy_csv) j["synthesis"]["format"] = "csv";
      SynthOptions o;
      o.pulse_index = sy_index;
      return cmd_synth_tags(finish(sy_common, j), o, std::cout);
    }
  } catch (const Error& e) {
    std::cerr << "wqed: " << to_string(e.kind()) << " error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "wqed: " << e.what() << '\n';
    return 4;
  }
  return 0;
}
