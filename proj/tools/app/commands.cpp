#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include <Eigen/Core>

#include "wqed/errors.hpp"
#include "wqed/map_io.hpp"
#include "wqed/rng.hpp"
#include "wqed/schmidt.hpp"

#ifndef WQED_VERSION
#define WQED_VERSION "0.0.0"
#endif

namespace wqed::app {

namespace fs = std::filesystem;
using nlohmann::json;

const char* tool_version() noexcept { return WQED_VERSION; }

json version_info() {
  std::ostringstream eigen;
  eigen << EIGEN_WORLD_VERSION << '.' << EIGEN_MAJOR_VERSION << '.' << EIGEN_MINOR_VERSION;
  std::ostringstream compiler;
#if defined(__clang__)
  compiler << "clang " << __clang_major__ << '.' << __clang_minor__ << '.' << __clang_patchlevel__;
#elif defined(__GNUC__)
  compiler << "gcc " << __GNUC__ << '.' << __GNUC_MINOR__ << '.' << __GNUC_PATCHLEVEL__;
#else
  compiler << "unknown";
#endif
  return {{"wqed", tool_version()},
          {"eigen", eigen.str()},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
          {"compiler", compiler.str()}};
}

// The output directory does not change results, so it stays out of the hash.
std::string config_hash(const RunConfig& config) {
  json j = to_json(config);
  j.erase("output_dir");
  return hex64(fnv1a64(j.dump()));
}

Manifest::Manifest(std::string command, const RunConfig& config)
    : command_(std::move(command)), config_(to_json(config)), hash_(config_hash(config)) {}

namespace {

std::string file_digest(const fs::path& path) {
  return hex64(fnv1a64(read_text_file(path)));
}

}  // namespace

void Manifest::add_output(const fs::path& path) {
  outputs_.push_back({{"file", path.filename().string()}, {"fnv1a64", file_digest(path)}});
}

void Manifest::add_input(const fs::path& path) {
  inputs_.push_back({{"file", path.string()}, {"fnv1a64", file_digest(path)}});
}

void Manifest::warn(const std::string& message) { warnings_.push_back(message); }

void Manifest::write(const fs::path& dir) const {
  json j;
  j["tool"] = kToolName;
  j["command"] = command_;
  j["versions"] = version_info();
  j["config_hash"] = hash_;
  j["seed"] = config_.at("seed");
  j["config"] = config_;
  if (!inputs_.empty()) j["inputs"] = inputs_;
  j["outputs"] = outputs_;
  j["warnings"] = warnings_;
  for (const auto& [k, v] : extra_.items()) j[k] = v;
  write_text_file(dir / "manifest.json", j.dump(2) + "\n");
}

void ensure_output_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    fail(ErrorKind::io, "cannot create output directory " + dir.string() +
                            (ec ? ": " + ec.message() : std::string()));
  const fs::path probe = dir / ".wqed_write_test";
  {
    std::ofstream os(probe);
    if (!os) fail(ErrorKind::io, "output directory is not writable: " + dir.string());
  }
  fs::remove(probe, ec);
}

namespace {

SimulationOptions simulation_options(const RunConfig& c) {
  SimulationOptions o;
  o.integration_step = c.integration_step;
  o.threads = c.threads;
  return o;
}

double jitter_for(Channel ch, double t_fwhm, double r_fwhm) {
  return ch == Channel::transmission ? t_fwhm : r_fwhm;
}

void write_json(const fs::path& path, const json& j) { write_text_file(path, j.dump(2) + "\n"); }

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

// simulate ------------------------------------------------------------------

int cmd_simulate(const RunConfig& config, std::ostream& log) {
  config.validate();
  const fs::path dir = config.output_dir;
  ensure_output_dir(dir);
  Manifest manifest("simulate", config);
  json runs = json::array();

  const auto pulses = config.pulses();
  for (std::size_t i = 0; i < pulses.size(); ++i) {
    const PulseSpec& p = pulses[i];
    const MapWindow window = config.window_for(p);
    const PulseSimulation sim(config.emitter, p, window, config.map.d_t,
                              simulation_options(config));
    json run = {{"index", i},
                {"sigma_ns", p.sigma},
                {"sigma_over_tau", p.sigma * config.emitter.gamma_total},
                {"window_ns", {window.t_start, window.t_end}},
                {"maps", json::array()}};
    const std::string idx = std::to_string(i);

    for (const ChannelPair& ch : config.map.channels) {
      const std::string suffix = ch.label() + "_" + idx;
      const CorrelationMap g2 = sim.g2_map(ch);
      const CorrelationMap ref = sim.reference_map(ch);
      const fs::path g2_path = dir / ("g2_" + suffix + ".cmap");
      const fs::path ref_path = dir / ("ref_" + suffix + ".cmap");
      write_map(g2_path, g2, config.map.payload);
      write_map(ref_path, ref, config.map.payload);
      manifest.add_output(g2_path);
      manifest.add_output(ref_path);

      const LineCuts cuts = linecuts(g2, config.pipeline.linecut_band_bins);
      const fs::path diag = dir / ("linecut_diag_" + suffix + ".csv");
      const fs::path anti = dir / ("linecut_anti_" + suffix + ".csv");
      write_linecut_csv(diag, cuts.diagonal, "t1_plus_t2_ns");
      write_linecut_csv(anti, cuts.antidiagonal, "t1_minus_t2_ns");
      manifest.add_output(diag);
      manifest.add_output(anti);

      const double band = config.emitter.lifetime();
      json entry = {{"channels", ch.label()},
                    {"g2_file", g2_path.filename().string()},
                    {"reference_file", ref_path.filename().string()},
                    {"g2_total", g2.total()},
                    {"reference_total", ref.total()}};
      if (ref.total() > 0.0 && band_mass(ref, band) > 0.0) {
        entry["diagonal_band_ns"] = band;
        entry["diagonal_band_ratio"] = diagonal_band_ratio(g2, ref, band);
      }
      if (g2.meta.contains("warnings"))
        for (const auto& w : g2.meta["warnings"])
          manifest.warn("pulse " + idx + ": " + w.get<std::string>());
      run["maps"].push_back(entry);
      log << "simulate: pulse " << i << " (sigma " << format_g9(p.sigma) << " ns) "
          << ch.label() << " -> " << g2_path.filename().string() << ", "
          << ref_path.filename().string() << '\n';
    }

    for (Channel ch : {Channel::transmission, Channel::reflection}) {
      const fs::path path =
          dir / (std::string("g1_") + channel_letter(ch) + "_" + idx + ".csv");
      write_trace_csv(path, sim.intensity_trace(ch));
      manifest.add_output(path);
    }
    runs.push_back(run);
  }

  manifest.extra()["runs"] = runs;
  manifest.write(dir);
  return 0;
}

// analyze -------------------------------------------------------------------

int cmd_analyze(const RunConfig& config, const AnalyzeOptions& options, std::ostream& log) {
  config.validate();
  require(!options.inputs.empty(), ErrorKind::config, "analyze: no input maps given");
  if (options.monte_carlo)
    require(*options.monte_carlo >= 0, ErrorKind::config, "analyze: --monte-carlo must be >= 0");
  const fs::path dir = config.output_dir;
  ensure_output_dir(dir);
  Manifest manifest("analyze", config);

  struct Input {
    fs::path path;
    CorrelationMap map;
  };
  std::vector<Input> inputs;
  json errors = json::array();
  int status = 0;
  auto record_error = [&](const fs::path& path, const Error& e) {
    log << "error: " << path.string() << ": " << e.what() << '\n';
    errors.push_back({{"file", path.string()}, {"kind", to_string(e.kind())}, {"message", e.what()}});
    if (status == 0) status = exit_code(e.kind());
  };

  for (const fs::path& path : options.inputs) {
    try {
      CorrelationMap m = read_map(path);
      m.validate();
      manifest.add_input(path);
      inputs.push_back({path, std::move(m)});
    } catch (const Error& e) {
      record_error(path, e);
    }
  }

  if (!inputs.empty()) {
    const MapKind kind = inputs.front().map.kind;
    for (const auto& in : inputs) {
      if (in.map.kind != kind)
        fail(ErrorKind::config, "analyze: refusing mixed map kinds (" + inputs.front().path.string() +
                                    " is " + std::string(to_string(kind)) + ", " +
                                    in.path.string() + " is " +
                                    std::string(to_string(in.map.kind)) + ")");
    }
    const bool counts = kind == MapKind::counts;
    if (!counts && options.monte_carlo && *options.monte_carlo > 0)
      fail(ErrorKind::config, "analyze: Monte Carlo errors need counts maps, inputs are "
                              "probability densities");
    const int resamples =
        counts ? options.monte_carlo.value_or(config.pipeline.monte_carlo_resamples) : 0;

    const double jt = config.pipeline.jitter_t_fwhm;
    const double jr = config.pipeline.jitter_r_fwhm;
    if (!counts && (jt > 0.0 || jr > 0.0)) {
      for (auto& in : inputs)
        in.map = apply_jitter(in.map, jitter_for(in.map.channels.first, jt, jr),
                              jitter_for(in.map.channels.second, jt, jr));
    }

    std::vector<int> factors(inputs.size(), config.pipeline.rebin_factor);
    json binning = {{"mode", "fixed"}, {"rebin_factor", config.pipeline.rebin_factor}};
    if (counts && config.pipeline.adaptive_bin) {
      std::vector<CorrelationMap> maps;
      for (const auto& in : inputs) maps.push_back(in.map);
      const AdaptiveBinning ab = adaptive_bin(maps);
      factors = ab.factors;
      binning = {{"mode", "adaptive"}, {"target_counts", ab.target}, {"factors", ab.factors}};
      for (std::size_t i = 0; i < ab.capped.size(); ++i)
        if (ab.capped[i])
          manifest.warn(inputs[i].path.string() + ": adaptive bin capped at a quarter of the map");
    }
    manifest.extra()["binning"] = binning;

    json rows = json::array();
    std::ostringstream table;
    table << "file,channels,kind,selection,sigma_ns,sigma_over_tau,rebin_factor,d_t_used_ns,t_c,"
             "t_c_err,lambda_0\n";
    std::set<std::string> used_names;

    for (std::size_t i = 0; i < inputs.size(); ++i) {
      const Input& in = inputs[i];
      try {
        const CorrelationMap binned = factors[i] > 1 ? rebin(in.map, factors[i]) : in.map;
        SchmidtResult r;
        if (resamples > 0) {
          MonteCarloOptions mc;
          mc.resamples = resamples;
          mc.seed = derive_seed(config.seed, "analyze", i);
          mc.rebin_factor = factors[i];
          mc.threads = config.threads;
          r = monte_carlo_tc(in.map, mc);
        } else {
          r = schmidt_decompose(binned);
        }

        std::string stem = in.path.stem().string();
        if (!used_names.insert(stem).second) {
          stem += "_" + std::to_string(i);
          used_names.insert(stem);
        }
        const int band = std::max(1, config.pipeline.linecut_band_bins / factors[i]);
        const LineCuts cuts = linecuts(binned, band);
        const fs::path diag = dir / ("linecut_diag_" + stem + ".csv");
        const fs::path anti = dir / ("linecut_anti_" + stem + ".csv");
        write_linecut_csv(diag, cuts.diagonal, "t1_plus_t2_ns");
        write_linecut_csv(anti, cuts.antidiagonal, "t1_minus_t2_ns");
        manifest.add_output(diag);
        manifest.add_output(anti);

        const json& meta = in.map.meta;
        const double sigma = meta.contains("pulse") && meta["pulse"].contains("sigma_ns")
                                 ? meta["pulse"]["sigma_ns"].get<double>()
                                 : std::nan("");
        const double sot = meta.value("sigma_over_tau", std::nan(""));
        const std::string selection = meta.value("selection", std::string());

        json row = to_json(r);
        row["file"] = in.path.string();
        row["channels"] = in.map.channels.label();
        row["kind"] = to_string(in.map.kind);
        row["rebin_factor"] = factors[i];
        row["sigma_ns"] = std::isnan(sigma) ? json(nullptr) : json(sigma);
        row["sigma_over_tau"] = std::isnan(sot) ? json(nullptr) : json(sot);
        if (!selection.empty()) row["selection"] = selection;
        rows.push_back(row);

        auto num = [](double v) { return std::isnan(v) ? std::string() : format_g9(v); };
        table << csv_escape(in.path.string()) << ',' << in.map.channels.label() << ','
              << to_string(in.map.kind) << ',' << selection << ',' << num(sigma) << ','
              << num(sot) << ',' << factors[i] << ',' << format_g9(r.d_t_used) << ','
              << format_g9(r.t_c) << ',' << format_g9(r.t_c_err) << ','
              << format_g9(r.singular_values.empty() ? 0.0 : r.singular_values.front()) << '\n';
        log << "analyze: " << in.path.string() << " T_c = " << format_g9(r.t_c);
        if (resamples > 0) log << " +- " << format_g9(r.t_c_err);
        log << " (bin " << format_g9(r.d_t_used) << " ns)\n";
      } catch (const Error& e) {
        record_error(in.path, e);
      }
    }

    const fs::path results = dir / "schmidt_results.json";
    write_json(results, {{"results", rows}, {"errors", errors}});
    manifest.add_output(results);
    const fs::path table_path = dir / "tc_table.csv";
    write_text_file(table_path, table.str());
    manifest.add_output(table_path);
  } else {
    log << "error: analyze: none of the inputs could be read\n";
  }

  manifest.extra()["errors"] = errors;
  manifest.write(dir);
  return status;
}

// calibrate -----------------------------------------------------------------

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
    } else if (c == ',' && !quoted) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  for (auto& s : out) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    s = b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  }
  return out;
}

double parse_number(const std::string& s, const fs::path& path, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size() && std::isfinite(v)) return v;
  } catch (const std::exception&) {
  }
  fail(ErrorKind::io, path.string() + ":" + std::to_string(line) + ": not a number: \"" + s + "\"");
}

struct CsvTable {
  std::map<std::string, std::size_t> columns;
  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;  // (line number, cells)
};

CsvTable read_csv(const fs::path& path, const std::vector<std::string>& required) {
  std::istringstream is(read_text_file(path));
  CsvTable t;
  std::string line;
  std::size_t n = 0;
  bool header = false;
  while (std::getline(is, line)) {
    ++n;
    if (line.empty() || line[0] == '#' || line.find_first_not_of(" \t\r") == std::string::npos)
      continue;
    auto cells = split_csv_line(line);
    if (!header) {
      for (std::size_t i = 0; i < cells.size(); ++i) t.columns[cells[i]] = i;
      for (const auto& r : required)
        require(t.columns.count(r) != 0, ErrorKind::io,
                path.string() + ": missing column \"" + r + "\"");
      header = true;
      continue;
    }
    require(cells.size() == t.columns.size(), ErrorKind::io,
            path.string() + ":" + std::to_string(n) + ": expected " +
                std::to_string(t.columns.size()) + " fields");
    t.rows.emplace_back(n, std::move(cells));
  }
  require(header, ErrorKind::io, path.string() + ": empty file");
  return t;
}

}  // namespace

std::vector<SpectrumScan> read_scan_csv(const fs::path& path, std::optional<ScanRole> default_role) {
  const CsvTable t = read_csv(path, {"power_uW", "detuning_MHz", "counts"});
  const bool has_role = t.columns.count("role") != 0;
  std::vector<SpectrumScan> scans;
  std::map<std::pair<int, double>, std::size_t> index;
  for (const auto& [line, cells] : t.rows) {
    const double power = parse_number(cells[t.columns.at("power_uW")], path, line);
    const double det = parse_number(cells[t.columns.at("detuning_MHz")], path, line);
    const double counts = parse_number(cells[t.columns.at("counts")], path, line);
    ScanRole role = default_role.value_or(ScanRole::reflection_fluorescence);
    if (has_role) {
      try {
        role = parse_scan_role(cells[t.columns.at("role")]);
      } catch (const Error& e) {
        fail(ErrorKind::io, path.string() + ":" + std::to_string(line) + ": " + e.what());
      }
    }
    const auto key = std::make_pair(static_cast<int>(role), power);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, scans.size()).first;
      SpectrumScan s;
      s.power = power;
      s.role = role;
      scans.push_back(s);
    }
    scans[it->second].detunings.push_back(mhz_to_rad_per_ns(det));
    scans[it->second].intensities.push_back(counts);
  }
  require(!scans.empty(), ErrorKind::io, path.string() + ": no data rows");
  for (const auto& s : scans) {
    try {
      s.validate();
    } catch (const Error& e) {
      fail(ErrorKind::io, path.string() + ": scan at " + format_g9(s.power) + " uW: " + e.what());
    }
  }
  return scans;
}

void write_scan_csv(const fs::path& path, const std::vector<SpectrumScan>& scans) {
  std::ostringstream os;
  os << "power_uW,detuning_MHz,counts,role\n";
  for (const auto& s : scans)
    for (std::size_t i = 0; i < s.detunings.size(); ++i)
      os << format_g9(s.power) << ',' << format_g9(rad_per_ns_to_mhz(s.detunings[i])) << ','
         << format_g9(s.intensities[i]) << ',' << to_string(s.role) << '\n';
  write_text_file(path, os.str());
}

DriftPoints read_drift_csv(const fs::path& path) {
  const CsvTable t = read_csv(path, {"power_uW", "center_MHz"});
  DriftPoints d;
  for (const auto& [line, cells] : t.rows) {
    d.powers.push_back(parse_number(cells[t.columns.at("power_uW")], path, line));
    d.centers.push_back(
        mhz_to_rad_per_ns(parse_number(cells[t.columns.at("center_MHz")], path, line)));
  }
  return d;
}

FluxConstants read_calibration_report(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    fail(ErrorKind::config, path.string() + ": " + e.what());
  }
  require(j.contains("calibration") && j.contains("gamma_total"), ErrorKind::config,
          path.string() + ": not a saturation calibration report (needs \"calibration\" and "
                          "\"gamma_total\")");
  const CalibrationParams cal = calibration_from_json(j.at("calibration"));
  double gamma = 0.0;
  try {
    gamma = j.at("gamma_total").at("value_per_ns").get<double>();
  } catch (const json::exception& e) {
    fail(ErrorKind::config, path.string() + ": gamma_total: " + e.what());
  }
  return flux_constants(cal, gamma);
}

namespace {

std::vector<SpectrumScan> read_all_scans(const std::vector<fs::path>& files,
                                         std::optional<ScanRole> role, Manifest& manifest) {
  require(!files.empty(), ErrorKind::config, "calibrate: no scan files given");
  std::vector<SpectrumScan> scans;
  for (const auto& f : files) {
    auto s = read_scan_csv(f, role);
    manifest.add_input(f);
    scans.insert(scans.end(), s.begin(), s.end());
  }
  return scans;
}

json gamma_provenance(double gamma, const std::string& source) {
  return {{"value_per_ns", gamma}, {"provenance", "external"}, {"source", source}};
}

}  // namespace

int cmd_calibrate(const RunConfig& config, const CalibrateOptions& options, std::ostream& log) {
  config.validate();
  const fs::path dir = config.output_dir;

  if (options.mode == CalibrateMode::saturation) {
    ensure_output_dir(dir);
    Manifest manifest("calibrate", config);
    const auto scans = read_all_scans(options.scans, options.default_role, manifest);
    const double gamma = config.gamma_total_for_calibration();
    SaturationFitOptions fo;
    fo.fixed_beta = config.calibration.fixed_beta;
    const SaturationFit fit = fit_saturation(scans, gamma, fo);

    std::set<double> powers;
    for (const auto& s : scans) powers.insert(s.power);
    json table = json::array();
    std::ostringstream csv;
    csv << "power_uW,rabi_squared_per_ns2,S,n_tau,resonance_comparator\n";
    for (double p : powers) {
      const double s = fit.flux.saturation(p);
      const double cmp =
          resonance_comparator(fit.params.a_scale, fit.params.beta, gamma, s);
      table.push_back({{"power_uW", p},
                       {"rabi_squared_per_ns2", fit.flux.rabi_squared(p)},
                       {"S", s},
                       {"n_tau", fit.flux.n_tau(p)},
                       {"resonance_comparator", cmp}});
      csv << format_g9(p) << ',' << format_g9(fit.flux.rabi_squared(p)) << ',' << format_g9(s)
          << ',' << format_g9(fit.flux.n_tau(p)) << ',' << format_g9(cmp) << '\n';
    }

    json report;
    report["mode"] = "saturation";
    report["calibration"] = to_json(fit.params);
    report["errors"] = to_json(fit.errors);
    report["gamma_total"] = gamma_provenance(
        gamma, config.calibration.gamma_total ? "calibration.gamma_total_per_ns"
                                              : "emitter.gamma_total_per_ns");
    report["n_c"] = fit.flux.n_c;
    report["saturation_table"] = table;
    report["fit"] = to_json(fit);
    report["scans"] = scans.size();

    const fs::path rp = dir / "saturation_report.json";
    const fs::path tp = dir / "saturation_table.csv";
    write_json(rp, report);
    write_text_file(tp, csv.str());
    manifest.add_output(rp);
    manifest.add_output(tp);
    manifest.write(dir);
    log << "calibrate: beta = " << format_g9(fit.params.beta) << ", gamma_0 = "
        << format_g9(fit.params.gamma_deph) << " /ns, alpha = " << format_g9(fit.params.alpha_cal)
        << " /ns^2/uW, n_c = " << format_g9(fit.flux.n_c) << '\n';
    return 0;
  }

  if (!options.calibration)
    fail(ErrorKind::config,
         "calibrate --mode shift needs --calibration <saturation_report.json>: without a "
         "saturation calibration the conversion from power to n_tau is undefined");
  if (!options.drift)
    fail(ErrorKind::config,
         "calibrate --mode shift needs --drift <csv> (power_uW,center_MHz without control)");
  ensure_output_dir(dir);
  Manifest manifest("calibrate", config);
  const FluxConstants flux = read_calibration_report(*options.calibration);
  manifest.add_input(*options.calibration);
  const DriftPoints points = read_drift_csv(*options.drift);
  manifest.add_input(*options.drift);
  const DriftModel drift = fit_drift(points.powers, points.centers);

  auto scans = read_all_scans(options.scans,
                              options.default_role.value_or(ScanRole::probe_transmission), manifest);
  std::erase_if(scans, [](const SpectrumScan& s) { return s.role != ScanRole::probe_transmission; });
  require(!scans.empty(), ErrorKind::io, "calibrate: no probe_transmission scans in the inputs");

  ShiftOptions so;
  so.resamples = config.calibration.monte_carlo_resamples;
  so.seed = derive_seed(config.seed, "calibrate_shift");
  so.interval = config.calibration.interval;
  const ShiftCurve curve = extract_shift(scans, flux, drift, config.calibration.control_detuning, so);

  if (config.calibration.gamma_total &&
      std::abs(*config.calibration.gamma_total - flux.gamma_total) > 1e-12 * flux.gamma_total)
    manifest.warn("calibration.gamma_total_per_ns differs from the saturation report; the report "
                  "value is used");

  json report;
  report["mode"] = "shift";
  report["gamma_total"] = gamma_provenance(flux.gamma_total, options.calibration->string());
  report["n_c"] = flux.n_c;
  report["control_detuning_MHz"] = rad_per_ns_to_mhz(curve.control_detuning);
  report["drift"] = to_json(drift);
  report["shift"] = to_json(curve);
  report["n_tau_full_linewidth"] = curve.n_tau_full_linewidth;
  report["n_tau_full_linewidth_err"] = curve.n_tau_full_linewidth_err;

  std::ostringstream csv;
  csv << "power_uW,n_tau,shift_over_gamma,shift_err\n";
  for (std::size_t i = 0; i < curve.powers.size(); ++i)
    csv << format_g9(curve.powers[i]) << ',' << format_g9(curve.n_tau[i]) << ','
        << format_g9(curve.shift_over_gamma[i]) << ',' << format_g9(curve.shift_err[i]) << '\n';

  const fs::path rp = dir / "shift_report.json";
  const fs::path tp = dir / "shift_table.csv";
  write_json(rp, report);
  write_text_file(tp, csv.str());
  manifest.add_output(rp);
  manifest.add_output(tp);
  manifest.write(dir);
  log << "calibrate: full-linewidth shift at n_tau = " << format_g9(curve.n_tau_full_linewidth)
      << " +- " << format_g9(curve.n_tau_full_linewidth_err) << '\n';
  return 0;
}

// ingest --------------------------------------------------------------------

int cmd_ingest(const RunConfig& config, const IngestOptions& options, std::ostream& log) {
  config.validate();
  require(!options.inputs.empty(), ErrorKind::config, "ingest: no tag files given");
  require(!options.channels.empty() && !options.selections.empty(), ErrorKind::config,
          "ingest: no channel pairs or selections requested");
  const fs::path dir = config.output_dir;
  ensure_output_dir(dir);
  Manifest manifest("ingest", config);
  json files = json::array();

  for (const fs::path& path : options.inputs) {
    const json side = read_timetag_sidecar(path);
    AcquisitionConfig acq = config.acquisition;
    if (side.contains("acquisition")) {
      json a = side.at("acquisition");
      a["gate_width_ns"] = config.acquisition.gate();
      acq = acquisition_from_json(a);
    }

    std::vector<G2Request> requests;
    for (const auto& ch : options.channels)
      for (auto sel : options.selections) requests.push_back({ch, sel});
    CoincidenceBuilder builder(acq, requests, config.map.d_t);
    Ingestor ingestor(acq, [&](const ClockedEvent& e) { builder.add(e); });
    read_timetags(path, [&](std::span<const TimeTagRecord> chunk) { ingestor.feed(chunk); });
    ingestor.finish();
    manifest.add_input(path);
    const auto maps = builder.finish(&ingestor.stats());

    json entry = {{"file", path.string()},
                  {"acquisition", to_json(acq)},
                  {"ingest", to_json(ingestor.stats())},
                  {"maps", json::array()}};
    const std::string stem = path.stem().string();
    for (std::size_t k = 0; k < maps.size(); ++k) {
      const auto& m = maps[k];
      const std::string sel(to_string(requests[k].selection));
      const fs::path out =
          dir / ("counts_" + requests[k].channels.label() + "_" + sel + "_" + stem + ".cmap");
      write_map(out, m, config.map.payload);
      manifest.add_output(out);
      if (m.total() == 0.0)
        manifest.warn(out.filename().string() + ": no pairs selected (zero map)");
      entry["maps"].push_back({{"file", out.filename().string()},
                               {"channels", requests[k].channels.label()},
                               {"selection", sel},
                               {"pairs", m.total()}});
      log << "ingest: " << path.filename().string() << ' ' << requests[k].channels.label() << ' '
          << sel << ": " << static_cast<std::uint64_t>(m.total()) << " pairs\n";
    }
    if (!maps.empty() && maps.front().meta.contains("pair_stats"))
      entry["pair_stats"] = maps.front().meta["pair_stats"];
    files.push_back(entry);
  }

  const fs::path rp = dir / "ingest_report.json";
  write_json(rp, {{"files", files}});
  manifest.add_output(rp);
  manifest.write(dir);
  return 0;
}

// synth-tags ----------------------------------------------------------------

int cmd_synth_tags(const RunConfig& config, const SynthOptions& options, std::ostream& log) {
  config.validate();
  const auto pulses = config.pulses();
  require(options.pulse_index < pulses.size(), ErrorKind::config,
          "synth-tags: pulse index " + std::to_string(options.pulse_index) + " outside the sweep (" +
              std::to_string(pulses.size()) + " entries)");
  require(pulses[options.pulse_index].shape == PulseShape::gaussian, ErrorKind::config,
          "synth-tags: needs a gaussian pulse");
  const fs::path dir = config.output_dir;
  ensure_output_dir(dir);
  Manifest manifest("synth-tags", config);

  const PulseSpec& p = pulses[options.pulse_index];
  const MapWindow window = config.window_for(p);
  if (config.synthesis.window_offset + window.length() > config.acquisition.gate())
    manifest.warn("map window extends past the coincidence gate; late clicks will be dropped");
  const PulseSimulation sim(config.emitter, p, window, config.map.d_t, simulation_options(config));

  SynthesisInput input;
  input.tt = sim.g2_map(ChannelPair::parse("tt"));
  input.rr = sim.g2_map(ChannelPair::parse("rr"));
  input.tr = sim.g2_map(ChannelPair::parse("tr"));
  input.g1_t = sim.intensity_trace(Channel::transmission);
  input.g1_r = sim.intensity_trace(Channel::reflection);

  SynthesisOptions so;
  so.pulses = config.synthesis.pulses;
  so.mean_photons = config.synthesis.mean_photons;
  so.jitter = config.synthesis.jitter;
  so.jitter_t_fwhm = config.synthesis.jitter_t_fwhm;
  so.jitter_r_fwhm = config.synthesis.jitter_r_fwhm;
  so.window_offset = config.synthesis.window_offset;
  so.seed = config.seed;

  // Noiseless densities as seen by the detectors, for direct comparison.
  for (const CorrelationMap* m : {&input.tt, &input.rr, &input.tr}) {
    CorrelationMap seen = *m;
    if (so.jitter)
      seen = apply_jitter(*m, jitter_for(m->channels.first, so.jitter_t_fwhm, so.jitter_r_fwhm),
                          jitter_for(m->channels.second, so.jitter_t_fwhm, so.jitter_r_fwhm));
    seen.t_origin += so.window_offset - window.t_start;
    seen.meta["map"] = "noiseless_detected";
    seen.meta["window_offset_ns"] = so.window_offset;
    const fs::path out = dir / ("noiseless_" + m->channels.label() + ".cmap");
    write_map(out, seen, config.map.payload);
    manifest.add_output(out);
  }

  const fs::path tags = dir / (config.synthesis.csv ? "tags.csv" : "tags.bin");
  TimeTagWriter writer(tags, config.acquisition, config.synthesis.csv);
  const SynthesisReport report =
      synthesize_tags(input, config.acquisition, so, [&](const TimeTagRecord& r) { writer.write(r); });
  writer.close({{"synthesis", to_json(report)},
                {"config_hash", config_hash(config)},
                {"seed", config.seed},
                {"pulse_index", options.pulse_index},
                {"sigma_ns", p.sigma}});
  manifest.add_output(tags);
  fs::path sidecar = tags;
  sidecar += ".json";
  manifest.add_output(sidecar);

  const fs::path rp = dir / "synthesis_report.json";
  write_json(rp, to_json(report));
  manifest.add_output(rp);
  manifest.extra()["synthesis"] = to_json(report);
  manifest.write(dir);
  log << "synth-tags: " << report.records << " records (" << report.detector_records
      << " detector clicks) over " << so.pulses << " pulses -> " << tags.filename().string()
      << '\n';
  return 0;
}

}  // namespace wqed::app
