#include "run_config.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include "wqed/errors.hpp"

namespace wqed::app {

namespace {

using nlohmann::json;

std::string type_name(const json& v) {
  return v.type_name();
}

// Reads one JSON object and remembers which keys were used, so that anything
// left over can be reported as unknown.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(ErrorKind::config, where() + "expected an object, got " + type_name(j_));
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  std::string key_path(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  double number(const std::string& key, double def) {
    const json* v = take(key);
    if (!v) return def;
    if (!v->is_number()) bad_type(key, "a number", *v);
    return v->get<double>();
  }

  std::optional<double> optional_number(const std::string& key) {
    const json* v = take(key);
    if (!v || v->is_null()) return std::nullopt;
    if (!v->is_number()) bad_type(key, "a number", *v);
    return v->get<double>();
  }

  bool boolean(const std::string& key, bool def) {
    const json* v = take(key);
    if (!v) return def;
    if (!v->is_boolean()) bad_type(key, "true or false", *v);
    return v->get<bool>();
  }

  std::int64_t integer(const std::string& key, std::int64_t def) {
    const json* v = take(key);
    if (!v) return def;
    if (v->is_number_integer()) return v->get<std::int64_t>();
    if (v->is_number_float()) {
      const double d = v->get<double>();
      if (d == std::floor(d) && std::abs(d) < 9e15) return static_cast<std::int64_t>(d);
    }
    bad_type(key, "an integer", *v);
  }

  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t def) {
    const json* v = take(key);
    if (!v) return def;
    if (v->is_number_unsigned()) return v->get<std::uint64_t>();
    if (v->is_number_integer() && v->get<std::int64_t>() >= 0)
      return static_cast<std::uint64_t>(v->get<std::int64_t>());
    if (v->is_number_float()) {
      const double d = v->get<double>();
      if (d >= 0.0 && d == std::floor(d) && d < 9e15) return static_cast<std::uint64_t>(d);
    }
    bad_type(key, "a nonnegative integer", *v);
  }

  std::string string(const std::string& key, const std::string& def) {
    const json* v = take(key);
    if (!v) return def;
    if (!v->is_string()) bad_type(key, "a string", *v);
    return v->get<std::string>();
  }

  const json* raw(const std::string& key) { return take(key); }

  std::optional<Section> section(const std::string& key) {
    const json* v = take(key);
    if (!v) return std::nullopt;
    return Section(*v, key_path(key));
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!used_.count(key)) fail(ErrorKind::config, key_path(key) + ": unknown key");
    }
  }

  [[noreturn]] void bad_value(const std::string& key, const std::string& what) const {
    fail(ErrorKind::config, key_path(key) + ": " + what);
  }

 private:
  const json* take(const std::string& key) {
    used_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  [[noreturn]] void bad_type(const std::string& key, const std::string& expected,
                             const json& got) const {
    fail(ErrorKind::config, key_path(key) + ": expected " + expected + ", got " + type_name(got));
  }

  std::string where() const { return path_.empty() ? "" : path_ + ": "; }

  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

// Runs a module validator and prefixes its message with the config section.
template <class F>
void validated(const std::string& section, F&& f) {
  try {
    f();
  } catch (const Error& e) {
    const std::string msg = e.what();
    if (msg.rfind(section + ".", 0) == 0) throw;
    fail(e.kind(), section + ": " + msg);
  }
}

std::vector<double> number_list(Section& s, const std::string& key) {
  const json* v = s.raw(key);
  if (!v) return {};
  if (v->is_number()) return {v->get<double>()};
  if (!v->is_array()) s.bad_value(key, "expected a number or an array of numbers");
  std::vector<double> out;
  for (const auto& x : *v) {
    if (!x.is_number()) s.bad_value(key, "expected an array of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

}  // namespace

RunConfig::RunConfig() {
  acquisition.gate_width = kCliGateWidth;
}

std::vector<PulseSpec> RunConfig::pulses() const {
  if (sigma_over_tau.empty()) return {pulse};
  std::vector<PulseSpec> out;
  for (double r : sigma_over_tau) {
    PulseSpec p = pulse;
    p.sigma = r * emitter.lifetime();
    out.push_back(p);
  }
  return out;
}

MapWindow RunConfig::window_for(const PulseSpec& p) const {
  return map.window ? *map.window : default_window(emitter, p);
}

void RunConfig::validate() const {
  validated("emitter", [&] { emitter.validate(); });
  for (const auto& p : pulses()) validated("pulse", [&] { p.validate(); });
  for (double r : sigma_over_tau)
    require(r > 0.0 && std::isfinite(r), ErrorKind::config,
            "pulse.sigma_over_tau: values must be > 0");
  require(pulse.shape == PulseShape::gaussian || sigma_over_tau.empty(), ErrorKind::config,
          "pulse.sigma_over_tau: a sweep needs shape \"gaussian\"");
  require(map.d_t > 0.0 && std::isfinite(map.d_t), ErrorKind::config, "map.d_t_ns: must be > 0");
  if (map.window)
    require(map.window->t_end > map.window->t_start, ErrorKind::config,
            "map.window_ns: end must exceed start");
  require(!map.channels.empty(), ErrorKind::config, "map.channels: at least one pair required");
  require(pipeline.monte_carlo_resamples >= 0, ErrorKind::config,
          "pipeline.monte_carlo_resamples: must be >= 0");
  require(pipeline.rebin_factor >= 1, ErrorKind::config, "pipeline.rebin_factor: must be >= 1");
  require(pipeline.jitter_t_fwhm >= 0.0 && pipeline.jitter_r_fwhm >= 0.0, ErrorKind::config,
          "pipeline: jitter widths must be >= 0");
  require(pipeline.linecut_band_bins >= 1, ErrorKind::config,
          "pipeline.linecut_band_bins: must be >= 1");
  validated("acquisition", [&] { acquisition.validate(); });
  require(synthesis.pulses >= 1, ErrorKind::config, "synthesis.pulses: must be >= 1");
  require(synthesis.mean_photons >= 0.0 && std::isfinite(synthesis.mean_photons),
          ErrorKind::config, "synthesis.mean_photons: must be >= 0");
  require(synthesis.jitter_t_fwhm >= 0.0 && synthesis.jitter_r_fwhm >= 0.0, ErrorKind::config,
          "synthesis: jitter widths must be >= 0");
  require(synthesis.window_offset >= 0.0, ErrorKind::config,
          "synthesis.window_offset_ns: must be >= 0");
  if (calibration.gamma_total)
    require(*calibration.gamma_total > 0.0, ErrorKind::config,
            "calibration.gamma_total_per_ns: must be > 0");
  if (calibration.fixed_beta)
    require(*calibration.fixed_beta > 0.0 && *calibration.fixed_beta <= 1.0, ErrorKind::config,
            "calibration.fixed_beta: must be in (0, 1]");
  require(calibration.monte_carlo_resamples >= 0, ErrorKind::config,
          "calibration.monte_carlo_resamples: must be >= 0");
  require(calibration.interval > 0.0 && calibration.interval < 1.0, ErrorKind::config,
          "calibration.interval: must be in (0, 1)");
  require(integration_step >= 0.0, ErrorKind::config, "integration_step_ns: must be >= 0");
}

RunConfig parse_run_config(const nlohmann::json& j) {
  RunConfig c;
  Section root(j, "");

  if (auto s = root.section("emitter")) {
    c.emitter.gamma_total = s->number("gamma_total_per_ns", c.emitter.gamma_total);
    c.emitter.beta = s->number("beta", c.emitter.beta);
    c.emitter.gamma_deph = s->number("gamma_deph_per_ns", c.emitter.gamma_deph);
    c.emitter.delta_e = mhz_to_rad_per_ns(s->number("detuning_MHz", 0.0));
    s->finish();
  }

  if (auto s = root.section("pulse")) {
    const std::string shape = s->string("shape", "gaussian");
    if (shape == "gaussian")
      c.pulse.shape = PulseShape::gaussian;
    else if (shape == "cw")
      c.pulse.shape = PulseShape::cw;
    else
      s->bad_value("shape", "expected \"gaussian\" or \"cw\", got \"" + shape + "\"");
    c.pulse.sigma = s->number("sigma_ns", c.pulse.sigma);
    c.pulse.center = s->number("center_ns", c.pulse.center);
    c.pulse.mean_photons = s->number("mean_photons", c.pulse.mean_photons);
    c.pulse.detuning = mhz_to_rad_per_ns(s->number("detuning_MHz", 0.0));
    c.sigma_over_tau = number_list(*s, "sigma_over_tau");
    s->finish();
  }

  if (auto s = root.section("map")) {
    c.map.d_t = s->number("d_t_ns", c.map.d_t);
    const auto w = number_list(*s, "window_ns");
    if (!w.empty()) {
      if (w.size() != 2) s->bad_value("window_ns", "expected [start, end]");
      c.map.window = MapWindow{w[0], w[1]};
    }
    if (const json* ch = s->raw("channels")) {
      if (!ch->is_array() || ch->empty()) s->bad_value("channels", "expected a nonempty array");
      c.map.channels.clear();
      for (const auto& x : *ch) {
        if (!x.is_string()) s->bad_value("channels", "expected strings such as \"tt\"");
        try {
          c.map.channels.push_back(ChannelPair::parse(x.get<std::string>()));
        } catch (const Error& e) {
          s->bad_value("channels", e.what());
        }
      }
    }
    const std::string payload = s->string("payload", "f64le");
    if (payload == "f64le")
      c.map.payload = PayloadEncoding::f64le;
    else if (payload == "csv")
      c.map.payload = PayloadEncoding::csv;
    else
      s->bad_value("payload", "expected \"f64le\" or \"csv\"");
    s->finish();
  }

  if (auto s = root.section("pipeline")) {
    c.pipeline.adaptive_bin = s->boolean("adaptive_bin", c.pipeline.adaptive_bin);
    c.pipeline.monte_carlo_resamples =
        static_cast<int>(s->integer("monte_carlo_resamples", c.pipeline.monte_carlo_resamples));
    c.pipeline.rebin_factor = static_cast<int>(s->integer("rebin_factor", c.pipeline.rebin_factor));
    c.pipeline.jitter_t_fwhm = s->number("jitter_t_fwhm_ns", c.pipeline.jitter_t_fwhm);
    c.pipeline.jitter_r_fwhm = s->number("jitter_r_fwhm_ns", c.pipeline.jitter_r_fwhm);
    c.pipeline.linecut_band_bins =
        static_cast<int>(s->integer("linecut_band_bins", c.pipeline.linecut_band_bins));
    s->finish();
  }

  if (const json* a = root.raw("acquisition")) {
    Section s(*a, "acquisition");
    for (const char* key : {"rep_period_ns", "pulse_separation_ns", "clock_channel",
                            "gate_width_ns", "max_missing_clocks", "channel_map"})
      s.raw(key);
    s.finish();
    json with_gate = *a;
    if (!with_gate.contains("gate_width_ns")) with_gate["gate_width_ns"] = kCliGateWidth;
    c.acquisition = acquisition_from_json(with_gate);
  }

  if (auto s = root.section("synthesis")) {
    c.synthesis.pulses = s->unsigned_integer("pulses", c.synthesis.pulses);
    c.synthesis.mean_photons = s->number("mean_photons", c.synthesis.mean_photons);
    c.synthesis.jitter = s->boolean("jitter", c.synthesis.jitter);
    c.synthesis.jitter_t_fwhm = s->number("jitter_t_fwhm_ns", c.synthesis.jitter_t_fwhm);
    c.synthesis.jitter_r_fwhm = s->number("jitter_r_fwhm_ns", c.synthesis.jitter_r_fwhm);
    c.synthesis.window_offset = s->number("window_offset_ns", c.synthesis.window_offset);
    const std::string format = s->string("format", "binary");
    if (format != "binary" && format != "csv")
      s->bad_value("format", "expected \"binary\" or \"csv\"");
    c.synthesis.csv = format == "csv";
    s->finish();
  }

  if (auto s = root.section("calibration")) {
    c.calibration.gamma_total = s->optional_number("gamma_total_per_ns");
    c.calibration.fixed_beta = s->optional_number("fixed_beta");
    c.calibration.control_detuning = mhz_to_rad_per_ns(s->number("control_detuning_MHz", 0.0));
    c.calibration.monte_carlo_resamples = static_cast<int>(
        s->integer("monte_carlo_resamples", c.calibration.monte_carlo_resamples));
    c.calibration.interval = s->number("interval", c.calibration.interval);
    s->finish();
  }

  c.output_dir = root.string("output_dir", c.output_dir.string());
  c.seed = root.unsigned_integer("seed", c.seed);
  const std::int64_t threads = root.integer("threads", 0);
  if (threads < 0) root.bad_value("threads", "must be >= 0");
  c.threads = static_cast<unsigned>(threads);
  c.integration_step = root.number("integration_step_ns", c.integration_step);
  root.finish();

  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::config, path.string() + ": " + e.what());
  }
  try {
    return parse_run_config(j);
  } catch (const Error& e) {
    fail(e.kind(), path.string() + ": " + e.what());
  }
}

nlohmann::json to_json(const RunConfig& c) {
  json j;
  j["emitter"] = {{"gamma_total_per_ns", c.emitter.gamma_total},
                  {"beta", c.emitter.beta},
                  {"gamma_deph_per_ns", c.emitter.gamma_deph},
                  {"detuning_MHz", rad_per_ns_to_mhz(c.emitter.delta_e)}};
  j["pulse"] = {{"shape", c.pulse.shape == PulseShape::gaussian ? "gaussian" : "cw"},
                {"sigma_ns", c.pulse.sigma},
                {"center_ns", c.pulse.center},
                {"mean_photons", c.pulse.mean_photons},
                {"detuning_MHz", rad_per_ns_to_mhz(c.pulse.detuning)},
                {"sigma_over_tau", c.sigma_over_tau}};
  std::vector<std::string> channels;
  for (const auto& ch : c.map.channels) channels.push_back(ch.label());
  j["map"] = {{"d_t_ns", c.map.d_t},
              {"channels", channels},
              {"payload", c.map.payload == PayloadEncoding::f64le ? "f64le" : "csv"}};
  if (c.map.window) j["map"]["window_ns"] = {c.map.window->t_start, c.map.window->t_end};
  j["pipeline"] = {{"adaptive_bin", c.pipeline.adaptive_bin},
                   {"monte_carlo_resamples", c.pipeline.monte_carlo_resamples},
                   {"rebin_factor", c.pipeline.rebin_factor},
                   {"jitter_t_fwhm_ns", c.pipeline.jitter_t_fwhm},
                   {"jitter_r_fwhm_ns", c.pipeline.jitter_r_fwhm},
                   {"linecut_band_bins", c.pipeline.linecut_band_bins}};
  j["acquisition"] = to_json(c.acquisition);
  j["synthesis"] = {{"pulses", c.synthesis.pulses},
                    {"mean_photons", c.synthesis.mean_photons},
                    {"jitter", c.synthesis.jitter},
                    {"jitter_t_fwhm_ns", c.synthesis.jitter_t_fwhm},
                    {"jitter_r_fwhm_ns", c.synthesis.jitter_r_fwhm},
                    {"window_offset_ns", c.synthesis.window_offset},
                    {"format", c.synthesis.csv ? "csv" : "binary"}};
  j["calibration"] = {{"gamma_total_per_ns", c.calibration.gamma_total
                                                 ? json(*c.calibration.gamma_total)
                                                 : json(nullptr)},
                      {"fixed_beta", c.calibration.fixed_beta ? json(*c.calibration.fixed_beta)
                                                              : json(nullptr)},
                      {"control_detuning_MHz", rad_per_ns_to_mhz(c.calibration.control_detuning)},
                      {"monte_carlo_resamples", c.calibration.monte_carlo_resamples},
                      {"interval", c.calibration.interval}};
  j["output_dir"] = c.output_dir.string();
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["integration_step_ns"] = c.integration_step;
  return j;
}

}  // namespace wqed::app
