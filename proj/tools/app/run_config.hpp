#pragma once

// Run configuration for the wqed tool: one JSON file with nested sections and
// units in the key names. MHz detunings are converted to rad/ns on load.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include <json.hpp>

#include "wqed/calibration.hpp"
#include "wqed/emitter.hpp"
#include "wqed/map_io.hpp"
#include "wqed/scattering.hpp"
#include "wqed/timetag.hpp"

namespace wqed::app {

inline constexpr double kCliGateWidth = 15.0;  // ns, a multiple of the default 20 ps bin

struct MapSettings {
  double d_t = kDefaultMapBin;
  std::optional<MapWindow> window;  // default_window() per pulse when absent
  std::vector<ChannelPair> channels{ChannelPair{}};
  PayloadEncoding payload = PayloadEncoding::f64le;
};

struct PipelineSettings {
  bool adaptive_bin = true;
  int monte_carlo_resamples = 200;
  int rebin_factor = 1;  // used when adaptive binning is off
  double jitter_t_fwhm = 0.0;
  double jitter_r_fwhm = 0.0;
  int linecut_band_bins = kLineCutBand;
};

struct SynthesisSettings {
  std::uint64_t pulses = 10'000'000;
  double mean_photons = 0.05;
  bool jitter = true;
  double jitter_t_fwhm = 0.03;
  double jitter_r_fwhm = 0.15;
  double window_offset = 1.0;  // ns between clock tick and map window start
  bool csv = false;
};

struct CalibrationSettings {
  std::optional<double> gamma_total;  // defaults to emitter.gamma_total
  std::optional<double> fixed_beta;
  double control_detuning = 0.0;  // rad/ns
  int monte_carlo_resamples = 200;
  double interval = 0.95;
};

struct RunConfig {
  EmitterParams emitter;
  PulseSpec pulse;
  std::vector<double> sigma_over_tau;  // sweep; empty = the single pulse above
  MapSettings map;
  PipelineSettings pipeline;
  AcquisitionConfig acquisition;
  SynthesisSettings synthesis;
  CalibrationSettings calibration;
  std::filesystem::path output_dir = "wqed_out";
  std::uint64_t seed = 0;
  unsigned threads = 0;
  double integration_step = 0.0;

  RunConfig();

  /// Pulses to simulate: one per sweep entry, or the configured pulse.
  std::vector<PulseSpec> pulses() const;
  MapWindow window_for(const PulseSpec& pulse) const;
  double gamma_total_for_calibration() const {
    return calibration.gamma_total.value_or(emitter.gamma_total);
  }
  void validate() const;
};

/// Throws ErrorKind::config with the dotted key path on unknown keys, wrong
/// types or values that fail validation.
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

/// Normalized echo of every field (defaults filled in); hashed into manifests.
nlohmann::json to_json(const RunConfig& config);

}  // namespace wqed::app
