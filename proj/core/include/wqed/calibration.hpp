#pragma once

// Two-color calibration pipeline: saturation spectroscopy model and fits,
// photon-flux conversion (Omega, S, n_c, n_tau), Lorentzian probe fits, the
// empirical drift polynomial and extraction of the control-induced shift.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "wqed/emitter.hpp"

namespace wqed {

struct CalibrationParams {
  double beta = 0.9;
  double gamma_deph = 0.3;   // 1/ns
  double alpha_cal = 0.3;    // Omega^2 per uW, 1/ns^2/uW
  double a_scale = 1.0;      // counts per unit of emitted flux (beta gamma/2) rho_ee
  double background = 0.0;   // counts

  void validate() const;
  EmitterParams emitter(double gamma_total) const;
};

enum class ScanRole { reflection_fluorescence, probe_transmission };

std::string_view to_string(ScanRole role) noexcept;
ScanRole parse_scan_role(std::string_view text);

struct SpectrumScan {
  double power = 0.0;               // uW
  std::vector<double> detunings;    // rad/ns
  std::vector<double> intensities;  // counts
  ScanRole role = ScanRole::reflection_fluorescence;

  void validate() const;
};

/// n_c, S(P) and n_tau(P) from the closed-form saturation expressions.
struct FluxConstants {
  double gamma_total = 0.0;
  double gamma_deph = 0.0;
  double alpha_cal = 0.0;
  double n_c = 0.0;

  double rabi_squared(double power) const noexcept { return alpha_cal * power; }
  /// S = 8 Omega^2 / (gamma (2 gamma_0 + gamma)).
  double saturation(double power) const noexcept;
  double n_tau(double power) const noexcept { return saturation(power) * n_c; }
  /// Inverse of n_tau(P).
  double power_for_n_tau(double n_tau) const noexcept;
};

/// Throws ErrorKind::config for beta = 0 (no waveguide coupling).
FluxConstants flux_constants(const CalibrationParams& cal, double gamma_total);

/// Power-broadened excited population (S/2) / (1 + S + (detuning/gamma2)^2).
double excited_population(double detuning, double saturation, double gamma2);

/// background + a_scale (beta gamma/2) rho_ee(detuning, S(P)).
double saturation_model(const CalibrationParams& cal, double gamma_total, double detuning,
                        double power);

/// Transmitted power of the driving laser divided by its input power: coherent
/// extinction plus forward-scattered fluorescence.
double transmission_model(const CalibrationParams& cal, double gamma_total, double detuning,
                          double power);

/// The printed on-resonance expression a beta^2 gamma^2 / (8 S). Decreases with S, so
/// it is kept only as a diagnostic next to the fit model.
double resonance_comparator(double a_scale, double beta, double gamma_total,
                                    double saturation);

struct SaturationFitOptions {
  std::optional<double> fixed_beta;  // required when only reflection scans are given
  std::optional<CalibrationParams> initial;
};

struct SaturationFit {
  CalibrationParams params;
  CalibrationParams errors;       // one standard deviation; beta error 0 when fixed
  double transmission_scale = 0;  // counts at unit transmission (joint fits only)
  double transmission_scale_err = 0;
  std::vector<std::string> parameter_names;
  Eigen::MatrixXd covariance;
  double gamma_total = 0.0;
  bool beta_fixed = false;
  int iterations = 0;
  double residual_rms = 0.0;  // in units of each scan's maximum
  FluxConstants flux;
};

/// Joint least-squares fit across scans with gamma_total held fixed.
/// Reflection counts alone only fix the product a_scale * beta, so beta is
/// either fixed by the caller or constrained by probe_transmission scans.
SaturationFit fit_saturation(const std::vector<SpectrumScan>& scans, double gamma_total,
                             const SaturationFitOptions& options = {});

struct LorentzianFit {
  double center = 0.0;  // rad/ns
  double width = 0.0;   // full width at half maximum, rad/ns
  double amplitude = 0.0;  // height (> 0) or depth (< 0) relative to the offset
  double offset = 0.0;
  double center_err = 0.0;
  double width_err = 0.0;
  double amplitude_err = 0.0;
  double offset_err = 0.0;
  double residual_rms = 0.0;
  bool width_exceeds_range = false;  // featureless data: the fit is not meaningful

  double operator()(double x) const noexcept;
};

/// offset + amplitude / (1 + 4 ((x - center)/width)^2).
LorentzianFit fit_lorentzian(const std::vector<double>& x, const std::vector<double>& y);
LorentzianFit fit_lorentzian(const SpectrumScan& scan);

/// Empirical resonance position versus control power: c0 + c1 P + c2 P^2.
struct DriftModel {
  Eigen::Vector3d coefficients = Eigen::Vector3d::Zero();
  Eigen::Matrix3d covariance = Eigen::Matrix3d::Zero();
  double residual_rms = 0.0;

  double operator()(double power) const noexcept;
};

DriftModel fit_drift(const std::vector<double>& powers, const std::vector<double>& centers);

struct ShiftOptions {
  int resamples = 200;
  std::uint64_t seed = 0;
  double interval = 0.95;  // central Monte Carlo interval reported with the estimate
  bool resample_counts = true;
  bool resample_drift = true;
};

struct ShiftCurve {
  double control_detuning = 0.0;  // rad/ns
  double gamma_total = 0.0;
  std::vector<double> powers;
  std::vector<double> n_tau;
  std::vector<double> shift_over_gamma;
  std::vector<double> shift_err;
  Eigen::Vector3d poly2 = Eigen::Vector3d::Zero();  // shift/gamma = c0 + c1 n + c2 n^2
  double n_tau_full_linewidth = 0.0;
  double n_tau_full_linewidth_err = 0.0;  // Monte Carlo standard deviation
  double interval_low = 0.0;
  double interval_high = 0.0;
  int resamples_used = 0;
  int resamples_failed = 0;
};

/// Smallest n in [0, n_max] with c0 + c1 n + c2 n^2 = target, if any.
std::optional<double> solve_crossing(const Eigen::Vector3d& poly, double target, double n_max);

/// Fits every probe scan, converts centers to drift-corrected shifts in units of
/// gamma_total, fits the quadratic and solves for a shift of one full linewidth.
/// Monte Carlo resamples the raw counts (Poisson) and the drift coefficients.
/// Throws ErrorKind::extrapolation when the quadratic never reaches -1 within
/// [0, 2 max n_tau].
ShiftCurve extract_shift(const std::vector<SpectrumScan>& probe_scans, const FluxConstants& flux,
                         const DriftModel& drift, double control_detuning,
                         const ShiftOptions& options = {});

nlohmann::json to_json(const CalibrationParams& p);
CalibrationParams calibration_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SaturationFit& fit);
nlohmann::json to_json(const LorentzianFit& fit);
nlohmann::json to_json(const DriftModel& drift);
nlohmann::json to_json(const ShiftCurve& curve);

// Two-tone simulation of the switch.

struct TwoColorControl {
  double detuning = 0.0;  // rad/ns, relative to the emitter
  double n_tau = 0.0;     // scaled control flux (n_tau = S n_c)
};

struct TwoColorProbe {
  std::vector<double> detunings;  // rad/ns
  double n_tau = 1e-4;            // weak: amplitude <= 0.1 of the control amplitude
};

struct TwoColorOptions {
  double integration_step = 0.0;  // ns; 0 = automatic
  double settle_lifetimes = 30.0;
  double min_window_lifetimes = 20.0;
  double max_window_lifetimes = 4000.0;
  unsigned threads = 0;
};

struct TwoColorSpectrum {
  std::vector<double> detunings;
  std::vector<double> transmission;  // |t_probe|^2
};

/// Cw flux |a|^2 (photons/ns) that corresponds to a scaled flux n_tau.
double flux_for_n_tau(const EmitterParams& params, double n_tau);

TwoColorSpectrum simulate_two_color(const EmitterParams& params, const TwoColorControl& control,
                                    const TwoColorProbe& probe, const TwoColorOptions& options = {});

}  // namespace wqed
