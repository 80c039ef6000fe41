#pragma once

// Emitter, pulse and time-grid descriptions shared by the simulation engine.
//
// Units throughout the library: times in ns, rates in 1/ns, detunings in
// rad/ns. MHz conversions belong to the command-line boundary
// (see mhz_to_rad_per_ns).

#include <complex>
#include <cstddef>
#include <functional>
#include <numbers>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace wqed {

using complex = std::complex<double>;

inline constexpr double mhz_to_rad_per_ns(double mhz) noexcept {
  return 2.0 * std::numbers::pi * 1e-3 * mhz;
}
inline constexpr double rad_per_ns_to_mhz(double w) noexcept {
  return w / (2.0 * std::numbers::pi * 1e-3);
}

/// Two-level emitter side-coupled to a bidirectional waveguide.
struct EmitterParams {
  double gamma_total = 4.364;  // total decay rate, 1/ns
  double beta = 1.0;           // waveguide coupling fraction
  double gamma_deph = 0.0;     // pure dephasing rate, 1/ns
  double delta_e = 0.0;        // emitter detuning from the frame reference, rad/ns

  /// Coherence decay rate gamma_total/2 + gamma_deph.
  double gamma2() const noexcept { return 0.5 * gamma_total + gamma_deph; }
  /// Decay rate into each waveguide direction (symmetric coupling).
  double gamma_right() const noexcept { return 0.5 * beta * gamma_total; }
  double gamma_left() const noexcept { return 0.5 * beta * gamma_total; }
  double lifetime() const noexcept { return 1.0 / gamma_total; }

  void validate() const;
};

enum class PulseShape { gaussian, cw };

/// Analytic description of the coherent input.
///
/// For gaussian pulses mean_photons is |alpha|^2 per pulse; for cw it is the
/// number of photons per emitter lifetime, so the flux is mean_photons * gamma_total.
struct PulseSpec {
  PulseShape shape = PulseShape::gaussian;
  double sigma = 0.34;        // standard deviation of |xi(t)|^2, ns
  double center = 0.0;        // arrival time t0, ns
  double mean_photons = 0.01;
  double detuning = 0.0;      // carrier detuning from the frame reference, rad/ns

  static PulseSpec gaussian(double sigma, double center, double mean_photons,
                            double detuning = 0.0);
  static PulseSpec cw(double photons_per_lifetime, double detuning = 0.0);

  void validate() const;

  /// Normalized envelope xi(t), integral of |xi|^2 equal to one.
  double envelope(double t) const;
  /// Input amplitude a_in(t) = alpha * xi(t) * exp(-i detuning t); units ns^-1/2.
  complex amplitude(double t, double gamma_total) const;
  /// Fraction of the pulse norm inside [t_lo, t_hi] (1 for cw).
  double contained_norm(double t_lo, double t_hi) const;
};

/// Uniform integration grid. Node i sits at t_start + i * step().
class TimeGrid {
 public:
  TimeGrid(double t_start, double t_end, double dt);

  double t_start() const noexcept { return t_start_; }
  double t_end() const noexcept { return t_end_; }
  double step() const noexcept { return step_; }
  std::size_t steps() const noexcept { return steps_; }
  std::size_t size() const noexcept { return steps_ + 1; }
  double time(std::size_t i) const noexcept { return t_start_ + static_cast<double>(i) * step_; }

  /// Nearest node to t. Throws ErrorKind::range outside [t_start, t_end].
  std::size_t index_of(double t) const;

 private:
  double t_start_;
  double t_end_;
  double step_;
  std::size_t steps_;
};

/// Sampled coherent input. Samples are stored at half-step resolution
/// (2 * steps + 1 values) so the fourth-order integrator never interpolates.
class DriveField {
 public:
  DriveField(TimeGrid grid, std::vector<complex> half_step_samples);

  static DriveField from_function(const TimeGrid& grid,
                                  const std::function<complex(double)>& a_in);
  static DriveField zero(const TimeGrid& grid);

  const TimeGrid& grid() const noexcept { return grid_; }
  /// a_in at node i.
  complex at_node(std::size_t i) const noexcept { return samples_[2 * i]; }
  /// a_in at t_start + k * step / 2.
  complex at_half(std::size_t k) const noexcept { return samples_[k]; }
  std::span<const complex> half_step_samples() const noexcept { return samples_; }
  std::vector<complex> node_samples() const;

  /// Photon number carried by the input, integral of |a_in|^2 (Simpson rule).
  double photon_number() const;
  double max_abs() const;

 private:
  TimeGrid grid_;
  std::vector<complex> samples_;
};

DriveField build_drive(const PulseSpec& spec, const TimeGrid& grid, double gamma_total);

/// Density matrix over {|g>, |e>} (index 0 = ground, 1 = excited).
struct SystemState {
  Eigen::Matrix2cd rho = Eigen::Matrix2cd::Zero();

  static SystemState ground();
  static SystemState excited();

  double excited_population() const noexcept { return rho(1, 1).real(); }
  double trace() const noexcept { return (rho(0, 0) + rho(1, 1)).real(); }
  double min_eigenvalue() const;
  /// Checks hermiticity (1e-12), trace (1e-9) and positivity (-1e-9).
  void validate() const;
};

/// Default integrator step: min(sigma/50, 1/(20 gamma_total)), further bounded by
/// the detunings and peak Rabi rate of the drive.
double default_step(const EmitterParams& params, const PulseSpec& pulse);

}  // namespace wqed
