#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "wqed/calibration.hpp"
#include "wqed/dynamics.hpp"
#include "wqed/errors.hpp"
#include "wqed/parallel.hpp"

namespace wqed {

double flux_for_n_tau(const EmitterParams& params, double n_tau) {
  params.validate();
  require(params.beta > 0.0, ErrorKind::config, "flux conversion needs beta > 0");
  // n_tau = S n_c with S = 4 gamma_R |a|^2 / (gamma gamma2) and n_c = gamma2^2 / (beta gamma)^2.
  return n_tau * params.beta * params.gamma_total * params.gamma_total / (2.0 * params.gamma2());
}

namespace {

double probe_transmission(const EmitterParams& params, double a_c, double delta_c, double a_p,
                          double delta_p, const TwoColorOptions& options) {
  const double tau = params.lifetime();
  const bool control_on = a_c > 0.0;
  const double beat = std::abs(delta_p - delta_c);

  double period = options.min_window_lifetimes * tau;
  if (control_on) {
    const double max_period = options.max_window_lifetimes * tau;
    if (!(beat * max_period > 2.0 * std::numbers::pi)) {
      std::ostringstream os;
      os << "probe and control detunings too close (beat period above " << max_period
         << " ns): the probe component cannot be separated";
      fail(ErrorKind::integration, os.str());
    }
    const double t_beat = 2.0 * std::numbers::pi / beat;
    period = t_beat * std::max(1.0, std::ceil(options.min_window_lifetimes * tau / t_beat));
  }

  const double rabi = 2.0 * std::sqrt(params.gamma_right()) * (a_c + a_p);
  const double fastest = std::max({std::abs(delta_c), std::abs(delta_p), std::abs(params.delta_e),
                                   rabi, 1e-12});
  double h_max = std::min(1.0 / (20.0 * params.gamma_total), 0.1 / fastest);
  if (control_on) {
    const double t_beat = 2.0 * std::numbers::pi / beat;
    if (options.integration_step > 0.0) {
      if (t_beat < 8.0 * options.integration_step)
        fail(ErrorKind::integration, "beat period is not resolved by the integration step");
      h_max = options.integration_step;
    } else {
      h_max = std::min(h_max, t_beat / 40.0);
    }
  } else if (options.integration_step > 0.0) {
    h_max = options.integration_step;
  }

  const auto window_steps = static_cast<std::size_t>(std::ceil(period / h_max));
  const double h = period / static_cast<double>(window_steps);
  const auto settle_steps = static_cast<std::size_t>(std::ceil(options.settle_lifetimes * tau / h));
  const double t_settle = static_cast<double>(settle_steps) * h;
  const TimeGrid grid(0.0, t_settle + period, h);

  const DriveField drive = DriveField::from_function(grid, [&](double t) {
    return a_c * std::exp(complex(0.0, -delta_c * t)) + a_p * std::exp(complex(0.0, -delta_p * t));
  });
  const Trajectory traj = propagate(params, drive, SystemState::ground());

  // Trapezoid over whole periods is exact for the periodic steady state.
  const double g = std::sqrt(params.gamma_right());
  complex acc = 0.0;
  for (std::size_t i = settle_steps; i <= settle_steps + window_steps; ++i) {
    const double t = grid.time(i);
    const complex field = drive.at_node(i) + g * traj.states[i].rho(1, 0);
    const double w = (i == settle_steps || i == settle_steps + window_steps) ? 0.5 : 1.0;
    acc += w * field * std::exp(complex(0.0, delta_p * t));
  }
  const complex component = acc * h / period;
  return std::norm(component / a_p);
}

}  // namespace

TwoColorSpectrum simulate_two_color(const EmitterParams& params, const TwoColorControl& control,
                                    const TwoColorProbe& probe, const TwoColorOptions& options) {
  params.validate();
  require(control.n_tau >= 0.0 && std::isfinite(control.n_tau), ErrorKind::config,
          "control n_tau must be >= 0");
  require(probe.n_tau > 0.0 && std::isfinite(probe.n_tau), ErrorKind::config,
          "probe n_tau must be > 0");
  require(!probe.detunings.empty(), ErrorKind::config, "probe sweep is empty");
  const double a_c = std::sqrt(flux_for_n_tau(params, control.n_tau));
  const double a_p = std::sqrt(flux_for_n_tau(params, probe.n_tau));
  if (a_c > 0.0)
    require(a_p <= 0.1 * a_c, ErrorKind::config,
            "probe amplitude must be <= 0.1 of the control amplitude");

  TwoColorSpectrum out;
  out.detunings = probe.detunings;
  out.transmission.assign(probe.detunings.size(), 0.0);
  parallel_for(probe.detunings.size(), options.threads, [&](std::size_t i) {
    out.transmission[i] =
        probe_transmission(params, a_c, control.detuning, a_p, probe.detunings[i], options);
  });
  return out;
}

}  // namespace wqed
