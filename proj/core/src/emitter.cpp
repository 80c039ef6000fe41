#include "wqed/emitter.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "wqed/errors.hpp"

namespace wqed {

namespace {

std::string describe(const char* what, double value) {
  std::ostringstream os;
  os << what << " (got " << value << ")";
  return os.str();
}

}  // namespace

void EmitterParams::validate() const {
  require(std::isfinite(gamma_total) && gamma_total > 0.0, ErrorKind::config,
          describe("emitter.gamma_total must be > 0", gamma_total));
  require(std::isfinite(beta) && beta >= 0.0 && beta <= 1.0, ErrorKind::config,
          describe("emitter.beta must lie in [0, 1]", beta));
  require(std::isfinite(gamma_deph) && gamma_deph >= 0.0, ErrorKind::config,
          describe("emitter.gamma_deph must be >= 0", gamma_deph));
  require(std::isfinite(delta_e), ErrorKind::config, "emitter.delta_e must be finite");
  require(gamma2() > 0.0, ErrorKind::config, "coherence decay rate must be > 0");
}

PulseSpec PulseSpec::gaussian(double sigma, double center, double mean_photons, double detuning) {
  PulseSpec p;
  p.shape = PulseShape::gaussian;
  p.sigma = sigma;
  p.center = center;
  p.mean_photons = mean_photons;
  p.detuning = detuning;
  return p;
}

PulseSpec PulseSpec::cw(double photons_per_lifetime, double detuning) {
  PulseSpec p;
  p.shape = PulseShape::cw;
  p.sigma = 0.0;
  p.center = 0.0;
  p.mean_photons = photons_per_lifetime;
  p.detuning = detuning;
  return p;
}

void PulseSpec::validate() const {
  if (shape == PulseShape::gaussian) {
    require(std::isfinite(sigma) && sigma > 0.0, ErrorKind::config,
            describe("pulse.sigma must be > 0 for gaussian pulses", sigma));
    require(std::isfinite(center), ErrorKind::config, "pulse.center must be finite");
  }
  require(std::isfinite(mean_photons) && mean_photons >= 0.0, ErrorKind::config,
          describe("pulse.mean_photons must be >= 0", mean_photons));
  require(std::isfinite(detuning), ErrorKind::config, "pulse.detuning must be finite");
}

double PulseSpec::envelope(double t) const {
  if (shape == PulseShape::cw) return 1.0;
  const double x = t - center;
  const double norm = std::pow(2.0 * std::numbers::pi * sigma * sigma, -0.25);
  return norm * std::exp(-x * x / (4.0 * sigma * sigma));
}

complex PulseSpec::amplitude(double t, double gamma_total) const {
  const complex carrier = std::polar(1.0, -detuning * t);
  if (shape == PulseShape::cw) return std::sqrt(mean_photons * gamma_total) * carrier;
  return std::sqrt(mean_photons) * envelope(t) * carrier;
}

double PulseSpec::contained_norm(double t_lo, double t_hi) const {
  if (shape == PulseShape::cw) return 1.0;
  const double s = std::sqrt(2.0) * sigma;
  return 0.5 * (std::erf((t_hi - center) / s) - std::erf((t_lo - center) / s));
}

TimeGrid::TimeGrid(double t_start, double t_end, double dt) : t_start_(t_start), t_end_(t_end) {
  require(std::isfinite(t_start) && std::isfinite(t_end) && t_end > t_start, ErrorKind::config,
          "time grid needs t_end > t_start");
  require(std::isfinite(dt) && dt > 0.0, ErrorKind::config, "time grid needs dt > 0");
  const double n = std::round((t_end - t_start) / dt);
  require(n >= 2.0, ErrorKind::config, "time grid needs at least two steps");
  steps_ = static_cast<std::size_t>(n);
  step_ = (t_end - t_start) / n;
}

std::size_t TimeGrid::index_of(double t) const {
  const double tol = 1e-9 * step_;
  if (!(t >= t_start_ - tol && t <= t_end_ + tol)) {
    std::ostringstream os;
    os << "time " << t << " ns outside grid [" << t_start_ << ", " << t_end_ << "]";
    fail(ErrorKind::range, os.str());
  }
  const double x = std::round((t - t_start_) / step_);
  return std::min(static_cast<std::size_t>(std::max(0.0, x)), steps_);
}

DriveField::DriveField(TimeGrid grid, std::vector<complex> half_step_samples)
    : grid_(grid), samples_(std::move(half_step_samples)) {
  require(samples_.size() == 2 * grid_.steps() + 1, ErrorKind::config,
          "drive sample count must equal 2 * steps + 1");
  for (const complex& a : samples_) {
    require(std::isfinite(a.real()) && std::isfinite(a.imag()), ErrorKind::config,
            "drive samples must be finite");
  }
}

DriveField DriveField::from_function(const TimeGrid& grid,
                                     const std::function<complex(double)>& a_in) {
  std::vector<complex> s(2 * grid.steps() + 1);
  const double h = 0.5 * grid.step();
  for (std::size_t k = 0; k < s.size(); ++k) s[k] = a_in(grid.t_start() + static_cast<double>(k) * h);
  return DriveField(grid, std::move(s));
}

DriveField DriveField::zero(const TimeGrid& grid) {
  return DriveField(grid, std::vector<complex>(2 * grid.steps() + 1, complex{}));
}

std::vector<complex> DriveField::node_samples() const {
  std::vector<complex> out(grid_.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = at_node(i);
  return out;
}

double DriveField::photon_number() const {
  // Composite Simpson over each integration step (node, midpoint, node).
  double sum = 0.0;
  for (std::size_t i = 0; i < grid_.steps(); ++i) {
    sum += std::norm(samples_[2 * i]) + 4.0 * std::norm(samples_[2 * i + 1]) +
           std::norm(samples_[2 * i + 2]);
  }
  return sum * grid_.step() / 6.0;
}

double DriveField::max_abs() const {
  double m = 0.0;
  for (const complex& a : samples_) m = std::max(m, std::abs(a));
  return m;
}

DriveField build_drive(const PulseSpec& spec, const TimeGrid& grid, double gamma_total) {
  spec.validate();
  require(gamma_total > 0.0, ErrorKind::config, "gamma_total must be > 0");
  if (spec.shape == PulseShape::gaussian) {
    const double contained = spec.contained_norm(grid.t_start(), grid.t_end());
    if (contained < 0.999) {
      std::ostringstream os;
      os << "grid [" << grid.t_start() << ", " << grid.t_end() << "] ns holds only " << contained
         << " of the pulse norm (need >= 0.999; span t0 +- 6 sigma)";
      fail(ErrorKind::truncation, os.str());
    }
  }
  return DriveField::from_function(grid, [&](double t) { return spec.amplitude(t, gamma_total); });
}

SystemState SystemState::ground() {
  SystemState s;
  s.rho(0, 0) = 1.0;
  return s;
}

SystemState SystemState::excited() {
  SystemState s;
  s.rho(1, 1) = 1.0;
  return s;
}

double SystemState::min_eigenvalue() const {
  const Eigen::Matrix2cd h = 0.5 * (rho + rho.adjoint());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

void SystemState::validate() const {
  require(rho.allFinite(), ErrorKind::config, "density matrix has non-finite entries");
  require((rho - rho.adjoint()).cwiseAbs().maxCoeff() <= 1e-12, ErrorKind::config,
          "density matrix is not Hermitian");
  require(std::abs(trace() - 1.0) <= 1e-9, ErrorKind::config,
          describe("density matrix trace must be 1", trace()));
  require(min_eigenvalue() >= -1e-9, ErrorKind::config, "density matrix is not positive");
}

double default_step(const EmitterParams& params, const PulseSpec& pulse) {
  double dt = 1.0 / (20.0 * params.gamma_total);
  double peak = 0.0;
  if (pulse.shape == PulseShape::gaussian) {
    dt = std::min(dt, pulse.sigma / 50.0);
    peak = std::sqrt(pulse.mean_photons) * pulse.envelope(pulse.center);
  } else {
    peak = std::sqrt(pulse.mean_photons * params.gamma_total);
  }
  const double rabi = 2.0 * std::sqrt(params.gamma_right()) * peak;
  const double fastest = std::max({std::abs(params.delta_e), std::abs(pulse.detuning), rabi});
  if (fastest > 0.0) dt = std::min(dt, 0.1 / fastest);
  return dt;
}

}  // namespace wqed
