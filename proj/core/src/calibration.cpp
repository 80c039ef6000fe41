#include "wqed/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "wqed/errors.hpp"
#include "wqed/least_squares.hpp"
#include "wqed/rng.hpp"

namespace wqed {

void CalibrationParams::validate() const {
  require(std::isfinite(beta) && beta > 0.0 && beta <= 1.0, ErrorKind::config,
          "calibration beta must be in (0, 1]");
  require(std::isfinite(gamma_deph) && gamma_deph >= 0.0, ErrorKind::config,
          "calibration gamma_deph must be >= 0");
  require(std::isfinite(alpha_cal) && alpha_cal > 0.0, ErrorKind::config,
          "calibration alpha_cal must be > 0");
  require(std::isfinite(a_scale) && a_scale > 0.0, ErrorKind::config,
          "calibration a_scale must be > 0");
  require(std::isfinite(background), ErrorKind::config, "calibration background must be finite");
}

EmitterParams CalibrationParams::emitter(double gamma_total) const {
  EmitterParams e;
  e.gamma_total = gamma_total;
  e.beta = beta;
  e.gamma_deph = gamma_deph;
  return e;
}

std::string_view to_string(ScanRole role) noexcept {
  return role == ScanRole::reflection_fluorescence ? "reflection_fluorescence"
                                                   : "probe_transmission";
}

ScanRole parse_scan_role(std::string_view text) {
  if (text == "reflection_fluorescence" || text == "reflection") return ScanRole::reflection_fluorescence;
  if (text == "probe_transmission" || text == "transmission") return ScanRole::probe_transmission;
  fail(ErrorKind::config, "unknown scan role '" + std::string(text) + "'");
}

void SpectrumScan::validate() const {
  require(std::isfinite(power) && power >= 0.0, ErrorKind::config, "scan power must be >= 0");
  require(detunings.size() == intensities.size(), ErrorKind::config,
          "scan detunings and intensities differ in length");
  require(detunings.size() >= 5, ErrorKind::config, "a scan needs at least 5 points");
  for (std::size_t i = 0; i < detunings.size(); ++i) {
    require(std::isfinite(detunings[i]), ErrorKind::config, "non-finite scan detuning");
    require(std::isfinite(intensities[i]) && intensities[i] >= 0.0, ErrorKind::config,
            "scan counts must be finite and >= 0");
  }
}

double FluxConstants::saturation(double power) const noexcept {
  return 8.0 * rabi_squared(power) / (gamma_total * (2.0 * gamma_deph + gamma_total));
}

double FluxConstants::power_for_n_tau(double n_tau) const noexcept {
  return n_tau / n_c * gamma_total * (2.0 * gamma_deph + gamma_total) / (8.0 * alpha_cal);
}

FluxConstants flux_constants(const CalibrationParams& cal, double gamma_total) {
  require(cal.beta != 0.0, ErrorKind::config, "n_c is undefined for beta = 0 (no waveguide coupling)");
  require(gamma_total > 0.0, ErrorKind::config, "gamma_total must be > 0");
  FluxConstants f;
  f.gamma_total = gamma_total;
  f.gamma_deph = cal.gamma_deph;
  f.alpha_cal = cal.alpha_cal;
  const double b = 1.0 + 2.0 * cal.gamma_deph / gamma_total;
  f.n_c = b * b / (4.0 * cal.beta * cal.beta);
  return f;
}

double excited_population(double detuning, double saturation, double gamma2) {
  const double x = detuning / gamma2;
  return 0.5 * saturation / (1.0 + saturation + x * x);
}

namespace {

double saturation_of(double alpha, double power, double gamma_total, double gamma_deph) {
  return 8.0 * alpha * power / (gamma_total * (2.0 * gamma_deph + gamma_total));
}

double transmission_ratio(double beta, double gamma_deph, double alpha, double gamma_total,
                          double detuning, double power) {
  const double g2 = 0.5 * gamma_total + gamma_deph;
  const double s = saturation_of(alpha, power, gamma_total, gamma_deph);
  const double x2 = (detuning / g2) * (detuning / g2);
  const double rho = 0.5 * s / (1.0 + s + x2);
  // rho / Omega^2 stays finite as the power goes to zero.
  const double rho_over_rabi2 = 2.0 / (gamma_total * g2 * (1.0 + s + x2));
  const double gr = 0.5 * beta * gamma_total;
  return 1.0 - beta * gamma_total * g2 * (1.0 - 2.0 * rho) / (g2 * g2 + detuning * detuning) +
         gr * gr * rho_over_rabi2;
}

}  // namespace

double saturation_model(const CalibrationParams& cal, double gamma_total, double detuning,
                        double power) {
  const double g2 = 0.5 * gamma_total + cal.gamma_deph;
  const double s = saturation_of(cal.alpha_cal, power, gamma_total, cal.gamma_deph);
  return cal.background + cal.a_scale * 0.5 * cal.beta * gamma_total * excited_population(detuning, s, g2);
}

double transmission_model(const CalibrationParams& cal, double gamma_total, double detuning,
                          double power) {
  return transmission_ratio(cal.beta, cal.gamma_deph, cal.alpha_cal, gamma_total, detuning, power);
}

double resonance_comparator(double a_scale, double beta, double gamma_total,
                                    double saturation) {
  return a_scale * beta * beta * gamma_total * gamma_total / (8.0 * saturation);
}

namespace {

// Half-maximum width of a peak (sign = +1) or dip (sign = -1) relative to `base`.
double half_width_estimate(const std::vector<double>& x, const std::vector<double>& y,
                           std::size_t extremum, double base, double sign) {
  const double half = base + 0.5 * (y[extremum] - base);
  auto beyond = [&](std::size_t i) { return sign * (y[i] - half) < 0.0; };
  std::size_t lo = extremum;
  while (lo > 0 && !beyond(lo)) --lo;
  std::size_t hi = extremum;
  while (hi + 1 < y.size() && !beyond(hi)) ++hi;
  double w = x[hi] - x[lo];
  if (!(w > 0.0)) w = (x.back() - x.front()) / 4.0;
  return w;
}

struct SortedScan {
  std::vector<double> x;
  std::vector<double> y;
};

SortedScan sorted(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  SortedScan s;
  for (std::size_t i : order) {
    s.x.push_back(x[i]);
    s.y.push_back(y[i]);
  }
  return s;
}

}  // namespace

SaturationFit fit_saturation(const std::vector<SpectrumScan>& scans, double gamma_total,
                             const SaturationFitOptions& options) {
  require(gamma_total > 0.0, ErrorKind::config, "gamma_total must be > 0");
  require(!scans.empty(), ErrorKind::config, "fit_saturation needs scans");
  std::set<double> powers;
  bool have_reflection = false;
  bool have_transmission = false;
  for (const SpectrumScan& s : scans) {
    s.validate();
    powers.insert(s.power);
    (s.role == ScanRole::reflection_fluorescence ? have_reflection : have_transmission) = true;
  }
  require(powers.size() >= 3, ErrorKind::identifiability,
          "saturation fit needs scans at >= 3 distinct powers");
  require(have_reflection, ErrorKind::identifiability,
          "saturation fit needs reflection fluorescence scans");
  if (options.fixed_beta) {
    require(*options.fixed_beta > 0.0 && *options.fixed_beta <= 1.0, ErrorKind::config,
            "fixed beta must be in (0, 1]");
  } else {
    require(have_transmission, ErrorKind::identifiability,
            "beta is not identifiable from reflection scans alone (only a_scale * beta enters); "
            "fix beta or add probe_transmission scans");
  }

  // Starting point from the data unless supplied.
  CalibrationParams init;
  double t_scale0 = 1.0;
  if (options.initial) {
    init = *options.initial;
  } else {
    const SpectrumScan* low = nullptr;
    const SpectrumScan* high = nullptr;
    double bg = INFINITY;
    for (const SpectrumScan& s : scans) {
      if (s.role != ScanRole::reflection_fluorescence) continue;
      if (!low || s.power < low->power) low = &s;
      if (!high || s.power > high->power) high = &s;
      bg = std::min(bg, *std::min_element(s.intensities.begin(), s.intensities.end()));
    }
    auto width_of = [&](const SpectrumScan& s) {
      const SortedScan ss = sorted(s.detunings, s.intensities);
      const auto peak = static_cast<std::size_t>(
          std::max_element(ss.y.begin(), ss.y.end()) - ss.y.begin());
      return half_width_estimate(ss.x, ss.y, peak, bg, 1.0);
    };
    const double g2_low = std::max(0.5 * gamma_total, 0.5 * width_of(*low));
    init.gamma_deph = std::max(0.05 * gamma_total, g2_low - 0.5 * gamma_total);
    const double g2 = 0.5 * gamma_total + init.gamma_deph;
    const double ratio = 0.5 * width_of(*high) / g2;
    const double s_high = std::clamp(ratio * ratio - 1.0, 0.3, 100.0);
    init.alpha_cal = s_high * gamma_total * g2 / (4.0 * high->power);
    init.beta = options.fixed_beta.value_or(0.8);
    init.background = bg;
    const double peak = *std::max_element(high->intensities.begin(), high->intensities.end());
    init.a_scale = std::max(peak - bg, 1e-12) /
                   (0.5 * init.beta * gamma_total * 0.5 * s_high / (1.0 + s_high));
  }
  if (have_transmission) {
    double top = 0.0;
    for (const SpectrumScan& s : scans)
      if (s.role == ScanRole::probe_transmission)
        top = std::max(top, *std::max_element(s.intensities.begin(), s.intensities.end()));
    t_scale0 = top > 0.0 ? top : 1.0;
  }

  const bool fit_beta = !options.fixed_beta.has_value();
  std::vector<std::string> names;
  if (fit_beta) names.push_back("beta");
  names.insert(names.end(), {"gamma_deph", "alpha_cal", "a_scale", "background"});
  if (have_transmission) names.push_back("transmission_scale");

  Eigen::VectorXd x0(static_cast<Eigen::Index>(names.size()));
  {
    Eigen::Index k = 0;
    if (fit_beta) x0(k++) = init.beta;
    x0(k++) = init.gamma_deph;
    x0(k++) = init.alpha_cal;
    x0(k++) = init.a_scale;
    x0(k++) = init.background;
    if (have_transmission) x0(k++) = t_scale0;
  }

  auto unpack = [&](const Eigen::VectorXd& x, CalibrationParams& c, double& t_scale) {
    Eigen::Index k = 0;
    c.beta = fit_beta ? x(k++) : *options.fixed_beta;
    c.gamma_deph = x(k++);
    c.alpha_cal = x(k++);
    c.a_scale = x(k++);
    c.background = x(k++);
    t_scale = have_transmission ? x(k++) : 0.0;
  };

  std::size_t n_res = 0;
  std::vector<double> scan_norm;
  for (const SpectrumScan& s : scans) {
    n_res += s.detunings.size();
    const double m = *std::max_element(s.intensities.begin(), s.intensities.end());
    scan_norm.push_back(m > 0.0 ? m : 1.0);
  }

  const ResidualFn residuals = [&](const Eigen::VectorXd& x) {
    CalibrationParams c;
    double t_scale = 0.0;
    unpack(x, c, t_scale);
    Eigen::VectorXd r(static_cast<Eigen::Index>(n_res));
    // Outside the physical domain the model is undefined; NaN makes the step rejected.
    if (!(c.beta > 0.0 && c.gamma_deph > -0.5 * gamma_total && c.alpha_cal > 0.0)) {
      r.setConstant(std::nan(""));
      return r;
    }
    Eigen::Index k = 0;
    for (std::size_t si = 0; si < scans.size(); ++si) {
      const SpectrumScan& s = scans[si];
      for (std::size_t i = 0; i < s.detunings.size(); ++i) {
        const double model =
            s.role == ScanRole::reflection_fluorescence
                ? saturation_model(c, gamma_total, s.detunings[i], s.power)
                : t_scale * transmission_ratio(c.beta, c.gamma_deph, c.alpha_cal, gamma_total,
                                               s.detunings[i], s.power);
        r(k++) = (s.intensities[i] - model) / scan_norm[si];
      }
    }
    return r;
  };

  const LeastSquaresResult ls = levenberg_marquardt(residuals, x0, {}, "saturation fit");

  SaturationFit out;
  out.gamma_total = gamma_total;
  out.beta_fixed = !fit_beta;
  out.parameter_names = names;
  out.covariance = ls.covariance;
  out.iterations = ls.iterations;
  out.residual_rms = ls.residual_rms();
  unpack(ls.params, out.params, out.transmission_scale);
  const Eigen::VectorXd err = ls.errors();
  double t_err = 0.0;
  unpack(err, out.errors, t_err);
  if (!fit_beta) out.errors.beta = 0.0;
  out.transmission_scale_err = t_err;
  require(out.params.alpha_cal > 0.0 && out.params.a_scale > 0.0 && out.params.beta > 0.0,
          ErrorKind::fit_failure, "saturation fit converged to an unphysical point");
  out.flux = flux_constants(out.params, gamma_total);
  return out;
}

double LorentzianFit::operator()(double x) const noexcept {
  const double u = (x - center) / width;
  return offset + amplitude / (1.0 + 4.0 * u * u);
}

LorentzianFit fit_lorentzian(const std::vector<double>& x_in, const std::vector<double>& y_in) {
  require(x_in.size() == y_in.size(), ErrorKind::config, "lorentzian fit: length mismatch");
  require(x_in.size() >= 5, ErrorKind::config, "lorentzian fit needs at least 5 points");
  const SortedScan s = sorted(x_in, y_in);
  const std::size_t n = s.x.size();
  const double span = s.x.back() - s.x.front();
  require(span > 0.0, ErrorKind::identifiability, "lorentzian fit: all abscissae equal");

  // Baseline from the outer quarter of the scan on each side.
  const std::size_t edge = std::max<std::size_t>(1, n / 8);
  double base = 0.0;
  for (std::size_t i = 0; i < edge; ++i) base += s.y[i] + s.y[n - 1 - i];
  base /= static_cast<double>(2 * edge);
  const auto hi = static_cast<std::size_t>(std::max_element(s.y.begin(), s.y.end()) - s.y.begin());
  const auto lo = static_cast<std::size_t>(std::min_element(s.y.begin(), s.y.end()) - s.y.begin());
  const bool peak = s.y[hi] - base >= base - s.y[lo];
  const std::size_t ext = peak ? hi : lo;
  const double sign = peak ? 1.0 : -1.0;

  Eigen::VectorXd x0(4);
  x0 << s.x[ext], half_width_estimate(s.x, s.y, ext, base, sign), s.y[ext] - base, base;

  const ResidualFn residuals = [&](const Eigen::VectorXd& p) {
    Eigen::VectorXd r(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const double u = (s.x[i] - p(0)) / p(1);
      r(static_cast<Eigen::Index>(i)) = s.y[i] - (p(3) + p(2) / (1.0 + 4.0 * u * u));
    }
    return r;
  };
  LeastSquaresOptions opt;
  opt.cost_tolerance = 1e-14;
  const LeastSquaresResult ls = levenberg_marquardt(residuals, x0, opt, "lorentzian fit");

  LorentzianFit f;
  f.center = ls.params(0);
  f.width = std::abs(ls.params(1));
  f.amplitude = ls.params(2);
  f.offset = ls.params(3);
  const Eigen::VectorXd e = ls.errors();
  f.center_err = e(0);
  f.width_err = e(1);
  f.amplitude_err = e(2);
  f.offset_err = e(3);
  f.residual_rms = ls.residual_rms();
  f.width_exceeds_range = !(f.width < span) || f.center < s.x.front() || f.center > s.x.back();
  return f;
}

LorentzianFit fit_lorentzian(const SpectrumScan& scan) {
  scan.validate();
  return fit_lorentzian(scan.detunings, scan.intensities);
}

double DriftModel::operator()(double power) const noexcept {
  return coefficients(0) + power * (coefficients(1) + power * coefficients(2));
}

DriftModel fit_drift(const std::vector<double>& powers, const std::vector<double>& centers) {
  require(powers.size() == centers.size(), ErrorKind::config, "drift fit: length mismatch");
  const std::set<double> distinct(powers.begin(), powers.end());
  require(distinct.size() >= 4, ErrorKind::identifiability,
          "drift fit needs at least 4 distinct powers");
  const auto m = static_cast<Eigen::Index>(powers.size());
  Eigen::MatrixXd a(m, 3);
  Eigen::VectorXd b(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double p = powers[static_cast<std::size_t>(i)];
    a.row(i) << 1.0, p, p * p;
    b(i) = centers[static_cast<std::size_t>(i)];
  }
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  require(qr.rank() == 3, ErrorKind::identifiability, "drift fit design is rank deficient");
  DriftModel d;
  d.coefficients = qr.solve(b);
  const Eigen::VectorXd r = b - a * d.coefficients;
  d.residual_rms = std::sqrt(r.squaredNorm() / static_cast<double>(m));
  const double s2 = m > 3 ? r.squaredNorm() / static_cast<double>(m - 3) : 0.0;
  d.covariance = s2 * (a.transpose() * a).inverse();
  return d;
}

std::optional<double> solve_crossing(const Eigen::Vector3d& poly, double target, double n_max) {
  const double c0 = poly(0) - target;
  const double c1 = poly(1);
  const double c2 = poly(2);
  std::vector<double> roots;
  if (std::abs(c2) < 1e-14 * (std::abs(c1) + std::abs(c0) + 1e-300)) {
    if (c1 != 0.0) roots.push_back(-c0 / c1);
  } else {
    const double disc = c1 * c1 - 4.0 * c2 * c0;
    if (disc >= 0.0) {
      // Numerically stable pair.
      const double q = -0.5 * (c1 + std::copysign(std::sqrt(disc), c1));
      roots.push_back(q / c2);
      if (q != 0.0) roots.push_back(c0 / q);
    }
  }
  std::optional<double> best;
  for (double r : roots)
    if (std::isfinite(r) && r >= 0.0 && r <= n_max && (!best || r < *best)) best = r;
  return best;
}

namespace {

struct ShiftPoints {
  std::vector<double> n_tau;
  std::vector<double> shift;
  std::vector<double> shift_err;
};

ShiftPoints shift_points(const std::vector<SpectrumScan>& scans, const FluxConstants& flux,
                         const DriftModel& drift) {
  ShiftPoints pts;
  for (const SpectrumScan& s : scans) {
    const LorentzianFit f = fit_lorentzian(s.detunings, s.intensities);
    if (f.width_exceeds_range) {
      std::ostringstream os;
      os << "probe scan at " << s.power << " uW has no resolvable resonance";
      fail(ErrorKind::fit_failure, os.str());
    }
    pts.n_tau.push_back(flux.n_tau(s.power));
    pts.shift.push_back((f.center - drift(s.power)) / flux.gamma_total);
    pts.shift_err.push_back(f.center_err / flux.gamma_total);
  }
  return pts;
}

Eigen::Vector3d fit_poly2(const std::vector<double>& n, const std::vector<double>& y) {
  const auto m = static_cast<Eigen::Index>(n.size());
  Eigen::MatrixXd a(m, 3);
  Eigen::VectorXd b(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double v = n[static_cast<std::size_t>(i)];
    a.row(i) << 1.0, v, v * v;
    b(i) = y[static_cast<std::size_t>(i)];
  }
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  require(qr.rank() == 3, ErrorKind::identifiability,
          "shift curve needs at least 3 distinct control powers");
  return qr.solve(b);
}

}  // namespace

ShiftCurve extract_shift(const std::vector<SpectrumScan>& probe_scans, const FluxConstants& flux,
                         const DriftModel& drift, double control_detuning,
                         const ShiftOptions& options) {
  require(probe_scans.size() >= 3, ErrorKind::identifiability,
          "shift extraction needs probe scans at >= 3 control powers");
  require(flux.n_c > 0.0 && flux.alpha_cal > 0.0, ErrorKind::config,
          "shift extraction needs a saturation calibration (n_c, alpha_cal)");
  require(options.resamples == 0 || options.resamples >= 2, ErrorKind::config,
          "shift Monte Carlo needs 0 or >= 2 resamples");
  require(options.interval > 0.0 && options.interval < 1.0, ErrorKind::config,
          "shift interval must be in (0, 1)");
  for (const SpectrumScan& s : probe_scans) s.validate();

  ShiftCurve c;
  c.control_detuning = control_detuning;
  c.gamma_total = flux.gamma_total;
  for (const SpectrumScan& s : probe_scans) c.powers.push_back(s.power);
  const ShiftPoints pts = shift_points(probe_scans, flux, drift);
  c.n_tau = pts.n_tau;
  c.shift_over_gamma = pts.shift;
  c.shift_err = pts.shift_err;
  c.poly2 = fit_poly2(pts.n_tau, pts.shift);
  const double n_max = 2.0 * *std::max_element(pts.n_tau.begin(), pts.n_tau.end());
  const std::optional<double> crossing = solve_crossing(c.poly2, -1.0, n_max);
  if (!crossing) {
    std::ostringstream os;
    os << "fitted shift never reaches -1 linewidth within n_tau in [0, " << n_max << "]";
    fail(ErrorKind::extrapolation, os.str());
  }
  c.n_tau_full_linewidth = *crossing;
  c.interval_low = c.interval_high = *crossing;
  if (options.resamples == 0) return c;

  // Drift coefficients are drawn from their fitted covariance.
  const Eigen::LLT<Eigen::Matrix3d> llt(drift.covariance + 1e-300 * Eigen::Matrix3d::Identity());
  const bool drift_ok = options.resample_drift && llt.info() == Eigen::Success &&
                        drift.covariance.allFinite() && drift.covariance.trace() > 0.0;
  std::vector<double> draws;
  draws.reserve(static_cast<std::size_t>(options.resamples));
  for (int i = 0; i < options.resamples; ++i) {
    Rng rng = make_rng(options.seed, "extract_shift", static_cast<std::uint64_t>(i));
    std::vector<SpectrumScan> scans = probe_scans;
    if (options.resample_counts)
      for (SpectrumScan& s : scans)
        for (double& y : s.intensities)
          y = y > 0.0 ? static_cast<double>(std::poisson_distribution<long long>(y)(rng)) : 0.0;
    DriftModel d = drift;
    if (drift_ok) {
      std::normal_distribution<double> normal;
      const Eigen::Vector3d z(normal(rng), normal(rng), normal(rng));
      d.coefficients += llt.matrixL() * z;
    }
    try {
      const ShiftPoints p = shift_points(scans, flux, d);
      const std::optional<double> r = solve_crossing(fit_poly2(p.n_tau, p.shift), -1.0, n_max);
      if (r) {
        draws.push_back(*r);
        continue;
      }
    } catch (const Error&) {
    }
    ++c.resamples_failed;
  }
  c.resamples_used = static_cast<int>(draws.size());
  require(draws.size() >= 2, ErrorKind::extrapolation,
          "too few Monte Carlo resamples reached a full-linewidth shift");
  const double mean = std::accumulate(draws.begin(), draws.end(), 0.0) / static_cast<double>(draws.size());
  double var = 0.0;
  for (double v : draws) var += (v - mean) * (v - mean);
  c.n_tau_full_linewidth_err = std::sqrt(var / static_cast<double>(draws.size() - 1));
  std::sort(draws.begin(), draws.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(draws.size() - 1);
    const auto k = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(k);
    return k + 1 < draws.size() ? draws[k] * (1.0 - frac) + draws[k + 1] * frac : draws[k];
  };
  c.interval_low = quantile(0.5 * (1.0 - options.interval));
  c.interval_high = quantile(0.5 * (1.0 + options.interval));
  return c;
}

nlohmann::json to_json(const CalibrationParams& p) {
  return {{"beta", p.beta},
          {"gamma_deph_per_ns", p.gamma_deph},
          {"alpha_cal_per_ns2_per_uW", p.alpha_cal},
          {"a_scale", p.a_scale},
          {"background", p.background}};
}

CalibrationParams calibration_from_json(const nlohmann::json& j) {
  CalibrationParams p;
  try {
    p.beta = j.at("beta").get<double>();
    p.gamma_deph = j.at("gamma_deph_per_ns").get<double>();
    p.alpha_cal = j.at("alpha_cal_per_ns2_per_uW").get<double>();
    p.a_scale = j.value("a_scale", 1.0);
    p.background = j.value("background", 0.0);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::config, std::string("calibration parameters: ") + e.what());
  }
  p.validate();
  return p;
}

nlohmann::json to_json(const SaturationFit& fit) {
  nlohmann::json j;
  j["params"] = to_json(fit.params);
  j["errors"] = to_json(fit.errors);
  j["beta_fixed"] = fit.beta_fixed;
  if (fit.transmission_scale > 0.0) {
    j["transmission_scale"] = fit.transmission_scale;
    j["transmission_scale_err"] = fit.transmission_scale_err;
  }
  j["parameter_names"] = fit.parameter_names;
  std::vector<std::vector<double>> cov;
  for (Eigen::Index r = 0; r < fit.covariance.rows(); ++r) {
    cov.emplace_back();
    for (Eigen::Index c = 0; c < fit.covariance.cols(); ++c) cov.back().push_back(fit.covariance(r, c));
  }
  j["covariance"] = cov;
  j["gamma_total_per_ns"] = fit.gamma_total;
  j["iterations"] = fit.iterations;
  j["residual_rms"] = fit.residual_rms;
  j["n_c"] = fit.flux.n_c;
  return j;
}

nlohmann::json to_json(const LorentzianFit& f) {
  return {{"center", f.center},          {"center_err", f.center_err},
          {"width", f.width},            {"width_err", f.width_err},
          {"amplitude", f.amplitude},    {"amplitude_err", f.amplitude_err},
          {"offset", f.offset},          {"offset_err", f.offset_err},
          {"residual_rms", f.residual_rms}, {"width_exceeds_range", f.width_exceeds_range}};
}

nlohmann::json to_json(const DriftModel& d) {
  return {{"c0", d.coefficients(0)},
          {"c1", d.coefficients(1)},
          {"c2", d.coefficients(2)},
          {"errors",
           {std::sqrt(std::max(0.0, d.covariance(0, 0))), std::sqrt(std::max(0.0, d.covariance(1, 1))),
            std::sqrt(std::max(0.0, d.covariance(2, 2)))}},
          {"residual_rms", d.residual_rms}};
}

nlohmann::json to_json(const ShiftCurve& c) {
  return {{"control_detuning_rad_per_ns", c.control_detuning},
          {"gamma_total_per_ns", c.gamma_total},
          {"power_uW", c.powers},
          {"n_tau", c.n_tau},
          {"shift_over_gamma", c.shift_over_gamma},
          {"shift_err", c.shift_err},
          {"poly2", {c.poly2(0), c.poly2(1), c.poly2(2)}},
          {"n_tau_full_linewidth", c.n_tau_full_linewidth},
          {"n_tau_full_linewidth_err", c.n_tau_full_linewidth_err},
          {"interval", {c.interval_low, c.interval_high}},
          {"resamples_used", c.resamples_used},
          {"resamples_failed", c.resamples_failed}};
}

}  // namespace wqed
