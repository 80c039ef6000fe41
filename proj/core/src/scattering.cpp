#include "wqed/scattering.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "wqed/errors.hpp"
#include "wqed/map_io.hpp"
#include "wqed/parallel.hpp"

namespace wqed {

TransferCoefficients transfer_function(const EmitterParams& params, double detuning) {
  params.validate();
  const complex denom{params.gamma2(), -detuning};
  const complex r = -params.gamma_right() / denom;
  return {1.0 + r, r};
}

MapWindow default_window(const EmitterParams& params, const PulseSpec& pulse) {
  const double half = 4.0 * pulse.sigma + 5.0 * params.lifetime();
  return {pulse.center - half, pulse.center + half};
}

CorrelatorEngine PulseSimulation::make_engine(const EmitterParams& params, const PulseSpec& pulse,
                                              MapWindow window, double map_d_t,
                                              const SimulationOptions& options,
                                              std::size_t& first_node, std::size_t& substeps,
                                              std::size_t& bins) {
  params.validate();
  pulse.validate();
  require(pulse.shape == PulseShape::gaussian, ErrorKind::config,
          "pulsed correlation maps need a gaussian pulse");
  require(pulse.mean_photons <= 0.5, ErrorKind::config,
          "pulse.mean_photons must be <= 0.5 for correlation maps");
  require(std::isfinite(map_d_t) && map_d_t > 0.0, ErrorKind::config, "map d_t must be > 0");
  require(window.t_end > window.t_start, ErrorKind::config, "map window must have t_end > t_start");

  const double contained = pulse.contained_norm(window.t_start, window.t_end);
  if (contained < 0.999) {
    std::ostringstream os;
    os << "map window [" << window.t_start << ", " << window.t_end << "] ns holds only "
       << contained << " of the pulse norm";
    fail(ErrorKind::truncation, os.str());
  }

  const double n_bins = std::round(window.length() / map_d_t);
  require(n_bins >= 2.0, ErrorKind::config, "map window must span at least two bins");
  bins = static_cast<std::size_t>(n_bins);

  const double dt_max = options.integration_step > 0.0 ? options.integration_step
                                                       : default_step(params, pulse);
  substeps = static_cast<std::size_t>(std::max(1.0, std::ceil(map_d_t / dt_max - 1e-9)));
  const double h = map_d_t / static_cast<double>(substeps);

  const double c0 = window.t_start + 0.5 * map_d_t;
  const double c_last = c0 + static_cast<double>(bins - 1) * map_d_t;
  const double lo = std::min(c0, pulse.center - 6.0 * pulse.sigma);
  const double hi = std::max(c_last, pulse.center + 6.0 * pulse.sigma);
  first_node = static_cast<std::size_t>(std::ceil((c0 - lo) / h - 1e-9));
  const std::size_t tail = static_cast<std::size_t>(std::ceil((hi - c_last) / h - 1e-9));
  const std::size_t steps = first_node + (bins - 1) * substeps + tail;
  const double t_start = c0 - static_cast<double>(first_node) * h;
  const TimeGrid grid(t_start, t_start + static_cast<double>(steps) * h, h);
  return CorrelatorEngine(params, build_drive(pulse, grid, params.gamma_total));
}

PulseSimulation::PulseSimulation(const EmitterParams& params, const PulseSpec& pulse,
                                 MapWindow window, double map_d_t, SimulationOptions options)
    : params_(params),
      pulse_(pulse),
      window_(window),
      d_t_(map_d_t),
      options_(options),
      engine_(make_engine(params, pulse, window, map_d_t, options, first_node_, substeps_, bins_)) {
  first_center_ = window.t_start + 0.5 * map_d_t;
  if (pulse.mean_photons > 0.1) {
    warnings_.push_back(
        "mean photon number above 0.1: two-photon components are no longer the leading "
        "contribution to G2");
  }
}

nlohmann::json PulseSimulation::describe(ChannelPair channels) const {
  nlohmann::json meta;
  meta["source"] = "simulation";
  meta["channels"] = channels.label();
  meta["emitter"] = to_json(params_);
  meta["pulse"] = to_json(pulse_);
  meta["pulse_center_ns"] = pulse_.center;
  meta["sigma_over_tau"] = pulse_.sigma * params_.gamma_total;
  meta["window_ns"] = {window_.t_start, window_.t_end};
  meta["integration_step_ns"] = engine_.grid().step();
  if (!warnings_.empty()) meta["warnings"] = warnings_;
  return meta;
}

CorrelationMap PulseSimulation::g2_map(ChannelPair channels) const {
  const std::size_t n = bins_;
  CorrelationMap map;
  map.d_t = d_t_;
  map.t_origin = first_center_;
  map.channels = channels;
  map.kind = MapKind::probability_density;
  map.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  map.meta = describe(channels);
  map.meta["map"] = "g2";

  std::vector<std::size_t> nodes(n);
  for (std::size_t j = 0; j < n; ++j) nodes[j] = node_of_bin(j);

  // Row j: the first-channel photon at t_j, second-channel photon at every later t_l.
  // For cross-channel maps a second sweep fills t_l < t_j with the order reversed.
  parallel_for(n, options_.threads, [&](std::size_t j) {
    const std::span<const std::size_t> later(nodes.data() + j, n - j);
    const auto upper = engine_.g2_sweep(channels.first, channels.second, nodes[j], later);
    for (std::size_t l = j; l < n; ++l) map.values(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(l)) = upper[l - j];
    if (!channels.same()) {
      const auto lower = engine_.g2_sweep(channels.second, channels.first, nodes[j], later);
      for (std::size_t l = j + 1; l < n; ++l)
        map.values(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(j)) = lower[l - j];
    }
  });
  if (channels.same()) {
    map.values.triangularView<Eigen::StrictlyLower>() =
        map.values.transpose().triangularView<Eigen::StrictlyLower>();
  }
  return map;
}

IntensityTrace PulseSimulation::intensity_trace(Channel ch) const {
  IntensityTrace trace;
  trace.channel = ch;
  trace.t_origin = first_center_;
  trace.d_t = d_t_;
  trace.values.resize(bins_);
  for (std::size_t j = 0; j < bins_; ++j) trace.values[j] = engine_.intensity(ch, node_of_bin(j));
  return trace;
}

CorrelationMap PulseSimulation::reference_map(ChannelPair channels) const {
  const IntensityTrace a = intensity_trace(channels.first);
  const IntensityTrace b = intensity_trace(channels.second);
  const auto n = static_cast<Eigen::Index>(bins_);
  const Eigen::Map<const Eigen::VectorXd> va(a.values.data(), n);
  const Eigen::Map<const Eigen::VectorXd> vb(b.values.data(), n);
  CorrelationMap map;
  map.d_t = d_t_;
  map.t_origin = first_center_;
  map.channels = channels;
  map.kind = MapKind::probability_density;
  map.values = va * vb.transpose();
  map.meta = describe(channels);
  map.meta["map"] = "reference";
  return map;
}

CorrelationMap g2_map(const EmitterParams& params, const PulseSpec& pulse, ChannelPair channels,
                      MapWindow window, double map_d_t, SimulationOptions options) {
  return PulseSimulation(params, pulse, window, map_d_t, options).g2_map(channels);
}

CorrelationMap reference_map(const EmitterParams& params, const PulseSpec& pulse,
                             ChannelPair channels, MapWindow window, double map_d_t,
                             SimulationOptions options) {
  return PulseSimulation(params, pulse, window, map_d_t, options).reference_map(channels);
}

namespace {

// Gaussian integrated over each bin, normalized to unit sum.
std::vector<double> jitter_kernel(double fwhm, double d_t) {
  const double sigma = fwhm / (2.0 * std::sqrt(2.0 * std::numbers::ln2));
  const int half = static_cast<int>(std::ceil(6.0 * sigma / d_t)) + 1;
  std::vector<double> k(static_cast<std::size_t>(2 * half + 1));
  const double s = std::sqrt(2.0) * sigma;
  double sum = 0.0;
  for (int i = -half; i <= half; ++i) {
    const double w = 0.5 * (std::erf((i + 0.5) * d_t / s) - std::erf((i - 0.5) * d_t / s));
    k[static_cast<std::size_t>(i + half)] = w;
    sum += w;
  }
  for (double& w : k) w /= sum;
  return k;
}

Eigen::MatrixXd convolve_rows(const Eigen::MatrixXd& m, const std::vector<double>& kernel) {
  // Smooths along the row index (t1 axis).
  const int half = static_cast<int>(kernel.size() / 2);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m.rows(), m.cols());
  for (Eigen::Index j = 0; j < m.rows(); ++j) {
    for (int i = -half; i <= half; ++i) {
      const Eigen::Index src = j - i;
      if (src < 0 || src >= m.rows()) continue;
      out.row(j) += kernel[static_cast<std::size_t>(i + half)] * m.row(src);
    }
  }
  return out;
}

}  // namespace

CorrelationMap apply_jitter(const CorrelationMap& map, double fwhm1, double fwhm2) {
  require(fwhm1 >= 0.0 && fwhm2 >= 0.0, ErrorKind::config, "jitter fwhm must be >= 0");
  map.validate();
  CorrelationMap out = map;
  if (fwhm1 > 0.0) out.values = convolve_rows(out.values, jitter_kernel(fwhm1, map.d_t));
  if (fwhm2 > 0.0)
    out.values = convolve_rows(out.values.transpose(), jitter_kernel(fwhm2, map.d_t)).transpose();
  out.meta["jitter_fwhm_ns"] = {fwhm1, fwhm2};
  return out;
}

namespace {

double band_weight(long offset, int band) {
  const long a = std::labs(offset);
  if (a < band) return 1.0;
  if (a == band) return 0.5;
  return 0.0;
}

double mass_centroid(const CorrelationMap& map) {
  double mass = 0.0;
  double moment = 0.0;
  for (Eigen::Index j = 0; j < map.rows(); ++j)
    for (Eigen::Index l = 0; l < map.cols(); ++l) {
      mass += map.values(j, l);
      moment += map.values(j, l) * 0.5 * (map.time(j) + map.time(l));
    }
  return mass > 0.0 ? moment / mass : 0.5 * (map.time(0) + map.time(map.rows() - 1));
}

}  // namespace

LineCuts linecuts(const CorrelationMap& map, int band_bins, std::optional<double> t_center) {
  map.validate();
  require(band_bins >= 1, ErrorKind::config, "line-cut band must be >= 1 bin");
  require(map.rows() >= band_bins && map.cols() >= band_bins, ErrorKind::config,
          "map must be at least as wide as the line-cut band");

  const long rows = map.rows();
  const long cols = map.cols();
  // Index pair (j, l) <-> sum s = j + l and difference d = j - l with equal parity.
  auto entry = [&](long s, long d, bool& partial) -> double {
    if ((s + d) % 2 != 0) return 0.0;
    const long j = (s + d) / 2;
    const long l = (s - d) / 2;
    if (j < 0 || l < 0 || j >= rows || l >= cols) {
      partial = true;
      return 0.0;
    }
    return map.values(j, l);
  };

  LineCuts cuts;
  {
    LineCut& c = cuts.diagonal;
    c.origin = 2.0 * map.t_origin;
    c.step = map.d_t;
    const long n = rows + cols - 1;
    c.values.assign(static_cast<std::size_t>(n), 0.0);
    c.partial.assign(static_cast<std::size_t>(n), false);
    for (long s = 0; s < n; ++s) {
      bool partial = false;
      double sum = 0.0;
      for (long d = -band_bins; d <= band_bins; ++d) {
        const double w = band_weight(d, band_bins);
        const double v = entry(s, d, partial);
        sum += w * v;
      }
      c.values[static_cast<std::size_t>(s)] = sum;
      c.partial[static_cast<std::size_t>(s)] = partial;
    }
  }

  double center = 0.0;
  if (t_center) {
    center = *t_center;
  } else if (map.meta.contains("pulse_center_ns")) {
    center = map.meta["pulse_center_ns"].get<double>();
  } else {
    center = mass_centroid(map);
  }
  {
    LineCut& c = cuts.antidiagonal;
    const long s_c = std::lround(2.0 * (center - map.t_origin) / map.d_t);
    c.origin = -static_cast<double>(cols - 1) * map.d_t;
    c.step = map.d_t;
    const long n = rows + cols - 1;
    c.values.assign(static_cast<std::size_t>(n), 0.0);
    c.partial.assign(static_cast<std::size_t>(n), false);
    for (long k = 0; k < n; ++k) {
      const long d = k - (cols - 1);
      bool partial = false;
      double sum = 0.0;
      for (long s = s_c - band_bins; s <= s_c + band_bins; ++s) {
        const double w = band_weight(s - s_c, band_bins);
        sum += w * entry(s, d, partial);
      }
      c.values[static_cast<std::size_t>(k)] = sum;
      c.partial[static_cast<std::size_t>(k)] = partial;
    }
  }
  return cuts;
}

}  // namespace wqed
