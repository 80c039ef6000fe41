#pragma once

// Observable surfaces built on the dynamics engine: cw transfer functions,
// pulsed two-time correlation maps per channel pair, the factorized
// (subsequent-pulse) reference, detector-jitter smoothing and line cuts.

#include <optional>
#include <vector>

#include "wqed/correlation_map.hpp"
#include "wqed/dynamics.hpp"
#include "wqed/emitter.hpp"

namespace wqed {

struct TransferCoefficients {
  complex t;
  complex r;
};

/// Weak-drive cw amplitudes: t = 1 - (beta gamma/2)/(gamma2 - i delta), r = t - 1.
TransferCoefficients transfer_function(const EmitterParams& params, double detuning);

struct MapWindow {
  double t_start = 0.0;
  double t_end = 0.0;

  double length() const noexcept { return t_end - t_start; }
};

/// t0 +- (4 sigma + 5 tau): the pulse plus the decay tail of the emitter.
MapWindow default_window(const EmitterParams& params, const PulseSpec& pulse);

inline constexpr double kDefaultMapBin = 0.02;  // ns

struct SimulationOptions {
  double integration_step = 0.0;  // ns; 0 selects default_step()
  unsigned threads = 0;           // 0 = hardware concurrency
};

/// Simulation of one pulse on a grid aligned with the map bins. Holds the
/// regression engine so that several maps can be produced from one trajectory.
class PulseSimulation {
 public:
  PulseSimulation(const EmitterParams& params, const PulseSpec& pulse, MapWindow window,
                  double map_d_t, SimulationOptions options = {});

  const EmitterParams& params() const noexcept { return params_; }
  const PulseSpec& pulse() const noexcept { return pulse_; }
  const CorrelatorEngine& engine() const noexcept { return engine_; }
  std::size_t bins() const noexcept { return bins_; }
  double map_d_t() const noexcept { return d_t_; }
  double first_center() const noexcept { return first_center_; }
  /// Grid node of bin center j.
  std::size_t node_of_bin(std::size_t j) const noexcept { return first_node_ + j * substeps_; }

  CorrelationMap g2_map(ChannelPair channels) const;
  CorrelationMap reference_map(ChannelPair channels) const;
  IntensityTrace intensity_trace(Channel ch) const;

 private:
  static CorrelatorEngine make_engine(const EmitterParams& params, const PulseSpec& pulse,
                                      MapWindow window, double map_d_t,
                                      const SimulationOptions& options, std::size_t& first_node,
                                      std::size_t& substeps, std::size_t& bins);
  nlohmann::json describe(ChannelPair channels) const;

  EmitterParams params_;
  PulseSpec pulse_;
  MapWindow window_;
  double d_t_;
  SimulationOptions options_;
  std::size_t first_node_ = 0;
  std::size_t substeps_ = 1;
  std::size_t bins_ = 0;
  double first_center_ = 0.0;
  CorrelatorEngine engine_;
  std::vector<std::string> warnings_;
};

/// Binned G2_{mu,mu'} over the window (probability density per ns^2).
CorrelationMap g2_map(const EmitterParams& params, const PulseSpec& pulse, ChannelPair channels,
                      MapWindow window, double map_d_t = kDefaultMapBin,
                      SimulationOptions options = {});

/// Outer product G1_mu(t1) G1_mu'(t2): the expectation for photons from different pulses.
CorrelationMap reference_map(const EmitterParams& params, const PulseSpec& pulse,
                             ChannelPair channels, MapWindow window,
                             double map_d_t = kDefaultMapBin, SimulationOptions options = {});

/// Separable gaussian smoothing along t1 (fwhm1) and t2 (fwhm2), both in ns.
CorrelationMap apply_jitter(const CorrelationMap& map, double fwhm1, double fwhm2);

struct LineCut {
  double origin = 0.0;  // coordinate of the first sample (t1+t2 or t1-t2), ns
  double step = 0.0;    // ns
  std::vector<double> values;
  std::vector<bool> partial;  // band extended past the map edge

  double coordinate(std::size_t k) const noexcept { return origin + static_cast<double>(k) * step; }
};

struct LineCuts {
  LineCut diagonal;      // band around t1 = t2, indexed by t1 + t2
  LineCut antidiagonal;  // band around t1 + t2 = 2 t_center, indexed by t1 - t2
};

inline constexpr int kLineCutBand = 10;

/// Integrates a band `band_bins` wide (perpendicular to each cut) with unit
/// weights inside and half weights on the band edge, so a constant map c
/// yields band_bins * c away from the borders. The antidiagonal passes through
/// t1 = t2 = t_center (default: meta "pulse_center_ns", else the mass centroid).
LineCuts linecuts(const CorrelationMap& map, int band_bins = kLineCutBand,
                  std::optional<double> t_center = std::nullopt);

}  // namespace wqed
