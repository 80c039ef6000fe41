#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "wqed/dynamics.hpp"

namespace wqed {

enum class MapKind { probability_density, counts };

std::string_view to_string(MapKind kind) noexcept;
MapKind parse_map_kind(std::string_view text);

/// Ordered channel pair (mu, mu'); "tr" means t1 in transmission, t2 in reflection.
struct ChannelPair {
  Channel first = Channel::transmission;
  Channel second = Channel::transmission;

  bool same() const noexcept { return first == second; }
  std::string label() const;
  static ChannelPair parse(std::string_view label);

  friend bool operator==(const ChannelPair&, const ChannelPair&) = default;
};

/// Uniformly binned two-time map. Row index j is t1, column index l is t2;
/// bin centers sit at t_origin + j * d_t.
struct CorrelationMap {
  double d_t = 0.02;
  double t_origin = 0.0;
  Eigen::MatrixXd values;
  ChannelPair channels;
  MapKind kind = MapKind::probability_density;
  nlohmann::json meta = nlohmann::json::object();

  Eigen::Index rows() const noexcept { return values.rows(); }
  Eigen::Index cols() const noexcept { return values.cols(); }
  double time(Eigen::Index j) const noexcept { return t_origin + static_cast<double>(j) * d_t; }
  double total() const { return values.sum(); }

  /// Nonnegative, finite, rectangular, d_t > 0.
  void validate() const;
  double asymmetry() const;
};

/// One-time intensity G1 sampled at bin centers.
struct IntensityTrace {
  Channel channel = Channel::transmission;
  double t_origin = 0.0;
  double d_t = 0.02;
  std::vector<double> values;

  double time(std::size_t j) const noexcept { return t_origin + static_cast<double>(j) * d_t; }
  /// Integral of G1 (photons per pulse in this channel).
  double integral() const;
};

/// Sums factor x factor superbins; incomplete superbins at the far edges are dropped.
CorrelationMap rebin(const CorrelationMap& map, int factor);

/// Mass of the map inside the band |t1 - t2| < width (ns).
double band_mass(const CorrelationMap& map, double width);

/// band_mass(g2) / band_mass(reference): excess of near-diagonal coincidences.
double diagonal_band_ratio(const CorrelationMap& g2, const CorrelationMap& reference, double width);

}  // namespace wqed
