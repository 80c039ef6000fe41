#include "wqed/correlation_map.hpp"

#include <cmath>

#include "wqed/errors.hpp"

namespace wqed {

std::string_view to_string(MapKind kind) noexcept {
  return kind == MapKind::counts ? "counts" : "probability_density";
}

MapKind parse_map_kind(std::string_view text) {
  if (text == "counts") return MapKind::counts;
  if (text == "probability_density") return MapKind::probability_density;
  fail(ErrorKind::io, "unknown map kind '" + std::string(text) + "'");
}

std::string ChannelPair::label() const {
  return std::string{channel_letter(first), channel_letter(second)};
}

ChannelPair ChannelPair::parse(std::string_view label) {
  auto one = [&](char c) {
    if (c == 't') return Channel::transmission;
    if (c == 'r') return Channel::reflection;
    fail(ErrorKind::config, "channel pair must be two of {t, r}, got '" + std::string(label) + "'");
  };
  require(label.size() == 2, ErrorKind::config,
          "channel pair must be two letters, got '" + std::string(label) + "'");
  return ChannelPair{one(label[0]), one(label[1])};
}

void CorrelationMap::validate() const {
  require(std::isfinite(d_t) && d_t > 0.0, ErrorKind::io, "map bin width must be > 0");
  require(std::isfinite(t_origin), ErrorKind::io, "map origin must be finite");
  require(values.rows() > 0 && values.cols() > 0, ErrorKind::io, "map is empty");
  require(values.allFinite(), ErrorKind::io, "map has non-finite values");
  require(values.minCoeff() >= 0.0, ErrorKind::io, "map has negative values");
}

double CorrelationMap::asymmetry() const {
  if (rows() != cols()) return INFINITY;
  return (values - values.transpose()).cwiseAbs().maxCoeff();
}

double IntensityTrace::integral() const {
  double s = 0.0;
  for (double v : values) s += v;
  return s * d_t;
}

CorrelationMap rebin(const CorrelationMap& map, int factor) {
  require(factor >= 1, ErrorKind::config, "rebin factor must be >= 1");
  if (factor == 1) return map;
  const Eigen::Index r = map.rows() / factor;
  const Eigen::Index c = map.cols() / factor;
  require(r >= 1 && c >= 1, ErrorKind::config, "rebin factor exceeds map size");
  CorrelationMap out = map;
  out.values.resize(r, c);
  for (Eigen::Index j = 0; j < r; ++j)
    for (Eigen::Index l = 0; l < c; ++l)
      out.values(j, l) = map.values.block(j * factor, l * factor, factor, factor).sum();
  if (map.kind == MapKind::probability_density) out.values /= static_cast<double>(factor * factor);
  out.d_t = map.d_t * factor;
  // Center of the first superbin.
  out.t_origin = map.t_origin + 0.5 * (factor - 1) * map.d_t;
  out.meta["rebin_factor"] = factor * map.meta.value("rebin_factor", 1);
  return out;
}

double band_mass(const CorrelationMap& map, double width) {
  double s = 0.0;
  for (Eigen::Index j = 0; j < map.rows(); ++j)
    for (Eigen::Index l = 0; l < map.cols(); ++l)
      if (std::abs(static_cast<double>(j - l)) * map.d_t < width) s += map.values(j, l);
  return s;
}

double diagonal_band_ratio(const CorrelationMap& g2, const CorrelationMap& reference, double width) {
  const double ref = band_mass(reference, width);
  require(ref > 0.0, ErrorKind::undefined, "reference map has no mass near the diagonal");
  return band_mass(g2, width) / ref;
}

}  // namespace wqed
