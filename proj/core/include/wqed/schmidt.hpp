#pragma once

// Temporal-correlation analysis of two-time maps: Schmidt decomposition of the
// square-root map, the correlation degree T_c = 1 - sum(lambda^4), adaptive bin
// sizing across data sets and Poisson Monte Carlo error propagation.

#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "wqed/correlation_map.hpp"

namespace wqed {

struct SchmidtResult {
  std::vector<double> singular_values;  // nonincreasing, sum of squares = 1
  double t_c = 0.0;
  double t_c_err = 0.0;      // standard deviation over Monte Carlo resamples (0 if none)
  double t_c_mc_mean = 0.0;  // mean over resamples (equals t_c if none)
  double d_t_used = 0.0;     // ns
  nlohmann::json pipeline_meta = nlohmann::json::object();
};

/// 1 - sum(lambda_i^4) for normalized coefficients.
double temporal_correlation(std::span<const double> lambdas);

/// Singular values of C'_{jl} = sqrt(values_{jl}), normalized to unit sum of squares.
/// Values below 1e-12 * lambda_0 are zeroed before normalization.
/// Throws ErrorKind::undefined for an all-zero map.
SchmidtResult schmidt_decompose(const CorrelationMap& map);

struct AdaptiveBinning {
  std::vector<CorrelationMap> maps;  // rebinned
  std::vector<int> factors;          // superbin size in native bins
  std::vector<double> d_t;           // ns
  std::vector<bool> capped;          // target not reachable; factor held at size / 4
  double target = 0.0;               // mean of the per-map maximum counts
};

/// Chooses per map the smallest integer bin multiple whose largest superbin
/// reaches the mean (across maps) of the native maximum counts.
AdaptiveBinning adaptive_bin(std::span<const CorrelationMap> maps);

struct MonteCarloOptions {
  int resamples = 200;
  std::uint64_t seed = 0;
  int rebin_factor = 1;  // held fixed across resamples
  unsigned threads = 0;
};

/// Resamples every native bin from Poisson(observed), reruns rebin + Schmidt and
/// reports the spread. t_c is the point estimate of the unresampled map.
SchmidtResult monte_carlo_tc(const CorrelationMap& counts, const MonteCarloOptions& options);

nlohmann::json to_json(const SchmidtResult& r);

}  // namespace wqed
