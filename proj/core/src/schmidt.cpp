#include "wqed/schmidt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/SVD>

#include "wqed/errors.hpp"
#include "wqed/parallel.hpp"
#include "wqed/rng.hpp"

namespace wqed {

double temporal_correlation(std::span<const double> lambdas) {
  double s4 = 0.0;
  for (double l : lambdas) s4 += l * l * l * l;
  return 1.0 - s4;
}

SchmidtResult schmidt_decompose(const CorrelationMap& map) {
  map.validate();
  require(map.rows() >= 2 && map.cols() >= 2, ErrorKind::config,
          "Schmidt decomposition needs at least a 2x2 map");
  require(map.values.maxCoeff() > 0.0, ErrorKind::undefined,
          "Schmidt decomposition of an all-zero map is undefined");

  const Eigen::MatrixXd root = map.values.cwiseSqrt();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(root);
  Eigen::VectorXd s = svd.singularValues();

  const double cutoff = 1e-12 * s(0);
  std::vector<double> lambdas;
  lambdas.reserve(static_cast<std::size_t>(s.size()));
  for (Eigen::Index i = 0; i < s.size(); ++i) lambdas.push_back(s(i) > cutoff ? s(i) : 0.0);
  const double norm2 = std::accumulate(lambdas.begin(), lambdas.end(), 0.0,
                                       [](double acc, double l) { return acc + l * l; });
  const double norm = std::sqrt(norm2);
  for (double& l : lambdas) l /= norm;
  // Trailing exact zeros carry no information.
  while (lambdas.size() > 1 && lambdas.back() == 0.0) lambdas.pop_back();

  SchmidtResult r;
  r.singular_values = std::move(lambdas);
  r.t_c = temporal_correlation(r.singular_values);
  r.t_c_mc_mean = r.t_c;
  r.d_t_used = map.d_t;
  return r;
}

AdaptiveBinning adaptive_bin(std::span<const CorrelationMap> maps) {
  require(!maps.empty(), ErrorKind::config, "adaptive binning needs at least one map");
  const double native = maps.front().d_t;
  for (const CorrelationMap& m : maps) {
    m.validate();
    require(m.kind == MapKind::counts, ErrorKind::config, "adaptive binning needs counts maps");
    require(std::abs(m.d_t - native) <= 1e-9 * native, ErrorKind::config,
            "adaptive binning needs a common native bin width");
  }

  AdaptiveBinning out;
  double sum_max = 0.0;
  for (const CorrelationMap& m : maps) sum_max += m.values.maxCoeff();
  out.target = sum_max / static_cast<double>(maps.size());

  for (const CorrelationMap& m : maps) {
    const int cap = std::max<int>(1, static_cast<int>(std::min(m.rows(), m.cols()) / 4));
    int chosen = cap;
    bool capped = true;
    for (int k = 1; k <= cap; ++k) {
      if (rebin(m, k).values.maxCoeff() >= out.target) {
        chosen = k;
        capped = false;
        break;
      }
    }
    CorrelationMap binned = rebin(m, chosen);
    binned.meta["adaptive_target"] = out.target;
    binned.meta["adaptive_capped"] = capped;
    out.maps.push_back(std::move(binned));
    out.factors.push_back(chosen);
    out.d_t.push_back(native * chosen);
    out.capped.push_back(capped);
  }
  return out;
}

SchmidtResult monte_carlo_tc(const CorrelationMap& counts, const MonteCarloOptions& options) {
  require(counts.kind == MapKind::counts, ErrorKind::config,
          "Monte Carlo error propagation needs a counts map");
  require(options.resamples >= 100, ErrorKind::config, "Monte Carlo needs at least 100 resamples");
  counts.validate();

  SchmidtResult point = schmidt_decompose(rebin(counts, options.rebin_factor));

  const auto n = static_cast<std::size_t>(options.resamples);
  std::vector<double> tc(n, std::nan(""));
  parallel_for(n, options.threads, [&](std::size_t i) {
    Rng rng = make_rng(options.seed, "monte_carlo_tc", i);
    CorrelationMap draw = counts;
    for (Eigen::Index j = 0; j < draw.rows(); ++j)
      for (Eigen::Index l = 0; l < draw.cols(); ++l) {
        const double mean = counts.values(j, l);
        draw.values(j, l) =
            mean > 0.0 ? static_cast<double>(std::poisson_distribution<long long>(mean)(rng)) : 0.0;
      }
    const CorrelationMap binned = rebin(draw, options.rebin_factor);
    if (binned.values.maxCoeff() > 0.0) tc[i] = schmidt_decompose(binned).t_c;
  });

  double sum = 0.0;
  std::size_t valid = 0;
  for (double v : tc)
    if (std::isfinite(v)) {
      sum += v;
      ++valid;
    }
  require(valid >= 2, ErrorKind::undefined, "too few nonzero Monte Carlo resamples");
  const double mean = sum / static_cast<double>(valid);
  double var = 0.0;
  for (double v : tc)
    if (std::isfinite(v)) var += (v - mean) * (v - mean);
  var /= static_cast<double>(valid - 1);

  point.t_c_err = std::sqrt(var);
  point.t_c_mc_mean = mean;
  point.pipeline_meta["resamples"] = options.resamples;
  point.pipeline_meta["valid_resamples"] = valid;
  point.pipeline_meta["seed"] = options.seed;
  point.pipeline_meta["rebin_factor"] = options.rebin_factor;
  point.pipeline_meta["native_d_t_ns"] = counts.d_t;
  return point;
}

nlohmann::json to_json(const SchmidtResult& r) {
  return {{"singular_values", r.singular_values},
          {"t_c", r.t_c},
          {"t_c_err", r.t_c_err},
          {"t_c_mc_mean", r.t_c_mc_mean},
          {"d_t_used", r.d_t_used},
          {"pipeline_meta", r.pipeline_meta}};
}

}  // namespace wqed
