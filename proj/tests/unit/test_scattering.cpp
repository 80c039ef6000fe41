#include <doctest.h>

#include <cmath>

#include "collision_model.hpp"
#include "wqed/errors.hpp"
#include "wqed/scattering.hpp"
#include "wqed/schmidt.hpp"

using namespace wqed;

namespace {

EmitterParams ideal() { return EmitterParams{}; }

const ChannelPair tt = ChannelPair::parse("tt");
const ChannelPair rr = ChannelPair::parse("rr");

}  // namespace

TEST_CASE("transfer function closed forms") {
  const EmitterParams p = ideal();
  auto c = transfer_function(p, 0.0);
  CHECK(std::abs(c.t) < 1e-15);
  CHECK(std::abs(c.r + 1.0) < 1e-15);

  c = transfer_function(p, p.gamma_total / 2.0);
  CHECK(std::norm(c.t) == doctest::Approx(0.5));
  CHECK(std::norm(c.r) == doctest::Approx(0.5));

  EmitterParams q;
  q.beta = 0.9;
  c = transfer_function(q, 0.0);
  CHECK(std::abs(c.t - complex(0.1, 0.0)) < 1e-12);
  CHECK(std::norm(c.t) == doctest::Approx(0.01));
}

TEST_CASE("lossless emitter conserves flux at every detuning") {
  const EmitterParams p = ideal();
  for (int k = -100; k <= 100; ++k) {
    const auto c = transfer_function(p, 0.1 * k * p.gamma_total);
    CHECK(std::abs(std::norm(c.t) + std::norm(c.r) - 1.0) < 1e-12);
  }
}

TEST_CASE("weak-drive transmission agrees with the steady state") {
  EmitterParams p;
  p.beta = 0.9;
  p.gamma_deph = 0.3;
  const double a = 1e-3;
  for (double det : {0.0, 1.0, -3.0}) {
    const auto rho = steady_state(p, a, det).rho;
    const Eigen::Matrix2cd o = output_operator(p, Channel::transmission, a);
    // Dephasing adds an incoherent part, so compare the coherent amplitude.
    const double t2 = std::norm((o * rho).trace()) / (a * a);
    CHECK(t2 == doctest::Approx(std::norm(transfer_function(p, det).t)).epsilon(1e-4));
  }
}

TEST_CASE("default window covers pulse and decay") {
  const EmitterParams p = ideal();
  const auto pulse = PulseSpec::gaussian(0.34, 1.0, 0.01);
  const MapWindow w = default_window(p, pulse);
  CHECK(w.t_start == doctest::Approx(1.0 - 4 * 0.34 - 5 / p.gamma_total));
  CHECK(w.t_end == doctest::Approx(1.0 + 4 * 0.34 + 5 / p.gamma_total));
}

TEST_CASE("a window shorter than the pulse is refused") {
  const auto pulse = PulseSpec::gaussian(0.34, 0.0, 0.01);
  try {
    g2_map(ideal(), pulse, tt, MapWindow{-0.3, 0.3}, 0.02);
    FAIL("expected a truncation error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::truncation);
  }
}

TEST_CASE("transmitted coincidences match the two-photon collision model in the bulk") {
  const EmitterParams p = ideal();
  const auto pulse = PulseSpec::gaussian(0.34, 0.0, 1e-3);
  const auto g = g2_map(p, pulse, tt, MapWindow{-1.6, 3.2}, 0.2);
  REQUIRE(g.rows() == 24);
  Eigen::VectorXd centers(g.rows());
  for (Eigen::Index j = 0; j < g.rows(); ++j) centers(j) = g.time(j);
  const Eigen::MatrixXd o = oracle::coherent_g2_tt(p, pulse, -2.2, 3.3, 0.005, centers);
  const double mx = g.values.maxCoeff();
  int checked = 0;
  for (Eigen::Index j = 0; j < g.rows(); ++j)
    for (Eigen::Index l = 0; l < g.cols(); ++l)
      if (g.values(j, l) > 1e-2 * mx) {
        CHECK(std::abs(o(j, l) / g.values(j, l) - 1.0) < 0.02);
        ++checked;
      }
  CHECK(checked > 80);
}

TEST_CASE("reflected map has an empty diagonal") {
  const auto pulse = PulseSpec::gaussian(0.34, 0.0, 0.1);
  const auto m = g2_map(ideal(), pulse, rr, default_window(ideal(), pulse), 0.02);
  const double mx = m.values.maxCoeff();
  for (Eigen::Index j = 0; j < m.rows(); ++j) CHECK(m.values(j, j) <= 1e-14 * mx);
}

TEST_CASE("bunching concentrates transmitted pairs near the diagonal") {
  const EmitterParams p = ideal();
  const auto pulse = PulseSpec::gaussian(1.5 * p.lifetime(), 0.0, 0.01);
  const MapWindow w = default_window(p, pulse);
  const auto g = g2_map(p, pulse, tt, w);
  const auto ref = reference_map(p, pulse, tt, w);
  const double tau = p.lifetime();
  CHECK(band_mass(g, tau) / g.total() > band_mass(ref, tau) / ref.total());
  CHECK(diagonal_band_ratio(g, ref, tau) > 1.0);
}

TEST_CASE("short pulses are the least modified by the emitter") {
  const EmitterParams p = ideal();
  double closest = 1e9;
  double ratio_short = 0.0;
  for (double r : {0.44, 1.0, 1.5, 2.0}) {
    const auto pulse = PulseSpec::gaussian(r * p.lifetime(), 0.0, 0.01);
    const MapWindow w = default_window(p, pulse);
    const double ratio = diagonal_band_ratio(g2_map(p, pulse, tt, w, 0.04),
                                             reference_map(p, pulse, tt, w, 0.04), p.lifetime());
    if (r == 0.44) ratio_short = ratio;
    closest = std::min(closest, std::abs(ratio - 1.0));
  }
  CHECK(std::abs(ratio_short - 1.0) == doctest::Approx(closest));
}

TEST_CASE("reference maps factorize") {
  EmitterParams p;
  p.beta = 0.8;
  p.gamma_deph = 0.4;
  const auto pulse = PulseSpec::gaussian(0.3, 0.0, 0.2);
  for (const char* ch : {"tt", "rr", "tr"}) {
    const auto ref = reference_map(p, pulse, ChannelPair::parse(ch), default_window(p, pulse), 0.04);
    CHECK(schmidt_decompose(ref).t_c < 1e-12);
  }
}

TEST_CASE("long pulses are mostly reflected by an ideal emitter") {
  const EmitterParams p = ideal();
  const auto short_pulse = PulseSpec::gaussian(0.44 * p.lifetime(), 0.0, 0.01);
  const auto long_pulse = PulseSpec::gaussian(5.0 * p.lifetime(), 0.0, 0.01);
  const double t_short = reference_map(p, short_pulse, tt, default_window(p, short_pulse), 0.05).total();
  const double t_long = reference_map(p, long_pulse, tt, default_window(p, long_pulse), 0.05).total();
  CHECK(t_long < 0.1 * t_short);
  CHECK(t_long * 0.05 * 0.05 / (0.01 * 0.01) < 0.05);
}

TEST_CASE("zero drive gives zero maps") {
  const auto pulse = PulseSpec::gaussian(0.34, 0.0, 0.0);
  const auto w = default_window(ideal(), pulse);
  CHECK(g2_map(ideal(), pulse, tt, w, 0.05).values.isZero());
  CHECK(reference_map(ideal(), pulse, tt, w, 0.05).values.isZero());
}

TEST_CASE("maps are symmetric for equal channels") {
  const auto pulse = PulseSpec::gaussian(0.34, 0.0, 0.05);
  const auto m = g2_map(ideal(), pulse, tt, default_window(ideal(), pulse), 0.04);
  CHECK(m.asymmetry() < 1e-10);
}

namespace {

CorrelationMap blank(int n, double d_t) {
  CorrelationMap m;
  m.d_t = d_t;
  m.t_origin = 0.0;
  m.values = Eigen::MatrixXd::Zero(n, n);
  return m;
}

}  // namespace

TEST_CASE("jitter: zero width is the identity") {
  auto m = blank(20, 0.02);
  m.values(5, 7) = 1.0;
  m.values(11, 3) = 2.0;
  CHECK(apply_jitter(m, 0.0, 0.0).values == m.values);
}

TEST_CASE("jitter: a delta peak spreads into the detector gaussian") {
  auto m = blank(201, 0.005);
  m.values(100, 100) = 1.0;
  const auto j = apply_jitter(m, 0.2, 0.2);
  double s = 0.0;
  double s2 = 0.0;
  for (Eigen::Index l = 0; l < j.cols(); ++l) {
    const double x = (static_cast<double>(l) - 100.0) * m.d_t;
    s += j.values(100, l);
    s2 += j.values(100, l) * x * x;
  }
  CHECK(std::sqrt(s2 / s) == doctest::Approx(0.2 / (2.0 * std::sqrt(2.0 * std::log(2.0)))).epsilon(0.02));
}

TEST_CASE("jitter conserves mass away from the edges") {
  auto m = blank(100, 0.02);
  for (int j = 40; j < 60; ++j)
    for (int l = 35; l < 65; ++l) m.values(j, l) = 1.0 + 0.1 * j - 0.05 * l;
  const auto out = apply_jitter(m, 0.03, 0.15);
  CHECK(out.total() == doctest::Approx(m.total()).epsilon(1e-3));
}

TEST_CASE("line cuts of a constant map") {
  auto m = blank(60, 0.02);
  m.values.setConstant(2.5);
  const auto cuts = linecuts(m, 10, 0.6);
  const auto& d = cuts.diagonal;
  bool interior_seen = false;
  for (std::size_t k = 0; k < d.values.size(); ++k)
    if (!d.partial[k]) {
      CHECK(d.values[k] == doctest::Approx(25.0));
      interior_seen = true;
    }
  CHECK(interior_seen);
  bool partial_seen = false;
  for (bool b : d.partial) partial_seen = partial_seen || b;
  CHECK(partial_seen);
}

TEST_CASE("line cuts of a symmetric simulated map") {
  const auto pulse = PulseSpec::gaussian(0.34, 0.0, 0.05);
  const auto m = g2_map(ideal(), pulse, tt, default_window(ideal(), pulse), 0.02);
  const auto a = linecuts(m).antidiagonal;
  const std::size_t n = a.values.size();
  for (std::size_t k = 0; k < n; ++k) CHECK(std::abs(a.values[k] - a.values[n - 1 - k]) < 1e-9);
}

TEST_CASE("reflection delay cut dips at zero delay") {
  const EmitterParams p = ideal();
  const auto pulse = PulseSpec::gaussian(1.5 * p.lifetime(), 0.0, 0.01);
  const auto m = g2_map(p, pulse, rr, default_window(p, pulse), 0.02);
  const auto a = linecuts(m).antidiagonal;
  std::size_t zero = 0;
  for (std::size_t k = 0; k < a.values.size(); ++k)
    if (std::abs(a.coordinate(k)) < std::abs(a.coordinate(zero))) zero = k;
  CHECK(std::abs(a.coordinate(zero)) < 1e-9);
  CHECK(a.values[zero] < a.values[zero - 1]);
  CHECK(a.values[zero] < a.values[zero + 1]);
}

TEST_CASE("rebin sums superbins and drops the ragged edge") {
  auto m = blank(7, 0.1);
  m.kind = MapKind::counts;
  m.values.setOnes();
  const auto r = rebin(m, 3);
  CHECK(r.rows() == 2);
  CHECK(r.d_t == doctest::Approx(0.3));
  CHECK(r.values(0, 0) == 9.0);
  CHECK(r.t_origin == doctest::Approx(0.1));
}
