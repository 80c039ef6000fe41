#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "wqed/calibration.hpp"
#include "wqed/errors.hpp"
#include "wqed/scattering.hpp"

using namespace wqed;

namespace {

EmitterParams device() {
  EmitterParams e;
  e.beta = 0.9;
  e.gamma_deph = 0.3;
  return e;
}

std::vector<double> sweep(double gamma, double half, int n) {
  std::vector<double> d;
  // Offset by half a step so no point coincides with a control detuning.
  const double step = 2.0 * half / n;
  for (int i = 0; i < n; ++i) d.push_back((-half + (i + 0.5) * step) * gamma);
  return d;
}

double dip_center(const TwoColorSpectrum& s) {
  const auto it = std::min_element(s.transmission.begin(), s.transmission.end());
  const std::size_t k = static_cast<std::size_t>(it - s.transmission.begin());
  if (k == 0 || k + 1 == s.detunings.size()) return s.detunings[k];
  // Parabola through the minimum and its neighbours.
  const double y0 = s.transmission[k - 1], y1 = s.transmission[k], y2 = s.transmission[k + 1];
  const double h = s.detunings[k + 1] - s.detunings[k];
  return s.detunings[k] + 0.5 * h * (y0 - y2) / (y0 - 2.0 * y1 + y2);
}

}  // namespace

TEST_CASE("flux conversion") {
  const EmitterParams e = device();
  const double n_c = std::pow(1.0 + 2.0 * e.gamma_deph / e.gamma_total, 2) / (4.0 * e.beta * e.beta);
  // At n_tau = n_c the saturation parameter is one.
  const double flux = flux_for_n_tau(e, n_c);
  const double s = 4.0 * e.gamma_right() * flux / (e.gamma_total * e.gamma2());
  CHECK(s == doctest::Approx(1.0));
}

TEST_CASE("without control the probe sees the linear transmission") {
  const EmitterParams e = device();
  TwoColorProbe probe;
  probe.detunings = sweep(e.gamma_total, 3.0, 12);
  const auto s = simulate_two_color(e, {0.0, 0.0}, probe);
  for (std::size_t i = 0; i < s.detunings.size(); ++i)
    CHECK(s.transmission[i] == doctest::Approx(std::norm(transfer_function(e, s.detunings[i]).t)).epsilon(0.01));
}

TEST_CASE("a strong resonant control saturates the probe dip") {
  const EmitterParams e = device();
  TwoColorProbe probe;
  probe.detunings = {0.05 * e.gamma_total};
  const double off = simulate_two_color(e, {0.0, 0.0}, probe).transmission[0];
  const double on = simulate_two_color(e, {0.0, 5.0}, probe).transmission[0];
  CHECK(on > off);
}

TEST_CASE("control detuning sign sets the shift direction") {
  const EmitterParams e = device();
  TwoColorProbe probe;
  probe.detunings = sweep(e.gamma_total, 1.5, 24);
  const double g = e.gamma_total;
  const double off = dip_center(simulate_two_color(e, {0.0, 0.0}, probe));
  const double blue = dip_center(simulate_two_color(e, {0.3 * g, 1.0}, probe)) - off;
  const double red = dip_center(simulate_two_color(e, {-0.3 * g, 1.0}, probe)) - off;
  CHECK(blue * red < 0.0);
  CHECK(std::abs(blue) > 0.1 * g);
}

TEST_CASE("probe on top of the control cannot be separated") {
  const EmitterParams e = device();
  TwoColorProbe probe;
  probe.detunings = {0.3 * e.gamma_total};
  try {
    simulate_two_color(e, {0.3 * e.gamma_total, 1.0}, probe);
    FAIL("expected an error");
  } catch (const Error& err) {
    CHECK(err.kind() == ErrorKind::integration);
  }
}

TEST_CASE("coarse integration step cannot resolve the beat") {
  const EmitterParams e = device();
  TwoColorProbe probe;
  probe.detunings = {2.0 * e.gamma_total};
  TwoColorOptions o;
  o.integration_step = 0.2;
  CHECK_THROWS_AS(simulate_two_color(e, {0.0, 1.0}, probe, o), Error);
}

TEST_CASE("probe must stay weak against the control") {
  const EmitterParams e = device();
  TwoColorProbe probe;
  probe.detunings = {1.0};
  probe.n_tau = 0.5;
  CHECK_THROWS_AS(simulate_two_color(e, {0.0, 1.0}, probe), Error);
}
