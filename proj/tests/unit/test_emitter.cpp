#include <doctest.h>

#include <cmath>

#include "wqed/emitter.hpp"
#include "wqed/errors.hpp"

using namespace wqed;

TEST_CASE("emitter parameters are validated") {
  EmitterParams p;
  CHECK_NOTHROW(p.validate());
  p.beta = 1.2;
  CHECK_THROWS_AS(p.validate(), Error);
  p.beta = 0.5;
  p.gamma_total = 0.0;
  CHECK_THROWS_AS(p.validate(), Error);
  p.gamma_total = 4.364;
  p.gamma_deph = -0.1;
  CHECK_THROWS_AS(p.validate(), Error);
}

TEST_CASE("coupling rates") {
  EmitterParams p;
  p.beta = 0.9;
  p.gamma_deph = 0.3;
  CHECK(p.gamma_right() == doctest::Approx(0.45 * 4.364));
  CHECK(p.gamma_left() == doctest::Approx(p.gamma_right()));
  CHECK(p.gamma2() == doctest::Approx(2.182 + 0.3));
  CHECK(p.lifetime() == doctest::Approx(1.0 / 4.364));
}

TEST_CASE("MHz conversion") {
  CHECK(mhz_to_rad_per_ns(1000.0) == doctest::Approx(2.0 * M_PI));
  CHECK(rad_per_ns_to_mhz(mhz_to_rad_per_ns(123.0)) == doctest::Approx(123.0));
}

TEST_CASE("gaussian pulse carries the requested photon number") {
  const auto pulse = PulseSpec::gaussian(0.34, 0.0, 0.01);
  const TimeGrid grid(-3.0, 3.0, 0.005);
  const DriveField drive = build_drive(pulse, grid, 4.364);
  CHECK(std::abs(drive.photon_number() - 0.01) < 1e-6);
}

TEST_CASE("cw flux is photons per lifetime times gamma") {
  const auto pulse = PulseSpec::cw(0.1);
  CHECK(std::norm(pulse.amplitude(0.7, 4.364)) == doctest::Approx(0.4364).epsilon(1e-12));
}

TEST_CASE("a grid covering two sigma only truncates the pulse") {
  const auto pulse = PulseSpec::gaussian(0.34, 0.0, 0.01);
  const TimeGrid grid(-0.68, 0.68, 0.005);
  try {
    build_drive(pulse, grid, 4.364);
    FAIL("expected a truncation error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::truncation);
  }
}

TEST_CASE("envelope is normalized") {
  const auto pulse = PulseSpec::gaussian(0.2, 0.5, 1.0);
  double sum = 0.0;
  const double h = 1e-3;
  for (double t = -2.0; t <= 3.0; t += h) sum += pulse.envelope(t) * pulse.envelope(t) * h;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(pulse.contained_norm(-10.0, 10.0) == doctest::Approx(1.0));
  CHECK(pulse.contained_norm(0.5, 10.0) == doctest::Approx(0.5));
}

TEST_CASE("time grid indexing") {
  const TimeGrid grid(0.0, 1.0, 0.1);
  CHECK(grid.steps() == 10);
  CHECK(grid.size() == 11);
  CHECK(grid.index_of(0.52) == 5);
  CHECK_THROWS_AS(grid.index_of(1.5), Error);
}

TEST_CASE("default step resolves pulse and lifetime") {
  EmitterParams p;
  const auto pulse = PulseSpec::gaussian(0.34, 0.0, 0.01);
  const double h = default_step(p, pulse);
  CHECK(h <= 0.34 / 50.0 + 1e-15);
  CHECK(h <= 1.0 / (20.0 * p.gamma_total) + 1e-15);
}

TEST_CASE("system state checks") {
  CHECK_NOTHROW(SystemState::ground().validate());
  CHECK(SystemState::excited().excited_population() == 1.0);
  SystemState bad;
  bad.rho(0, 0) = 2.0;
  CHECK_THROWS_AS(bad.validate(), Error);
}
