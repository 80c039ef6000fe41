#include <doctest.h>

#include <cmath>

#include "bloch.hpp"
#include "wqed/dynamics.hpp"
#include "wqed/errors.hpp"

using namespace wqed;

namespace {

oracle::Emitter to_oracle(const EmitterParams& p) { return {p.gamma_total, p.beta, p.gamma_deph}; }

}  // namespace

TEST_CASE("free decay of the excited state") {
  EmitterParams p;
  const TimeGrid grid(0.0, 5.0 / p.gamma_total, 0.001);
  const auto traj = propagate(p, DriveField::zero(grid), SystemState::excited());
  double worst = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i)
    worst = std::max(worst, std::abs(traj.states[i].excited_population() -
                                     std::exp(-p.gamma_total * grid.time(i))));
  CHECK(worst < 1e-4);
  const std::size_t k = grid.index_of(0.229);
  CHECK(traj.states[k].excited_population() == doctest::Approx(std::exp(-4.364 * grid.time(k))).epsilon(1e-6));
  CHECK(std::abs(traj.states[k].excited_population() - 0.3679) < 1e-3);
}

TEST_CASE("ground state is dark") {
  EmitterParams p;
  const TimeGrid grid(0.0, 2.0, 0.01);
  const auto traj = propagate(p, DriveField::zero(grid), SystemState::ground());
  for (const auto& s : traj.states) CHECK(s.rho.isApprox(SystemState::ground().rho, 1e-15));
}

TEST_CASE("steady state agrees with the independent Liouvillian solver") {
  for (double beta : {1.0, 0.9, 0.5}) {
    for (double g0 : {0.0, 0.3}) {
      EmitterParams p;
      p.beta = beta;
      p.gamma_deph = g0;
      for (double det : {0.0, 1.3, -4.0}) {
        for (double a : {0.1, 1.0, 3.0}) {
          const auto lib = steady_state(p, a, det);
          // Library detuning is the carrier relative to the emitter.
          const auto ref = oracle::steady_state(to_oracle(p), a, det - p.delta_e);
          CHECK((lib.rho - ref).cwiseAbs().maxCoeff() < 1e-10);
        }
      }
    }
  }
}

TEST_CASE("zero drive steady state is the ground state") {
  EmitterParams p;
  CHECK(steady_state(p, 0.0, 0.0).rho.isApprox(SystemState::ground().rho, 1e-14));
}

TEST_CASE("resonant saturation at S = 1") {
  EmitterParams p;
  // S = 4 gamma_R |a|^2 / (gamma gamma2).
  const double a = std::sqrt(p.gamma_total * p.gamma2() / (4.0 * p.gamma_right()));
  CHECK(std::abs(steady_state(p, a, 0.0).excited_population() - 0.25) < 1e-6);
}

TEST_CASE("detuned excited population follows the power-broadened profile") {
  EmitterParams p;
  p.beta = 0.9;
  p.gamma_deph = 0.3;
  const double a = 0.8;
  const double s = 4.0 * p.gamma_right() * a * a / (p.gamma_total * p.gamma2());
  for (double det : {0.5, 2.0, 7.0}) {
    const double x = det / p.gamma2();
    CHECK(std::abs(steady_state(p, a, det).excited_population() - 0.5 * s / (1.0 + s + x * x)) < 1e-6);
  }
}

TEST_CASE("long propagation reaches the steady state") {
  EmitterParams p;
  const double a = 1.2;
  const TimeGrid grid(0.0, 8.0, 0.002);
  const auto drive = DriveField::from_function(grid, [&](double) { return complex(a); });
  const auto traj = propagate(p, drive, SystemState::ground());
  CHECK((traj.states.back().rho - steady_state(p, a, 0.0).rho).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("trajectories stay physical under strong drive") {
  EmitterParams p;
  p.gamma_deph = 0.5;
  const auto pulse = PulseSpec::gaussian(0.2, 0.0, 5.0);
  const TimeGrid grid(-1.5, 2.0, default_step(p, pulse));
  const auto traj = propagate(p, build_drive(pulse, grid, p.gamma_total), SystemState::ground());
  for (const auto& s : traj.states) {
    CHECK(std::abs(s.trace() - 1.0) < 1e-9);
    CHECK(s.min_eigenvalue() > -1e-9);
  }
}

TEST_CASE("spontaneous emission splits into the waveguide fraction beta") {
  EmitterParams p;
  p.beta = 0.7;
  const TimeGrid grid(0.0, 12.0 / p.gamma_total, 0.0005);
  const DriveField drive = DriveField::zero(grid);
  const CorrelatorEngine engine(p, drive, SystemState::excited());
  double sum = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double w = (i == 0 || i + 1 == grid.size()) ? 0.5 : 1.0;
    sum += w * (engine.intensity(Channel::transmission, i) + engine.intensity(Channel::reflection, i));
  }
  CHECK(std::abs(sum * grid.step() - p.beta) < 1e-4);
}

TEST_CASE("reflected intensity is gamma_L times the excited population") {
  EmitterParams p;
  p.beta = 0.8;
  const auto pulse = PulseSpec::gaussian(0.3, 0.0, 0.5);
  const TimeGrid grid(-1.5, 2.5, default_step(p, pulse));
  const CorrelatorEngine engine(p, build_drive(pulse, grid, p.gamma_total));
  for (std::size_t i = 0; i < grid.size(); i += 37)
    CHECK(engine.intensity(Channel::reflection, i) ==
          doctest::Approx(p.gamma_left() * engine.trajectory().states[i].excited_population()).epsilon(1e-12));
}

TEST_CASE("resonant cw transmission is extinguished for an ideal emitter") {
  EmitterParams p;
  const double a = 0.002;
  const auto rho = steady_state(p, a, 0.0).rho;
  const Eigen::Matrix2cd o = output_operator(p, Channel::transmission, a);
  CHECK(std::abs((o.adjoint() * o * rho).trace().real()) / (a * a) < 1e-4);
}

TEST_CASE("two-level emitter never reflects two photons at once") {
  EmitterParams p;
  p.beta = 0.9;
  p.gamma_deph = 0.2;
  const auto pulse = PulseSpec::gaussian(0.3, 0.0, 2.0);
  const TimeGrid grid(-1.5, 2.5, default_step(p, pulse));
  const CorrelatorEngine engine(p, build_drive(pulse, grid, p.gamma_total));
  for (std::size_t i = 0; i < grid.size(); i += 13)
    CHECK(engine.g2(Channel::reflection, Channel::reflection, i, i) == 0.0);
}

TEST_CASE("zero drive gives zero correlations") {
  EmitterParams p;
  const TimeGrid grid(0.0, 1.0, 0.01);
  const CorrelatorEngine engine(p, DriveField::zero(grid));
  for (Channel a : {Channel::transmission, Channel::reflection})
    for (Channel b : {Channel::transmission, Channel::reflection})
      CHECK(engine.g2(a, b, 10, 40) == 0.0);
}

TEST_CASE("correlator outside the grid is a range error") {
  EmitterParams p;
  const TimeGrid grid(0.0, 1.0, 0.01);
  try {
    two_time_correlator(p, DriveField::zero(grid), Channel::transmission, Channel::transmission, 0.5, 3.0);
    FAIL("expected a range error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::range);
  }
}

TEST_CASE("equal-time transmitted g2 matches the oracle in the cw steady state") {
  EmitterParams p;
  p.beta = 0.95;
  const double a = 0.3;
  const TimeGrid grid(0.0, 6.0, 0.002);
  const auto drive = DriveField::from_function(grid, [&](double) { return complex(a); });
  const CorrelatorEngine engine(p, drive);
  const std::size_t i = grid.size() - 1;
  const double g1 = engine.intensity(Channel::transmission, i);
  const double g2 = engine.g2(Channel::transmission, Channel::transmission, i, i) / (g1 * g1);
  const auto rho = oracle::steady_state(to_oracle(p), a, 0.0);
  CHECK(g2 == doctest::Approx(oracle::transmitted_g2_zero(to_oracle(p), a, rho)).epsilon(1e-5));
}
