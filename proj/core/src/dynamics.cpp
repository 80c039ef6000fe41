#include "wqed/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "wqed/errors.hpp"

namespace wqed {

namespace {

const Eigen::Matrix2cd& lowering() {
  static const Eigen::Matrix2cd s = [] {
    Eigen::Matrix2cd m = Eigen::Matrix2cd::Zero();
    m(0, 1) = 1.0;
    return m;
  }();
  return s;
}

Eigen::Matrix2cd dissipator(const Eigen::Matrix2cd& l, const Eigen::Matrix2cd& rho) {
  const Eigen::Matrix2cd ldl = l.adjoint() * l;
  return l * rho * l.adjoint() - 0.5 * (ldl * rho + rho * ldl);
}

Eigen::Matrix2cd rhs(const EmitterParams& p, const Eigen::Matrix2cd& rho, complex a) {
  const Eigen::Matrix2cd& s = lowering();
  const Eigen::Matrix2cd sd = s.adjoint();
  const complex i{0.0, 1.0};
  const Eigen::Matrix2cd h =
      p.delta_e * (sd * s) - i * std::sqrt(p.gamma_right()) * (a * sd - std::conj(a) * s);
  Eigen::Matrix2cd sz = Eigen::Matrix2cd::Zero();
  sz(0, 0) = -1.0;
  sz(1, 1) = 1.0;
  return -i * (h * rho - rho * h) + p.gamma_total * dissipator(s, rho) +
         0.5 * p.gamma_deph * dissipator(sz, rho);
}

LiouvilleMatrix superoperator(const EmitterParams& p, complex a) {
  LiouvilleMatrix out;
  for (int k = 0; k < 4; ++k) {
    LiouvilleVector e = LiouvilleVector::Zero();
    e(k) = 1.0;
    out.col(k) = vectorize(rhs(p, unvectorize(e), a));
  }
  return out;
}

double trace_of(const LiouvilleVector& v) { return (v(0) + v(3)).real(); }

// Tr[M X] with X given in vectorized form.
complex trace_product(const Eigen::Matrix2cd& m, const LiouvilleVector& x) {
  return m(0, 0) * x(0) + m(0, 1) * x(2) + m(1, 0) * x(1) + m(1, 1) * x(3);
}

}  // namespace

std::string_view to_string(Channel c) noexcept {
  return c == Channel::transmission ? "transmission" : "reflection";
}

char channel_letter(Channel c) noexcept { return c == Channel::transmission ? 't' : 'r'; }

LiouvilleVector vectorize(const Eigen::Matrix2cd& m) {
  return LiouvilleVector(m(0, 0), m(0, 1), m(1, 0), m(1, 1));
}

Eigen::Matrix2cd unvectorize(const LiouvilleVector& v) {
  Eigen::Matrix2cd m;
  m << v(0), v(1), v(2), v(3);
  return m;
}

MasterEquation::MasterEquation(const EmitterParams& params) : params_(params) {
  params_.validate();
  l0_ = superoperator(params_, complex{0.0, 0.0});
  l_re_ = superoperator(params_, complex{1.0, 0.0}) - l0_;
  l_im_ = superoperator(params_, complex{0.0, 1.0}) - l0_;
}

LiouvilleMatrix MasterEquation::generator(complex a_in) const {
  return l0_ + a_in.real() * l_re_ + a_in.imag() * l_im_;
}

Eigen::Matrix2cd MasterEquation::apply(const Eigen::Matrix2cd& rho, complex a_in) const {
  return rhs(params_, rho, a_in);
}

Propagator::Propagator(const EmitterParams& params, const DriveField& drive)
    : params_(params), drive_(drive) {
  const MasterEquation eq(params_);
  const double h = drive_.grid().step();

  // RK4 is only stable for h * |lambda| below ~2.78; refuse steps near that edge.
  {
    const LiouvilleMatrix g = eq.generator(complex{drive_.max_abs(), 0.0});
    Eigen::ComplexEigenSolver<LiouvilleMatrix> es(g, false);
    const double radius = es.eigenvalues().cwiseAbs().maxCoeff();
    const double w = std::max(std::abs(params_.delta_e), radius);
    if (h * w > 1.0) {
      std::ostringstream os;
      os << "integration step " << h << " ns too large for generator rate " << w
         << " 1/ns (need step * rate <= 1)";
      fail(ErrorKind::integration, os.str());
    }
  }

  const LiouvilleMatrix id = LiouvilleMatrix::Identity();
  steps_.resize(drive_.grid().steps());
  LiouvilleMatrix a_mat = eq.generator(drive_.at_half(0));
  for (std::size_t i = 0; i < steps_.size(); ++i) {
    const LiouvilleMatrix b_mat = eq.generator(drive_.at_half(2 * i + 1));
    const LiouvilleMatrix c_mat = eq.generator(drive_.at_half(2 * i + 2));
    const LiouvilleMatrix k1 = a_mat;
    const LiouvilleMatrix k2 = b_mat * (id + 0.5 * h * k1);
    const LiouvilleMatrix k3 = b_mat * (id + 0.5 * h * k2);
    const LiouvilleMatrix k4 = c_mat * (id + h * k3);
    steps_[i] = id + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    a_mat = c_mat;
  }
}

Trajectory propagate(const Propagator& propagator, const SystemState& initial) {
  initial.validate();
  const TimeGrid& grid = propagator.grid();
  Trajectory traj{grid, {}};
  traj.states.reserve(grid.size());
  LiouvilleVector v = vectorize(initial.rho);
  traj.states.push_back(initial);
  for (std::size_t i = 0; i < grid.steps(); ++i) {
    v = propagator.advance(i, v);
    // Re-hermitize against round-off; RK4 conserves the trace exactly in exact arithmetic.
    Eigen::Matrix2cd rho = unvectorize(v);
    rho = 0.5 * (rho + rho.adjoint()).eval();
    if (!rho.allFinite() || std::abs(trace_of(v) - 1.0) > 1e-6 ||
        rho.cwiseAbs().maxCoeff() > 1.0 + 1e-6) {
      std::ostringstream os;
      os << "integration drifted at t = " << grid.time(i + 1) << " ns (trace " << trace_of(v)
         << "); reduce the step size";
      fail(ErrorKind::integration, os.str());
    }
    v = vectorize(rho);
    traj.states.push_back(SystemState{rho});
  }
  return traj;
}

Trajectory propagate(const EmitterParams& params, const DriveField& drive,
                     const SystemState& initial) {
  return propagate(Propagator(params, drive), initial);
}

SystemState steady_state(const EmitterParams& params, complex cw_amplitude, double detuning) {
  EmitterParams frame = params;
  frame.delta_e = params.delta_e - detuning;
  const MasterEquation eq(frame);
  LiouvilleMatrix m = eq.generator(cw_amplitude);
  // Replace one (redundant) equation by the trace condition.
  m.row(0) << 1.0, 0.0, 0.0, 1.0;
  LiouvilleVector rhs_vec = LiouvilleVector::Zero();
  rhs_vec(0) = 1.0;
  const LiouvilleVector x = m.fullPivLu().solve(rhs_vec);
  Eigen::Matrix2cd rho = unvectorize(x);
  rho = 0.5 * (rho + rho.adjoint()).eval();
  return SystemState{rho};
}

Eigen::Matrix2cd output_operator(const EmitterParams& params, Channel ch, complex a_in) {
  if (ch == Channel::reflection) return std::sqrt(params.gamma_left()) * lowering();
  return a_in * Eigen::Matrix2cd::Identity() + std::sqrt(params.gamma_right()) * lowering();
}

CorrelatorEngine::CorrelatorEngine(const EmitterParams& params, const DriveField& drive,
                                   const SystemState& initial)
    : params_(params), propagator_(params, drive), trajectory_(propagate(propagator_, initial)) {}

double CorrelatorEngine::intensity(Channel ch, std::size_t i) const {
  require(i < grid().size(), ErrorKind::range, "node index outside grid");
  const Eigen::Matrix2cd o = output_operator(params_, ch, propagator_.drive().at_node(i));
  const Eigen::Matrix2cd n = o.adjoint() * o;
  const double v = trace_product(n, vectorize(trajectory_.states[i].rho)).real();
  return std::max(0.0, v);
}

std::vector<double> CorrelatorEngine::g2_sweep(Channel first, Channel second, std::size_t i1,
                                               std::span<const std::size_t> later) const {
  require(i1 < grid().size(), ErrorKind::range, "node index outside grid");
  const DriveField& drive = propagator_.drive();
  const Eigen::Matrix2cd o1 = output_operator(params_, first, drive.at_node(i1));
  LiouvilleVector lambda = vectorize(o1 * trajectory_.states[i1].rho * o1.adjoint());

  std::vector<double> out;
  out.reserve(later.size());
  std::size_t at = i1;
  for (std::size_t target : later) {
    require(target >= at && target < grid().size(), ErrorKind::range,
            "regression targets must be ascending and not precede t1");
    for (; at < target; ++at) lambda = propagator_.advance(at, lambda);
    const Eigen::Matrix2cd o2 = output_operator(params_, second, drive.at_node(target));
    const double v = trace_product(o2.adjoint() * o2, lambda).real();
    out.push_back(std::max(0.0, v));
  }
  return out;
}

double CorrelatorEngine::g2_ordered(Channel first, Channel second, std::size_t i1,
                                    std::size_t i2) const {
  const std::size_t target[1] = {i2};
  return g2_sweep(first, second, i1, target).front();
}

double CorrelatorEngine::g2(Channel ch1, Channel ch2, std::size_t i1, std::size_t i2) const {
  if (i2 >= i1) return g2_ordered(ch1, ch2, i1, i2);
  return g2_ordered(ch2, ch1, i2, i1);
}

double intensity(const EmitterParams& params, const DriveField& drive, Channel ch, double t) {
  const std::size_t i = drive.grid().index_of(t);
  const CorrelatorEngine engine(params, drive);
  return engine.intensity(ch, i);
}

double two_time_correlator(const EmitterParams& params, const DriveField& drive, Channel ch1,
                           Channel ch2, double t1, double t2) {
  const std::size_t i1 = drive.grid().index_of(t1);
  const std::size_t i2 = drive.grid().index_of(t2);
  const CorrelatorEngine engine(params, drive);
  return engine.g2(ch1, ch2, i1, i2);
}

}  // namespace wqed
