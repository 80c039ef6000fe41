#pragma once

// Lindblad dynamics of the driven two-level emitter and output-field
// correlators via the quantum regression theorem.
//
// Model (frame rotating at the reference frequency):
//   d rho/dt = -i[H(t), rho] + gamma_total D[s] rho + (gamma_deph/2) D[s_z] rho
//   H(t)     = delta_e s^+ s - i sqrt(gamma_R) (a_in(t) s^+ - a_in*(t) s)
// with s = |g><e| and D[L] rho = L rho L^+ - {L^+ L, rho}/2. Output operators:
//   O_t(t) = a_in(t) + sqrt(gamma_R) s     (transmission, interferes with the input)
//   O_r    = sqrt(gamma_L) s               (reflection)
// The coupling sign makes the weak-drive transmission 1 - gamma_R/(gamma2 - i delta).

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "wqed/emitter.hpp"

namespace wqed {

enum class Channel { transmission, reflection };

std::string_view to_string(Channel c) noexcept;
/// Single-letter label, "t" or "r".
char channel_letter(Channel c) noexcept;

using LiouvilleVector = Eigen::Vector4cd;  // row-major vec of a 2x2 operator
using LiouvilleMatrix = Eigen::Matrix4cd;

LiouvilleVector vectorize(const Eigen::Matrix2cd& m);
Eigen::Matrix2cd unvectorize(const LiouvilleVector& v);

/// Generator L(a) = L0 + Re(a) L_re + Im(a) L_im of the master equation.
class MasterEquation {
 public:
  explicit MasterEquation(const EmitterParams& params);

  const EmitterParams& params() const noexcept { return params_; }
  LiouvilleMatrix generator(complex a_in) const;
  /// Right-hand side evaluated directly on a 2x2 operator.
  Eigen::Matrix2cd apply(const Eigen::Matrix2cd& rho, complex a_in) const;

 private:
  EmitterParams params_;
  LiouvilleMatrix l0_;
  LiouvilleMatrix l_re_;
  LiouvilleMatrix l_im_;
};

/// Fixed-step fourth-order Runge-Kutta propagator. Since the equation is linear,
/// each step is stored as a 4x4 transfer matrix and reused for regression sweeps.
class Propagator {
 public:
  Propagator(const EmitterParams& params, const DriveField& drive);

  const TimeGrid& grid() const noexcept { return drive_.grid(); }
  const DriveField& drive() const noexcept { return drive_; }
  const EmitterParams& params() const noexcept { return params_; }

  /// Transfer matrix from node i to node i + 1.
  const LiouvilleMatrix& step_matrix(std::size_t i) const { return steps_[i]; }
  LiouvilleVector advance(std::size_t i, const LiouvilleVector& v) const { return steps_[i] * v; }

 private:
  EmitterParams params_;
  DriveField drive_;
  std::vector<LiouvilleMatrix> steps_;
};

struct Trajectory {
  TimeGrid grid;
  std::vector<SystemState> states;  // one per grid node
};

/// rho(t) on every node of the drive grid.
Trajectory propagate(const EmitterParams& params, const DriveField& drive,
                     const SystemState& initial);
Trajectory propagate(const Propagator& propagator, const SystemState& initial);

/// Fixed point of the master equation under cw drive a_in(t) = amplitude * exp(-i detuning t),
/// expressed in the frame co-rotating with the drive.
SystemState steady_state(const EmitterParams& params, complex cw_amplitude, double detuning);

/// Output operator for a channel given the instantaneous input amplitude.
Eigen::Matrix2cd output_operator(const EmitterParams& params, Channel ch, complex a_in);

/// Cached trajectory plus regression sweeps. Immutable after construction and
/// safe to query from several threads.
class CorrelatorEngine {
 public:
  CorrelatorEngine(const EmitterParams& params, const DriveField& drive,
                   const SystemState& initial = SystemState::ground());

  const TimeGrid& grid() const noexcept { return propagator_.grid(); }
  const Trajectory& trajectory() const noexcept { return trajectory_; }
  const Propagator& propagator() const noexcept { return propagator_; }

  /// G1_ch at node i.
  double intensity(Channel ch, std::size_t i) const;
  /// G2_{first,second}(t_i1, t_i2) for i2 >= i1: the first operator acts at the earlier time.
  double g2_ordered(Channel first, Channel second, std::size_t i1, std::size_t i2) const;
  /// G2(t1, t2) for any ordering, using the symmetry (ch1, t1) <-> (ch2, t2).
  double g2(Channel ch1, Channel ch2, std::size_t i1, std::size_t i2) const;
  /// G2_{first,second}(t_i1, t_j) for every node j in `later` (each >= i1, ascending).
  std::vector<double> g2_sweep(Channel first, Channel second, std::size_t i1,
                               std::span<const std::size_t> later) const;

 private:
  EmitterParams params_;
  Propagator propagator_;
  Trajectory trajectory_;
};

/// G1_ch(t) evaluated at the grid node nearest t.
double intensity(const EmitterParams& params, const DriveField& drive, Channel ch, double t);

/// G2_{ch1,ch2}(t1, t2) = <O1^+(t1) O2^+(t2) O2(t2) O1(t1)>, evaluated at grid nodes.
double two_time_correlator(const EmitterParams& params, const DriveField& drive, Channel ch1,
                           Channel ch2, double t1, double t2);

}  // namespace wqed
