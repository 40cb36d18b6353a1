#pragma once

#include "gaterace/geometry.hpp"
#include "gaterace/planning.hpp"

#include <Eigen/Dense>

#include <span>
#include <stdexcept>
#include <vector>

namespace gaterace {

class ControlError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Translational double integrator with a yaw angle.
struct QuadState {
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  double yaw = 0.0;
};

/// Commanded acceleration and yaw rate.
struct ControlInput {
  Vec3 a = Vec3::Zero();
  double yaw_rate = 0.0;
};

using StateWeights = Eigen::Matrix<double, 7, 1>;  // [p(3), v(3), yaw]

struct MpcConfig {
  int horizon_steps = 20;
  double dt = 0.1;
  StateWeights q_diag = (StateWeights() << 10, 10, 10, 1, 1, 1, 1).finished();
  Vec4 r_diag{0.1, 0.1, 0.1, 0.1};  // [a(3), yaw rate]
  double a_max = 8.0;
  double omega_max = 3.0;
  double v_max = 6.0;

  void validate() const;
};

/// One horizon step of the tracking reference.
struct ReferenceStep {
  Vec3 point = Vec3::Zero();
  double yaw = 0.0;
  Vec3 velocity = Vec3::Zero();
};

struct MpcSolution {
  ControlInput first;
  std::vector<ControlInput> inputs;  // horizon_steps entries
  std::vector<QuadState> states;     // horizon_steps + 1 entries, states[0] = x0
  double cost = 0.0;
  int iterations = 0;
  bool converged = false;  // active set settled (KKT point of the box QP)
};

/// p' = p + v dt + a dt^2 / 2, v' = v + a dt, yaw' = wrap(yaw + w dt).
QuadState propagate_dynamics(const QuadState& x, const ControlInput& u, double dt);

/// Clamps an input to the configured box.
ControlInput saturate(const ControlInput& u, const MpcConfig& cfg);

/// Yaw references unwrapped into a continuous sequence starting next to
/// the initial yaw, so the linear yaw model never sees a 2 pi jump.
std::vector<double> unwrap_yaw_references(double initial_yaw, std::span<const ReferenceStep> reference);

/// Tracking cost sum_{k=1..N} xbar_k' Q xbar_k + sum_{k=0..N-1} u_k' R u_k
/// of a rollout of `inputs` from x0, with yaw errors taken against the
/// unwrapped references.
double plan_cost(const QuadState& x0, std::span<const ControlInput> inputs,
                 std::span<const ReferenceStep> reference, const MpcConfig& cfg);

/// Box-constrained linear-quadratic tracking over the horizon.
///
/// The model decouples into three double-integrator axes and one yaw
/// integrator with diagonal weights, so each axis is solved as its own
/// scalar-input QP: Riccati sweeps over the free inputs, with clamped
/// inputs held at their bounds, alternated with a primal-dual active-set
/// update. Stops when the active set settles, the cost changes by less
/// than 1e-8, or after 50 sweeps. Throws ControlError on a non-finite
/// reference or a reference of the wrong length.
MpcSolution solve_receding_horizon(const QuadState& x0, std::span<const ReferenceStep> reference,
                                   const MpcConfig& cfg);

/// Horizon reference marching along the path from `progress` at `speed`,
/// velocity along the local segment, yaw toward the carrot `lookahead`
/// ahead of each step.
std::vector<ReferenceStep> build_horizon_reference(const ReferencePath& path, double progress, double speed,
                                                   double lookahead, const MpcConfig& cfg);

/// Reference builder plus solver; returns the first input.
ControlInput track_step(const QuadState& x0, const ReferencePath& path, double progress, double speed,
                        double lookahead, const MpcConfig& cfg);

}  // namespace gaterace
