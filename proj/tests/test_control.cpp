#include "gaterace/control.hpp"
#include "gaterace/rng.hpp"

#include "dense_oracle.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

using namespace gaterace;
using gaterace::testing::dense_oracle;

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<ReferenceStep> constant_reference(const MpcConfig& cfg, const Vec3& p, double yaw = 0.0) {
  return std::vector<ReferenceStep>(static_cast<std::size_t>(cfg.horizon_steps), ReferenceStep{p, yaw, Vec3::Zero()});
}

std::vector<ReferenceStep> random_reference(Rng& rng, const MpcConfig& cfg, double scale) {
  std::vector<ReferenceStep> ref(static_cast<std::size_t>(cfg.horizon_steps));
  const Vec3 base(rng.normal(0, scale), rng.normal(0, scale), rng.normal(0, scale));
  const Vec3 vel(rng.normal(0, scale), rng.normal(0, scale), rng.normal(0, scale));
  for (std::size_t k = 0; k < ref.size(); ++k) {
    ref[k].point = base + cfg.dt * static_cast<double>(k + 1) * vel;
    ref[k].velocity = vel;
    ref[k].yaw = rng.normal(0, 0.3 * scale);
  }
  return ref;
}

QuadState random_state(Rng& rng, double scale) {
  QuadState x;
  x.p = Vec3(rng.normal(0, scale), rng.normal(0, scale), rng.normal(0, scale));
  x.v = Vec3(rng.normal(0, scale), rng.normal(0, scale), rng.normal(0, scale));
  x.yaw = rng.normal(0, 0.3);
  return x;
}

bool within_box(const MpcSolution& s, const MpcConfig& cfg) {
  for (const ControlInput& u : s.inputs) {
    if ((u.a.cwiseAbs().array() > cfg.a_max).any() || std::abs(u.yaw_rate) > cfg.omega_max) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST(PropagateDynamics, Examples) {
  QuadState x;
  x.v = Vec3(1, 0, 0);
  const QuadState a = propagate_dynamics(x, ControlInput{}, 0.1);
  EXPECT_LT((a.p - Vec3(0.1, 0, 0)).norm(), 1e-15);

  const QuadState b = propagate_dynamics(QuadState{}, ControlInput{Vec3(0, 0, 1), 0.0}, 1.0);
  EXPECT_LT((b.p - Vec3(0, 0, 0.5)).norm(), 1e-15);
  EXPECT_LT((b.v - Vec3(0, 0, 1)).norm(), 1e-15);

  QuadState still;
  still.p = Vec3(1, 2, 3);
  still.yaw = 0.4;
  const QuadState c = propagate_dynamics(still, ControlInput{}, 0.01);
  EXPECT_EQ(c.p, still.p);
  EXPECT_EQ(c.v, still.v);
  EXPECT_EQ(c.yaw, still.yaw);
}

TEST(PropagateDynamics, YawWrapped) {
  QuadState x;
  x.yaw = kPi - 0.01;
  const QuadState y = propagate_dynamics(x, ControlInput{Vec3::Zero(), 1.0}, 0.1);
  EXPECT_NEAR(y.yaw, -kPi + 0.09, 1e-12);
}

TEST(Saturate, ClampsComponentwise) {
  const MpcConfig cfg;
  const ControlInput u = saturate(ControlInput{Vec3(20, -20, 3), -10.0}, cfg);
  EXPECT_EQ(u.a, Vec3(cfg.a_max, -cfg.a_max, 3));
  EXPECT_EQ(u.yaw_rate, -cfg.omega_max);
}

TEST(MpcConfig, Validation) {
  MpcConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.horizon_steps = 0;
  EXPECT_THROW(cfg.validate(), ControlError);
  cfg = MpcConfig{};
  cfg.r_diag[2] = 0.0;
  EXPECT_THROW(cfg.validate(), ControlError);
  cfg = MpcConfig{};
  cfg.q_diag[0] = -1.0;
  EXPECT_THROW(cfg.validate(), ControlError);
  cfg = MpcConfig{};
  cfg.dt = 0.0;
  EXPECT_THROW(cfg.validate(), ControlError);
}

TEST(UnwrapYaw, ContinuousAcrossPi) {
  const MpcConfig cfg;
  std::vector<ReferenceStep> ref = constant_reference(cfg, Vec3::Zero());
  for (std::size_t k = 0; k < ref.size(); ++k) {
    ref[k].yaw = wrap_angle(kPi - 0.2 + 0.05 * static_cast<double>(k));
  }
  const std::vector<double> u = unwrap_yaw_references(-kPi + 0.05, ref);
  ASSERT_EQ(u.size(), ref.size());
  EXPECT_NEAR(u[0], -kPi - 0.2, 1e-12);
  for (std::size_t k = 1; k < u.size(); ++k) {
    EXPECT_NEAR(u[k] - u[k - 1], 0.05, 1e-12);
  }
}

TEST(SolveRecedingHorizon, FixedPoint) {
  const MpcConfig cfg;
  QuadState x0;
  x0.p = Vec3(1, 2, 3);
  x0.yaw = 0.3;
  const MpcSolution s = solve_receding_horizon(x0, constant_reference(cfg, x0.p, 0.3), cfg);
  for (const ControlInput& u : s.inputs) {
    EXPECT_LT(u.a.norm() + std::abs(u.yaw_rate), 1e-6);
  }
  EXPECT_LT(s.cost, 1e-12);
  ASSERT_EQ(s.states.size(), static_cast<std::size_t>(cfg.horizon_steps + 1));
}

TEST(SolveRecedingHorizon, MatchesDenseOracleWhenUnconstrained) {
  const MpcConfig cfg;
  Rng rng(41);
  int checked = 0;
  for (int i = 0; i < 500 && checked < 50; ++i) {
    const QuadState x0 = random_state(rng, 0.5);
    const std::vector<ReferenceStep> ref = random_reference(rng, cfg, 0.5);
    const auto oracle = dense_oracle(x0, ref, cfg);
    bool inactive = true;
    for (int k = 0; k < cfg.horizon_steps; ++k) {
      inactive = inactive && oracle.u.segment<3>(4 * k).cwiseAbs().maxCoeff() < 0.95 * cfg.a_max &&
                 std::abs(oracle.u[4 * k + 3]) < 0.95 * cfg.omega_max;
    }
    if (!inactive) {
      continue;
    }
    ++checked;
    const MpcSolution s = solve_receding_horizon(x0, ref, cfg);
    EXPECT_NEAR(s.cost, oracle.cost, 1e-6 * std::max(oracle.cost, 1e-12));
    EXPECT_TRUE(s.converged);
    for (int k = 0; k < cfg.horizon_steps; ++k) {
      const ControlInput& u = s.inputs[static_cast<std::size_t>(k)];
      EXPECT_LT((u.a - oracle.u.segment<3>(4 * k)).cwiseAbs().maxCoeff(), 1e-6);
      EXPECT_NEAR(u.yaw_rate, oracle.u[4 * k + 3], 1e-6);
    }
  }
  EXPECT_EQ(checked, 50);
}

TEST(SolveRecedingHorizon, ReportedCostMatchesRollout) {
  const MpcConfig cfg;
  Rng rng(42);
  for (int i = 0; i < 50; ++i) {
    const QuadState x0 = random_state(rng, 3.0);
    const std::vector<ReferenceStep> ref = random_reference(rng, cfg, 5.0);
    const MpcSolution s = solve_receding_horizon(x0, ref, cfg);
    EXPECT_NEAR(s.cost, plan_cost(x0, s.inputs, ref, cfg), 1e-9 * std::max(1.0, s.cost));
    QuadState x = x0;
    for (std::size_t k = 0; k < s.inputs.size(); ++k) {
      x = propagate_dynamics(x, s.inputs[k], cfg.dt);
      EXPECT_LT((x.p - s.states[k + 1].p).norm(), 1e-9);
    }
  }
}

TEST(SolveRecedingHorizon, FarReferenceSaturatesTowardIt) {
  const MpcConfig cfg;
  const Vec3 target(30, -40, 0);
  const MpcSolution s = solve_receding_horizon(QuadState{}, constant_reference(cfg, target), cfg);
  EXPECT_EQ(s.first.a.x(), cfg.a_max);
  EXPECT_EQ(s.first.a.y(), -cfg.a_max);
  EXPECT_NEAR(s.first.a.z(), 0.0, 1e-9);
}

TEST(SolveRecedingHorizon, SaturationIsExact) {
  const MpcConfig cfg;
  Rng rng(43);
  for (int i = 0; i < 200; ++i) {
    const MpcSolution s = solve_receding_horizon(random_state(rng, 5.0), random_reference(rng, cfg, 10.0), cfg);
    EXPECT_TRUE(within_box(s, cfg));
  }
}

TEST(SolveRecedingHorizon, NeverWorseThanZeroInput) {
  const MpcConfig cfg;
  Rng rng(44);
  const std::vector<ControlInput> zero(static_cast<std::size_t>(cfg.horizon_steps));
  for (int i = 0; i < 300; ++i) {
    const QuadState x0 = random_state(rng, 4.0);
    const std::vector<ReferenceStep> ref = random_reference(rng, cfg, 8.0);
    const MpcSolution s = solve_receding_horizon(x0, ref, cfg);
    EXPECT_LE(s.cost, plan_cost(x0, zero, ref, cfg) * (1.0 + 1e-12));
  }
}

TEST(SolveRecedingHorizon, ResolvingDoesNotIncreaseCost) {
  const MpcConfig cfg;
  Rng rng(45);
  for (int i = 0; i < 100; ++i) {
    QuadState x = random_state(rng, 2.0);
    const std::vector<ReferenceStep> ref =
        constant_reference(cfg, Vec3(rng.normal(0, 3), rng.normal(0, 3), rng.normal(0, 3)), rng.normal(0, 0.5));
    MpcSolution s = solve_receding_horizon(x, ref, cfg);
    for (int step = 0; step < 30; ++step) {
      x = propagate_dynamics(x, s.first, cfg.dt);
      const MpcSolution next = solve_receding_horizon(x, ref, cfg);
      EXPECT_LE(next.cost, s.cost * (1.0 + 1e-6) + 1e-12);
      s = next;
    }
  }
}

TEST(SolveRecedingHorizon, RejectsBadReference) {
  const MpcConfig cfg;
  std::vector<ReferenceStep> ref = constant_reference(cfg, Vec3::Zero());
  ref[3].point.x() = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(solve_receding_horizon(QuadState{}, ref, cfg), ControlError);
  ref = constant_reference(cfg, Vec3::Zero());
  ref.pop_back();
  EXPECT_THROW(solve_receding_horizon(QuadState{}, ref, cfg), ControlError);
}

TEST(TrackStep, StraightPathFromRest) {
  const MpcConfig cfg;
  const std::vector<Vec3> pts{Vec3(0, 0, 2), Vec3(60, 0, 2)};
  const ReferencePath path(pts);
  const double speed = 3.0;
  const double dt = 0.01;
  QuadState x;
  x.p = Vec3(0, 0.5, 2);
  ProgressTracker progress;
  for (int tick = 0; tick < 1200; ++tick) {
    const double s = progress.update(path, x.p);
    x = propagate_dynamics(x, track_step(x, path, s, speed, default_lookahead(speed), cfg), dt);
    if (tick > 400) {
      EXPECT_NEAR(x.v.norm(), speed, 0.1 * speed) << "tick " << tick;
      EXPECT_LT(std::hypot(x.p.y(), x.p.z() - 2.0), 0.2) << "tick " << tick;
    }
  }
}

TEST(TrackStep, ZeroSpeedHolds) {
  const MpcConfig cfg;
  const std::vector<Vec3> pts{Vec3(0, 0, 2), Vec3(10, 0, 2)};
  const ReferencePath path(pts);
  QuadState x;
  x.p = Vec3(0, 0, 2);
  for (int tick = 0; tick < 1000; ++tick) {
    x = propagate_dynamics(x, track_step(x, path, 0.0, 0.0, 0.5, cfg), 0.01);
  }
  EXPECT_LT((x.p - Vec3(0, 0, 2)).norm(), 1e-3);
}

TEST(TrackStep, ReplannedPathKeepsCommandsBounded) {
  const MpcConfig cfg;
  std::vector<Vec3> pts{Vec3(0, 0, 2), Vec3(5, 0, 2), Vec3(10, 0, 2)};
  QuadState x;
  x.p = Vec3(0, 0, 2);
  ProgressTracker progress;
  for (int tick = 0; tick < 400; ++tick) {
    if (tick == 150) {
      pts[1] += Vec3(0, 0.5, 0);
    }
    const ReferencePath path(pts);
    const double s = progress.update(path, x.p);
    const ControlInput u = track_step(x, path, s, 2.0, default_lookahead(2.0), cfg);
    ASSERT_TRUE(u.a.allFinite() && std::isfinite(u.yaw_rate));
    ASSERT_LE(u.a.cwiseAbs().maxCoeff(), cfg.a_max);
    ASSERT_LE(std::abs(u.yaw_rate), cfg.omega_max);
    x = propagate_dynamics(x, u, 0.01);
  }
}

TEST(BuildHorizonReference, MarchesAlongPath) {
  MpcConfig cfg;
  const std::vector<Vec3> pts{Vec3(0, 0, 0), Vec3(10, 0, 0)};
  const ReferencePath path(pts);
  const std::vector<ReferenceStep> ref = build_horizon_reference(path, 1.0, 2.0, 1.0, cfg);
  ASSERT_EQ(ref.size(), static_cast<std::size_t>(cfg.horizon_steps));
  EXPECT_LT((ref[0].point - Vec3(1.2, 0, 0)).norm(), 1e-12);
  EXPECT_LT((ref[0].velocity - Vec3(2, 0, 0)).norm(), 1e-12);
  EXPECT_LT((ref.back().point - Vec3(5.0, 0, 0)).norm(), 1e-12);

  // Past the end the reference stops.
  const std::vector<ReferenceStep> tail = build_horizon_reference(path, 9.0, 2.0, 1.0, cfg);
  EXPECT_LT((tail.back().point - Vec3(10, 0, 0)).norm(), 1e-12);
  EXPECT_EQ(tail.back().velocity, Vec3::Zero());

  // Commanded speed is capped at v_max.
  cfg.v_max = 1.0;
  const std::vector<ReferenceStep> capped = build_horizon_reference(path, 0.0, 5.0, 1.0, cfg);
  EXPECT_LT((capped[0].velocity - Vec3(1, 0, 0)).norm(), 1e-12);
}

TEST(SolveRecedingHorizon, SaturatedSolutionIsLocallyOptimal) {
  const MpcConfig cfg;
  Rng rng(46);
  for (int i = 0; i < 50; ++i) {
    const QuadState x0 = random_state(rng, 4.0);
    const std::vector<ReferenceStep> ref = random_reference(rng, cfg, 15.0);
    const MpcSolution s = solve_receding_horizon(x0, ref, cfg);
    EXPECT_TRUE(s.converged);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<ControlInput> probe = s.inputs;
      for (ControlInput& u : probe) {
        u.a += Vec3(rng.normal(0, 0.05), rng.normal(0, 0.05), rng.normal(0, 0.05));
        u.yaw_rate += rng.normal(0, 0.05);
        u = saturate(u, cfg);
      }
      EXPECT_GE(plan_cost(x0, probe, ref, cfg), s.cost * (1.0 - 1e-12));
    }
  }
}
