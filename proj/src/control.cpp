#include "gaterace/control.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

namespace gaterace {

namespace {

constexpr int kMaxSweeps = 50;
constexpr double kCostTolerance = 1e-8;

// Scalar-input LQ tracking problem: x_{k+1} = A x_k + B u_k, cost
// sum_{k=1..H} (x_k - ref_{k-1})' Q (x_k - ref_{k-1}) + r sum u_k^2, u in [lo, hi].
template <int N>
struct AxisProblem {
  using Vec = Eigen::Matrix<double, N, 1>;
  using Mat = Eigen::Matrix<double, N, N>;

  Mat A;
  Vec B;
  Vec q;
  double r = 1.0;
  double lo = -1.0;
  double hi = 1.0;
  Vec x0;
  std::vector<Vec> ref;
};

template <int N>
struct AxisSolution {
  std::vector<double> u;
  std::vector<typename AxisProblem<N>::Vec> x;
  double cost = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
};

template <int N>
void rollout(const AxisProblem<N>& pb, AxisSolution<N>& sol) {
  const std::size_t h = pb.ref.size();
  sol.x.resize(h + 1);
  sol.x[0] = pb.x0;
  double cost = 0.0;
  for (std::size_t k = 0; k < h; ++k) {
    sol.x[k + 1] = pb.A * sol.x[k] + pb.B * sol.u[k];
    const auto e = (sol.x[k + 1] - pb.ref[k]).eval();
    cost += e.dot(pb.q.cwiseProduct(e)) + pb.r * sol.u[k] * sol.u[k];
  }
  sol.cost = cost;
}

// Primal active-set method on the condensed box QP. Finite and monotone, so it
// finishes the job when the active-set sweeps cycle. Starts from a feasible u.
template <int N>
void refine_active_set(const AxisProblem<N>& pb, AxisSolution<N>& sol) {
  using Vec = typename AxisProblem<N>::Vec;
  const auto h = static_cast<Eigen::Index>(pb.ref.size());

  // x_k = free_k + sum_j G_kj u_j; gradient of the half cost is H u + g.
  std::vector<Vec> free(static_cast<std::size_t>(h));
  Vec x = pb.x0;
  Vec impulse = pb.B;
  std::vector<Vec> response(static_cast<std::size_t>(h));
  for (Eigen::Index k = 0; k < h; ++k) {
    x = pb.A * x;
    free[static_cast<std::size_t>(k)] = x;
    response[static_cast<std::size_t>(k)] = impulse;  // A^k B
    impulse = pb.A * impulse;
  }
  Eigen::MatrixXd hess = Eigen::MatrixXd::Identity(h, h) * pb.r;
  Eigen::VectorXd g = Eigen::VectorXd::Zero(h);
  for (Eigen::Index k = 0; k < h; ++k) {
    const Vec e = free[static_cast<std::size_t>(k)] - pb.ref[static_cast<std::size_t>(k)];
    for (Eigen::Index i = 0; i <= k; ++i) {
      const Vec gi = response[static_cast<std::size_t>(k - i)];
      g[i] += gi.dot(pb.q.cwiseProduct(e));
      for (Eigen::Index j = 0; j <= k; ++j) {
        hess(i, j) += gi.dot(pb.q.cwiseProduct(response[static_cast<std::size_t>(k - j)]));
      }
    }
  }

  Eigen::VectorXd u = Eigen::Map<const Eigen::VectorXd>(sol.u.data(), h);
  // 0 free, -1 at lo, +1 at hi.
  std::vector<std::int8_t> bound(static_cast<std::size_t>(h), 0);
  for (Eigen::Index i = 0; i < h; ++i) {
    u[i] = std::clamp(u[i], pb.lo, pb.hi);
    bound[static_cast<std::size_t>(i)] = u[i] >= pb.hi ? 1 : (u[i] <= pb.lo ? -1 : 0);
  }
  const double tol = 1e-12 * std::max(1.0, hess.diagonal().maxCoeff());
  bool done = false;
  for (int iter = 0; iter < 10 * static_cast<int>(h) + 50 && !done; ++iter) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < h; ++i) {
      if (bound[static_cast<std::size_t>(i)] == 0) {
        idx.push_back(i);
      }
    }
    const Eigen::VectorXd grad = hess * u + g;
    Eigen::VectorXd d = Eigen::VectorXd::Zero(h);
    if (!idx.empty()) {
      const auto n = static_cast<Eigen::Index>(idx.size());
      Eigen::MatrixXd hff(n, n);
      Eigen::VectorXd gf(n);
      for (Eigen::Index a = 0; a < n; ++a) {
        gf[a] = grad[idx[static_cast<std::size_t>(a)]];
        for (Eigen::Index b = 0; b < n; ++b) {
          hff(a, b) = hess(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]);
        }
      }
      const Eigen::VectorXd df = hff.ldlt().solve(-gf);
      for (Eigen::Index a = 0; a < n; ++a) {
        d[idx[static_cast<std::size_t>(a)]] = df[a];
      }
    }
    if (d.cwiseAbs().maxCoeff() <= 1e-14 * std::max(1.0, u.cwiseAbs().maxCoeff())) {
      // Stationary on the face: release the bound with the worst multiplier.
      Eigen::Index worst = -1;
      double worst_val = tol;
      for (Eigen::Index i = 0; i < h; ++i) {
        const std::int8_t b = bound[static_cast<std::size_t>(i)];
        const double pull = b > 0 ? grad[i] : (b < 0 ? -grad[i] : 0.0);
        if (pull > worst_val) {
          worst_val = pull;
          worst = i;
        }
      }
      if (worst < 0) {
        done = true;
      } else {
        bound[static_cast<std::size_t>(worst)] = 0;
      }
      continue;
    }
    double step = 1.0;
    Eigen::Index blocking = -1;
    for (Eigen::Index i : idx) {
      if (d[i] > 0.0 && u[i] + d[i] > pb.hi) {
        const double t = (pb.hi - u[i]) / d[i];
        if (t < step) {
          step = t;
          blocking = i;
        }
      } else if (d[i] < 0.0 && u[i] + d[i] < pb.lo) {
        const double t = (pb.lo - u[i]) / d[i];
        if (t < step) {
          step = t;
          blocking = i;
        }
      }
    }
    u += step * d;
    if (blocking >= 0) {
      u[blocking] = d[blocking] > 0.0 ? pb.hi : pb.lo;
      bound[static_cast<std::size_t>(blocking)] = d[blocking] > 0.0 ? 1 : -1;
    }
  }

  AxisSolution<N> refined;
  refined.u.assign(u.data(), u.data() + h);
  for (double& v : refined.u) {
    v = std::clamp(v, pb.lo, pb.hi);
  }
  rollout(pb, refined);
  if (refined.cost <= sol.cost) {
    refined.iterations = sol.iterations;
    sol = std::move(refined);
  }
  sol.converged = done;
}

template <int N>
AxisSolution<N> solve_axis(const AxisProblem<N>& pb) {
  using Vec = typename AxisProblem<N>::Vec;
  using Mat = typename AxisProblem<N>::Mat;
  using Row = Eigen::Matrix<double, 1, N>;

  const std::size_t h = pb.ref.size();
  const Mat q = pb.q.asDiagonal();

  AxisSolution<N> best;
  best.u.assign(h, 0.0);
  rollout(pb, best);

  // 0 free, -1 held at lo, +1 held at hi.
  std::vector<std::int8_t> active(h, 0);
  std::vector<Row> gain(h, Row::Zero());
  std::vector<double> feedforward(h, 0.0);
  AxisSolution<N> trial;
  trial.u.assign(h, 0.0);
  double previous_cost = std::numeric_limits<double>::infinity();

  for (int sweep = 1; sweep <= kMaxSweeps; ++sweep) {
    best.iterations = sweep;

    // Backward Riccati pass, value function 1/2 x'Sx - s'x.
    Mat s_mat = q;
    Vec s_vec = q * pb.ref[h - 1];
    for (std::size_t k = h; k-- > 0;) {
      Mat s_next;
      Vec v_next;
      if (active[k] == 0) {
        const double curv = pb.r + pb.B.dot(s_mat * pb.B);
        const Row k_row = (pb.B.transpose() * s_mat * pb.A) / curv;
        const double ff = pb.B.dot(s_vec) / curv;
        const Mat a_cl = pb.A - pb.B * k_row;
        s_next = k_row.transpose() * pb.r * k_row + a_cl.transpose() * s_mat * a_cl;
        v_next = pb.r * ff * k_row.transpose() - a_cl.transpose() * (s_mat * pb.B) * ff + a_cl.transpose() * s_vec;
        gain[k] = k_row;
        feedforward[k] = ff;
      } else {
        const double held = active[k] > 0 ? pb.hi : pb.lo;
        s_next = pb.A.transpose() * s_mat * pb.A;
        v_next = pb.A.transpose() * s_vec - pb.A.transpose() * (s_mat * pb.B) * held;
      }
      if (k >= 1) {
        s_mat = s_next + q;
        s_vec = v_next + q * pb.ref[k - 1];
      }
    }

    // Forward pass.
    trial.x.resize(h + 1);
    trial.x[0] = pb.x0;
    for (std::size_t k = 0; k < h; ++k) {
      if (active[k] == 0) {
        trial.u[k] = -gain[k].dot(trial.x[k]) + feedforward[k];
      } else {
        trial.u[k] = active[k] > 0 ? pb.hi : pb.lo;
      }
      trial.x[k + 1] = pb.A * trial.x[k] + pb.B * trial.u[k];
    }

    // Costate and input gradient of the half cost.
    std::vector<double> grad(h, 0.0);
    Vec lambda = q * (trial.x[h] - pb.ref[h - 1]);
    for (std::size_t k = h; k-- > 0;) {
      grad[k] = pb.r * trial.u[k] + pb.B.dot(lambda);
      if (k >= 1) {
        lambda = q * (trial.x[k] - pb.ref[k - 1]) + pb.A.transpose() * lambda;
      }
    }

    bool changed = false;
    for (std::size_t k = 0; k < h; ++k) {
      std::int8_t next = active[k];
      if (active[k] == 0) {
        if (trial.u[k] > pb.hi) {
          next = 1;
        } else if (trial.u[k] < pb.lo) {
          next = -1;
        }
      } else if ((active[k] > 0 && grad[k] > 0.0) || (active[k] < 0 && grad[k] < 0.0)) {
        next = 0;
      }
      changed = changed || next != active[k];
      active[k] = next;
    }

    AxisSolution<N> feasible;
    feasible.u.resize(h);
    for (std::size_t k = 0; k < h; ++k) {
      feasible.u[k] = std::clamp(trial.u[k], pb.lo, pb.hi);
    }
    rollout(pb, feasible);
    if (feasible.cost <= best.cost) {
      feasible.iterations = sweep;
      best = std::move(feasible);
    }

    if (!changed) {
      best.converged = true;
      break;
    }
    if (std::abs(previous_cost - best.cost) < kCostTolerance * std::max(1.0, best.cost)) {
      break;
    }
    previous_cost = best.cost;
  }
  if (!best.converged) {
    refine_active_set(pb, best);
  }
  return best;
}

}  // namespace

void MpcConfig::validate() const {
  if (horizon_steps < 1) {
    throw ControlError("controller.horizon_steps must be at least 1");
  }
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw ControlError("controller.dt must be positive");
  }
  if (!q_diag.allFinite() || (q_diag.array() < 0.0).any()) {
    throw ControlError("controller.q must be nonnegative");
  }
  if (!r_diag.allFinite() || (r_diag.array() <= 0.0).any()) {
    throw ControlError("controller.r must be positive");
  }
  if (!(a_max > 0.0) || !(omega_max > 0.0) || !(v_max > 0.0)) {
    throw ControlError("controller.a_max, omega_max and v_max must be positive");
  }
}

QuadState propagate_dynamics(const QuadState& x, const ControlInput& u, double dt) {
  QuadState out;
  out.p = x.p + x.v * dt + 0.5 * u.a * dt * dt;
  out.v = x.v + u.a * dt;
  out.yaw = wrap_angle(x.yaw + u.yaw_rate * dt);
  return out;
}

ControlInput saturate(const ControlInput& u, const MpcConfig& cfg) {
  ControlInput out;
  out.a = u.a.cwiseMax(-cfg.a_max).cwiseMin(cfg.a_max);
  out.yaw_rate = std::clamp(u.yaw_rate, -cfg.omega_max, cfg.omega_max);
  return out;
}

std::vector<double> unwrap_yaw_references(double initial_yaw, std::span<const ReferenceStep> reference) {
  std::vector<double> out;
  out.reserve(reference.size());
  double prev = initial_yaw;
  for (const ReferenceStep& r : reference) {
    prev += wrap_angle(r.yaw - prev);
    out.push_back(prev);
  }
  return out;
}

double plan_cost(const QuadState& x0, std::span<const ControlInput> inputs,
                 std::span<const ReferenceStep> reference, const MpcConfig& cfg) {
  const std::vector<double> yaw_ref = unwrap_yaw_references(x0.yaw, reference);
  Vec3 p = x0.p;
  Vec3 v = x0.v;
  double yaw = x0.yaw;
  double cost = 0.0;
  const double dt = cfg.dt;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const ControlInput& u = inputs[k];
    p += v * dt + 0.5 * u.a * dt * dt;
    v += u.a * dt;
    yaw += u.yaw_rate * dt;
    const Vec3 ep = p - reference[k].point;
    const Vec3 ev = v - reference[k].velocity;
    const double ey = yaw - yaw_ref[k];
    cost += ep.dot(cfg.q_diag.head<3>().cwiseProduct(ep)) + ev.dot(cfg.q_diag.segment<3>(3).cwiseProduct(ev)) +
            cfg.q_diag[6] * ey * ey;
    cost += u.a.dot(cfg.r_diag.head<3>().cwiseProduct(u.a)) + cfg.r_diag[3] * u.yaw_rate * u.yaw_rate;
  }
  return cost;
}

MpcSolution solve_receding_horizon(const QuadState& x0, std::span<const ReferenceStep> reference,
                                   const MpcConfig& cfg) {
  const auto h = static_cast<std::size_t>(cfg.horizon_steps);
  if (reference.size() != h) {
    throw ControlError("solve_receding_horizon: reference length must equal horizon_steps");
  }
  for (const ReferenceStep& r : reference) {
    if (!r.point.allFinite() || !r.velocity.allFinite() || !std::isfinite(r.yaw)) {
      throw ControlError("solve_receding_horizon: non-finite reference");
    }
  }
  if (!x0.p.allFinite() || !x0.v.allFinite() || !std::isfinite(x0.yaw)) {
    throw ControlError("solve_receding_horizon: non-finite initial state");
  }

  const double dt = cfg.dt;
  MpcSolution sol;
  sol.inputs.assign(h, ControlInput{});
  sol.states.assign(h + 1, x0);
  sol.converged = true;

  AxisProblem<2> axis;
  axis.A << 1.0, dt, 0.0, 1.0;
  axis.B << 0.5 * dt * dt, dt;
  axis.lo = -cfg.a_max;
  axis.hi = cfg.a_max;
  axis.ref.resize(h);
  for (int j = 0; j < 3; ++j) {
    axis.q << cfg.q_diag[j], cfg.q_diag[3 + j];
    axis.r = cfg.r_diag[j];
    axis.x0 << x0.p[j], x0.v[j];
    for (std::size_t k = 0; k < h; ++k) {
      axis.ref[k] << reference[k].point[j], reference[k].velocity[j];
    }
    const AxisSolution<2> s = solve_axis(axis);
    for (std::size_t k = 0; k < h; ++k) {
      sol.inputs[k].a[j] = s.u[k];
      sol.states[k + 1].p[j] = s.x[k + 1][0];
      sol.states[k + 1].v[j] = s.x[k + 1][1];
    }
    sol.iterations = std::max(sol.iterations, s.iterations);
    sol.converged = sol.converged && s.converged;
  }

  const std::vector<double> yaw_ref = unwrap_yaw_references(x0.yaw, reference);
  AxisProblem<1> yaw;
  yaw.A << 1.0;
  yaw.B << dt;
  yaw.q << cfg.q_diag[6];
  yaw.r = cfg.r_diag[3];
  yaw.lo = -cfg.omega_max;
  yaw.hi = cfg.omega_max;
  yaw.x0 << x0.yaw;
  yaw.ref.resize(h);
  for (std::size_t k = 0; k < h; ++k) {
    yaw.ref[k] << yaw_ref[k];
  }
  const AxisSolution<1> ys = solve_axis(yaw);
  for (std::size_t k = 0; k < h; ++k) {
    sol.inputs[k].yaw_rate = ys.u[k];
    sol.states[k + 1].yaw = wrap_angle(ys.x[k + 1][0]);
  }
  sol.iterations = std::max(sol.iterations, ys.iterations);
  sol.converged = sol.converged && ys.converged;

  sol.first = sol.inputs.front();
  sol.cost = plan_cost(x0, sol.inputs, reference, cfg);
  return sol;
}

std::vector<ReferenceStep> build_horizon_reference(const ReferencePath& path, double progress, double speed,
                                                   double lookahead, const MpcConfig& cfg) {
  const double v = std::clamp(speed, 0.0, cfg.v_max);
  std::vector<ReferenceStep> ref(static_cast<std::size_t>(cfg.horizon_steps));
  for (std::size_t k = 0; k < ref.size(); ++k) {
    const double s = progress + v * cfg.dt * static_cast<double>(k + 1);
    ref[k].point = path.point_at(s);
    ref[k].velocity = s < path.length() ? Vec3(v * path.direction_at(s)) : Vec3::Zero();
    ref[k].yaw = sample_carrot(path, std::min(s, path.length()), lookahead).yaw;
  }
  return ref;
}

ControlInput track_step(const QuadState& x0, const ReferencePath& path, double progress, double speed,
                        double lookahead, const MpcConfig& cfg) {
  const std::vector<ReferenceStep> ref = build_horizon_reference(path, progress, speed, lookahead, cfg);
  return solve_receding_horizon(x0, ref, cfg).first;
}

}  // namespace gaterace
