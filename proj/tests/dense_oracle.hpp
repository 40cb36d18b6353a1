#pragma once

#include "gaterace/control.hpp"

#include <Eigen/Dense>

#include <vector>

namespace gaterace::testing {

// Dense stacked least squares over all inputs of the full 7-state model.
struct DenseOracle {
  Eigen::VectorXd u;
  double cost = 0.0;
};

inline DenseOracle dense_oracle(const QuadState& x0, const std::vector<ReferenceStep>& ref, const MpcConfig& cfg) {
  const int n = cfg.horizon_steps;
  const double dt = cfg.dt;
  using Mat7 = Eigen::Matrix<double, 7, 7>;
  using Mat74 = Eigen::Matrix<double, 7, 4>;
  Mat7 a = Mat7::Identity();
  Mat74 b = Mat74::Zero();
  for (int i = 0; i < 3; ++i) {
    a(i, 3 + i) = dt;
    b(i, i) = 0.5 * dt * dt;
    b(3 + i, i) = dt;
  }
  b(6, 3) = dt;

  Eigen::Matrix<double, 7, 1> x;
  x << x0.p, x0.v, x0.yaw;
  // x_k = phi_k x0 + sum_j gamma_{k,j} u_j, stacked into X = Phi x0 + G U.
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(7 * n, 4 * n);
  Eigen::VectorXd free = Eigen::VectorXd::Zero(7 * n);
  Eigen::VectorXd target(7 * n);
  Mat7 a_pow = Mat7::Identity();
  for (int k = 1; k <= n; ++k) {
    a_pow = a * a_pow;
    free.segment<7>(7 * (k - 1)) = a_pow * x;
    Mat7 a_j = Mat7::Identity();
    for (int j = k - 1; j >= 0; --j) {
      g.block<7, 4>(7 * (k - 1), 4 * j) = a_j * b;
      a_j = a * a_j;
    }
    const ReferenceStep& r = ref[static_cast<std::size_t>(k - 1)];
    target.segment<7>(7 * (k - 1)) << r.point, r.velocity, r.yaw;
  }
  Eigen::VectorXd sq(7 * n);
  Eigen::VectorXd sr(4 * n);
  for (int k = 0; k < n; ++k) {
    sq.segment<7>(7 * k) = cfg.q_diag.cwiseSqrt();
    sr.segment<4>(4 * k) = cfg.r_diag.cwiseSqrt();
  }
  Eigen::MatrixXd lhs(11 * n, 4 * n);
  lhs << sq.asDiagonal() * g, Eigen::MatrixXd(sr.asDiagonal());
  Eigen::VectorXd rhs(11 * n);
  rhs << sq.asDiagonal() * (target - free), Eigen::VectorXd::Zero(4 * n);
  DenseOracle out;
  out.u = lhs.colPivHouseholderQr().solve(rhs);
  out.cost = (lhs * out.u - rhs).squaredNorm();
  return out;
}

}  // namespace gaterace::testing
