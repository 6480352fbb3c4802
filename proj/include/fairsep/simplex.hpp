#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <vector>

namespace fairsep {

enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit };

template <typename Scalar>
struct LpResult {
  LpStatus status = LpStatus::Infeasible;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> x;
  Scalar objective = Scalar(0);
};

/// Dense two-phase tableau simplex with Bland's rule for
///   min c.x  s.t.  A_ub x <= b_ub,  A_eq x = b_eq,  x >= 0.
/// Meant for the small mixture problems of the reduction (tens of variables);
/// Bland's rule keeps it cycle-free and the pivot sequence deterministic.
template <typename Scalar>
LpResult<Scalar> solve_lp(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& c,
                          const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& A_ub,
                          const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& b_ub,
                          const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& A_eq,
                          const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& b_eq, Scalar tol = Scalar(1e-10),
                          int max_pivots = 100000) {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Eigen::Index nx = c.size();
  const Eigen::Index mu = A_ub.rows();
  const Eigen::Index me = A_eq.rows();
  const Eigen::Index m = mu + me;

  // Columns: x | slacks (one per ub row) | artificials (one per row that needs one) | rhs
  std::vector<Eigen::Index> needs_art;
  for (Eigen::Index i = 0; i < mu; ++i)
    if (b_ub[i] < 0) needs_art.push_back(i);
  for (Eigen::Index i = 0; i < me; ++i) needs_art.push_back(mu + i);
  const Eigen::Index na = static_cast<Eigen::Index>(needs_art.size());
  const Eigen::Index ncol = nx + mu + na;

  Matrix T = Matrix::Zero(m + 1, ncol + 1);
  std::vector<Eigen::Index> basis(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < mu; ++i) {
    const Scalar sign = b_ub[i] < 0 ? Scalar(-1) : Scalar(1);
    T.row(i).head(nx) = sign * A_ub.row(i);
    T(i, nx + i) = sign;
    T(i, ncol) = sign * b_ub[i];
    basis[static_cast<std::size_t>(i)] = nx + i;
  }
  for (Eigen::Index i = 0; i < me; ++i) {
    const Scalar sign = b_eq[i] < 0 ? Scalar(-1) : Scalar(1);
    T.row(mu + i).head(nx) = sign * A_eq.row(i);
    T(mu + i, ncol) = sign * b_eq[i];
  }
  for (Eigen::Index k = 0; k < na; ++k) {
    const Eigen::Index row = needs_art[static_cast<std::size_t>(k)];
    T(row, nx + mu + k) = Scalar(1);
    basis[static_cast<std::size_t>(row)] = nx + mu + k;
  }

  auto pivot = [&](Eigen::Index row, Eigen::Index col) {
    T.row(row) /= T(row, col);
    for (Eigen::Index r = 0; r <= m; ++r)
      if (r != row && T(r, col) != Scalar(0)) T.row(r) -= T(r, col) * T.row(row);
    basis[static_cast<std::size_t>(row)] = col;
  };

  // Objective row holds reduced costs; T(m, ncol) holds -objective.
  auto load_objective = [&](const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& cost) {
    T.row(m).setZero();
    T.row(m).head(cost.size()) = cost.transpose();
    for (Eigen::Index i = 0; i < m; ++i) {
      const Eigen::Index b = basis[static_cast<std::size_t>(i)];
      if (T(m, b) != Scalar(0)) T.row(m) -= T(m, b) * T.row(i);
    }
  };

  int pivots = 0;
  auto run = [&](Eigen::Index allowed) -> LpStatus {
    for (;;) {
      Eigen::Index enter = -1;
      for (Eigen::Index j = 0; j < allowed; ++j)
        if (T(m, j) < -tol) {
          enter = j;
          break;
        }
      if (enter < 0) return LpStatus::Optimal;
      Eigen::Index leave = -1;
      Scalar best = std::numeric_limits<Scalar>::infinity();
      for (Eigen::Index i = 0; i < m; ++i) {
        if (T(i, enter) <= tol) continue;
        const Scalar ratio = T(i, ncol) / T(i, enter);
        if (ratio < best - tol ||
            (std::abs(ratio - best) <= tol && basis[static_cast<std::size_t>(i)] < basis[static_cast<std::size_t>(leave)])) {
          best = ratio;
          leave = i;
        }
      }
      if (leave < 0) return LpStatus::Unbounded;
      if (++pivots > max_pivots) return LpStatus::IterationLimit;
      pivot(leave, enter);
    }
  };

  LpResult<Scalar> result;
  if (na > 0) {
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> phase1 = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(ncol);
    phase1.tail(na).setOnes();
    load_objective(phase1);
    const LpStatus s = run(ncol);
    if (s == LpStatus::IterationLimit) {
      result.status = s;
      return result;
    }
    if (-T(m, ncol) > std::sqrt(tol)) {
      result.status = LpStatus::Infeasible;
      return result;
    }
    // Drive zero-level artificials out of the basis where possible.
    for (Eigen::Index i = 0; i < m; ++i) {
      if (basis[static_cast<std::size_t>(i)] < nx + mu) continue;
      for (Eigen::Index j = 0; j < nx + mu; ++j)
        if (std::abs(T(i, j)) > tol) {
          pivot(i, j);
          break;
        }
    }
  }
  load_objective(c);
  result.status = run(nx + mu);
  if (result.status != LpStatus::Optimal) return result;
  result.x = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(nx);
  for (Eigen::Index i = 0; i < m; ++i) {
    const Eigen::Index b = basis[static_cast<std::size_t>(i)];
    if (b < nx) result.x[b] = T(i, ncol);
  }
  result.objective = c.dot(result.x);
  return result;
}

}  // namespace fairsep
