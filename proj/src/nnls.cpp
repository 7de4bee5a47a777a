#include "siftkit/nnls.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <numeric>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include "siftkit/error.hpp"

namespace siftkit {
namespace {

using Mask = std::uint64_t;

std::vector<int> mask_indices(Mask mask) {
  std::vector<int> idx;
  while (mask) {
    idx.push_back(std::countr_zero(mask));
    mask &= mask - 1;
  }
  return idx;
}

// Solves the unconstrained least squares restricted to each column's passive
// set and refreshes the gradient y = gram x - atb for those columns.
void solve_passive(const Eigen::MatrixXd& gram, const Eigen::MatrixXd& atb, const std::vector<Mask>& passive,
                   std::vector<int>& cols, Eigen::MatrixXd& x, Eigen::MatrixXd& y) {
  std::sort(cols.begin(), cols.end(), [&](int a, int b) {
    return passive[static_cast<std::size_t>(a)] != passive[static_cast<std::size_t>(b)]
               ? passive[static_cast<std::size_t>(a)] < passive[static_cast<std::size_t>(b)]
               : a < b;
  });
  std::size_t start = 0;
  while (start < cols.size()) {
    const Mask mask = passive[static_cast<std::size_t>(cols[start])];
    std::size_t stop = start;
    while (stop < cols.size() && passive[static_cast<std::size_t>(cols[stop])] == mask) ++stop;
    const std::vector<int> group(cols.begin() + static_cast<std::ptrdiff_t>(start),
                                 cols.begin() + static_cast<std::ptrdiff_t>(stop));
    if (mask == 0) {
      for (const int c : group) {
        x.col(c).setZero();
        y.col(c) = -atb.col(c);
      }
    } else {
      const auto idx = mask_indices(mask);
      const Eigen::MatrixXd sub = gram(idx, idx);
      const Eigen::MatrixXd rhs = atb(idx, group);
      Eigen::MatrixXd sol;
      Eigen::LLT<Eigen::MatrixXd> llt(sub);
      if (llt.info() == Eigen::Success) {
        sol = llt.solve(rhs);
      } else {
        sol = Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(sub).solve(rhs);
      }
      for (std::size_t g = 0; g < group.size(); ++g) {
        const int c = group[g];
        x.col(c).setZero();
        for (std::size_t i = 0; i < idx.size(); ++i) x(idx[i], c) = sol(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(g));
      }
      y(Eigen::all, group) = gram(Eigen::all, idx) * sol - atb(Eigen::all, group);
    }
    start = stop;
  }
}

}  // namespace

Eigen::MatrixXd nnls_block_pivot(const Eigen::MatrixXd& gram, const Eigen::MatrixXd& atb,
                                 const Eigen::MatrixXd* warm_start) {
  const auto k = gram.rows();
  const auto r = atb.cols();
  if (gram.cols() != k || atb.rows() != k) throw Error(ErrorCode::invalid_argument, "nnls: dimension mismatch");
  if (k > 64) throw Error(ErrorCode::invalid_argument, "nnls: at most 64 variables are supported");

  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(k, r);
  Eigen::MatrixXd y = -atb;
  if (k == 0 || r == 0) return x;

  // Variables with an all-zero design column never influence the fit.
  Mask dead = 0;
  for (Eigen::Index i = 0; i < k; ++i) {
    if (!(gram(i, i) > 0.0)) dead |= Mask{1} << i;
  }

  const double tol_y = 1e-12 * (1.0 + atb.cwiseAbs().maxCoeff());
  constexpr double tol_x = 1e-12;

  std::vector<Mask> passive(static_cast<std::size_t>(r), 0);
  std::vector<int> pending;
  if (warm_start != nullptr) {
    for (Eigen::Index c = 0; c < r; ++c) {
      Mask m = 0;
      for (Eigen::Index i = 0; i < k; ++i) {
        if ((*warm_start)(i, c) > 0.0) m |= Mask{1} << i;
      }
      passive[static_cast<std::size_t>(c)] = m & ~dead;
      if (passive[static_cast<std::size_t>(c)] != 0) pending.push_back(static_cast<int>(c));
    }
    solve_passive(gram, atb, passive, pending, x, y);
  }

  auto clean = [&](int c) {
    for (Eigen::Index i = 0; i < k; ++i) {
      if (std::abs(x(i, c)) < tol_x) x(i, c) = 0.0;
      if (std::abs(y(i, c)) < tol_y) y(i, c) = 0.0;
    }
  };
  for (Eigen::Index c = 0; c < r; ++c) clean(static_cast<int>(c));

  std::vector<int> backup(static_cast<std::size_t>(r), 3);
  std::vector<int> best(static_cast<std::size_t>(r), static_cast<int>(k) + 1);
  std::vector<int> check(static_cast<std::size_t>(r));
  std::iota(check.begin(), check.end(), 0);

  const int max_rounds = 20 * static_cast<int>(k) + 100;
  for (int round = 0; round < max_rounds && !check.empty(); ++round) {
    pending.clear();
    for (const int c : check) {
      const auto cu = static_cast<std::size_t>(c);
      Mask nonopt = 0;
      Mask infeasible = 0;
      for (Eigen::Index i = 0; i < k; ++i) {
        const Mask bit = Mask{1} << i;
        if (dead & bit) continue;
        if (passive[cu] & bit) {
          if (x(i, c) < 0.0) infeasible |= bit;
        } else if (y(i, c) < 0.0) {
          nonopt |= bit;
        }
      }
      const int violations = std::popcount(nonopt | infeasible);
      if (violations == 0) continue;
      if (violations < best[cu]) {
        best[cu] = violations;
        backup[cu] = 3;
        passive[cu] = (passive[cu] | nonopt) & ~infeasible;
      } else if (backup[cu] >= 1) {
        --backup[cu];
        passive[cu] = (passive[cu] | nonopt) & ~infeasible;
      } else {
        const int i = 63 - std::countl_zero(nonopt | infeasible);
        passive[cu] ^= Mask{1} << i;
      }
      pending.push_back(c);
    }
    if (pending.empty()) {
      check.clear();
      break;
    }
    solve_passive(gram, atb, passive, pending, x, y);
    for (const int c : pending) clean(c);
    check = pending;
  }
  // Only reachable through round exhaustion on a degenerate problem.
  if (!check.empty()) x = x.cwiseMax(0.0);
  return x;
}

Eigen::MatrixXd nnls_rank2(const Eigen::Matrix2d& gram, const Eigen::MatrixXd& atb) {
  if (atb.rows() != 2) throw Error(ErrorCode::invalid_argument, "nnls_rank2: expected two rows");
  const double g00 = gram(0, 0);
  const double g01 = gram(0, 1);
  const double g11 = gram(1, 1);
  const double det = g00 * g11 - g01 * g01;
  const bool regular = det > 1e-14 * g00 * g11 && g00 > 0.0 && g11 > 0.0;
  Eigen::MatrixXd x(2, atb.cols());
  for (Eigen::Index c = 0; c < atb.cols(); ++c) {
    const double b0 = atb(0, c);
    const double b1 = atb(1, c);
    if (regular) {
      const double u = (g11 * b0 - g01 * b1) / det;
      const double v = (g00 * b1 - g01 * b0) / det;
      if (u >= 0.0 && v >= 0.0) {
        x(0, c) = u;
        x(1, c) = v;
        continue;
      }
    }
    // Optimum lies on an axis; the objective drops by b_i^2 / g_ii there.
    const double p0 = std::max(b0, 0.0);
    const double p1 = std::max(b1, 0.0);
    const double gain0 = g00 > 0.0 ? p0 * p0 / g00 : 0.0;
    const double gain1 = g11 > 0.0 ? p1 * p1 / g11 : 0.0;
    if (gain0 >= gain1) {
      x(0, c) = g00 > 0.0 ? p0 / g00 : 0.0;
      x(1, c) = 0.0;
    } else {
      x(0, c) = 0.0;
      x(1, c) = p1 / g11;
    }
  }
  return x;
}

}  // namespace siftkit
