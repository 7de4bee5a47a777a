#pragma once

#include <Eigen/Dense>

namespace siftkit {

// Column-wise nonnegative least squares min ||A X - B||_F, X >= 0, given only
// the Gram matrix A^T A (k x k, k <= 64) and A^T B (k x r).
//
// Block principal pivoting active-set method: columns that share a passive
// set are solved together with one factorization, infeasible and non-optimal
// variables are exchanged in blocks, falling back to single exchanges when a
// column stops making progress. `warm_start` (k x r) seeds the passive sets
// with its positive entries.
Eigen::MatrixXd nnls_block_pivot(const Eigen::MatrixXd& gram, const Eigen::MatrixXd& atb,
                                 const Eigen::MatrixXd* warm_start = nullptr);

// Exact two-variable NNLS by enumerating the feasible active sets.
Eigen::MatrixXd nnls_rank2(const Eigen::Matrix2d& gram, const Eigen::MatrixXd& atb);

}  // namespace siftkit
