#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "siftkit/corpus.hpp"
#include "siftkit/target.hpp"

namespace siftkit {

struct FactorPair {
  // m x k word-topic and k x n topic-document factors.
  Eigen::MatrixXd v;
  Eigen::MatrixXd h;
  // trace[0] is the objective at the starting point, then one value per outer iteration.
  std::vector<double> objective_trace;
  int iterations = 0;
  bool converged = false;
  // ||M o V - V_G||_F of the final iterate, before column normalization.
  double penalty = 0.0;
};

struct SolverOptions {
  int max_outer = 50;
  double tol = 1e-4;
  std::uint64_t seed = 20190601;
};

struct TargetConstraint {
  // Per topic column: whether it is pulled toward a target.
  std::vector<bool> masked;
  // m x k, column j is the mean of the targets assigned to topic j.
  Eigen::MatrixXd v_target;
  double rho = 0.0;
  // Topic chosen for each input target.
  std::vector<int> assignment;

  bool active() const;
  // The m x k 0/1 mask M.
  Eigen::MatrixXd mask() const;
};

// Assigns every target to the topic column of `v` with the largest dot
// product (ties to the lowest index). rho = rho0 / max(1, #targets).
TargetConstraint build_constraint(const std::vector<const Eigen::VectorXd*>& targets, const Eigen::MatrixXd& v,
                                  double rho0);

// Divisive clustering by rank-2 NMF: the leaf with the most documents is
// split until there are k leaves. Leaves that cannot be split are skipped;
// missing columns are filled with perturbed copies of the largest leaf's
// centroid. V holds unit leaf centroids, H the 0/1 leaf indicators.
FactorPair rank2_hierarchical_init(const SparseMatrix& x, int k, std::uint64_t seed);

// min ||X - VH||_F^2 + rho ||M o V - V_G||_F^2 over V, H >= 0 by alternating
// nonnegative least squares, H first. Stops when the relative decrease drops
// below `tol`. V columns are normalized at the end, H rows rescaled to match.
FactorPair constrained_nmf(const SparseMatrix& x, FactorPair init, const TargetConstraint& constraint,
                           const SolverOptions& options = {});

FactorPair nmf(const SparseMatrix& x, FactorPair init, const SolverOptions& options = {});
FactorPair nmf(const SparseMatrix& x, int k, const SolverOptions& options = {});

// Rank-2 hierarchical init, constraint built against the init's V, then
// constrained_nmf.
FactorPair targeted_nmf(const SparseMatrix& x, int k, const std::vector<const Eigen::VectorXd*>& targets,
                        double rho0, const SolverOptions& options = {});

// 1 - min over compounds of mean(rank(w) / |W|), where rank is the 1-based
// position of w among active words sorted by `topic_vector` descending (ties
// by index) and |W| is the active vocabulary size. 0.5 without compounds.
double topic_relevance(const Eigen::Ref<const Eigen::VectorXd>& topic_vector,
                       const std::vector<KeywordCompound>& compounds, const Vocabulary& vocab);

// max(h) / sum(h); 0 for an all-zero column.
double doc_topic_closeness(const Eigen::Ref<const Eigen::VectorXd>& h);

struct Topic {
  int index = 0;
  std::vector<int> keywords;
  // Column indices into the factorized matrix.
  std::vector<int> members;
  double relevance = 0.5;
  // Keywords absent from the matched previous topic.
  std::vector<int> changed_keywords;
  // Previous topic with the highest cosine, -1 without a previous model.
  int matched_previous = -1;
};

struct TopicSummary {
  std::vector<Topic> topics;
  // Per column of H.
  std::vector<int> assignment;
  std::vector<double> closeness;
  // Columns of H that were all zero (assigned to topic 0).
  std::vector<int> unassigned;
};

// Membership by argmax of H columns (ties to the lowest topic), top-10
// active keywords per topic, relevance against `explicit_pos`.
TopicSummary extract_topics(const FactorPair& pair, const Vocabulary& vocab, const Eigen::MatrixXd* previous_v,
                            const std::vector<KeywordCompound>& explicit_pos);

}  // namespace siftkit
