#include "siftkit/topics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "siftkit/error.hpp"
#include "siftkit/nnls.hpp"

namespace siftkit {
namespace {

constexpr int kRank2Iterations = 50;
constexpr double kRank2Tol = 1e-4;
constexpr double kPadNoise = 1e-2;

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// ||X||^2 - 2<V, X H^T> + <V^T V, H H^T>, clamped at zero against cancellation.
double fit_objective(double x_norm2, const Eigen::MatrixXd& v, const Eigen::MatrixXd& xht, const Eigen::MatrixXd& hht) {
  const double cross = (v.array() * xht.array()).sum();
  const double fit = ((v.transpose() * v).array() * hht.array()).sum();
  return std::max(0.0, x_norm2 - 2.0 * cross + fit);
}

double penalty_norm2(const Eigen::MatrixXd& v, const TargetConstraint& c) {
  double total = 0.0;
  for (std::size_t j = 0; j < c.masked.size(); ++j) {
    if (c.masked[j]) total += (v.col(static_cast<Eigen::Index>(j)) - c.v_target.col(static_cast<Eigen::Index>(j))).squaredNorm();
  }
  return total;
}

Eigen::VectorXd column_sum(const SparseMatrix& x) {
  Eigen::VectorXd s = Eigen::VectorXd::Zero(x.rows());
  for (Eigen::Index c = 0; c < x.outerSize(); ++c) {
    for (SparseMatrix::InnerIterator it(x, c); it; ++it) s(it.row()) += it.value();
  }
  return s;
}

Eigen::VectorXd normalized(Eigen::VectorXd v) {
  const double n = v.norm();
  if (n > 0.0) v /= n;
  return v;
}

// Two-way split of the columns of `x` by rank-2 NMF. Returns the side (0/1)
// of every column.
std::vector<int> rank2_split(const SparseMatrix& x, std::mt19937_64& rng) {
  const Eigen::Index m = x.rows();
  Eigen::MatrixXd v(m, 2);
  for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = uniform01(rng);
  Eigen::MatrixXd h;
  const double x_norm2 = x.squaredNorm();
  double previous = std::numeric_limits<double>::infinity();
  for (int it = 0; it < kRank2Iterations; ++it) {
    const Eigen::Matrix2d vtv = v.transpose() * v;
    h = nnls_rank2(vtv, (x.transpose() * v).transpose());
    const Eigen::Matrix2d hht = h * h.transpose();
    const Eigen::MatrixXd xht = x * h.transpose();
    v = nnls_rank2(hht, xht.transpose()).transpose();
    const double current = fit_objective(x_norm2, v, xht, hht);
    if (it > 0 && previous - current <= kRank2Tol * previous) break;
    previous = current;
  }
  std::vector<int> side(static_cast<std::size_t>(x.cols()), 0);
  const double n0 = v.col(0).norm();
  const double n1 = v.col(1).norm();
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    side[static_cast<std::size_t>(c)] = h(1, c) * n1 > h(0, c) * n0 ? 1 : 0;
  }
  return side;
}

}  // namespace

bool TargetConstraint::active() const {
  return rho > 0.0 && std::find(masked.begin(), masked.end(), true) != masked.end();
}

Eigen::MatrixXd TargetConstraint::mask() const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(v_target.rows(), static_cast<Eigen::Index>(masked.size()));
  for (std::size_t j = 0; j < masked.size(); ++j) {
    if (masked[j]) out.col(static_cast<Eigen::Index>(j)).setOnes();
  }
  return out;
}

TargetConstraint build_constraint(const std::vector<const Eigen::VectorXd*>& targets, const Eigen::MatrixXd& v,
                                  double rho0) {
  if (rho0 < 0.0) throw Error(ErrorCode::invalid_argument, "rho must be nonnegative");
  const auto k = v.cols();
  TargetConstraint c;
  c.masked.assign(static_cast<std::size_t>(k), false);
  c.v_target = Eigen::MatrixXd::Zero(v.rows(), k);
  c.rho = rho0 / static_cast<double>(std::max<std::size_t>(1, targets.size()));
  if (k == 0) return c;
  std::vector<int> counts(static_cast<std::size_t>(k), 0);
  for (const auto* g : targets) {
    if (g->size() != v.rows()) throw Error(ErrorCode::invalid_argument, "target vector has the wrong dimension");
    const Eigen::VectorXd scores = v.transpose() * *g;
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < k; ++j) {
      if (scores(j) > scores(best)) best = j;
    }
    c.assignment.push_back(static_cast<int>(best));
    c.v_target.col(best) += *g;
    ++counts[static_cast<std::size_t>(best)];
  }
  for (Eigen::Index j = 0; j < k; ++j) {
    const int n = counts[static_cast<std::size_t>(j)];
    if (n > 0) {
      c.masked[static_cast<std::size_t>(j)] = true;
      c.v_target.col(j) /= static_cast<double>(n);
    }
  }
  return c;
}

FactorPair rank2_hierarchical_init(const SparseMatrix& x, int k, std::uint64_t seed) {
  if (k < 1) throw Error(ErrorCode::invalid_argument, "number of topics must be at least 1");
  if (x.cols() == 0 || x.rows() == 0) throw Error(ErrorCode::invalid_argument, "cannot factorize an empty matrix");
  std::mt19937_64 rng(seed);

  std::vector<std::vector<int>> leaves(1);
  leaves[0].resize(static_cast<std::size_t>(x.cols()));
  for (std::size_t i = 0; i < leaves[0].size(); ++i) leaves[0][i] = static_cast<int>(i);
  std::vector<bool> splittable{true};

  while (static_cast<int>(leaves.size()) < k) {
    int pick = -1;
    for (std::size_t i = 0; i < leaves.size(); ++i) {
      if (!splittable[i]) continue;
      if (leaves[i].size() < 2) {
        splittable[i] = false;
        continue;
      }
      if (pick < 0 || leaves[i].size() > leaves[static_cast<std::size_t>(pick)].size()) pick = static_cast<int>(i);
    }
    if (pick < 0) break;
    const auto& members = leaves[static_cast<std::size_t>(pick)];
    const auto side = rank2_split(select_columns(x, members), rng);
    std::vector<int> left;
    std::vector<int> right;
    for (std::size_t i = 0; i < members.size(); ++i) (side[i] == 0 ? left : right).push_back(members[i]);
    if (left.empty() || right.empty()) {
      splittable[static_cast<std::size_t>(pick)] = false;
      continue;
    }
    leaves[static_cast<std::size_t>(pick)] = std::move(left);
    leaves.push_back(std::move(right));
    splittable.push_back(true);
  }

  FactorPair out;
  out.v = Eigen::MatrixXd::Zero(x.rows(), k);
  out.h = Eigen::MatrixXd::Zero(k, x.cols());
  std::size_t largest = 0;
  for (std::size_t j = 0; j < leaves.size(); ++j) {
    const auto col = static_cast<Eigen::Index>(j);
    out.v.col(col) = normalized(column_sum(select_columns(x, leaves[j])));
    for (const int d : leaves[j]) out.h(col, d) = 1.0;
    if (leaves[j].size() > leaves[largest].size()) largest = j;
  }
  const Eigen::VectorXd base = out.v.col(static_cast<Eigen::Index>(largest));
  const double scale = kPadNoise * std::max(base.maxCoeff(), 1.0 / std::sqrt(static_cast<double>(x.rows())));
  for (auto j = static_cast<Eigen::Index>(leaves.size()); j < k; ++j) {
    Eigen::VectorXd col = base;
    for (Eigen::Index i = 0; i < col.size(); ++i) col(i) += scale * uniform01(rng);
    out.v.col(j) = normalized(std::move(col));
  }
  return out;
}

FactorPair constrained_nmf(const SparseMatrix& x, FactorPair init, const TargetConstraint& constraint,
                           const SolverOptions& options) {
  const auto m = x.rows();
  const auto n = x.cols();
  const auto k = init.v.cols();
  if (m == 0 || n == 0) throw Error(ErrorCode::invalid_argument, "cannot factorize an empty matrix");
  if (k < 1 || k > std::min(m, n)) {
    throw Error(ErrorCode::invalid_argument, "number of topics must be in [1, " + std::to_string(std::min(m, n)) +
                                                 "], got " + std::to_string(k));
  }
  if (init.v.rows() != m || init.h.rows() != k || init.h.cols() != n) {
    throw Error(ErrorCode::invalid_argument, "initial factors do not match the matrix");
  }
  const bool constrained = constraint.active();
  if (constrained && (constraint.v_target.rows() != m || constraint.v_target.cols() != k ||
                      static_cast<Eigen::Index>(constraint.masked.size()) != k)) {
    throw Error(ErrorCode::invalid_argument, "target constraint does not match the factors");
  }

  Eigen::MatrixXd v = init.v.cwiseMax(0.0);
  Eigen::MatrixXd h = init.h.cwiseMax(0.0);
  Eigen::MatrixXd vt = v.transpose();
  const SparseMatrix xt = x.transpose();
  const double x_norm2 = x.squaredNorm();

  Eigen::VectorXd ridge = Eigen::VectorXd::Zero(k);
  Eigen::MatrixXd target_rhs;
  if (constrained) {
    for (Eigen::Index j = 0; j < k; ++j) {
      if (constraint.masked[static_cast<std::size_t>(j)]) ridge(j) = constraint.rho;
    }
    target_rhs = ridge.asDiagonal() * constraint.v_target.transpose();
  }
  auto objective = [&](const Eigen::MatrixXd& xht, const Eigen::MatrixXd& hht) {
    double value = fit_objective(x_norm2, v, xht, hht);
    if (constrained) value += constraint.rho * penalty_norm2(v, constraint);
    return value;
  };

  FactorPair out;
  {
    const Eigen::MatrixXd hht = h * h.transpose();
    out.objective_trace.push_back(objective(x * h.transpose(), hht));
  }
  for (int it = 0; it < options.max_outer; ++it) {
    const Eigen::MatrixXd vtx = (xt * v).transpose();
    h = nnls_block_pivot(v.transpose() * v, vtx, &h);

    const Eigen::MatrixXd hht = h * h.transpose();
    const Eigen::MatrixXd xht = x * h.transpose();
    Eigen::MatrixXd gram = hht;
    Eigen::MatrixXd rhs = xht.transpose();
    if (constrained) {
      gram.diagonal() += ridge;
      rhs += target_rhs;
    }
    vt = nnls_block_pivot(gram, rhs, &vt);
    v = vt.transpose();

    const double current = objective(xht, hht);
    const double previous = out.objective_trace.back();
    out.objective_trace.push_back(current);
    out.iterations = it + 1;
    if (previous <= 0.0 || (previous - current) < options.tol * previous) {
      out.converged = true;
      break;
    }
  }

  out.penalty = constrained ? std::sqrt(penalty_norm2(v, constraint)) : 0.0;
  for (Eigen::Index j = 0; j < k; ++j) {
    const double norm = v.col(j).norm();
    if (norm > 0.0) {
      v.col(j) /= norm;
      h.row(j) *= norm;
    }
  }
  out.v = std::move(v);
  out.h = std::move(h);
  return out;
}

FactorPair nmf(const SparseMatrix& x, FactorPair init, const SolverOptions& options) {
  return constrained_nmf(x, std::move(init), TargetConstraint{}, options);
}

FactorPair nmf(const SparseMatrix& x, int k, const SolverOptions& options) {
  if (k < 1 || k > std::min(x.rows(), x.cols())) {
    throw Error(ErrorCode::invalid_argument, "number of topics must be in [1, " +
                                                 std::to_string(std::min(x.rows(), x.cols())) + "], got " +
                                                 std::to_string(k));
  }
  return nmf(x, rank2_hierarchical_init(x, k, options.seed), options);
}

FactorPair targeted_nmf(const SparseMatrix& x, int k, const std::vector<const Eigen::VectorXd*>& targets,
                        double rho0, const SolverOptions& options) {
  if (k < 1 || k > std::min(x.rows(), x.cols())) {
    throw Error(ErrorCode::invalid_argument, "number of topics must be in [1, " +
                                                 std::to_string(std::min(x.rows(), x.cols())) + "], got " +
                                                 std::to_string(k));
  }
  FactorPair init = rank2_hierarchical_init(x, k, options.seed);
  const TargetConstraint constraint = build_constraint(targets, init.v, rho0);
  return constrained_nmf(x, std::move(init), constraint, options);
}

double topic_relevance(const Eigen::Ref<const Eigen::VectorXd>& topic_vector,
                       const std::vector<KeywordCompound>& compounds, const Vocabulary& vocab) {
  if (compounds.empty()) return 0.5;
  const int active = vocab.active_size();
  if (active == 0) return 0.5;
  auto rank = [&](int w) {
    const double value = topic_vector(w);
    long long above = 0;
    for (int u = 0; u < vocab.size(); ++u) {
      if (!vocab.is_active(u)) continue;
      const double other = topic_vector(u);
      if (other > value || (other == value && u < w)) ++above;
    }
    return static_cast<double>(above + 1);
  };
  double best = std::numeric_limits<double>::infinity();
  for (const auto& compound : compounds) {
    if (compound.words.empty()) continue;
    double sum = 0.0;
    for (const int w : compound.words) sum += rank(w) / static_cast<double>(active);
    best = std::min(best, sum / static_cast<double>(compound.words.size()));
  }
  if (!std::isfinite(best)) return 0.5;
  return 1.0 - best;
}

double doc_topic_closeness(const Eigen::Ref<const Eigen::VectorXd>& h) {
  const double total = h.sum();
  if (!(total > 0.0)) return 0.0;
  return h.maxCoeff() / total;
}

TopicSummary extract_topics(const FactorPair& pair, const Vocabulary& vocab, const Eigen::MatrixXd* previous_v,
                            const std::vector<KeywordCompound>& explicit_pos) {
  const auto k = pair.v.cols();
  const auto n = pair.h.cols();
  TopicSummary out;
  out.topics.resize(static_cast<std::size_t>(k));
  out.assignment.resize(static_cast<std::size_t>(n));
  out.closeness.resize(static_cast<std::size_t>(n));
  for (Eigen::Index c = 0; c < n; ++c) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < k; ++j) {
      if (pair.h(j, c) > pair.h(best, c)) best = j;
    }
    const double closeness = doc_topic_closeness(pair.h.col(c));
    if (closeness == 0.0) out.unassigned.push_back(static_cast<int>(c));
    out.assignment[static_cast<std::size_t>(c)] = static_cast<int>(best);
    out.closeness[static_cast<std::size_t>(c)] = closeness;
    out.topics[static_cast<std::size_t>(best)].members.push_back(static_cast<int>(c));
  }

  std::vector<std::vector<int>> previous_keywords;
  Eigen::MatrixXd previous_unit;
  if (previous_v != nullptr && previous_v->cols() > 0) {
    previous_unit = *previous_v;
    for (Eigen::Index j = 0; j < previous_unit.cols(); ++j) {
      const double norm = previous_unit.col(j).norm();
      if (norm > 0.0) previous_unit.col(j) /= norm;
      previous_keywords.push_back(top_keywords(previous_unit.col(j), 10, &vocab.stopword));
    }
  }

  for (Eigen::Index j = 0; j < k; ++j) {
    auto& topic = out.topics[static_cast<std::size_t>(j)];
    topic.index = static_cast<int>(j);
    topic.keywords = top_keywords(pair.v.col(j), 10, &vocab.stopword);
    topic.relevance = topic_relevance(pair.v.col(j), explicit_pos, vocab);
    if (previous_keywords.empty()) continue;
    const double norm = pair.v.col(j).norm();
    const Eigen::VectorXd cosines = previous_unit.transpose() * pair.v.col(j) / (norm > 0.0 ? norm : 1.0);
    Eigen::Index match = 0;
    for (Eigen::Index p = 1; p < cosines.size(); ++p) {
      if (cosines(p) > cosines(match)) match = p;
    }
    topic.matched_previous = static_cast<int>(match);
    const std::set<int> before(previous_keywords[static_cast<std::size_t>(match)].begin(),
                               previous_keywords[static_cast<std::size_t>(match)].end());
    for (const int w : topic.keywords) {
      if (!before.count(w)) topic.changed_keywords.push_back(w);
    }
  }
  return out;
}

}  // namespace siftkit
