#include "siftkit/sifter.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <set>

#include "siftkit/error.hpp"

namespace siftkit {
namespace {

using RowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor, int>;

Eigen::MatrixXd stack(const std::vector<const Eigen::VectorXd*>& vectors, Eigen::Index m) {
  Eigen::MatrixXd out(m, static_cast<Eigen::Index>(vectors.size()));
  for (std::size_t j = 0; j < vectors.size(); ++j) {
    if (vectors[j]->size() != m) throw Error(ErrorCode::invalid_argument, "target vector has the wrong dimension");
    out.col(static_cast<Eigen::Index>(j)) = *vectors[j];
  }
  return out;
}

// Per-document mean of x_i . g over the given targets, summed left to right.
Eigen::VectorXd mean_cosines(const SparseMatrix& x, const std::vector<const Eigen::VectorXd*>& vectors) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(x.cols());
  if (vectors.empty()) return out;
  const Eigen::MatrixXd dots = x.transpose() * stack(vectors, x.rows());
  for (Eigen::Index i = 0; i < dots.rows(); ++i) {
    double sum = 0.0;
    for (Eigen::Index j = 0; j < dots.cols(); ++j) sum += dots(i, j);
    out(i) = sum / static_cast<double>(dots.cols());
  }
  return out;
}

Eigen::VectorXd dense_column(const SparseMatrix& x, int col) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(x.rows());
  for (SparseMatrix::InnerIterator it(x, col); it; ++it) v(it.row()) = it.value();
  return v;
}

int lookup_doc(const HardSiftContext& ctx, const std::string& id) {
  const auto it = ctx.doc_index.find(id);
  if (it == ctx.doc_index.end()) throw Error(ErrorCode::not_found, "unknown document id '" + id + "'");
  return it->second;
}

void check_topic(const HardSiftContext& ctx, int topic) {
  if (topic < 0 || topic >= ctx.topic_vectors.cols() || topic >= static_cast<int>(ctx.topic_members.size())) {
    throw Error(ErrorCode::not_found, "topic " + std::to_string(topic) + " does not exist");
  }
}

// Documents in which every word of the compound has a nearest word present.
std::set<int> compound_matches(const KeywordCompound& compound, const RowMatrix& rows, const HardSiftContext& ctx,
                               const SiftParams& params) {
  std::set<int> result;
  bool first = true;
  for (const int w : compound.words) {
    std::vector<int> expansion{w};
    if (ctx.vectors != nullptr && w < ctx.vectors->size()) {
      expansion.clear();
      for (const auto& nb : nearest_words(w, *ctx.vectors, params.sim_k, params.sim_tau, &ctx.stopword)) {
        expansion.push_back(nb.word);
      }
    }
    std::set<int> docs;
    for (const int e : expansion) {
      for (RowMatrix::InnerIterator it(rows, e); it; ++it) {
        if (it.value() > 0.0) docs.insert(static_cast<int>(it.col()));
      }
    }
    if (first) {
      result = std::move(docs);
      first = false;
    } else {
      std::set<int> both;
      std::set_intersection(result.begin(), result.end(), docs.begin(), docs.end(), std::inserter(both, both.end()));
      result = std::move(both);
    }
    if (result.empty()) break;
  }
  return result;
}

}  // namespace

const char* to_string(SiftMode mode) noexcept { return mode == SiftMode::hard ? "hard" : "soft"; }

SiftMode parse_sift_mode(std::string_view text) {
  if (text == "soft") return SiftMode::soft;
  if (text == "hard") return SiftMode::hard;
  throw Error(ErrorCode::invalid_argument, "sift mode must be 'soft' or 'hard', got '" + std::string(text) + "'");
}

void SiftParams::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::invalid_argument, msg); };
  if (!std::isfinite(alpha) || !std::isfinite(beta) || !std::isfinite(gamma) || !std::isfinite(delta)) {
    fail("sift parameters must be finite");
  }
  if (alpha < 0.0 || beta < 0.0 || gamma < 0.0) fail("alpha, beta and gamma must be nonnegative");
  if (!(beta > gamma)) fail("beta must be greater than gamma");
  if (std::abs(alpha + beta - gamma - 1.0) > 1e-9) fail("alpha + beta - gamma must equal 1");
  if (!(delta > 0.0 && delta < 1.0)) fail("delta must lie in (0, 1)");
  if (sim_k < 1) fail("sim_k must be at least 1");
}

std::pair<double, double> soft_relevance_components(const SparseMatrix& x, int doc, const TargetSet& targets) {
  auto mean = [&](const std::vector<const Eigen::VectorXd*>& vectors) {
    if (vectors.empty()) return 0.0;
    double sum = 0.0;
    for (const auto* g : vectors) {
      double dot = 0.0;
      for (SparseMatrix::InnerIterator it(x, doc); it; ++it) dot += it.value() * (*g)(it.row());
      sum += dot;
    }
    return sum / static_cast<double>(vectors.size());
  };
  return {mean(targets.positive_vectors()), mean(targets.negative_vectors())};
}

SiftResult soft_sift(const TargetSet& targets, const SparseMatrix& x, const Eigen::VectorXd& previous_scores,
                     const SiftParams& params) {
  params.validate();
  if (previous_scores.size() != x.cols()) {
    throw Error(ErrorCode::invalid_argument, "previous scores do not cover the corpus");
  }
  const Eigen::VectorXd plus = mean_cosines(x, targets.positive_vectors());
  const Eigen::VectorXd minus = mean_cosines(x, targets.negative_vectors());
  SiftResult out;
  out.mode = SiftMode::soft;
  out.scores.resize(x.cols());
  for (Eigen::Index i = 0; i < x.cols(); ++i) {
    out.scores(i) = params.alpha * previous_scores(i) + params.beta * plus(i) - params.gamma * minus(i);
    if (out.scores(i) > params.delta) out.retrieved.push_back(static_cast<int>(i));
  }
  return out;
}

SiftResult hard_sift(const TargetSet& targets, const FeedbackBatch& batch, const std::vector<int>& previous,
                     const HardSiftContext& ctx, const SiftParams& params) {
  params.validate();
  check_vote_conflicts(batch);
  const auto n = static_cast<int>(ctx.x.cols());
  for (const int d : previous) {
    if (d < 0 || d >= n) throw Error(ErrorCode::invalid_argument, "previous retrieved set is out of range");
  }
  for (const int t : batch.up_topics) check_topic(ctx, t);
  for (const int t : batch.down_topics) check_topic(ctx, t);

  const std::set<int> before(previous.begin(), previous.end());
  std::set<int> current = before;

  const RowMatrix rows = ctx.x;
  for (const auto& g : targets.explicit_pos) {
    const auto matches = compound_matches(g.keywords, rows, ctx, params);
    current.insert(matches.begin(), matches.end());
  }
  for (const auto& g : targets.explicit_neg) {
    for (const int d : compound_matches(g.keywords, rows, ctx, params)) current.erase(d);
  }
  for (const int t : batch.down_topics) {
    for (const int d : ctx.topic_members[static_cast<std::size_t>(t)]) current.erase(d);
  }
  for (const auto& id : batch.down_docs) {
    const Eigen::VectorXd sims = ctx.x.transpose() * dense_column(ctx.x, lookup_doc(ctx, id));
    for (const int d : before) {
      if (sims(d) > params.delta) current.erase(d);
    }
  }
  for (const int t : batch.up_topics) {
    Eigen::VectorXd v = ctx.topic_vectors.col(t);
    const double norm = v.norm();
    if (norm > 0.0) v /= norm;
    const Eigen::VectorXd sims = ctx.x.transpose() * v;
    for (int d = 0; d < n; ++d) {
      if (sims(d) > params.delta) current.insert(d);
    }
  }
  for (const auto& id : batch.up_docs) {
    const Eigen::VectorXd sims = ctx.x.transpose() * dense_column(ctx.x, lookup_doc(ctx, id));
    for (int d = 0; d < n; ++d) {
      if (sims(d) > params.delta) current.insert(d);
    }
  }

  SiftResult out;
  out.mode = SiftMode::hard;
  out.retrieved.assign(current.begin(), current.end());
  out.scores = Eigen::VectorXd::Zero(n);
  for (const int d : out.retrieved) out.scores(d) = 1.0;
  return out;
}

}  // namespace siftkit
