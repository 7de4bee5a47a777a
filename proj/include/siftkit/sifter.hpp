#pragma once

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "siftkit/corpus.hpp"
#include "siftkit/embedding.hpp"
#include "siftkit/target.hpp"

namespace siftkit {

enum class SiftMode { soft, hard };

const char* to_string(SiftMode mode) noexcept;
// "soft" or "hard"; throws invalid_argument otherwise.
SiftMode parse_sift_mode(std::string_view text);

struct SiftParams {
  double alpha = 0.7;
  double beta = 0.5;
  double gamma = 0.2;
  double delta = 0.04;
  // Nearest-word expansion used by hard sifting.
  int sim_k = 5;
  double sim_tau = 0.5;

  // Throws invalid_argument unless alpha, beta, gamma >= 0, beta > gamma,
  // alpha + beta - gamma = 1 (to 1e-9), 0 < delta < 1 and sim_k >= 1.
  void validate() const;
};

struct SiftResult {
  SiftMode mode = SiftMode::soft;
  // Sorted column indices of the retrieved documents.
  std::vector<int> retrieved;
  // One score per corpus column; hard mode stores 1 for retrieved, 0 otherwise.
  Eigen::VectorXd scores;
};

// Mean cosine of column `doc` of `x` with the positive (explicit, then
// implicit) and the negative target vectors; 0 for an empty side.
std::pair<double, double> soft_relevance_components(const SparseMatrix& x, int doc, const TargetSet& targets);

// s = alpha * previous + beta * s+ - gamma * s- for every column of `x`,
// retrieving the documents with s > delta.
SiftResult soft_sift(const TargetSet& targets, const SparseMatrix& x, const Eigen::VectorXd& previous_scores,
                     const SiftParams& params);

struct HardSiftContext {
  const SparseMatrix& x;
  const std::unordered_map<std::string, int>& doc_index;
  // m x k topic vectors of the previous iteration.
  const Eigen::MatrixXd& topic_vectors;
  // Corpus columns belonging to each previous topic.
  const std::vector<std::vector<int>>& topic_members;
  // Without vectors sim(w) is just {w}.
  const WordVectors* vectors = nullptr;
  const std::vector<bool>& stopword;
};

// The six set operations in order: add explicit positive compound matches,
// drop explicit negative compound matches, drop members of downvoted topics,
// drop previously retrieved documents close to downvoted documents, add
// documents close to upvoted topics, add documents close to upvoted
// documents. A compound matches a document when every one of its words has a
// nearest word (itself included) occurring in the document.
SiftResult hard_sift(const TargetSet& targets, const FeedbackBatch& batch, const std::vector<int>& previous,
                     const HardSiftContext& context, const SiftParams& params);

}  // namespace siftkit
