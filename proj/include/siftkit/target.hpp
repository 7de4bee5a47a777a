#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "siftkit/corpus.hpp"

namespace siftkit {

// Conjunction of vocabulary words; sorted, no duplicates.
struct KeywordCompound {
  std::vector<int> words;

  bool operator==(const KeywordCompound&) const = default;
};

// Splits on commas and on a standalone "AND", resolves each term against the
// vocabulary (exact, lowercase, then stemmed) and skips stopwords. Throws
// not_found naming the first unknown term, invalid_argument when nothing but
// stopwords is left.
KeywordCompound parse_compound(std::string_view text, const Vocabulary& vocab);

// "w1, w2, ..." using vocabulary surface forms.
std::string compound_text(const KeywordCompound& compound, const Vocabulary& vocab);
std::vector<std::string> compound_words(const KeywordCompound& compound, const Vocabulary& vocab);

// Sum of the basis vectors of the compound's words, l2-normalized.
Eigen::VectorXd explicit_vector(const KeywordCompound& compound, int m);

// Indices of the n largest positive entries, larger first, ties to the lower
// index. Entries flagged in `excluded` are ignored.
std::vector<int> top_keywords(const Eigen::Ref<const Eigen::VectorXd>& vec, int n = 10,
                              const std::vector<bool>* excluded = nullptr);

enum class TargetSource { keyword, topic, document };

struct Provenance {
  TargetSource source = TargetSource::keyword;
  // Iteration whose feedback created the entry.
  int iteration = 0;
  // Document id, or topic index within iteration - 1.
  std::string ref;

  bool same_source(const Provenance& other) const;
};

struct Target {
  KeywordCompound keywords;
  Eigen::VectorXd vector;
  Provenance provenance;
};

struct TargetSet {
  std::vector<Target> explicit_pos;
  std::vector<Target> explicit_neg;
  std::vector<Target> implicit_pos;
  std::vector<Target> implicit_neg;

  bool empty() const {
    return explicit_pos.empty() && explicit_neg.empty() && implicit_pos.empty() && implicit_neg.empty();
  }
  // Explicit entries first, then implicit, in insertion order.
  std::vector<const Eigen::VectorXd*> positive_vectors() const;
  std::vector<const Eigen::VectorXd*> negative_vectors() const;
  // Drops every implicit entry created from `ref`; returns whether any was removed.
  bool revoke(TargetSource source, std::string_view ref);
};

struct FeedbackBatch {
  std::vector<std::string> add_good;
  std::vector<std::string> add_bad;
  std::vector<std::string> add_stop;
  std::vector<std::string> remove_good;
  std::vector<std::string> remove_bad;
  std::vector<std::string> remove_stop;
  std::vector<int> up_topics;
  std::vector<int> down_topics;
  std::vector<std::string> up_docs;
  std::vector<std::string> down_docs;

  bool operator==(const FeedbackBatch&) const = default;
  bool has_votes() const {
    return !up_topics.empty() || !down_topics.empty() || !up_docs.empty() || !down_docs.empty();
  }
};

// Throws invalid_argument when an id is both up- and downvoted.
void check_vote_conflicts(const FeedbackBatch& batch);

// What the votes of iteration t refer to: the previous iteration's topics and
// the (current) document vectors.
struct TargetContext {
  int iteration = 1;
  const Vocabulary& vocab;
  const SparseMatrix& x;
  const std::unordered_map<std::string, int>& doc_index;
  // m x k, column j is topic j of iteration - 1 (any positive scale).
  const Eigen::MatrixXd& topic_vectors;
  // When false, implicit targets only live for the iteration that created them.
  bool persist_implicit = true;
};

TargetSet build_target_model(const TargetSet& previous, const FeedbackBatch& batch, const TargetContext& context);

const char* to_string(TargetSource source) noexcept;

}  // namespace siftkit
