#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "siftkit/corpus.hpp"
#include "siftkit/embedding.hpp"
#include "siftkit/sifter.hpp"
#include "siftkit/target.hpp"
#include "siftkit/topics.hpp"

namespace siftkit {

struct SessionConfig {
  // JSONL file or category directory tree.
  std::string corpus;
  PrepareOptions prepare;
  // Optional stopword file layered on top of the defaults.
  std::string stopword_file;
  SiftParams sift;
  SiftMode mode = SiftMode::soft;
  int topics = 10;
  double rho0 = 1.0;
  std::uint64_t seed = 20190601;
  int max_outer = 50;
  double tol = 1e-4;
  bool persist_implicit = true;
  bool embeddings = true;
  int embedding_dim = 100;
  int window = 10;
  int embedding_iterations = 50;
  // Directory for cached word vectors; empty disables caching.
  std::string vector_cache;
  int suggestions = 10;

  void validate() const;
};

// Documents of the session; fixed for its lifetime.
struct CorpusData {
  std::vector<Document> documents;
  std::unordered_map<std::string, int> doc_index;
  std::uint64_t hash = 0;
  std::vector<std::string> dropped_ids;
};

// Vocabulary and TF-IDF matrix; replaced when stopwords change.
struct TermSpace {
  Vocabulary vocab;
  SparseMatrix x;
};

struct TopicModel {
  FactorPair factors;
  TopicSummary summary;
  // Corpus column of every column of the factorized matrix.
  std::vector<int> columns;
  // Corpus columns per topic.
  std::vector<std::vector<int>> members;
  // Topic vectors the current topics were matched against (m x 0 at iteration 0).
  Eigen::MatrixXd previous_v;
  int requested_topics = 0;
};

struct StatusCounts {
  int retained = 0;
  int incoming = 0;
  int outgoing = 0;
  int stayed_out = 0;

  bool operator==(const StatusCounts&) const = default;
};

// Sorted inputs. stayed_out = n - |prev u curr|.
StatusCounts diff_status(const std::vector<int>& previous, const std::vector<int>& current, int n);

struct TargetSnapshot {
  std::vector<std::vector<std::string>> explicit_pos;
  std::vector<std::vector<std::string>> explicit_neg;
  std::vector<std::vector<std::string>> implicit_pos;
  std::vector<std::vector<std::string>> implicit_neg;
};

TargetSnapshot snapshot_targets(const TargetSet& targets, const Vocabulary& vocab);

struct IterationRecord {
  int iteration = 0;
  int retrieved_count = 0;
  StatusCounts status;
  std::vector<std::string> top_keywords;
  TargetSnapshot targets;
  int topics = 0;
  SiftMode mode = SiftMode::soft;
  std::string timestamp;
};

struct TopicCountChange {
  int iteration = 0;
  int from = 0;
  int to = 0;
  std::string timestamp;
};

// Replayable record of a mutation.
struct SessionEvent {
  enum class Kind { iterate, topic_count };
  Kind kind = Kind::iterate;
  FeedbackBatch batch;
  std::optional<SiftMode> mode;
  int delta = 0;
};

struct SessionState {
  int iteration = 0;
  SessionConfig config;
  std::shared_ptr<const CorpusData> corpus;
  std::shared_ptr<const TermSpace> terms;
  // Null when embeddings are disabled.
  std::shared_ptr<const WordVectors> vectors;
  TargetSet targets;
  SiftResult sift;
  TopicModel model;
  std::vector<IterationRecord> history;
  std::vector<TopicCountChange> topic_count_log;
  std::vector<SessionEvent> events;

  int n_docs() const { return static_cast<int>(corpus->documents.size()); }
  const Vocabulary& vocab() const { return terms->vocab; }
  const SparseMatrix& x() const { return terms->x; }
};

// Word vectors for the session's embedding settings, read from or written to
// config.vector_cache when set. Null when embeddings are disabled.
std::shared_ptr<const WordVectors> session_vectors(const std::vector<Document>& docs, std::uint64_t corpus_hash,
                                                   const Vocabulary& vocab, const SessionConfig& config);

// Loads and preprocesses config.corpus, then initializes.
SessionState init_session(const SessionConfig& config);
// Iteration 0 on an already prepared corpus: every document retrieved, all
// scores 0, standard NMF with config.topics topics.
SessionState init_session(PreparedCorpus corpus, const SessionConfig& config);

// Stopword edits, target model, sifting, targeted topic modeling. Throws
// empty_result when nothing is retrieved; the input state is never modified.
SessionState run_iteration(const SessionState& state, const FeedbackBatch& batch,
                           std::optional<SiftMode> mode = std::nullopt);

// Re-runs topic modeling on the current retrieved set with k + delta topics.
// delta must be one of -5, -1, +1, +5 and the new k must lie in
// [2, min(50, retrieved)].
SessionState change_topic_count(const SessionState& state, int delta);

// Top-10 active words by summed TF-IDF over the given columns.
std::vector<int> retrieved_keywords(const SparseMatrix& x, const std::vector<int>& columns, const Vocabulary& vocab,
                                    int n = 10);

Suggestions session_suggestions(const SessionState& state);

// Re-applies the recorded events of `events` to a fresh iteration-0 state.
SessionState replay(const SessionState& initial, const std::vector<SessionEvent>& events);

}  // namespace siftkit
