#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "siftkit/corpus.hpp"

namespace siftkit {

struct CooccurrenceCounts {
  // Symmetric m x m matrix of unordered within-window pair counts; the
  // diagonal is always empty.
  SparseMatrix pairs;
  // Row sums of `pairs`.
  Eigen::VectorXd word_counts;
  // Number of unordered pairs counted.
  double total_pairs = 0.0;
};

// Counts pairs of stopword-free tokens at most `window` positions apart.
CooccurrenceCounts build_cooccurrence(const std::vector<Document>& docs, const Vocabulary& vocab, int window);

// log(pair * total / (count_i * count_j))
double epmi_score(double pair, double total, double count_i, double count_j);

// Empty when the pair never co-occurs (or either word never appears).
std::optional<double> epmi(const CooccurrenceCounts& counts, int wi, int wj);

// max(ePMI, 0) over observed pairs, stored sparse.
SparseMatrix positive_pmi(const CooccurrenceCounts& counts);

struct WordVectors {
  // One row per vocabulary word: unit l2 norm, or all zeros when the word has
  // no co-occurrence information.
  Eigen::MatrixXd vectors;
  std::vector<double> objective_trace;
  bool converged = true;

  int dim() const { return static_cast<int>(vectors.cols()); }
  int size() const { return static_cast<int>(vectors.rows()); }
  bool has_vector(int w) const { return vectors.row(w).squaredNorm() > 0.0; }
};

struct FactorizeOptions {
  int max_iterations = 50;
  double tolerance = 1e-6;
  std::uint64_t seed = 20190601;
};

// Rank-`dim` alternating least squares P ~ L R^T. The returned rows are the
// balanced left factor Q_L U S^(1/2) of the fitted product, l2-normalized.
// `converged` is false when max_iterations ran out first.
WordVectors factorize_pmi(const SparseMatrix& p, int dim, const FactorizeOptions& options = {});

struct Neighbor {
  int word = -1;
  double score = 0.0;

  bool operator==(const Neighbor&) const = default;
};

// `w` first, then up to k-1 words with cosine >= min_cosine, best first, ties
// broken by vocabulary index. Words flagged in `excluded` are skipped.
std::vector<Neighbor> nearest_words(int w, const WordVectors& vectors, int k = 5, double min_cosine = 0.5,
                                    const std::vector<bool>* excluded = nullptr);

struct Suggestions {
  std::vector<Neighbor> plus;
  std::vector<Neighbor> minus;
};

// Per polarity: top-k words by mean cosine to that polarity's words. Words in
// either input set, words flagged in `excluded` and words without a vector
// are never suggested.
Suggestions suggest_keywords(const std::vector<int>& plus_words, const std::vector<int>& minus_words,
                             const WordVectors& vectors, int k, const std::vector<bool>& excluded);

// Binary cache: magic, format version, corpus hash, rows, cols, row-major doubles.
void save_word_vectors(const std::filesystem::path& path, const WordVectors& vectors, std::uint64_t corpus_hash);
std::optional<WordVectors> load_word_vectors(const std::filesystem::path& path, std::uint64_t corpus_hash);

}  // namespace siftkit
