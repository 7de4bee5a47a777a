#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <Eigen/SparseCore>

namespace siftkit {

using WordSet = std::unordered_set<std::string>;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

struct Document {
  std::string id;
  std::string title;
  std::string text;
  std::string label;
  // Vocabulary indices of the document's in-vocabulary tokens, in order.
  std::vector<int> tokens;
};

// Reads a JSONL file (`id`, `title`, `text`, `label`) or a directory tree with
// one subdirectory per category holding plain-text files.
std::vector<Document> load_corpus(const std::filesystem::path& source);

// Lowercases, splits on anything that is not a letter/digit (a leading `#` or
// `@` stays attached), drops tokens shorter than two characters and stems the
// rest. Non-ASCII bytes count as letters and are left unstemmed.
std::vector<std::string> tokenize_and_stem(std::string_view raw_text);

// Standard English stopword list shipped with the library.
const WordSet& default_stopwords();

// One word per line, `#` starts a comment.
WordSet read_stopword_file(const std::filesystem::path& path);

struct Vocabulary {
  std::vector<std::string> words;
  std::vector<int> doc_frequency;
  std::vector<long long> total_frequency;
  std::vector<bool> stopword;
  std::unordered_map<std::string, int> index;
  // Documents counted when building doc_frequency.
  int n_docs = 0;

  int size() const { return static_cast<int>(words.size()); }
  int active_size() const;
  bool is_active(int w) const { return !stopword[static_cast<std::size_t>(w)]; }
  // Exact match first, then the stemmed form. -1 when absent.
  int find(std::string_view word) const;
};

// `stems` holds each document's stemmed tokens. Words are indexed in
// lexicographic order. A word is flagged as a stopword when it or its stem
// appears in `stopwords`. Throws empty_vocabulary when no unflagged word
// reaches `min_doc_freq`.
Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& stems, int min_doc_freq,
                            const WordSet& stopwords);

struct DocTermMatrix {
  // m x n, row i is vocabulary word i, columns l2-normalized.
  SparseMatrix x;
  // Input document index of each column.
  std::vector<int> columns;
  // Input documents with fewer than min_tokens active tokens.
  std::vector<int> dropped;
};

// tf = raw count, idf = ln(n / df) + 1. Stopword rows are left empty.
DocTermMatrix build_tfidf(const std::vector<Document>& docs, const Vocabulary& vocab, int min_tokens);

// Copy of the listed columns of `x`, in the given order.
SparseMatrix select_columns(const SparseMatrix& x, const std::vector<int>& columns);

struct StopwordEdit {
  Vocabulary vocab;
  bool rebuild = false;
  std::vector<std::string> unknown;
};

// Additions are applied before removals; `rebuild` is set when any flag
// flipped along the way.
StopwordEdit apply_stopword_edits(const Vocabulary& vocab, const std::vector<std::string>& additions,
                                  const std::vector<std::string>& removals);

struct PrepareOptions {
  // <= 0 picks 3 for corpora above 10K documents and 1 otherwise.
  int min_doc_freq = 0;
  int min_tokens = 5;
  WordSet extra_stopwords;
  bool use_default_stopwords = true;
};

// Documents kept after preprocessing together with the vocabulary and the
// TF-IDF matrix; column j of `matrix.x` is `documents[j]`.
struct PreparedCorpus {
  std::vector<Document> documents;
  std::vector<std::string> dropped_ids;
  Vocabulary vocab;
  DocTermMatrix matrix;
  std::unordered_map<std::string, int> doc_index;
  std::uint64_t hash = 0;

  int n_docs() const { return static_cast<int>(documents.size()); }
  int find_doc(std::string_view id) const;
};

PreparedCorpus prepare_corpus(std::vector<Document> docs, const PrepareOptions& options);

// FNV-1a over document ids/texts and the preprocessing options.
std::uint64_t corpus_hash(const std::vector<Document>& docs, const PrepareOptions& options);

}  // namespace siftkit
