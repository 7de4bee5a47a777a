#include "siftkit/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>

#include <Eigen/QR>
#include <Eigen/SVD>

#include "siftkit/error.hpp"

namespace siftkit {
namespace {

using PairCount = std::pair<std::uint64_t, double>;

constexpr std::size_t kPairBuffer = std::size_t{1} << 24;

std::uint64_t pair_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) | static_cast<std::uint32_t>(b);
}

// Sorts the raw key buffer and folds it into the running sorted totals.
void fold_pairs(std::vector<std::uint64_t>& buffer, std::vector<PairCount>& totals) {
  std::sort(buffer.begin(), buffer.end());
  std::vector<PairCount> runs;
  for (std::size_t i = 0; i < buffer.size();) {
    std::size_t j = i;
    while (j < buffer.size() && buffer[j] == buffer[i]) ++j;
    runs.emplace_back(buffer[i], static_cast<double>(j - i));
    i = j;
  }
  buffer.clear();
  std::vector<PairCount> merged;
  merged.reserve(totals.size() + runs.size());
  std::size_t a = 0;
  std::size_t b = 0;
  while (a < totals.size() || b < runs.size()) {
    if (b == runs.size() || (a < totals.size() && totals[a].first < runs[b].first)) {
      merged.push_back(totals[a++]);
    } else if (a == totals.size() || runs[b].first < totals[a].first) {
      merged.push_back(runs[b++]);
    } else {
      merged.emplace_back(totals[a].first, totals[a].second + runs[b].second);
      ++a;
      ++b;
    }
  }
  totals.swap(merged);
}

// Normal-equation solve that tolerates rank-deficient Gram matrices.
Eigen::MatrixXd solve_right(const Eigen::MatrixXd& product, const Eigen::MatrixXd& gram) {
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(gram);
  return cod.solve(product.transpose()).transpose();
}

}  // namespace

CooccurrenceCounts build_cooccurrence(const std::vector<Document>& docs, const Vocabulary& vocab, int window) {
  if (window < 1) throw Error(ErrorCode::invalid_argument, "co-occurrence window must be positive");
  const int m = vocab.size();
  std::vector<std::uint64_t> buffer;
  std::vector<PairCount> totals;
  std::vector<int> seq;
  for (const auto& doc : docs) {
    seq.clear();
    for (const int w : doc.tokens) {
      if (vocab.is_active(w)) seq.push_back(w);
    }
    const auto len = seq.size();
    for (std::size_t i = 0; i < len; ++i) {
      const std::size_t stop = std::min(len, i + static_cast<std::size_t>(window) + 1);
      for (std::size_t j = i + 1; j < stop; ++j) {
        if (seq[i] != seq[j]) buffer.push_back(pair_key(seq[i], seq[j]));
      }
    }
    if (buffer.size() >= kPairBuffer) fold_pairs(buffer, totals);
  }
  fold_pairs(buffer, totals);

  CooccurrenceCounts out;
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(totals.size() * 2);
  for (const auto& [key, count] : totals) {
    const int a = static_cast<int>(key >> 32);
    const int b = static_cast<int>(key & 0xffffffffu);
    triplets.emplace_back(a, b, count);
    triplets.emplace_back(b, a, count);
    out.total_pairs += count;
  }
  out.pairs.resize(m, m);
  out.pairs.setFromTriplets(triplets.begin(), triplets.end());
  out.pairs.makeCompressed();
  out.word_counts = Eigen::VectorXd::Zero(m);
  for (int col = 0; col < out.pairs.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(out.pairs, col); it; ++it) out.word_counts(col) += it.value();
  }
  return out;
}

double epmi_score(double pair, double total, double count_i, double count_j) {
  return std::log(pair * total / (count_i * count_j));
}

std::optional<double> epmi(const CooccurrenceCounts& counts, int wi, int wj) {
  const double pair = counts.pairs.coeff(wi, wj);
  const double ci = counts.word_counts(wi);
  const double cj = counts.word_counts(wj);
  if (pair <= 0.0 || ci <= 0.0 || cj <= 0.0) return std::nullopt;
  return epmi_score(pair, counts.total_pairs, ci, cj);
}

SparseMatrix positive_pmi(const CooccurrenceCounts& counts) {
  const auto m = counts.pairs.rows();
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(counts.pairs.nonZeros()));
  for (int col = 0; col < counts.pairs.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(counts.pairs, col); it; ++it) {
      const double v = epmi_score(it.value(), counts.total_pairs, counts.word_counts(it.row()), counts.word_counts(col));
      if (v > 0.0) triplets.emplace_back(static_cast<int>(it.row()), col, v);
    }
  }
  SparseMatrix p(m, m);
  p.setFromTriplets(triplets.begin(), triplets.end());
  p.makeCompressed();
  return p;
}

WordVectors factorize_pmi(const SparseMatrix& p, int dim, const FactorizeOptions& options) {
  const int m = static_cast<int>(p.rows());
  if (p.rows() != p.cols()) throw Error(ErrorCode::invalid_argument, "PMI matrix must be square");
  if (dim <= 0 || dim > m) {
    throw Error(ErrorCode::invalid_argument,
                "embedding dimension must be in [1, " + std::to_string(m) + "], got " + std::to_string(dim));
  }

  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd right(m, dim);
  for (Eigen::Index i = 0; i < right.size(); ++i) right.data()[i] = normal(rng);
  Eigen::MatrixXd left(m, dim);

  const SparseMatrix pt = p.transpose();
  const double p_norm2 = p.squaredNorm();

  WordVectors out;
  out.converged = false;
  for (int it = 0; it < options.max_iterations; ++it) {
    left = solve_right(p * right, right.transpose() * right);
    const Eigen::MatrixXd pt_left = pt * left;
    right = solve_right(pt_left, left.transpose() * left);
    const double cross = (pt_left.array() * right.array()).sum();
    const double fit = ((left.transpose() * left).array() * (right.transpose() * right).array()).sum();
    const double objective = std::max(0.0, p_norm2 - 2.0 * cross + fit);
    out.objective_trace.push_back(objective);
    if (out.objective_trace.size() >= 2) {
      const double prev = out.objective_trace[out.objective_trace.size() - 2];
      if (prev - objective <= options.tolerance * std::max(prev, 1e-300)) {
        out.converged = true;
        break;
      }
    }
    if (objective <= 1e-24 * std::max(p_norm2, 1.0)) {
      out.converged = true;
      break;
    }
  }

  // Balanced split of L R^T: thin QR of both factors, SVD of the small core.
  Eigen::HouseholderQR<Eigen::MatrixXd> qr_left(left);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr_right(right);
  const Eigen::MatrixXd q_left = qr_left.householderQ() * Eigen::MatrixXd::Identity(m, dim);
  const Eigen::MatrixXd r_left = qr_left.matrixQR().topRows(dim).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd r_right = qr_right.matrixQR().topRows(dim).triangularView<Eigen::Upper>();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(r_left * r_right.transpose(), Eigen::ComputeFullU);
  out.vectors = q_left * svd.matrixU() * svd.singularValues().cwiseSqrt().asDiagonal();

  const double scale = out.vectors.cwiseAbs().maxCoeff();
  for (int i = 0; i < m; ++i) {
    const double norm = out.vectors.row(i).norm();
    if (norm > 1e-10 * std::max(scale, 1e-300)) {
      out.vectors.row(i) /= norm;
    } else {
      out.vectors.row(i).setZero();
    }
  }
  return out;
}

std::vector<Neighbor> nearest_words(int w, const WordVectors& vectors, int k, double min_cosine,
                                    const std::vector<bool>* excluded) {
  std::vector<Neighbor> out{{w, 1.0}};
  if (!vectors.has_vector(w) || k <= 1) return out;
  const Eigen::VectorXd sims = vectors.vectors * vectors.vectors.row(w).transpose();
  std::vector<Neighbor> candidates;
  for (int u = 0; u < vectors.size(); ++u) {
    if (u == w || (excluded && (*excluded)[static_cast<std::size_t>(u)])) continue;
    const double s = std::clamp(sims(u), -1.0, 1.0);
    if (s >= min_cosine && vectors.has_vector(u)) candidates.push_back({u, s});
  }
  const auto keep = std::min(candidates.size(), static_cast<std::size_t>(k - 1));
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep), candidates.end(),
                    [](const Neighbor& a, const Neighbor& b) {
                      return a.score != b.score ? a.score > b.score : a.word < b.word;
                    });
  out.insert(out.end(), candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep));
  return out;
}

namespace {

std::vector<Neighbor> suggest_for(const std::vector<int>& words, const std::vector<bool>& blocked,
                                  const WordVectors& vectors, int k) {
  if (words.empty() || k <= 0) return {};
  Eigen::VectorXd centroid = Eigen::VectorXd::Zero(vectors.dim());
  for (const int w : words) centroid += vectors.vectors.row(w).transpose();
  centroid /= static_cast<double>(words.size());
  const Eigen::VectorXd scores = vectors.vectors * centroid;
  std::vector<Neighbor> candidates;
  for (int u = 0; u < vectors.size(); ++u) {
    if (blocked[static_cast<std::size_t>(u)] || !vectors.has_vector(u)) continue;
    candidates.push_back({u, std::clamp(scores(u), -1.0, 1.0)});
  }
  const auto keep = std::min(candidates.size(), static_cast<std::size_t>(k));
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep), candidates.end(),
                    [](const Neighbor& a, const Neighbor& b) {
                      return a.score != b.score ? a.score > b.score : a.word < b.word;
                    });
  candidates.resize(keep);
  return candidates;
}

}  // namespace

Suggestions suggest_keywords(const std::vector<int>& plus_words, const std::vector<int>& minus_words,
                             const WordVectors& vectors, int k, const std::vector<bool>& excluded) {
  std::vector<bool> blocked = excluded;
  blocked.resize(static_cast<std::size_t>(vectors.size()), false);
  for (const int w : plus_words) blocked[static_cast<std::size_t>(w)] = true;
  for (const int w : minus_words) blocked[static_cast<std::size_t>(w)] = true;
  auto dedup = [](std::vector<int> words) {
    std::sort(words.begin(), words.end());
    words.erase(std::unique(words.begin(), words.end()), words.end());
    return words;
  };
  return {suggest_for(dedup(plus_words), blocked, vectors, k), suggest_for(dedup(minus_words), blocked, vectors, k)};
}

namespace {
constexpr char kMagic[4] = {'S', 'K', 'W', 'V'};
constexpr std::uint32_t kFormatVersion = 1;
}  // namespace

void save_word_vectors(const std::filesystem::path& path, const WordVectors& vectors, std::uint64_t corpus_hash) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  const std::int64_t rows = vectors.size();
  const std::int64_t cols = vectors.dim();
  out.write(kMagic, sizeof kMagic);
  out.write(reinterpret_cast<const char*>(&kFormatVersion), sizeof kFormatVersion);
  out.write(reinterpret_cast<const char*>(&corpus_hash), sizeof corpus_hash);
  out.write(reinterpret_cast<const char*>(&rows), sizeof rows);
  out.write(reinterpret_cast<const char*>(&cols), sizeof cols);
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> data = vectors.vectors;
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(double)));
  if (!out) throw Error(ErrorCode::io, "short write to " + path.string());
}

std::optional<WordVectors> load_word_vectors(const std::filesystem::path& path, std::uint64_t corpus_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  char magic[4];
  std::uint32_t version = 0;
  std::uint64_t hash = 0;
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  in.read(magic, sizeof magic);
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  in.read(reinterpret_cast<char*>(&hash), sizeof hash);
  in.read(reinterpret_cast<char*>(&rows), sizeof rows);
  in.read(reinterpret_cast<char*>(&cols), sizeof cols);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0 || version != kFormatVersion || hash != corpus_hash ||
      rows < 0 || cols < 0) {
    return std::nullopt;
  }
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> data(rows, cols);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(double)));
  if (!in) return std::nullopt;
  WordVectors out;
  out.vectors = data;
  return out;
}

}  // namespace siftkit
