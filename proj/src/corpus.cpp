#include "siftkit/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "siftkit/error.hpp"
#include "siftkit/porter.hpp"

namespace siftkit {

namespace detail {
extern const char* const kDefaultStopwordText;
}

namespace fs = std::filesystem;
using nlohmann::json;

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::not_found: return "not_found";
    case ErrorCode::io: return "io";
    case ErrorCode::parse: return "parse";
    case ErrorCode::empty_vocabulary: return "empty_vocabulary";
    case ErrorCode::empty_result: return "empty_result";
    case ErrorCode::conflict: return "conflict";
  }
  return "unknown";
}

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string ordinal_id(std::size_t i) {
  std::ostringstream ss;
  ss << std::setw(8) << std::setfill('0') << i;
  return ss.str();
}

std::string subject_line(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") break;  // end of the header block
    if (line.rfind("Subject:", 0) == 0) {
      auto s = line.substr(8);
      const auto first = s.find_first_not_of(" \t");
      const auto last = s.find_last_not_of(" \t\r");
      return first == std::string::npos ? std::string() : s.substr(first, last - first + 1);
    }
  }
  return {};
}

std::vector<Document> load_directory(const fs::path& root) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<Document> docs;
  docs.reserve(files.size());
  for (const auto& file : files) {
    Document d;
    d.id = fs::relative(file, root).generic_string();
    const auto parent = fs::relative(file.parent_path(), root);
    d.label = parent == "." ? std::string() : file.parent_path().filename().string();
    d.text = read_file(file);
    d.title = subject_line(d.text);
    if (d.title.empty()) d.title = file.filename().string();
    docs.push_back(std::move(d));
  }
  return docs;
}

std::string json_scalar(const json& value, const char* field, std::size_t line_no) {
  if (value.is_string()) return value.get<std::string>();
  if (value.is_number_integer()) return std::to_string(value.get<long long>());
  throw Error(ErrorCode::parse, "line " + std::to_string(line_no) + ": field '" + field + "' must be a string");
}

std::vector<Document> load_jsonl(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot read " + path.string());
  std::vector<Document> docs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::parse, "line " + std::to_string(line_no) + ": malformed JSON (" + e.what() + ")");
    }
    if (!record.is_object() || !record.contains("text") || !record["text"].is_string()) {
      throw Error(ErrorCode::parse, "line " + std::to_string(line_no) + ": record needs a string 'text' field");
    }
    Document d;
    d.text = record["text"].get<std::string>();
    d.id = record.contains("id") ? json_scalar(record["id"], "id", line_no) : ordinal_id(docs.size());
    if (record.contains("title") && !record["title"].is_null()) d.title = json_scalar(record["title"], "title", line_no);
    if (record.contains("label") && !record["label"].is_null()) d.label = json_scalar(record["label"], "label", line_no);
    docs.push_back(std::move(d));
  }
  return docs;
}

inline bool is_word_byte(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
}

void fnv_mix(std::uint64_t& h, std::string_view bytes) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  h ^= 0xff;
  h *= 1099511628211ULL;
}

}  // namespace

std::vector<Document> load_corpus(const fs::path& source) {
  std::error_code ec;
  if (!fs::exists(source, ec)) throw Error(ErrorCode::io, "corpus path does not exist: " + source.string());
  auto docs = fs::is_directory(source) ? load_directory(source) : load_jsonl(source);
  std::unordered_set<std::string> seen;
  seen.reserve(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    if (!seen.insert(docs[i].id).second) {
      throw Error(ErrorCode::parse, "record " + std::to_string(i + 1) + ": duplicate document id '" + docs[i].id + "'");
    }
  }
  return docs;
}

std::vector<std::string> tokenize_and_stem(std::string_view raw_text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (current.size() >= 2) {
      const char lead = current.front();
      if (lead == '#' || lead == '@') {
        if (lead == '#') current = '#' + porter_stem(std::string_view(current).substr(1));
        tokens.push_back(std::move(current));
      } else {
        tokens.push_back(porter_stem(current));
      }
    }
    current.clear();
  };
  for (const char ch : raw_text) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_word_byte(c)) {
      current.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : ch);
    } else if ((ch == '#' || ch == '@') && current.empty()) {
      current.push_back(ch);
    } else {
      flush();
      if (ch == '#' || ch == '@') current.push_back(ch);
    }
  }
  flush();
  return tokens;
}

namespace {

WordSet parse_stopwords(std::istream& in) {
  WordSet words;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    auto word = line.substr(first, last - first + 1);
    std::transform(word.begin(), word.end(), word.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    words.insert(std::move(word));
  }
  return words;
}

}  // namespace

const WordSet& default_stopwords() {
  static const WordSet words = [] {
    std::istringstream in(detail::kDefaultStopwordText);
    return parse_stopwords(in);
  }();
  return words;
}

WordSet read_stopword_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot read stopword file " + path.string());
  return parse_stopwords(in);
}

int Vocabulary::active_size() const {
  return static_cast<int>(std::count(stopword.begin(), stopword.end(), false));
}

int Vocabulary::find(std::string_view word) const {
  if (auto it = index.find(std::string(word)); it != index.end()) return it->second;
  std::string lower(word);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (auto it = index.find(lower); it != index.end()) return it->second;
  const auto stems = tokenize_and_stem(lower);
  if (stems.size() != 1) return -1;
  if (auto it = index.find(stems.front()); it != index.end()) return it->second;
  return -1;
}

Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& stems, int min_doc_freq,
                            const WordSet& stopwords) {
  struct Counts {
    int df = 0;
    long long tf = 0;
    int last_doc = -1;
  };
  std::unordered_map<std::string, Counts> counts;
  for (std::size_t d = 0; d < stems.size(); ++d) {
    for (const auto& tok : stems[d]) {
      auto& c = counts[tok];
      ++c.tf;
      if (c.last_doc != static_cast<int>(d)) {
        c.last_doc = static_cast<int>(d);
        ++c.df;
      }
    }
  }

  WordSet stop_forms = stopwords;
  for (const auto& w : stopwords) stop_forms.insert(porter_stem(w));

  Vocabulary vocab;
  vocab.n_docs = static_cast<int>(stems.size());
  for (const auto& [word, c] : counts) {
    if (c.df >= min_doc_freq) vocab.words.push_back(word);
  }
  std::sort(vocab.words.begin(), vocab.words.end());
  const auto m = vocab.words.size();
  vocab.doc_frequency.resize(m);
  vocab.total_frequency.resize(m);
  vocab.stopword.resize(m);
  vocab.index.reserve(m);
  bool any_active = false;
  for (std::size_t i = 0; i < m; ++i) {
    const auto& c = counts.at(vocab.words[i]);
    vocab.doc_frequency[i] = c.df;
    vocab.total_frequency[i] = c.tf;
    vocab.stopword[i] = stop_forms.count(vocab.words[i]) > 0;
    any_active = any_active || !vocab.stopword[i];
    vocab.index.emplace(vocab.words[i], static_cast<int>(i));
  }
  if (!any_active) throw Error(ErrorCode::empty_vocabulary, "no usable words remain after filtering");
  return vocab;
}

DocTermMatrix build_tfidf(const std::vector<Document>& docs, const Vocabulary& vocab, int min_tokens) {
  const int m = vocab.size();
  std::vector<double> idf(static_cast<std::size_t>(m));
  for (int w = 0; w < m; ++w) {
    const int df = vocab.doc_frequency[static_cast<std::size_t>(w)];
    idf[static_cast<std::size_t>(w)] = df > 0 ? std::log(static_cast<double>(vocab.n_docs) / df) + 1.0 : 0.0;
  }

  DocTermMatrix out;
  std::vector<Eigen::Triplet<double>> triplets;
  std::vector<int> counts(static_cast<std::size_t>(m), 0);
  std::vector<int> touched;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    touched.clear();
    int active = 0;
    for (const int w : docs[d].tokens) {
      if (!vocab.is_active(w)) continue;
      ++active;
      if (counts[static_cast<std::size_t>(w)]++ == 0) touched.push_back(w);
    }
    if (active < min_tokens) {
      out.dropped.push_back(static_cast<int>(d));
      for (const int w : touched) counts[static_cast<std::size_t>(w)] = 0;
      continue;
    }
    const int col = static_cast<int>(out.columns.size());
    out.columns.push_back(static_cast<int>(d));
    std::sort(touched.begin(), touched.end());
    double norm2 = 0.0;
    for (const int w : touched) {
      const double v = counts[static_cast<std::size_t>(w)] * idf[static_cast<std::size_t>(w)];
      norm2 += v * v;
    }
    const double inv = norm2 > 0.0 ? 1.0 / std::sqrt(norm2) : 0.0;
    for (const int w : touched) {
      const double v = counts[static_cast<std::size_t>(w)] * idf[static_cast<std::size_t>(w)] * inv;
      if (v > 0.0) triplets.emplace_back(w, col, v);
      counts[static_cast<std::size_t>(w)] = 0;
    }
  }
  out.x.resize(m, static_cast<int>(out.columns.size()));
  out.x.setFromTriplets(triplets.begin(), triplets.end());
  out.x.makeCompressed();
  return out;
}

SparseMatrix select_columns(const SparseMatrix& x, const std::vector<int>& columns) {
  SparseMatrix out(x.rows(), static_cast<Eigen::Index>(columns.size()));
  Eigen::VectorXi sizes(static_cast<Eigen::Index>(columns.size()));
  for (std::size_t j = 0; j < columns.size(); ++j) {
    const int c = columns[j];
    if (c < 0 || c >= x.cols()) throw Error(ErrorCode::invalid_argument, "column index out of range");
    sizes(static_cast<Eigen::Index>(j)) = static_cast<int>(x.col(c).nonZeros());
  }
  out.reserve(sizes);
  for (std::size_t j = 0; j < columns.size(); ++j) {
    for (SparseMatrix::InnerIterator it(x, columns[j]); it; ++it) {
      out.insert(it.row(), static_cast<Eigen::Index>(j)) = it.value();
    }
  }
  out.makeCompressed();
  return out;
}

StopwordEdit apply_stopword_edits(const Vocabulary& vocab, const std::vector<std::string>& additions,
                                  const std::vector<std::string>& removals) {
  StopwordEdit edit{vocab, false, {}};
  auto apply = [&](const std::vector<std::string>& words, bool flag) {
    for (const auto& word : words) {
      const int w = vocab.find(word);
      if (w < 0) {
        edit.unknown.push_back(word);
        continue;
      }
      const auto i = static_cast<std::size_t>(w);
      if (edit.vocab.stopword[i] != flag) {
        edit.vocab.stopword[i] = flag;
        edit.rebuild = true;
      }
    }
  };
  apply(additions, true);
  apply(removals, false);
  return edit;
}

int PreparedCorpus::find_doc(std::string_view id) const {
  auto it = doc_index.find(std::string(id));
  return it == doc_index.end() ? -1 : it->second;
}

std::uint64_t corpus_hash(const std::vector<Document>& docs, const PrepareOptions& options) {
  std::uint64_t h = 14695981039346656037ULL;
  for (const auto& d : docs) {
    fnv_mix(h, d.id);
    fnv_mix(h, d.text);
  }
  fnv_mix(h, std::to_string(options.min_doc_freq));
  fnv_mix(h, std::to_string(options.min_tokens));
  fnv_mix(h, options.use_default_stopwords ? "default" : "none");
  std::vector<std::string> extra(options.extra_stopwords.begin(), options.extra_stopwords.end());
  std::sort(extra.begin(), extra.end());
  for (const auto& w : extra) fnv_mix(h, w);
  return h;
}

PreparedCorpus prepare_corpus(std::vector<Document> docs, const PrepareOptions& options) {
  PreparedCorpus out;
  out.hash = corpus_hash(docs, options);

  std::vector<std::vector<std::string>> stems;
  stems.reserve(docs.size());
  for (const auto& d : docs) stems.push_back(tokenize_and_stem(d.text));

  int min_df = options.min_doc_freq;
  if (min_df <= 0) min_df = docs.size() > 10000 ? 3 : 1;

  WordSet stopwords = options.extra_stopwords;
  if (options.use_default_stopwords) stopwords.insert(default_stopwords().begin(), default_stopwords().end());

  out.vocab = build_vocabulary(stems, min_df, stopwords);
  for (std::size_t d = 0; d < docs.size(); ++d) {
    auto& tokens = docs[d].tokens;
    tokens.clear();
    tokens.reserve(stems[d].size());
    for (const auto& s : stems[d]) {
      if (auto it = out.vocab.index.find(s); it != out.vocab.index.end()) tokens.push_back(it->second);
    }
  }

  out.matrix = build_tfidf(docs, out.vocab, options.min_tokens);
  for (const int d : out.matrix.dropped) out.dropped_ids.push_back(docs[static_cast<std::size_t>(d)].id);
  out.documents.reserve(out.matrix.columns.size());
  for (const int d : out.matrix.columns) out.documents.push_back(std::move(docs[static_cast<std::size_t>(d)]));
  std::iota(out.matrix.columns.begin(), out.matrix.columns.end(), 0);
  out.matrix.dropped.clear();
  out.doc_index.reserve(out.documents.size());
  for (std::size_t j = 0; j < out.documents.size(); ++j) out.doc_index.emplace(out.documents[j].id, static_cast<int>(j));
  return out;
}

}  // namespace siftkit
