#include <doctest.h>

#include <cmath>
#include <map>
#include <random>
#include <set>

#include "siftkit/corpus.hpp"
#include "siftkit/error.hpp"
#include "errors.hpp"
#include "synthetic.hpp"
#include "tempdir.hpp"

using namespace siftkit;
using siftkit::testing::error_code_of;
using siftkit::testing::TempDir;

namespace {

std::vector<std::vector<std::string>> stem_all(const std::vector<Document>& docs) {
  std::vector<std::vector<std::string>> out;
  for (const auto& d : docs) out.push_back(tokenize_and_stem(d.text));
  return out;
}

std::vector<Document> tokenized(std::vector<Document> docs, const Vocabulary& vocab) {
  for (auto& d : docs) {
    d.tokens.clear();
    for (const auto& s : tokenize_and_stem(d.text)) {
      if (auto it = vocab.index.find(s); it != vocab.index.end()) d.tokens.push_back(it->second);
    }
  }
  return docs;
}

}  // namespace

TEST_CASE("load_corpus reads JSONL records") {
  TempDir dir;
  const auto path = dir.write("c.jsonl",
                              "{\"id\": \"a\", \"text\": \"first doc\", \"label\": \"x\"}\n"
                              "{\"id\": \"b\", \"title\": \"T\", \"text\": \"second\"}\n"
                              "\n"
                              "{\"id\": 7, \"text\": \"third\"}\n");
  const auto docs = load_corpus(path);
  REQUIRE(docs.size() == 3);
  CHECK(docs[0].id == "a");
  CHECK(docs[0].label == "x");
  CHECK(docs[1].title == "T");
  CHECK(docs[2].id == "7");
}

TEST_CASE("load_corpus synthesizes zero-padded ordinal ids") {
  TempDir dir;
  const auto docs = load_corpus(dir.write("c.jsonl", "{\"text\": \"a\"}\n{\"text\": \"b\"}\n"));
  REQUIRE(docs.size() == 2);
  CHECK(docs[0].id == "00000000");
  CHECK(docs[1].id == "00000001");
}

TEST_CASE("load_corpus error handling") {
  TempDir dir;
  CHECK(load_corpus(dir.write("empty.jsonl", "")).empty());
  CHECK(error_code_of([&] { load_corpus(dir.path() / "missing.jsonl"); }) == ErrorCode::io);

  const auto bad = dir.write("bad.jsonl", "{\"text\": \"ok\"}\n{not json}\n");
  try {
    load_corpus(bad);
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::parse);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK(error_code_of([&] { load_corpus(dir.write("notext.jsonl", "{\"id\": \"a\"}\n")); }) == ErrorCode::parse);
  CHECK(error_code_of([&] {
          load_corpus(dir.write("dup.jsonl", "{\"id\": \"a\", \"text\": \"x\"}\n{\"id\": \"a\", \"text\": \"y\"}\n"));
        }) == ErrorCode::parse);
}

TEST_CASE("load_corpus reads a category directory tree") {
  TempDir dir;
  dir.write("tree/sci.space/101", "From: someone\nSubject: Re: orbits\n\nbody text here\n");
  dir.write("tree/rec.autos/7", "no header line at all\n");
  const auto docs = load_corpus(dir.path() / "tree");
  REQUIRE(docs.size() == 2);
  CHECK(docs[0].id == "rec.autos/7");
  CHECK(docs[0].label == "rec.autos");
  CHECK(docs[0].title == "7");
  CHECK(docs[1].label == "sci.space");
  CHECK(docs[1].title == "Re: orbits");
}

TEST_CASE("tokenize_and_stem") {
  CHECK(tokenize_and_stem("Players playing games") == std::vector<std::string>{"player", "plai", "game"});
  CHECK(tokenize_and_stem("").empty());
  CHECK(tokenize_and_stem("international internships") == std::vector<std::string>{"intern", "internship"});
  CHECK(tokenize_and_stem("I love #Travel, @Bob!") == std::vector<std::string>{"love", "#travel", "@bob"});
  CHECK(tokenize_and_stem("a b c-d e.f") == std::vector<std::string>{});
  CHECK(tokenize_and_stem("don't x2 42") == std::vector<std::string>{"don", "x2", "42"});
  const std::string text = "Repeated runs are deterministic; repeated RUNS.";
  CHECK(tokenize_and_stem(text) == tokenize_and_stem(text));
}

TEST_CASE("build_vocabulary without filtering keeps every token") {
  const std::vector<std::vector<std::string>> stems = {{"b", "a", "c"}, {"a", "d"}};
  const auto vocab = build_vocabulary(stems, 1, {});
  CHECK(vocab.words == std::vector<std::string>{"a", "b", "c", "d"});
  CHECK(vocab.doc_frequency == std::vector<int>{2, 1, 1, 1});
  CHECK(vocab.total_frequency == std::vector<long long>{2, 1, 1, 1});
  CHECK(vocab.active_size() == 4);
}

TEST_CASE("build_vocabulary flags stopwords and their stems") {
  const std::vector<std::vector<std::string>> stems = {tokenize_and_stem("the only reason was having fun")};
  const auto vocab = build_vocabulary(stems, 1, default_stopwords());
  for (const char* w : {"the", "onli", "wa", "have"}) {
    const int i = vocab.find(w);
    CAPTURE(w);
    REQUIRE(i >= 0);
    CHECK(!vocab.is_active(i));
  }
  CHECK(vocab.is_active(vocab.find("fun")));
  CHECK(vocab.is_active(vocab.find("reason")));
}

TEST_CASE("build_vocabulary reports an empty vocabulary") {
  const std::vector<std::vector<std::string>> stems = {tokenize_and_stem("the and of"), tokenize_and_stem("it is")};
  CHECK(error_code_of([&] { build_vocabulary(stems, 1, default_stopwords()); }) == ErrorCode::empty_vocabulary);
  CHECK(error_code_of([&] { build_vocabulary({{"a"}, {"b"}}, 2, {}); }) == ErrorCode::empty_vocabulary);
}

TEST_CASE("doc_frequency equals a brute-force recount") {
  testing::LabeledCorpusSpec spec;
  spec.docs_per_category = 20;
  const auto docs = testing::make_labeled_corpus(spec);
  const auto stems = stem_all(docs);
  const auto vocab = build_vocabulary(stems, 2, default_stopwords());
  std::map<std::string, int> df;
  std::map<std::string, long long> tf;
  for (const auto& d : stems) {
    for (const auto& w : std::set<std::string>(d.begin(), d.end())) ++df[w];
    for (const auto& w : d) ++tf[w];
  }
  int expected = 0;
  for (const auto& [w, c] : df) expected += c >= 2;
  CHECK(vocab.size() == expected);
  for (int i = 0; i < vocab.size(); ++i) {
    CHECK(vocab.doc_frequency[static_cast<std::size_t>(i)] == df[vocab.words[static_cast<std::size_t>(i)]]);
    CHECK(vocab.total_frequency[static_cast<std::size_t>(i)] == tf[vocab.words[static_cast<std::size_t>(i)]]);
    CHECK(vocab.doc_frequency[static_cast<std::size_t>(i)] <= vocab.n_docs);
  }
}

TEST_CASE("build_tfidf on a single one-word document") {
  std::vector<Document> docs{{"d", "", "apple", "", {}}};
  const auto vocab = build_vocabulary(stem_all(docs), 1, {});
  const auto m = build_tfidf(tokenized(docs, vocab), vocab, 1);
  REQUIRE(m.x.rows() == 1);
  REQUIRE(m.x.cols() == 1);
  CHECK(m.x.coeff(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("build_tfidf matches the weighting formula") {
  std::vector<Document> docs{{"0", "", "apple apple banana", "", {}},
                             {"1", "", "banana cherry cherry cherry", "", {}},
                             {"2", "", "apple durian", "", {}}};
  const auto vocab = build_vocabulary(stem_all(docs), 1, {});
  const auto m = build_tfidf(tokenized(docs, vocab), vocab, 1);
  REQUIRE(m.x.cols() == 3);
  const double n = 3.0;
  auto idf = [&](double df) { return std::log(n / df) + 1.0; };
  // doc 1: banana (df 2) once, cherry (df 1) three times
  const double b = 1 * idf(2);
  const double c = 3 * idf(1);
  const double norm = std::sqrt(b * b + c * c);
  CHECK(m.x.coeff(vocab.find("banana"), 1) == doctest::Approx(b / norm).epsilon(1e-12));
  CHECK(m.x.coeff(vocab.find("cherri"), 1) == doctest::Approx(c / norm).epsilon(1e-12));
  CHECK(m.x.coeff(vocab.find("apple"), 1) == 0.0);
}

TEST_CASE("build_tfidf columns are unit norm and nonnegative") {
  const auto docs = testing::make_labeled_corpus({});
  PrepareOptions options;
  const auto prepared = prepare_corpus(docs, options);
  const auto& x = prepared.matrix.x;
  double worst = 0.0;
  for (int j = 0; j < x.cols(); ++j) {
    double norm2 = 0.0;
    for (SparseMatrix::InnerIterator it(x, j); it; ++it) {
      CHECK(it.value() >= 0.0);
      norm2 += it.value() * it.value();
    }
    if (norm2 > 0.0) worst = std::max(worst, std::abs(std::sqrt(norm2) - 1.0));
  }
  CHECK(worst <= 1e-9);
}

TEST_CASE("build_tfidf drops short documents and leaves stopword rows empty") {
  std::vector<Document> docs{{"long", "", "one two three four five six", "", {}},
                             {"short", "", "one two", "", {}},
                             {"stops", "", "the the the the the one", "", {}}};
  const auto vocab = build_vocabulary(stem_all(docs), 1, default_stopwords());
  const auto m = build_tfidf(tokenized(docs, vocab), vocab, 5);
  CHECK(m.columns == std::vector<int>{0});
  CHECK(m.dropped == std::vector<int>{1, 2});

  const auto all = build_tfidf(tokenized(docs, vocab), vocab, 0);
  const int the = vocab.find("the");
  REQUIRE(the >= 0);
  CHECK(all.x.row(the).sum() == 0.0);
}

TEST_CASE("prepare_corpus renumbers kept documents") {
  std::vector<Document> docs{{"a", "", "alpha beta gamma delta epsilon", "", {}},
                             {"b", "", "too short", "", {}},
                             {"c", "", "alpha beta gamma delta zeta", "", {}}};
  const auto p = prepare_corpus(docs, {});
  CHECK(p.n_docs() == 2);
  CHECK(p.dropped_ids == std::vector<std::string>{"b"});
  CHECK(p.find_doc("c") == 1);
  CHECK(p.find_doc("b") == -1);
  CHECK(p.matrix.x.cols() == 2);
  CHECK(p.hash == corpus_hash(docs, {}));
}

TEST_CASE("apply_stopword_edits") {
  std::vector<Document> docs{{"0", "", "laughter applause laughter music", "", {}},
                             {"1", "", "music talk laughter", "", {}}};
  const auto vocab = build_vocabulary(stem_all(docs), 1, {});

  SUBCASE("adding a word removes its row from the rebuilt matrix") {
    const auto edit = apply_stopword_edits(vocab, {"laughter"}, {});
    CHECK(edit.rebuild);
    const auto x = build_tfidf(tokenized(docs, edit.vocab), edit.vocab, 0).x;
    CHECK(x.row(vocab.find("laughter")).sum() == 0.0);
    CHECK(x.row(vocab.find("music")).sum() > 0.0);
  }
  SUBCASE("add then remove restores flags but still requests a rebuild") {
    const auto edit = apply_stopword_edits(vocab, {"laughter"}, {"laughter"});
    CHECK(edit.rebuild);
    CHECK(edit.vocab.stopword == vocab.stopword);
  }
  SUBCASE("unknown words are reported, not fatal") {
    const auto edit = apply_stopword_edits(vocab, {"zzzzqq"}, {});
    CHECK(!edit.rebuild);
    CHECK(edit.unknown == std::vector<std::string>{"zzzzqq"});
  }
}

TEST_CASE("select_columns copies columns in order") {
  const auto x = testing::random_doc_term(12, 6, 0.4, 3);
  const auto s = select_columns(x, {4, 1});
  REQUIRE(s.cols() == 2);
  CHECK((Eigen::MatrixXd(s.col(0)) - Eigen::MatrixXd(x.col(4))).norm() == 0.0);
  CHECK((Eigen::MatrixXd(s.col(1)) - Eigen::MatrixXd(x.col(1))).norm() == 0.0);
  CHECK(error_code_of([&] { select_columns(x, {6}); }) == ErrorCode::invalid_argument);
}
