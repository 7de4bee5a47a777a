#include "synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include <json.hpp>

namespace siftkit::testing {
namespace {

double uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::size_t pick(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

const std::vector<std::string> kSportShared = {
    "game",   "team",   "player", "playing", "season", "score",  "coach",   "league", "win",   "fans",
    "played", "games",  "teams",  "players", "playoff", "stadium", "points", "defense", "goals", "record"};
const std::vector<std::string> kBaseball = {"pitcher", "inning", "batting", "homer", "bullpen", "catcher",
                                            "shortstop", "dodgers", "yankees", "strikeout", "umpire", "baseball"};
const std::vector<std::string> kHockey = {"puck", "goalie", "rink", "penguins", "bruins", "faceoff",
                                          "slapshot", "zamboni", "hockey", "powerplay", "icing", "nhl"};
const std::vector<std::vector<std::string>> kDistractors = {
    {"orbit", "rocket", "launch", "satellite", "nasa", "shuttle", "lunar", "telescope", "astronaut", "propulsion"},
    {"graphics", "polygon", "render", "shader", "texture", "bitmap", "vertex", "raytrace", "pixel", "opengl"},
    {"congress", "senate", "election", "policy", "taxes", "governor", "ballot", "lobby", "treaty", "veto"},
    {"engine", "sedan", "brakes", "mileage", "dealer", "transmission", "tires", "horsepower", "clutch", "exhaust"},
    {"encryption", "cipher", "clipper", "escrow", "keys", "privacy", "wiretap", "crypto", "algorithm", "secure"},
    {"doctor", "patient", "disease", "medicine", "symptoms", "clinic", "vitamin", "diagnosis", "therapy", "allergy"},
    {"scripture", "faith", "church", "bible", "belief", "prayer", "gospel", "theology", "atheism", "morality"},
    {"motorcycle", "helmet", "riding", "throttle", "harley", "biker", "leathers", "countersteer", "dod", "kawasaki"},
};
const std::vector<std::string> kCommon = {
    "people",  "time",     "think",    "know",    "good",    "year",   "question", "point",   "problem", "article",
    "writes",  "believe",  "something", "number", "work",    "right",  "information", "system", "world", "news",
    "really",  "different", "reason",  "little",  "evidence", "group", "interesting", "agree", "post",  "email"};

// Zipf(1) cumulative weights over n ranks.
std::vector<double> zipf_cdf(int n) {
  std::vector<double> cdf(static_cast<std::size_t>(n));
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    total += 1.0 / (i + 1.0);
    cdf[static_cast<std::size_t>(i)] = total;
  }
  for (auto& c : cdf) c /= total;
  return cdf;
}

std::size_t sample(const std::vector<double>& cdf, std::mt19937_64& rng) {
  const double u = uniform(rng);
  const auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
  return std::min(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
}

// Letters-only pseudo word for rank i, so stemming keeps them distinct enough.
std::string pseudo_word(int i) {
  static const char* kSyllables[] = {"ka", "lo", "mi", "ne", "ru", "ta", "zo", "vi", "pe", "su",
                                     "da", "fo", "gu", "hi", "jo", "ba", "wu", "xe", "yo", "co"};
  std::string w;
  int v = i;
  do {
    w += kSyllables[v % 20];
    v /= 20;
  } while (v > 0);
  return w + "x";
}

}  // namespace

std::vector<std::string> sports_labels() { return {"rec.sport.baseball", "rec.sport.hockey"}; }

std::vector<Document> make_labeled_corpus(const LabeledCorpusSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  std::vector<std::string> labels = sports_labels();
  std::vector<const std::vector<std::string>*> own = {&kBaseball, &kHockey};
  const int distractors = std::min<int>(spec.distractor_categories, static_cast<int>(kDistractors.size()));
  static const char* kNames[] = {"sci.space", "comp.graphics", "talk.politics", "rec.autos",
                                 "sci.crypt", "sci.med",       "soc.religion",  "rec.motorcycles"};
  for (int c = 0; c < distractors; ++c) {
    labels.emplace_back(kNames[c]);
    own.push_back(&kDistractors[static_cast<std::size_t>(c)]);
  }

  std::vector<Document> docs;
  int serial = 0;
  for (int d = 0; d < spec.docs_per_category; ++d) {
    for (std::size_t c = 0; c < labels.size(); ++c) {
      const bool sport = c < 2;
      const int length = spec.min_length + static_cast<int>(pick(rng, static_cast<std::size_t>(spec.max_length - spec.min_length + 1)));
      std::string text;
      for (int t = 0; t < length; ++t) {
        const double u = uniform(rng);
        const std::vector<std::string>* pool;
        if (u < 0.45) {
          pool = own[c];
        } else if (u < 0.65) {
          // sports share game vocabulary; others borrow a little of it
          pool = sport || uniform(rng) < 0.1 ? &kSportShared : own[c];
        } else {
          pool = &kCommon;
        }
        if (!text.empty()) text += ' ';
        text += (*pool)[pick(rng, pool->size())];
      }
      char id[32];
      std::snprintf(id, sizeof id, "%s/%05d", labels[c].c_str(), serial++);
      docs.push_back({id, labels[c] + " post " + std::to_string(d), text, labels[c], {}});
    }
  }
  return docs;
}

std::vector<Document> make_tweet_corpus(int n_docs, int vocabulary, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::string> words;
  words.reserve(static_cast<std::size_t>(vocabulary));
  const std::vector<std::string> seeded = {"travel", "trip",  "flight", "hotel",   "beach",   "vacation",
                                           "intern", "music", "game",   "weather", "airport", "holiday"};
  for (const auto& w : seeded) words.push_back(w);
  for (int i = static_cast<int>(words.size()); i < vocabulary; ++i) words.push_back(pseudo_word(i));
  const auto cdf = zipf_cdf(vocabulary);
  const std::vector<std::string> tags = {"#travel", "#music", "#news", "#jobs", "#food", "#love"};

  std::vector<Document> docs;
  docs.reserve(static_cast<std::size_t>(n_docs));
  for (int d = 0; d < n_docs; ++d) {
    const int length = 6 + static_cast<int>(pick(rng, 10));
    std::string text;
    for (int t = 0; t < length; ++t) {
      if (!text.empty()) text += ' ';
      text += words[sample(cdf, rng)];
    }
    if (uniform(rng) < 0.3) text += ' ' + tags[pick(rng, tags.size())];
    if (uniform(rng) < 0.1) text += " @user" + std::to_string(pick(rng, 500));
    char id[16];
    std::snprintf(id, sizeof id, "t%07d", d);
    docs.push_back({id, "", std::move(text), "", {}});
  }
  return docs;
}

std::string to_jsonl(const std::vector<Document>& docs) {
  std::string out;
  for (const auto& d : docs) {
    nlohmann::ordered_json j;
    j["id"] = d.id;
    j["title"] = d.title;
    j["text"] = d.text;
    j["label"] = d.label;
    out += j.dump() + "\n";
  }
  return out;
}

Eigen::MatrixXd random_nonneg(int rows, int cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Eigen::MatrixXd out(rows, cols);
  for (Eigen::Index i = 0; i < out.size(); ++i) out.data()[i] = uniform(rng);
  return out;
}

SparseMatrix to_sparse(const Eigen::MatrixXd& dense) { return dense.sparseView(0.0, 0.0); }

SparseMatrix random_doc_term(int m, int n, double density, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Eigen::Triplet<double>> triplets;
  for (int j = 0; j < n; ++j) {
    std::vector<std::pair<int, double>> col;
    for (int i = 0; i < m; ++i) {
      if (uniform(rng) < density) col.emplace_back(i, 0.1 + uniform(rng));
    }
    if (col.empty()) col.emplace_back(static_cast<int>(pick(rng, static_cast<std::size_t>(m))), 1.0);
    double norm = 0.0;
    for (const auto& [i, v] : col) norm += v * v;
    norm = std::sqrt(norm);
    for (const auto& [i, v] : col) triplets.emplace_back(i, j, v / norm);
  }
  SparseMatrix x(m, n);
  x.setFromTriplets(triplets.begin(), triplets.end());
  x.makeCompressed();
  return x;
}

}  // namespace siftkit::testing
