#include "siftkit/target.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "siftkit/error.hpp"

namespace siftkit {
namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_terms(std::string_view text) {
  std::vector<std::string> terms;
  std::string current;
  auto push = [&] {
    auto t = trim(current);
    if (!t.empty()) terms.push_back(std::move(t));
    current.clear();
  };
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] == ',') {
      push();
      ++i;
      continue;
    }
    // standalone AND, whitespace (or string edge) on both sides
    const bool at_word_start = i == 0 || std::isspace(static_cast<unsigned char>(text[i - 1]));
    if (at_word_start && text.substr(i, 3) == "AND" &&
        (i + 3 == text.size() || std::isspace(static_cast<unsigned char>(text[i + 3])))) {
      push();
      i += 3;
      continue;
    }
    current.push_back(text[i]);
    ++i;
  }
  push();
  return terms;
}

Eigen::VectorXd unit(Eigen::VectorXd v) {
  const double n = v.norm();
  if (n > 0.0) v /= n;
  return v;
}

Eigen::VectorXd column_vector(const SparseMatrix& x, int col) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(x.rows());
  for (SparseMatrix::InnerIterator it(x, col); it; ++it) v(it.row()) = it.value();
  return v;
}

// Drops now-stopworded words from explicit compounds and recomputes vectors.
std::vector<Target> refresh_explicit(const std::vector<Target>& targets, const Vocabulary& vocab) {
  std::vector<Target> out;
  for (const auto& t : targets) {
    KeywordCompound kept;
    for (const int w : t.keywords.words) {
      if (vocab.is_active(w)) kept.words.push_back(w);
    }
    if (kept.words.empty()) continue;
    out.push_back({kept, explicit_vector(kept, vocab.size()), t.provenance});
  }
  return out;
}

void edit_explicit(std::vector<Target>& targets, const std::vector<std::string>& add,
                   const std::vector<std::string>& remove, const TargetContext& ctx) {
  for (const auto& text : remove) {
    const auto compound = parse_compound(text, ctx.vocab);
    std::erase_if(targets, [&](const Target& t) { return t.keywords == compound; });
  }
  for (const auto& text : add) {
    auto compound = parse_compound(text, ctx.vocab);
    const bool present =
        std::any_of(targets.begin(), targets.end(), [&](const Target& t) { return t.keywords == compound; });
    if (present) continue;
    Eigen::VectorXd vec = explicit_vector(compound, ctx.vocab.size());
    auto ref = compound_text(compound, ctx.vocab);
    targets.push_back({std::move(compound), std::move(vec), {TargetSource::keyword, ctx.iteration, std::move(ref)}});
  }
  // canonical order, so removing and re-adding a compound is a no-op
  std::sort(targets.begin(), targets.end(),
            [](const Target& a, const Target& b) { return a.keywords.words < b.keywords.words; });
}

void add_implicit(std::vector<Target>& into, std::vector<Target>& opposite, Target target) {
  std::erase_if(opposite, [&](const Target& t) { return t.provenance.same_source(target.provenance); });
  std::erase_if(into, [&](const Target& t) {
    return t.keywords == target.keywords || t.provenance.same_source(target.provenance);
  });
  into.push_back(std::move(target));
}

Target topic_target(int topic, const TargetContext& ctx) {
  if (topic < 0 || topic >= ctx.topic_vectors.cols()) {
    throw Error(ErrorCode::not_found, "topic " + std::to_string(topic) + " does not exist at iteration " +
                                          std::to_string(ctx.iteration - 1));
  }
  Eigen::VectorXd v = unit(ctx.topic_vectors.col(topic));
  KeywordCompound keywords{top_keywords(v, 10, &ctx.vocab.stopword)};
  std::sort(keywords.words.begin(), keywords.words.end());
  return {std::move(keywords), std::move(v), {TargetSource::topic, ctx.iteration, std::to_string(topic)}};
}

Target document_target(const std::string& id, const TargetContext& ctx) {
  const auto it = ctx.doc_index.find(id);
  if (it == ctx.doc_index.end()) throw Error(ErrorCode::not_found, "unknown document id '" + id + "'");
  Eigen::VectorXd v = column_vector(ctx.x, it->second);
  KeywordCompound keywords{top_keywords(v, 10, &ctx.vocab.stopword)};
  std::sort(keywords.words.begin(), keywords.words.end());
  return {std::move(keywords), unit(std::move(v)), {TargetSource::document, ctx.iteration, id}};
}

}  // namespace

const char* to_string(TargetSource source) noexcept {
  switch (source) {
    case TargetSource::keyword: return "keyword";
    case TargetSource::topic: return "topic";
    case TargetSource::document: return "document";
  }
  return "unknown";
}

bool Provenance::same_source(const Provenance& other) const {
  if (source != other.source || ref != other.ref) return false;
  // topic indices are only meaningful within one iteration
  return source != TargetSource::topic || iteration == other.iteration;
}

KeywordCompound parse_compound(std::string_view text, const Vocabulary& vocab) {
  const auto terms = split_terms(text);
  if (terms.empty()) throw Error(ErrorCode::invalid_argument, "empty keyword compound");
  std::set<int> words;
  for (const auto& term : terms) {
    std::vector<int> resolved;
    if (const int w = vocab.find(term); w >= 0) {
      resolved.push_back(w);
    } else {
      for (const auto& stem : tokenize_and_stem(term)) {
        const auto it = vocab.index.find(stem);
        if (it == vocab.index.end()) throw Error(ErrorCode::not_found, "unknown keyword '" + term + "'");
        resolved.push_back(it->second);
      }
    }
    for (const int w : resolved) {
      if (vocab.is_active(w)) words.insert(w);
    }
  }
  if (words.empty()) {
    throw Error(ErrorCode::invalid_argument, "keyword compound '" + std::string(text) + "' contains only stopwords");
  }
  return {std::vector<int>(words.begin(), words.end())};
}

std::vector<std::string> compound_words(const KeywordCompound& compound, const Vocabulary& vocab) {
  std::vector<std::string> out;
  out.reserve(compound.words.size());
  for (const int w : compound.words) out.push_back(vocab.words[static_cast<std::size_t>(w)]);
  return out;
}

std::string compound_text(const KeywordCompound& compound, const Vocabulary& vocab) {
  std::string out;
  for (const auto& w : compound_words(compound, vocab)) {
    if (!out.empty()) out += ", ";
    out += w;
  }
  return out;
}

Eigen::VectorXd explicit_vector(const KeywordCompound& compound, int m) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(m);
  for (const int w : compound.words) v(w) += 1.0;
  return unit(std::move(v));
}

std::vector<int> top_keywords(const Eigen::Ref<const Eigen::VectorXd>& vec, int n, const std::vector<bool>* excluded) {
  std::vector<int> candidates;
  for (Eigen::Index i = 0; i < vec.size(); ++i) {
    if (vec(i) > 0.0 && !(excluded && (*excluded)[static_cast<std::size_t>(i)])) candidates.push_back(static_cast<int>(i));
  }
  const auto keep = std::min(candidates.size(), static_cast<std::size_t>(std::max(n, 0)));
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep), candidates.end(),
                    [&](int a, int b) { return vec(a) != vec(b) ? vec(a) > vec(b) : a < b; });
  candidates.resize(keep);
  return candidates;
}

std::vector<const Eigen::VectorXd*> TargetSet::positive_vectors() const {
  std::vector<const Eigen::VectorXd*> out;
  for (const auto& t : explicit_pos) out.push_back(&t.vector);
  for (const auto& t : implicit_pos) out.push_back(&t.vector);
  return out;
}

std::vector<const Eigen::VectorXd*> TargetSet::negative_vectors() const {
  std::vector<const Eigen::VectorXd*> out;
  for (const auto& t : explicit_neg) out.push_back(&t.vector);
  for (const auto& t : implicit_neg) out.push_back(&t.vector);
  return out;
}

bool TargetSet::revoke(TargetSource source, std::string_view ref) {
  auto match = [&](const Target& t) { return t.provenance.source == source && t.provenance.ref == ref; };
  const auto removed = std::erase_if(implicit_pos, match) + std::erase_if(implicit_neg, match);
  return removed > 0;
}

void check_vote_conflicts(const FeedbackBatch& batch) {
  for (const int t : batch.up_topics) {
    if (std::find(batch.down_topics.begin(), batch.down_topics.end(), t) != batch.down_topics.end()) {
      throw Error(ErrorCode::invalid_argument, "topic " + std::to_string(t) + " is both upvoted and downvoted");
    }
  }
  for (const auto& d : batch.up_docs) {
    if (std::find(batch.down_docs.begin(), batch.down_docs.end(), d) != batch.down_docs.end()) {
      throw Error(ErrorCode::invalid_argument, "document '" + d + "' is both upvoted and downvoted");
    }
  }
}

TargetSet build_target_model(const TargetSet& previous, const FeedbackBatch& batch, const TargetContext& ctx) {
  check_vote_conflicts(batch);

  TargetSet next;
  next.explicit_pos = refresh_explicit(previous.explicit_pos, ctx.vocab);
  next.explicit_neg = refresh_explicit(previous.explicit_neg, ctx.vocab);
  edit_explicit(next.explicit_pos, batch.add_good, batch.remove_good, ctx);
  edit_explicit(next.explicit_neg, batch.add_bad, batch.remove_bad, ctx);

  if (ctx.persist_implicit) {
    next.implicit_pos = previous.implicit_pos;
    next.implicit_neg = previous.implicit_neg;
  }
  for (const int t : batch.up_topics) add_implicit(next.implicit_pos, next.implicit_neg, topic_target(t, ctx));
  for (const auto& d : batch.up_docs) add_implicit(next.implicit_pos, next.implicit_neg, document_target(d, ctx));
  for (const int t : batch.down_topics) add_implicit(next.implicit_neg, next.implicit_pos, topic_target(t, ctx));
  for (const auto& d : batch.down_docs) add_implicit(next.implicit_neg, next.implicit_pos, document_target(d, ctx));
  return next;
}

}  // namespace siftkit
