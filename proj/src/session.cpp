#include "siftkit/session.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <numeric>

#include "siftkit/error.hpp"

namespace siftkit {
namespace {

std::string now_iso8601() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
  h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  return h;
}

int effective_topics(int requested, const SparseMatrix& x_sub) {
  const auto limit = std::min<Eigen::Index>(x_sub.rows(), x_sub.cols());
  return static_cast<int>(std::max<Eigen::Index>(1, std::min<Eigen::Index>(requested, limit)));
}

std::vector<KeywordCompound> explicit_compounds(const TargetSet& targets) {
  std::vector<KeywordCompound> out;
  out.reserve(targets.explicit_pos.size());
  for (const auto& t : targets.explicit_pos) out.push_back(t.keywords);
  return out;
}

// Targeted NMF on the retrieved columns followed by topic extraction.
TopicModel model_topics(const SessionState& state, const std::vector<int>& retrieved, int requested,
                        const Eigen::MatrixXd& previous_v) {
  const SparseMatrix x_sub = select_columns(state.x(), retrieved);
  SolverOptions options;
  options.max_outer = state.config.max_outer;
  options.tol = state.config.tol;
  options.seed = mix(state.config.seed, static_cast<std::uint64_t>(state.iteration));

  TopicModel model;
  model.requested_topics = requested;
  model.columns = retrieved;
  model.previous_v = previous_v;
  model.factors = targeted_nmf(x_sub, effective_topics(requested, x_sub), state.targets.positive_vectors(),
                               state.config.rho0, options);
  model.summary = extract_topics(model.factors, state.vocab(), previous_v.cols() > 0 ? &previous_v : nullptr,
                                 explicit_compounds(state.targets));
  model.members.resize(model.summary.topics.size());
  for (std::size_t j = 0; j < model.summary.topics.size(); ++j) {
    for (const int c : model.summary.topics[j].members) {
      model.members[j].push_back(retrieved[static_cast<std::size_t>(c)]);
    }
  }
  return model;
}

IterationRecord make_record(const SessionState& state, const std::vector<int>& previous) {
  IterationRecord r;
  r.iteration = state.iteration;
  r.retrieved_count = static_cast<int>(state.sift.retrieved.size());
  r.status = diff_status(previous, state.sift.retrieved, state.n_docs());
  for (const int w : retrieved_keywords(state.x(), state.sift.retrieved, state.vocab())) {
    r.top_keywords.push_back(state.vocab().words[static_cast<std::size_t>(w)]);
  }
  r.targets = snapshot_targets(state.targets, state.vocab());
  r.topics = static_cast<int>(state.model.factors.v.cols());
  r.mode = state.sift.mode;
  r.timestamp = now_iso8601();
  return r;
}

std::vector<std::vector<std::string>> words_of(const std::vector<Target>& targets, const Vocabulary& vocab) {
  std::vector<std::vector<std::string>> out;
  out.reserve(targets.size());
  for (const auto& t : targets) out.push_back(compound_words(t.keywords, vocab));
  return out;
}

}  // namespace

std::shared_ptr<const WordVectors> session_vectors(const std::vector<Document>& docs, std::uint64_t corpus_hash,
                                                   const Vocabulary& vocab, const SessionConfig& config) {
  if (!config.embeddings) return nullptr;
  std::uint64_t key = corpus_hash;
  key = mix(key, static_cast<std::uint64_t>(config.embedding_dim));
  key = mix(key, static_cast<std::uint64_t>(config.window));
  key = mix(key, static_cast<std::uint64_t>(config.embedding_iterations));
  key = mix(key, config.seed);

  std::filesystem::path cache;
  if (!config.vector_cache.empty()) {
    char name[48];
    std::snprintf(name, sizeof name, "vectors-%016llx.bin", static_cast<unsigned long long>(key));
    cache = std::filesystem::path(config.vector_cache) / name;
    if (auto cached = load_word_vectors(cache, key); cached && cached->size() == vocab.size()) {
      return std::make_shared<const WordVectors>(std::move(*cached));
    }
  }
  const auto counts = build_cooccurrence(docs, vocab, config.window);
  FactorizeOptions options;
  options.max_iterations = config.embedding_iterations;
  options.seed = config.seed;
  const int dim = std::min(config.embedding_dim, vocab.size());
  auto vectors = std::make_shared<const WordVectors>(factorize_pmi(positive_pmi(counts), dim, options));
  if (!cache.empty()) {
    std::filesystem::create_directories(cache.parent_path());
    save_word_vectors(cache, *vectors, key);
  }
  return vectors;
}

void SessionConfig::validate() const {
  sift.validate();
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::invalid_argument, msg); };
  if (topics < 1) fail("topics must be at least 1");
  if (!(rho0 >= 0.0)) fail("rho0 must be nonnegative");
  if (max_outer < 1) fail("max_outer must be at least 1");
  if (!(tol >= 0.0)) fail("tol must be nonnegative");
  if (embeddings && embedding_dim < 1) fail("embedding_dim must be at least 1");
  if (window < 1) fail("window must be at least 1");
  if (suggestions < 0) fail("suggestions must be nonnegative");
}

StatusCounts diff_status(const std::vector<int>& previous, const std::vector<int>& current, int n) {
  std::vector<int> both;
  std::set_intersection(previous.begin(), previous.end(), current.begin(), current.end(), std::back_inserter(both));
  StatusCounts s;
  s.retained = static_cast<int>(both.size());
  s.incoming = static_cast<int>(current.size()) - s.retained;
  s.outgoing = static_cast<int>(previous.size()) - s.retained;
  s.stayed_out = n - s.retained - s.incoming - s.outgoing;
  return s;
}

TargetSnapshot snapshot_targets(const TargetSet& targets, const Vocabulary& vocab) {
  return {words_of(targets.explicit_pos, vocab), words_of(targets.explicit_neg, vocab),
          words_of(targets.implicit_pos, vocab), words_of(targets.implicit_neg, vocab)};
}

std::vector<int> retrieved_keywords(const SparseMatrix& x, const std::vector<int>& columns, const Vocabulary& vocab,
                                    int n) {
  Eigen::VectorXd totals = Eigen::VectorXd::Zero(x.rows());
  for (const int c : columns) {
    for (SparseMatrix::InnerIterator it(x, c); it; ++it) totals(it.row()) += it.value();
  }
  return top_keywords(totals, n, &vocab.stopword);
}

SessionState init_session(const SessionConfig& config) {
  config.validate();
  PrepareOptions options = config.prepare;
  if (!config.stopword_file.empty()) {
    const auto extra = read_stopword_file(config.stopword_file);
    options.extra_stopwords.insert(extra.begin(), extra.end());
  }
  return init_session(prepare_corpus(load_corpus(config.corpus), options), config);
}

SessionState init_session(PreparedCorpus prepared, const SessionConfig& config) {
  config.validate();
  if (prepared.documents.empty()) throw Error(ErrorCode::invalid_argument, "corpus has no usable documents");

  auto corpus = std::make_shared<CorpusData>();
  corpus->documents = std::move(prepared.documents);
  corpus->doc_index = std::move(prepared.doc_index);
  corpus->hash = prepared.hash;
  corpus->dropped_ids = std::move(prepared.dropped_ids);
  auto terms = std::make_shared<TermSpace>();
  terms->vocab = std::move(prepared.vocab);
  terms->x = std::move(prepared.matrix.x);

  SessionState state;
  state.config = config;
  state.vectors = session_vectors(corpus->documents, corpus->hash, terms->vocab, config);
  state.corpus = std::move(corpus);
  state.terms = std::move(terms);

  const int n = state.n_docs();
  state.sift.mode = config.mode;
  state.sift.retrieved.resize(static_cast<std::size_t>(n));
  std::iota(state.sift.retrieved.begin(), state.sift.retrieved.end(), 0);
  state.sift.scores = Eigen::VectorXd::Zero(n);
  state.model = model_topics(state, state.sift.retrieved, config.topics, Eigen::MatrixXd(state.vocab().size(), 0));
  state.history.push_back(make_record(state, state.sift.retrieved));
  return state;
}

SessionState run_iteration(const SessionState& state, const FeedbackBatch& batch, std::optional<SiftMode> mode) {
  check_vote_conflicts(batch);
  SessionState next = state;
  next.iteration = state.iteration + 1;

  if (!batch.add_stop.empty() || !batch.remove_stop.empty()) {
    auto edit = apply_stopword_edits(state.vocab(), batch.add_stop, batch.remove_stop);
    if (edit.rebuild) {
      auto terms = std::make_shared<TermSpace>();
      terms->x = build_tfidf(state.corpus->documents, edit.vocab, 0).x;
      terms->vocab = std::move(edit.vocab);
      next.terms = std::move(terms);
    }
  }

  const TargetContext context{next.iteration,       next.vocab(), next.x(), next.corpus->doc_index,
                              state.model.factors.v, state.config.persist_implicit};
  next.targets = build_target_model(state.targets, batch, context);

  const SiftMode used = mode.value_or(state.config.mode);
  if (used == SiftMode::soft) {
    next.sift = soft_sift(next.targets, next.x(), state.sift.scores, state.config.sift);
  } else {
    const HardSiftContext hard{next.x(),          next.corpus->doc_index, state.model.factors.v,
                               state.model.members, state.vectors.get(),   next.vocab().stopword};
    next.sift = hard_sift(next.targets, batch, state.sift.retrieved, hard, state.config.sift);
  }
  if (next.sift.retrieved.empty()) {
    throw Error(ErrorCode::empty_result, "no document passed sifting at iteration " + std::to_string(next.iteration) +
                                             "; relax the targets");
  }

  next.model = model_topics(next, next.sift.retrieved, state.model.requested_topics, state.model.factors.v);
  next.history.push_back(make_record(next, state.sift.retrieved));
  next.events.push_back({SessionEvent::Kind::iterate, batch, mode, 0});
  return next;
}

SessionState change_topic_count(const SessionState& state, int delta) {
  if (delta != -5 && delta != -1 && delta != 1 && delta != 5) {
    throw Error(ErrorCode::invalid_argument, "topic count can only change by -5, -1, +1 or +5");
  }
  const int current = static_cast<int>(state.model.factors.v.cols());
  const int target = current + delta;
  const int upper = std::min(50, static_cast<int>(state.sift.retrieved.size()));
  if (target < 2 || target > upper) {
    throw Error(ErrorCode::invalid_argument, "number of topics must stay within [2, " + std::to_string(upper) +
                                                 "], requested " + std::to_string(target));
  }
  SessionState next = state;
  next.model = model_topics(state, state.sift.retrieved, target, state.model.previous_v);
  next.topic_count_log.push_back({state.iteration, current, target, now_iso8601()});
  next.events.push_back({SessionEvent::Kind::topic_count, {}, std::nullopt, delta});
  return next;
}

Suggestions session_suggestions(const SessionState& state) {
  if (!state.vectors) return {};
  auto collect = [](const std::vector<Target>& targets) {
    std::vector<int> words;
    for (const auto& t : targets) words.insert(words.end(), t.keywords.words.begin(), t.keywords.words.end());
    std::sort(words.begin(), words.end());
    words.erase(std::unique(words.begin(), words.end()), words.end());
    return words;
  };
  return suggest_keywords(collect(state.targets.explicit_pos), collect(state.targets.explicit_neg), *state.vectors,
                          state.config.suggestions, state.vocab().stopword);
}

SessionState replay(const SessionState& initial, const std::vector<SessionEvent>& events) {
  SessionState state = initial;
  for (const auto& e : events) {
    state = e.kind == SessionEvent::Kind::iterate ? run_iteration(state, e.batch, e.mode)
                                                  : change_topic_count(state, e.delta);
  }
  return state;
}

}  // namespace siftkit
