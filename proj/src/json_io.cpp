#include "siftkit/json_io.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "siftkit/error.hpp"

namespace siftkit {
namespace {

[[noreturn]] void parse_error(const std::string& msg) { throw Error(ErrorCode::parse, msg); }

void check_keys(const Json& j, const std::set<std::string>& allowed, const char* what) {
  if (!j.is_object()) parse_error(std::string(what) + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) parse_error(std::string(what) + ": unknown field '" + key + "'");
  }
}

template <typename T>
T get_field(const Json& j, const char* key, const char* what) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    parse_error(std::string(what) + ": field '" + key + "' has the wrong type");
  }
}

template <typename T>
void read_if(const Json& j, const char* key, T& into, const char* what) {
  if (j.contains(key)) into = get_field<T>(j, key, what);
}

const std::set<std::string> kBatchKeys = {"addGood",    "addBad",    "addStop",   "removeGood", "removeBad",
                                          "removeStop", "upTopics", "downTopics", "upDocs",     "downDocs"};

const std::set<std::string> kConfigKeys = {
    "corpus",      "minDocFreq", "minTokens",       "stopwords",      "useDefaultStopwords", "extraStopwords",
    "alpha",       "beta",       "gamma",           "delta",          "simK",                "simTau",
    "mode",        "topics",     "rho0",            "seed",           "maxOuter",            "tol",
    "persistImplicit", "embeddings", "embeddingDim", "window",        "embeddingIterations", "vectorCache",
    "suggestions"};

}  // namespace

Json batch_to_json(const FeedbackBatch& b) {
  Json j;
  j["addGood"] = b.add_good;
  j["addBad"] = b.add_bad;
  j["addStop"] = b.add_stop;
  j["removeGood"] = b.remove_good;
  j["removeBad"] = b.remove_bad;
  j["removeStop"] = b.remove_stop;
  j["upTopics"] = b.up_topics;
  j["downTopics"] = b.down_topics;
  j["upDocs"] = b.up_docs;
  j["downDocs"] = b.down_docs;
  return j;
}

FeedbackBatch batch_from_json(const Json& j) {
  constexpr const char* what = "feedback batch";
  check_keys(j, kBatchKeys, what);
  FeedbackBatch b;
  read_if(j, "addGood", b.add_good, what);
  read_if(j, "addBad", b.add_bad, what);
  read_if(j, "addStop", b.add_stop, what);
  read_if(j, "removeGood", b.remove_good, what);
  read_if(j, "removeBad", b.remove_bad, what);
  read_if(j, "removeStop", b.remove_stop, what);
  read_if(j, "upTopics", b.up_topics, what);
  read_if(j, "downTopics", b.down_topics, what);
  read_if(j, "upDocs", b.up_docs, what);
  read_if(j, "downDocs", b.down_docs, what);
  return b;
}

std::vector<FeedbackBatch> read_feedback_script(const std::filesystem::path& path) {
  const Json j = parse_json_file(path);
  if (!j.is_array()) parse_error(path.string() + ": feedback script must be a JSON array");
  std::vector<FeedbackBatch> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    try {
      out.push_back(batch_from_json(j[i]));
    } catch (const Error& e) {
      parse_error(path.string() + ": batch " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

Json config_to_json(const SessionConfig& c) {
  Json j;
  j["corpus"] = c.corpus;
  j["minDocFreq"] = c.prepare.min_doc_freq;
  j["minTokens"] = c.prepare.min_tokens;
  j["stopwords"] = c.stopword_file;
  j["useDefaultStopwords"] = c.prepare.use_default_stopwords;
  j["extraStopwords"] = std::set<std::string>(c.prepare.extra_stopwords.begin(), c.prepare.extra_stopwords.end());
  j["alpha"] = c.sift.alpha;
  j["beta"] = c.sift.beta;
  j["gamma"] = c.sift.gamma;
  j["delta"] = c.sift.delta;
  j["simK"] = c.sift.sim_k;
  j["simTau"] = c.sift.sim_tau;
  j["mode"] = to_string(c.mode);
  j["topics"] = c.topics;
  j["rho0"] = c.rho0;
  j["seed"] = c.seed;
  j["maxOuter"] = c.max_outer;
  j["tol"] = c.tol;
  j["persistImplicit"] = c.persist_implicit;
  j["embeddings"] = c.embeddings;
  j["embeddingDim"] = c.embedding_dim;
  j["window"] = c.window;
  j["embeddingIterations"] = c.embedding_iterations;
  j["vectorCache"] = c.vector_cache;
  j["suggestions"] = c.suggestions;
  return j;
}

SessionConfig config_from_json(const Json& j, SessionConfig c) {
  constexpr const char* what = "session config";
  check_keys(j, kConfigKeys, what);
  read_if(j, "corpus", c.corpus, what);
  read_if(j, "minDocFreq", c.prepare.min_doc_freq, what);
  read_if(j, "minTokens", c.prepare.min_tokens, what);
  read_if(j, "stopwords", c.stopword_file, what);
  read_if(j, "useDefaultStopwords", c.prepare.use_default_stopwords, what);
  if (j.contains("extraStopwords")) {
    const auto words = get_field<std::vector<std::string>>(j, "extraStopwords", what);
    c.prepare.extra_stopwords = WordSet(words.begin(), words.end());
  }
  read_if(j, "alpha", c.sift.alpha, what);
  read_if(j, "beta", c.sift.beta, what);
  read_if(j, "gamma", c.sift.gamma, what);
  read_if(j, "delta", c.sift.delta, what);
  read_if(j, "simK", c.sift.sim_k, what);
  read_if(j, "simTau", c.sift.sim_tau, what);
  if (j.contains("mode")) c.mode = parse_sift_mode(get_field<std::string>(j, "mode", what));
  read_if(j, "topics", c.topics, what);
  read_if(j, "rho0", c.rho0, what);
  read_if(j, "seed", c.seed, what);
  read_if(j, "maxOuter", c.max_outer, what);
  read_if(j, "tol", c.tol, what);
  read_if(j, "persistImplicit", c.persist_implicit, what);
  read_if(j, "embeddings", c.embeddings, what);
  read_if(j, "embeddingDim", c.embedding_dim, what);
  read_if(j, "window", c.window, what);
  read_if(j, "embeddingIterations", c.embedding_iterations, what);
  read_if(j, "vectorCache", c.vector_cache, what);
  read_if(j, "suggestions", c.suggestions, what);
  return c;
}

SessionConfig read_config_file(const std::filesystem::path& path, SessionConfig base) {
  try {
    return config_from_json(parse_json_file(path), std::move(base));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::parse) parse_error(path.string() + ": " + e.what());
    throw;
  }
}

Json targets_to_json(const TargetSnapshot& t) {
  Json j;
  j["explicitPos"] = t.explicit_pos;
  j["explicitNeg"] = t.explicit_neg;
  j["implicitPos"] = t.implicit_pos;
  j["implicitNeg"] = t.implicit_neg;
  return j;
}

Json export_results(const SessionState& state) {
  const auto& vocab = state.vocab();
  Json j;
  j["iteration"] = state.iteration;
  j["targets"] = targets_to_json(snapshot_targets(state.targets, vocab));
  Json topics = Json::array();
  for (const auto& topic : state.model.summary.topics) {
    Json t;
    t["index"] = topic.index;
    std::vector<std::string> words;
    for (const int w : topic.keywords) words.push_back(vocab.words[static_cast<std::size_t>(w)]);
    t["keywords"] = words;
    t["relevance"] = topic.relevance;
    t["size"] = topic.members.size();
    topics.push_back(std::move(t));
  }
  j["topics"] = std::move(topics);
  Json docs = Json::array();
  for (std::size_t c = 0; c < state.model.columns.size(); ++c) {
    const int d = state.model.columns[c];
    Json doc;
    doc["id"] = state.corpus->documents[static_cast<std::size_t>(d)].id;
    doc["topic"] = state.model.summary.assignment[c];
    doc["relevance"] = state.sift.scores(d);
    doc["closeness"] = state.model.summary.closeness[c];
    docs.push_back(std::move(doc));
  }
  j["documents"] = std::move(docs);
  return j;
}

std::vector<std::string> exported_ids(const Json& exported) {
  if (!exported.is_object() || !exported.contains("documents") || !exported["documents"].is_array()) {
    parse_error("export document has no 'documents' array");
  }
  std::vector<std::string> ids;
  for (const auto& doc : exported["documents"]) ids.push_back(get_field<std::string>(doc, "id", "exported document"));
  return ids;
}

Json events_to_json(const std::vector<SessionEvent>& events) {
  Json out = Json::array();
  for (const auto& e : events) {
    Json j;
    if (e.kind == SessionEvent::Kind::iterate) {
      j["type"] = "iterate";
      j["batch"] = batch_to_json(e.batch);
      if (e.mode) j["mode"] = to_string(*e.mode);
    } else {
      j["type"] = "topicCount";
      j["delta"] = e.delta;
    }
    out.push_back(std::move(j));
  }
  return out;
}

std::vector<SessionEvent> events_from_json(const Json& j) {
  if (!j.is_array()) parse_error("event log must be a JSON array");
  std::vector<SessionEvent> out;
  for (const auto& item : j) {
    const auto type = get_field<std::string>(item, "type", "event");
    SessionEvent e;
    if (type == "iterate") {
      e.kind = SessionEvent::Kind::iterate;
      e.batch = batch_from_json(item.at("batch"));
      if (item.contains("mode")) e.mode = parse_sift_mode(get_field<std::string>(item, "mode", "event"));
    } else if (type == "topicCount") {
      e.kind = SessionEvent::Kind::topic_count;
      e.delta = get_field<int>(item, "delta", "event");
    } else {
      parse_error("unknown event type '" + type + "'");
    }
    out.push_back(std::move(e));
  }
  return out;
}

void save_snapshot(const std::filesystem::path& path, const SessionState& state) {
  Json j;
  j["version"] = 1;
  j["config"] = config_to_json(state.config);
  j["events"] = events_to_json(state.events);
  const auto tmp = path.string() + ".tmp";
  write_json_file(tmp, j);
  std::filesystem::rename(tmp, path);
}

SessionState load_snapshot(const std::filesystem::path& path) {
  const Json j = parse_json_file(path);
  if (!j.is_object() || j.value("version", 0) != 1) parse_error(path.string() + ": unsupported snapshot");
  const SessionConfig config = config_from_json(j.at("config"));
  return replay(init_session(config), events_from_json(j.at("events")));
}

Json parse_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return Json::parse(buffer.str());
  } catch (const nlohmann::json::parse_error& e) {
    parse_error(path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::io, "failed writing " + path.string());
}

}  // namespace siftkit
