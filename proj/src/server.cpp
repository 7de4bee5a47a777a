#include "siftkit/server.hpp"

#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <functional>
#include <future>
#include <map>
#include <mutex>
#include <random>
#include <sstream>

#include "siftkit/error.hpp"

namespace siftkit {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

constexpr int kMaxPageSize = 1000;
constexpr std::size_t kSnippetLength = 200;

std::string now_iso8601() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string random_token() {
  static std::mutex mutex;
  static std::mt19937_64 rng(std::random_device{}());
  std::lock_guard lock(mutex);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(rng()));
  return buf;
}

Json error_json(const std::string& code, const std::string& message) {
  Json j;
  j["code"] = code;
  j["message"] = message;
  return j;
}

struct Outcome {
  int status = 200;
  std::string body;
};

Outcome error_outcome(const Error& e) {
  return {http_status(e.code()), error_json(to_string(e.code()), e.what()).dump()};
}

void send(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send(httplib::Response& res, const Outcome& outcome) {
  res.status = outcome.status;
  res.set_content(outcome.body, "application/json");
}

int int_param(const httplib::Request& req, const std::string& name, int fallback) {
  if (!req.has_param(name)) return fallback;
  const std::string text = req.get_param_value(name);
  try {
    std::size_t used = 0;
    const int value = std::stoi(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return value;
  } catch (const std::exception&) {
    throw Error(ErrorCode::invalid_argument, "query parameter '" + name + "' must be an integer");
  }
}

double double_param(const std::string& name, const std::string& text) {
  try {
    std::size_t used = 0;
    const double value = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return value;
  } catch (const std::exception&) {
    throw Error(ErrorCode::invalid_argument, "query parameter '" + name + "' must be numeric");
  }
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(' ');
    if (b == std::string::npos) continue;
    out.push_back(item.substr(b, item.find_last_not_of(' ') - b + 1));
  }
  return out;
}

ViewOptions view_options(const httplib::Request& req) {
  ViewOptions v;
  v.representatives = int_param(req, "reps", v.representatives);
  if (v.representatives < 0) throw Error(ErrorCode::invalid_argument, "reps must be nonnegative");
  if (req.has_param("square")) v.square = double_param("square", req.get_param_value("square"));
  if (!(v.square > 0.0)) throw Error(ErrorCode::invalid_argument, "square must be positive");
  if (req.has_param("areas")) {
    for (const auto& a : split_list(req.get_param_value("areas"))) v.cell_areas.push_back(double_param("areas", a));
  }
  return v;
}

Json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return Json::object();
  try {
    return Json::parse(req.body);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::parse, std::string("request body is not valid JSON: ") + e.what());
  }
}

std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string snippet(const std::string& text) {
  std::string out;
  bool space = false;
  for (const char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = !out.empty();
      continue;
    }
    if (space) out += ' ';
    space = false;
    out += c;
    if (out.size() >= kSnippetLength) break;
  }
  return out;
}

Json neighbors_json(const std::vector<Neighbor>& list, const Vocabulary& vocab) {
  Json out = Json::array();
  for (const auto& nb : list) {
    Json j;
    j["word"] = vocab.words[static_cast<std::size_t>(nb.word)];
    j["score"] = nb.score;
    out.push_back(std::move(j));
  }
  return out;
}

Json status_json(const StatusCounts& s) {
  Json j;
  j["retained"] = s.retained;
  j["incoming"] = s.incoming;
  j["outgoing"] = s.outgoing;
  j["stayedOut"] = s.stayed_out;
  return j;
}

// Position of corpus document d among the retrieved columns, -1 when absent.
int column_of(const SessionState& state, int d) {
  const auto& cols = state.model.columns;
  const auto it = std::lower_bound(cols.begin(), cols.end(), d);
  return it != cols.end() && *it == d ? static_cast<int>(it - cols.begin()) : -1;
}

}  // namespace

int http_status(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_argument:
    case ErrorCode::parse: return 400;
    case ErrorCode::not_found: return 404;
    case ErrorCode::conflict: return 409;
    case ErrorCode::empty_vocabulary:
    case ErrorCode::empty_result: return 422;
    case ErrorCode::io: return 500;
  }
  return 500;
}

ServerOptions options_from_env(ServerOptions base) {
  if (const char* bind = std::getenv("SIFTKIT_BIND"); bind && *bind) {
    const std::string text = bind;
    const auto colon = text.rfind(':');
    if (colon == std::string::npos) {
      base.host = text;
    } else {
      if (colon > 0) base.host = text.substr(0, colon);
      try {
        base.port = std::stoi(text.substr(colon + 1));
      } catch (const std::exception&) {
        throw Error(ErrorCode::invalid_argument, "SIFTKIT_BIND port is not a number: " + text);
      }
    }
  }
  if (const char* root = std::getenv("SIFTKIT_CORPUS_ROOT"); root && *root) base.corpus_root = root;
  if (const char* timeout = std::getenv("SIFTKIT_SESSION_TIMEOUT"); timeout && *timeout) {
    try {
      base.session_timeout = std::chrono::seconds(std::stoll(timeout));
    } catch (const std::exception&) {
      throw Error(ErrorCode::invalid_argument, std::string("SIFTKIT_SESSION_TIMEOUT is not a number: ") + timeout);
    }
  }
  return base;
}

Json handle_to_json(const SessionHandle& handle) {
  Json j;
  j["id"] = handle.id;
  j["corpus"] = handle.corpus;
  j["created"] = handle.created;
  j["updated"] = handle.updated;
  return j;
}

Json state_view(const SessionHandle& handle, const SessionState& state, const ViewOptions& options) {
  const auto& vocab = state.vocab();
  const auto& docs = state.corpus->documents;
  const auto& summary = state.model.summary;
  Json j;
  j["session"] = handle_to_json(handle);
  j["iteration"] = state.iteration;
  j["mode"] = to_string(state.sift.mode);
  j["topicCount"] = state.model.factors.v.cols();
  j["nDocs"] = state.n_docs();
  j["retrievedCount"] = state.sift.retrieved.size();
  j["status"] = status_json(state.history.back().status);

  Json topics = Json::array();
  for (std::size_t t = 0; t < summary.topics.size(); ++t) {
    const auto& topic = summary.topics[t];
    Json tj;
    tj["index"] = topic.index;
    std::vector<std::string> words;
    for (const int w : topic.keywords) words.push_back(vocab.words[static_cast<std::size_t>(w)]);
    tj["keywords"] = words;
    std::vector<std::string> changed;
    for (const int w : topic.changed_keywords) changed.push_back(vocab.words[static_cast<std::size_t>(w)]);
    tj["changedKeywords"] = changed;
    tj["relevance"] = topic.relevance;
    tj["hue"] = 120.0 * topic.relevance;
    tj["size"] = topic.members.size();
    tj["matchedPrevious"] = topic.matched_previous;

    std::size_t count = static_cast<std::size_t>(options.representatives);
    if (t < options.cell_areas.size()) {
      count = static_cast<std::size_t>(std::max(0.0, std::floor(options.cell_areas[t] / options.square)));
    }
    std::vector<int> order = topic.members;
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return summary.closeness[static_cast<std::size_t>(a)] > summary.closeness[static_cast<std::size_t>(b)];
    });
    order.resize(std::min(order.size(), count));
    Json reps = Json::array();
    for (const int c : order) {
      const auto& doc = docs[static_cast<std::size_t>(state.model.columns[static_cast<std::size_t>(c)])];
      Json dj;
      dj["id"] = doc.id;
      dj["title"] = doc.title;
      dj["closeness"] = summary.closeness[static_cast<std::size_t>(c)];
      reps.push_back(std::move(dj));
    }
    tj["documents"] = std::move(reps);
    topics.push_back(std::move(tj));
  }
  j["topics"] = std::move(topics);
  j["targets"] = targets_to_json(snapshot_targets(state.targets, vocab));

  Json history = Json::array();
  for (const auto& r : state.history) {
    Json hj;
    hj["iteration"] = r.iteration;
    hj["retrievedCount"] = r.retrieved_count;
    hj["status"] = status_json(r.status);
    hj["topKeywords"] = r.top_keywords;
    hj["targets"] = targets_to_json(r.targets);
    hj["topics"] = r.topics;
    hj["mode"] = to_string(r.mode);
    hj["timestamp"] = r.timestamp;
    history.push_back(std::move(hj));
  }
  j["history"] = std::move(history);

  Json changes = Json::array();
  for (const auto& c : state.topic_count_log) {
    Json cj;
    cj["iteration"] = c.iteration;
    cj["from"] = c.from;
    cj["to"] = c.to;
    cj["timestamp"] = c.timestamp;
    changes.push_back(std::move(cj));
  }
  j["topicCountChanges"] = std::move(changes);

  const auto suggestions = session_suggestions(state);
  j["suggestions"]["plus"] = neighbors_json(suggestions.plus, vocab);
  j["suggestions"]["minus"] = neighbors_json(suggestions.minus, vocab);
  j["params"] = config_to_json(state.config);
  return j;
}

struct Server::Impl {
  struct Entry {
    SessionHandle handle;
    Clock::time_point last_used = Clock::now();
    std::shared_ptr<const SessionState> state;
    bool busy = false;
  };
  struct Job {
    std::string session;
    std::shared_future<Outcome> result;
  };

  ServerOptions options;
  httplib::Server http;
  int bound_port = -1;

  std::mutex mutex;
  std::map<std::string, std::shared_ptr<Entry>> sessions;
  std::map<std::string, Job> jobs;

  explicit Impl(ServerOptions opts) : options(std::move(opts)) { routes(); }

  ~Impl() {
    http.stop();
    std::map<std::string, Job> pending;
    {
      std::lock_guard lock(mutex);
      pending.swap(jobs);
    }
    for (auto& [token, job] : pending) job.result.wait();
  }

  void evict_idle() {
    if (options.session_timeout.count() <= 0) return;
    const auto cutoff = Clock::now() - options.session_timeout;
    std::lock_guard lock(mutex);
    for (auto it = sessions.begin(); it != sessions.end();) {
      const bool pending = std::any_of(jobs.begin(), jobs.end(), [&](const auto& j) { return j.second.session == it->first; });
      if (!it->second->busy && !pending && it->second->last_used < cutoff) {
        it = sessions.erase(it);
      } else {
        ++it;
      }
    }
  }

  std::shared_ptr<Entry> entry(const std::string& id) {
    std::lock_guard lock(mutex);
    const auto it = sessions.find(id);
    if (it == sessions.end()) throw Error(ErrorCode::not_found, "no session '" + id + "'");
    it->second->last_used = Clock::now();
    return it->second;
  }

  // Latest committed state; conflict while the session is still initializing.
  std::pair<SessionHandle, std::shared_ptr<const SessionState>> committed(const std::string& id) {
    const auto e = entry(id);
    std::lock_guard lock(mutex);
    if (!e->state) throw Error(ErrorCode::conflict, "session '" + id + "' is still initializing");
    return {e->handle, e->state};
  }

  // Runs `work` off the request thread; answers 202 with a poll token when it
  // outlives options.async_after.
  void run_job(httplib::Response& res, const std::shared_ptr<Entry>& e,
               std::function<SessionState(const SessionState*)> work, ViewOptions view) {
    std::shared_ptr<const SessionState> current;
    {
      std::lock_guard lock(mutex);
      if (e->busy) throw Error(ErrorCode::conflict, "another mutation is in progress for session '" + e->handle.id + "'");
      e->busy = true;
      current = e->state;
    }
    std::shared_future<Outcome> result =
        std::async(std::launch::async, [this, e, current, work = std::move(work), view]() -> Outcome {
          Outcome out;
          try {
            auto next = std::make_shared<const SessionState>(work(current.get()));
            std::lock_guard lock(mutex);
            e->state = next;
            e->handle.updated = now_iso8601();
            e->busy = false;
            e->last_used = Clock::now();
            return {200, state_view(e->handle, *next, view).dump()};
          } catch (const Error& err) {
            out = error_outcome(err);
          } catch (const std::exception& err) {
            out = {500, error_json("internal", err.what()).dump()};
          }
          std::lock_guard lock(mutex);
          e->busy = false;
          if (!e->state) sessions.erase(e->handle.id);
          return out;
        }).share();

    if (result.wait_for(options.async_after) == std::future_status::ready) {
      send(res, result.get());
      return;
    }
    const std::string token = random_token();
    {
      std::lock_guard lock(mutex);
      jobs[token] = {e->handle.id, result};
    }
    Json j;
    j["sessionId"] = e->handle.id;
    j["token"] = token;
    j["poll"] = "/sessions/" + e->handle.id + "/jobs/" + token;
    send(res, 202, j);
  }

  fs::path resolve_corpus(const std::string& name) const {
    if (name.empty()) throw Error(ErrorCode::invalid_argument, "'corpus' is required");
    const fs::path root = fs::weakly_canonical(options.corpus_root);
    const fs::path path = fs::weakly_canonical(root / name);
    const auto rel = path.lexically_relative(root);
    if (rel.empty() || *rel.begin() == "..") {
      throw Error(ErrorCode::invalid_argument, "corpus '" + name + "' is outside the corpus root");
    }
    std::error_code ec;
    if (!fs::exists(path, ec)) throw Error(ErrorCode::not_found, "corpus '" + name + "' not found");
    return path;
  }

  void create_session(const httplib::Request& req, httplib::Response& res) {
    const Json body = parse_body(req);
    if (!body.is_object()) throw Error(ErrorCode::parse, "request body must be an object");
    for (const auto& [key, value] : body.items()) {
      if (key != "corpus" && key != "config") throw Error(ErrorCode::parse, "unknown field '" + key + "'");
    }
    if (!body.contains("corpus") || !body["corpus"].is_string()) {
      throw Error(ErrorCode::parse, "'corpus' must be a string");
    }
    const std::string name = body["corpus"].get<std::string>();
    SessionConfig config = options.defaults;
    if (body.contains("config")) config = config_from_json(body["config"], config);
    config.corpus = resolve_corpus(name).string();
    config.validate();

    auto e = std::make_shared<Entry>();
    e->handle.corpus = name;
    e->handle.created = e->handle.updated = now_iso8601();
    {
      std::lock_guard lock(mutex);
      do {
        e->handle.id = random_token();
      } while (sessions.count(e->handle.id));
      sessions[e->handle.id] = e;
    }
    run_job(res, e, [config](const SessionState*) { return init_session(config); }, view_options(req));
  }

  void poll_job(const std::string& id, const std::string& token, httplib::Response& res) {
    std::shared_future<Outcome> result;
    {
      std::lock_guard lock(mutex);
      const auto it = jobs.find(token);
      if (it == jobs.end() || it->second.session != id) throw Error(ErrorCode::not_found, "no job '" + token + "'");
      result = it->second.result;
    }
    if (result.wait_for(std::chrono::milliseconds(0)) != std::future_status::ready) {
      Json j;
      j["sessionId"] = id;
      j["token"] = token;
      j["status"] = "running";
      send(res, 202, j);
      return;
    }
    {
      std::lock_guard lock(mutex);
      jobs.erase(token);
    }
    send(res, result.get());
  }

  void iterate(const httplib::Request& req, httplib::Response& res) {
    Json body = parse_body(req);
    if (!body.is_object()) throw Error(ErrorCode::parse, "request body must be an object");
    std::optional<SiftMode> mode;
    if (body.contains("mode")) {
      if (!body["mode"].is_string()) throw Error(ErrorCode::parse, "'mode' must be a string");
      mode = parse_sift_mode(body["mode"].get<std::string>());
      body.erase("mode");
    }
    const FeedbackBatch batch = batch_from_json(body);
    check_vote_conflicts(batch);
    run_job(res, entry(req.path_params.at("id")),
            [batch, mode](const SessionState* s) { return run_iteration(*s, batch, mode); }, view_options(req));
  }

  void topic_count(const httplib::Request& req, httplib::Response& res) {
    const Json body = parse_body(req);
    if (!body.is_object() || !body.contains("delta") || !body["delta"].is_number_integer()) {
      throw Error(ErrorCode::parse, "body must be {\"delta\": integer}");
    }
    const int delta = body["delta"].get<int>();
    run_job(res, entry(req.path_params.at("id")),
            [delta](const SessionState* s) { return change_topic_count(*s, delta); }, view_options(req));
  }

  void documents(const httplib::Request& req, httplib::Response& res) {
    const auto [handle, state] = committed(req.path_params.at("id"));
    const int offset = int_param(req, "offset", 0);
    const int limit = int_param(req, "limit", 50);
    const int topic = int_param(req, "topic", -1);
    if (offset < 0) throw Error(ErrorCode::invalid_argument, "offset must be nonnegative");
    if (limit < 0 || limit > kMaxPageSize) {
      throw Error(ErrorCode::invalid_argument, "limit must lie in [0, " + std::to_string(kMaxPageSize) + "]");
    }
    const std::string scope = req.has_param("scope") ? req.get_param_value("scope") : "retrieved";
    if (scope != "retrieved" && scope != "all") throw Error(ErrorCode::invalid_argument, "scope must be retrieved or all");
    const std::string query = lowercase(req.has_param("query") ? req.get_param_value("query") : "");

    const auto& docs = state->corpus->documents;
    const auto& summary = state->model.summary;
    std::vector<int> rows;
    auto consider = [&](int d) {
      const auto& doc = docs[static_cast<std::size_t>(d)];
      if (topic >= 0) {
        const int c = column_of(*state, d);
        if (c < 0 || summary.assignment[static_cast<std::size_t>(c)] != topic) return;
      }
      if (!query.empty() && lowercase(doc.title).find(query) == std::string::npos &&
          lowercase(doc.text).find(query) == std::string::npos && lowercase(doc.id).find(query) == std::string::npos) {
        return;
      }
      rows.push_back(d);
    };
    if (scope == "all") {
      for (int d = 0; d < state->n_docs(); ++d) consider(d);
    } else {
      for (const int d : state->sift.retrieved) consider(d);
    }
    std::stable_sort(rows.begin(), rows.end(), [&](int a, int b) { return state->sift.scores(a) > state->sift.scores(b); });

    Json page = Json::array();
    const std::size_t end = std::min(rows.size(), static_cast<std::size_t>(offset) + static_cast<std::size_t>(limit));
    for (std::size_t i = static_cast<std::size_t>(offset); i < end; ++i) {
      const int d = rows[i];
      const auto& doc = docs[static_cast<std::size_t>(d)];
      const int c = column_of(*state, d);
      Json row;
      row["id"] = doc.id;
      row["title"] = doc.title;
      row["snippet"] = snippet(doc.text);
      row["topic"] = c >= 0 ? Json(summary.assignment[static_cast<std::size_t>(c)]) : Json(nullptr);
      row["relevance"] = state->sift.scores(d);
      row["closeness"] = c >= 0 ? Json(summary.closeness[static_cast<std::size_t>(c)]) : Json(nullptr);
      page.push_back(std::move(row));
    }
    Json j;
    j["offset"] = offset;
    j["limit"] = limit;
    j["total"] = rows.size();
    j["rows"] = std::move(page);
    send(res, 200, j);
  }

  void document(const std::string& id, const std::string& doc_id, httplib::Response& res) {
    const auto [handle, state] = committed(id);
    const auto it = state->corpus->doc_index.find(doc_id);
    if (it == state->corpus->doc_index.end()) throw Error(ErrorCode::not_found, "no document '" + doc_id + "'");
    const int d = it->second;
    const auto& doc = state->corpus->documents[static_cast<std::size_t>(d)];
    const int c = column_of(*state, d);
    Json j;
    j["id"] = doc.id;
    j["title"] = doc.title;
    j["label"] = doc.label;
    j["text"] = doc.text;
    j["retrieved"] = c >= 0;
    j["topic"] = c >= 0 ? Json(state->model.summary.assignment[static_cast<std::size_t>(c)]) : Json(nullptr);
    j["relevance"] = state->sift.scores(d);
    j["closeness"] = c >= 0 ? Json(state->model.summary.closeness[static_cast<std::size_t>(c)]) : Json(nullptr);
    send(res, 200, j);
  }

  void suggest(const httplib::Request& req, httplib::Response& res) {
    const auto [handle, state] = committed(req.path_params.at("id"));
    const auto& vocab = state->vocab();
    const int limit = int_param(req, "limit", state->config.suggestions);
    if (limit < 0) throw Error(ErrorCode::invalid_argument, "limit must be nonnegative");

    if (req.has_param("prefix")) {
      const std::string prefix = lowercase(req.get_param_value("prefix"));
      std::vector<int> matches;
      for (int w = 0; w < vocab.size(); ++w) {
        if (vocab.is_active(w) && vocab.words[static_cast<std::size_t>(w)].compare(0, prefix.size(), prefix) == 0) {
          matches.push_back(w);
        }
      }
      std::stable_sort(matches.begin(), matches.end(), [&](int a, int b) {
        return vocab.total_frequency[static_cast<std::size_t>(a)] > vocab.total_frequency[static_cast<std::size_t>(b)];
      });
      matches.resize(std::min(matches.size(), static_cast<std::size_t>(limit)));
      Json list = Json::array();
      for (const int w : matches) {
        Json m;
        m["word"] = vocab.words[static_cast<std::size_t>(w)];
        m["frequency"] = vocab.total_frequency[static_cast<std::size_t>(w)];
        list.push_back(std::move(m));
      }
      Json j;
      j["prefix"] = prefix;
      j["completions"] = std::move(list);
      send(res, 200, j);
      return;
    }

    const std::string polarity = req.has_param("polarity") ? req.get_param_value("polarity") : "both";
    if (polarity != "plus" && polarity != "minus" && polarity != "both") {
      throw Error(ErrorCode::invalid_argument, "polarity must be plus, minus or both");
    }
    Suggestions s;
    if (state->vectors) {
      if (req.has_param("words")) {
        std::vector<int> words;
        for (const auto& word : split_list(req.get_param_value("words"))) {
          const int w = vocab.find(word);
          if (w >= 0) words.push_back(w);
        }
        std::sort(words.begin(), words.end());
        words.erase(std::unique(words.begin(), words.end()), words.end());
        const std::vector<int> none;
        s = suggest_keywords(polarity == "minus" ? none : words, polarity == "minus" ? words : none, *state->vectors,
                             limit, vocab.stopword);
      } else {
        s = session_suggestions(*state);
        s.plus.resize(std::min(s.plus.size(), static_cast<std::size_t>(limit)));
        s.minus.resize(std::min(s.minus.size(), static_cast<std::size_t>(limit)));
      }
    }
    Json j;
    j["embeddings"] = state->vectors != nullptr;
    if (polarity != "minus") j["plus"] = neighbors_json(s.plus, vocab);
    if (polarity != "plus") j["minus"] = neighbors_json(s.minus, vocab);
    send(res, 200, j);
  }

  void remove_session(const std::string& id, httplib::Response& res) {
    std::lock_guard lock(mutex);
    const auto it = sessions.find(id);
    if (it == sessions.end()) throw Error(ErrorCode::not_found, "no session '" + id + "'");
    if (it->second->busy) throw Error(ErrorCode::conflict, "session '" + id + "' has a mutation in progress");
    sessions.erase(it);
    res.status = 204;
  }

  void routes() {
    http.set_default_headers({{"Access-Control-Allow-Origin", options.cors_origin}});
    http.set_pre_routing_handler([this](const httplib::Request&, httplib::Response&) {
      evict_idle();
      return httplib::Server::HandlerResponse::Unhandled;
    });
    http.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      try {
        std::rethrow_exception(ep);
      } catch (const Error& e) {
        send(res, error_outcome(e));
      } catch (const nlohmann::json::exception& e) {
        send(res, 400, error_json("parse", e.what()));
      } catch (const std::exception& e) {
        send(res, 500, error_json("internal", e.what()));
      } catch (...) {
        send(res, 500, error_json("internal", "unknown error"));
      }
    });
    http.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
      if (!res.body.empty()) return httplib::Server::HandlerResponse::Unhandled;
      send(res, res.status, error_json(res.status == 404 ? "not_found" : "http_error",
                                       std::to_string(res.status) + " " + req.method + " " + req.path));
      return httplib::Server::HandlerResponse::Handled;
    });
    http.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
      res.status = 204;
    });

    http.Get("/health", [](const httplib::Request&, httplib::Response& res) {
      Json j;
      j["status"] = "ok";
      send(res, 200, j);
    });
    http.Get("/sessions", [this](const httplib::Request&, httplib::Response& res) {
      Json list = Json::array();
      std::lock_guard lock(mutex);
      for (const auto& [id, e] : sessions) list.push_back(handle_to_json(e->handle));
      send(res, 200, list);
    });
    http.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) { create_session(req, res); });
    http.Delete("/sessions/:id", [this](const httplib::Request& req, httplib::Response& res) {
      remove_session(req.path_params.at("id"), res);
    });
    http.Get("/sessions/:id/state", [this](const httplib::Request& req, httplib::Response& res) {
      const auto [handle, state] = committed(req.path_params.at("id"));
      send(res, 200, state_view(handle, *state, view_options(req)));
    });
    http.Get("/sessions/:id/jobs/:token", [this](const httplib::Request& req, httplib::Response& res) {
      poll_job(req.path_params.at("id"), req.path_params.at("token"), res);
    });
    http.Post("/sessions/:id/iterate", [this](const httplib::Request& req, httplib::Response& res) { iterate(req, res); });
    http.Post("/sessions/:id/topic-count",
              [this](const httplib::Request& req, httplib::Response& res) { topic_count(req, res); });
    http.Get("/sessions/:id/documents", [this](const httplib::Request& req, httplib::Response& res) { documents(req, res); });
    http.Get(R"(/sessions/([^/]+)/documents/(.+))", [this](const httplib::Request& req, httplib::Response& res) {
      document(req.matches[1].str(), req.matches[2].str(), res);
    });
    http.Get("/sessions/:id/suggest", [this](const httplib::Request& req, httplib::Response& res) { suggest(req, res); });
    http.Post("/sessions/:id/export", [this](const httplib::Request& req, httplib::Response& res) {
      const auto [handle, state] = committed(req.path_params.at("id"));
      send(res, 200, export_results(*state));
    });
  }
};

Server::Server(ServerOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {}

Server::~Server() = default;

int Server::bind() {
  if (impl_->bound_port >= 0) return impl_->bound_port;
  const auto& o = impl_->options;
  if (o.port == 0) {
    impl_->bound_port = impl_->http.bind_to_any_port(o.host);
  } else if (impl_->http.bind_to_port(o.host, o.port)) {
    impl_->bound_port = o.port;
  }
  if (impl_->bound_port <= 0) {
    impl_->bound_port = -1;
    throw Error(ErrorCode::io, "cannot bind " + o.host + ":" + std::to_string(o.port));
  }
  return impl_->bound_port;
}

void Server::listen() {
  bind();
  if (!impl_->http.listen_after_bind()) throw Error(ErrorCode::io, "server stopped unexpectedly");
}

void Server::stop() { impl_->http.stop(); }

int Server::port() const noexcept { return impl_->bound_port; }

}  // namespace siftkit
