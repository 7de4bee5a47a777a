#include <doctest.h>

#include "siftkit/server.hpp"

// after Eigen: resolv.h defines a `_res` macro
#include <httplib.h>

#include <cstdlib>
#include <thread>

#include "synthetic.hpp"
#include "tempdir.hpp"

using namespace siftkit;
using siftkit::testing::TempDir;

namespace {

std::string labeled_jsonl(int per_category) {
  testing::LabeledCorpusSpec spec;
  spec.docs_per_category = per_category;
  spec.distractor_categories = 3;
  return testing::to_jsonl(testing::make_labeled_corpus(spec));
}

// Server on an ephemeral port, listening on a background thread.
class Running {
 public:
  explicit Running(ServerOptions options) : server_(std::move(options)) {
    port_ = server_.bind();
    thread_ = std::thread([this] { server_.listen(); });
  }
  ~Running() {
    server_.stop();
    thread_.join();
  }

  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port_);
    c.set_read_timeout(60, 0);
    return c;
  }

 private:
  Server server_;
  int port_ = 0;
  std::thread thread_;
};

ServerOptions options_for(const TempDir& dir) {
  ServerOptions o;
  o.port = 0;
  o.corpus_root = dir.path();
  o.defaults.embeddings = false;
  o.defaults.topics = 5;
  o.defaults.max_outer = 20;
  return o;
}

Json body_of(const httplib::Result& r) {
  REQUIRE(r);
  return Json::parse(r->body);
}

std::string create(httplib::Client& c, const std::string& corpus = "news.jsonl") {
  Json req;
  req["corpus"] = corpus;
  const auto r = c.Post("/sessions", req.dump(), "application/json");
  REQUIRE(r);
  REQUIRE(r->status == 200);
  return Json::parse(r->body)["session"]["id"].get<std::string>();
}

// Follows a 202 poll token until the job settles.
httplib::Result settle(httplib::Client& c, httplib::Result&& r) {
  while (r && r->status == 202) {
    const auto poll = Json::parse(r->body)["poll"].get<std::string>();
    for (;;) {
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
      r = c.Get(poll);
      if (!r || r->status != 202) break;
    }
  }
  return r;
}

}  // namespace

TEST_CASE("error codes map to HTTP statuses") {
  CHECK(http_status(ErrorCode::invalid_argument) == 400);
  CHECK(http_status(ErrorCode::parse) == 400);
  CHECK(http_status(ErrorCode::not_found) == 404);
  CHECK(http_status(ErrorCode::conflict) == 409);
  CHECK(http_status(ErrorCode::empty_result) == 422);
}

TEST_CASE("environment overrides server options") {
  ::setenv("SIFTKIT_BIND", "0.0.0.0:9123", 1);
  ::setenv("SIFTKIT_CORPUS_ROOT", "/data/corpora", 1);
  ::setenv("SIFTKIT_SESSION_TIMEOUT", "90", 1);
  const auto o = options_from_env();
  CHECK(o.host == "0.0.0.0");
  CHECK(o.port == 9123);
  CHECK(o.corpus_root == "/data/corpora");
  CHECK(o.session_timeout == std::chrono::seconds(90));
  ::setenv("SIFTKIT_BIND", ":7000", 1);
  CHECK(options_from_env().host == "127.0.0.1");
  CHECK(options_from_env().port == 7000);
  ::setenv("SIFTKIT_SESSION_TIMEOUT", "soon", 1);
  CHECK_THROWS_AS(options_from_env(), Error);
  ::unsetenv("SIFTKIT_BIND");
  ::unsetenv("SIFTKIT_CORPUS_ROOT");
  ::unsetenv("SIFTKIT_SESSION_TIMEOUT");
}

TEST_CASE("session lifecycle over HTTP") {
  TempDir dir;
  dir.write("news.jsonl", labeled_jsonl(12));
  Running server(options_for(dir));
  auto c = server.client();

  const auto health = c.Get("/health");
  REQUIRE(health);
  CHECK(health->status == 200);
  CHECK(health->get_header_value("Access-Control-Allow-Origin") == "*");

  Json req;
  req["corpus"] = "news.jsonl";
  const auto created = c.Post("/sessions", req.dump(), "application/json");
  REQUIRE(created);
  REQUIRE(created->status == 200);
  const Json view = Json::parse(created->body);
  const std::string id = view["session"]["id"];
  const int n = view["nDocs"];
  CHECK(view["iteration"] == 0);
  CHECK(view["retrievedCount"] == n);
  CHECK(view["status"]["retained"] == n);
  CHECK(view["status"]["incoming"] == 0);
  CHECK(view["topics"].size() == 5);
  CHECK(view["history"].size() == 1);

  SUBCASE("state reads are byte identical and match the mutation payload") {
    const auto a = c.Get("/sessions/" + id + "/state");
    const auto b = c.Get("/sessions/" + id + "/state");
    REQUIRE(a);
    REQUIRE(b);
    CHECK(a->body == b->body);
    CHECK(a->body == created->body);
  }

  SUBCASE("iterations, decay and topic counts") {
    Json batch;
    batch["addGood"] = {"puck, goalie"};
    const auto it1 = c.Post("/sessions/" + id + "/iterate", batch.dump(), "application/json");
    REQUIRE(it1);
    REQUIRE(it1->status == 200);
    const Json v1 = Json::parse(it1->body);
    CHECK(v1["iteration"] == 1);
    CHECK(v1["retrievedCount"].get<int>() < n);
    CHECK(v1["targets"]["explicitPos"].size() == 1);
    const auto& s = v1["status"];
    CHECK(s["retained"].get<int>() + s["incoming"].get<int>() + s["outgoing"].get<int>() +
              s["stayedOut"].get<int>() ==
          n);

    const auto state = c.Get("/sessions/" + id + "/state");
    CHECK(state->body == it1->body);

    const auto it2 = c.Post("/sessions/" + id + "/iterate", "{}", "application/json");
    REQUIRE(it2);
    CHECK(it2->status == 200);
    CHECK(body_of(it2)["iteration"] == 2);

    Json hard = Json::parse(R"({"mode": "hard", "downTopics": [0]})");
    const auto it3 = c.Post("/sessions/" + id + "/iterate", hard.dump(), "application/json");
    REQUIRE(it3);
    CHECK(it3->status == 200);
    CHECK(body_of(it3)["history"].back()["mode"] == "hard");

    const auto more = c.Post("/sessions/" + id + "/topic-count", R"({"delta": 1})", "application/json");
    REQUIRE(more);
    REQUIRE(more->status == 200);
    const Json vm = Json::parse(more->body);
    CHECK(vm["topicCount"] == body_of(it3)["topicCount"].get<int>() + 1);
    CHECK(vm["iteration"] == 3);
    CHECK(vm["history"].size() == 4);

    const auto bad = c.Post("/sessions/" + id + "/topic-count", R"({"delta": 3})", "application/json");
    REQUIRE(bad);
    CHECK(bad->status == 400);
    CHECK(body_of(bad)["code"] == "invalid_argument");
  }

  SUBCASE("empty result keeps the session") {
    const auto r = c.Post("/sessions/" + id + "/iterate", R"({"addBad": ["game"]})", "application/json");
    REQUIRE(r);
    CHECK(r->status == 422);
    CHECK(body_of(r)["code"] == "empty_result");
    CHECK(body_of(c.Get("/sessions/" + id + "/state"))["iteration"] == 0);
  }

  SUBCASE("documents are paginated") {
    const auto page = c.Get("/sessions/" + id + "/documents?offset=0&limit=7");
    const Json p = body_of(page);
    CHECK(p["rows"].size() == 7);
    CHECK(p["total"] == n);
    const auto& row = p["rows"][0];
    CHECK(row.contains("snippet"));
    CHECK(row["topic"].is_number_integer());
    const auto tail = body_of(c.Get("/sessions/" + id + "/documents?offset=" + std::to_string(n - 2) + "&limit=50"));
    CHECK(tail["rows"].size() == 2);
    const auto filtered = body_of(c.Get("/sessions/" + id + "/documents?query=hockey&limit=1000"));
    CHECK(filtered["total"].get<int>() > 0);
    CHECK(filtered["total"].get<int>() < n);
    const auto too_big = c.Get("/sessions/" + id + "/documents?limit=5000");
    CHECK(too_big->status == 400);
    const auto not_number = c.Get("/sessions/" + id + "/documents?offset=abc");
    CHECK(not_number->status == 400);

    const std::string doc_id = row["id"];
    const auto detail = c.Get("/sessions/" + id + "/documents/" + httplib::detail::encode_url(doc_id));
    const Json d = body_of(detail);
    CHECK(detail->status == 200);
    CHECK(d["id"] == doc_id);
    CHECK(d["retrieved"] == true);
    CHECK(!d["text"].get<std::string>().empty());
    CHECK(c.Get("/sessions/" + id + "/documents/none")->status == 404);
  }

  SUBCASE("suggestions and completions") {
    const auto comp = body_of(c.Get("/sessions/" + id + "/suggest?prefix=go&limit=3"));
    REQUIRE(!comp["completions"].empty());
    CHECK(comp["completions"].size() <= 3);
    for (const auto& m : comp["completions"]) CHECK(m["word"].get<std::string>().rfind("go", 0) == 0);
    const auto s = body_of(c.Get("/sessions/" + id + "/suggest?polarity=plus"));
    CHECK(s["embeddings"] == false);
    CHECK(s["plus"].empty());
    CHECK_FALSE(s.contains("minus"));
    CHECK(c.Get("/sessions/" + id + "/suggest?polarity=up")->status == 400);
  }

  SUBCASE("export follows the document schema") {
    const auto r = c.Post("/sessions/" + id + "/export", "", "application/json");
    const Json e = body_of(r);
    CHECK(r->status == 200);
    CHECK(e["iteration"] == 0);
    CHECK(e["documents"].size() == static_cast<std::size_t>(n));
    CHECK(e["targets"]["explicitNeg"].is_array());
  }

  SUBCASE("representative counts follow cell areas") {
    const auto v = body_of(c.Get("/sessions/" + id + "/state?areas=1000,0,400&square=100"));
    CHECK(v["topics"][0]["documents"].size() == std::min<std::size_t>(10, v["topics"][0]["size"]));
    CHECK(v["topics"][1]["documents"].empty());
    CHECK(v["topics"][2]["documents"].size() == std::min<std::size_t>(4, v["topics"][2]["size"]));
    const auto& reps = v["topics"][0]["documents"];
    for (std::size_t i = 1; i < reps.size(); ++i) {
      CHECK(reps[i - 1]["closeness"].get<double>() >= reps[i]["closeness"].get<double>());
    }
  }

  SUBCASE("deleting a session") {
    CHECK(c.Delete("/sessions/" + id)->status == 204);
    CHECK(c.Get("/sessions/" + id + "/state")->status == 404);
  }
}

TEST_CASE("request errors are structured") {
  TempDir dir;
  dir.write("news.jsonl", labeled_jsonl(6));
  Running server(options_for(dir));
  auto c = server.client();

  const auto missing = c.Get("/sessions/nope/state");
  REQUIRE(missing);
  CHECK(missing->status == 404);
  CHECK(body_of(missing)["code"] == "not_found");
  CHECK(body_of(missing)["message"].is_string());

  CHECK(c.Get("/no/such/route")->status == 404);
  CHECK(body_of(c.Get("/no/such/route"))["code"] == "not_found");
  CHECK(c.Post("/sessions", "{", "application/json")->status == 400);
  CHECK(c.Post("/sessions", R"({"corpus": "absent.jsonl"})", "application/json")->status == 404);
  CHECK(c.Post("/sessions", R"({"corpus": "../etc/passwd"})", "application/json")->status == 400);
  CHECK(c.Post("/sessions", R"({"corpus": "news.jsonl", "extra": 1})", "application/json")->status == 400);
  CHECK(c.Post("/sessions", R"({"corpus": "news.jsonl", "config": {"topics": 0}})", "application/json")->status ==
        400);

  const std::string id = create(c);
  CHECK(c.Post("/sessions/" + id + "/iterate", R"({"upvotes": [1]})", "application/json")->status == 400);
  CHECK(c.Post("/sessions/" + id + "/iterate", R"({"upTopics": [1], "downTopics": [1]})", "application/json")
            ->status == 400);
  CHECK(c.Post("/sessions/" + id + "/iterate", R"({"mode": "fuzzy"})", "application/json")->status == 400);

  const auto preflight = c.Options("/sessions");
  REQUIRE(preflight);
  CHECK(preflight->status == 204);
  CHECK(preflight->get_header_value("Access-Control-Allow-Methods").find("POST") != std::string::npos);
}

TEST_CASE("slow mutations answer with a poll token and block other writers") {
  TempDir dir;
  dir.write("big.jsonl", labeled_jsonl(250));
  auto options = options_for(dir);
  options.async_after = std::chrono::milliseconds(0);
  options.defaults.topics = 10;
  options.defaults.max_outer = 50;
  options.defaults.tol = 0.0;
  Running server(options);
  auto c = server.client();

  Json req;
  req["corpus"] = "big.jsonl";
  const auto created = settle(c, c.Post("/sessions", req.dump(), "application/json"));
  REQUIRE(created);
  REQUIRE(created->status == 200);
  const std::string id = body_of(created)["session"]["id"];

  auto first = c.Post("/sessions/" + id + "/iterate", R"({"addGood": ["game"]})", "application/json");
  REQUIRE(first);
  REQUIRE(first->status == 202);
  const Json ticket = Json::parse(first->body);
  CHECK(ticket["token"].is_string());

  const auto second = c.Post("/sessions/" + id + "/iterate", "{}", "application/json");
  REQUIRE(second);
  CHECK(second->status == 409);
  CHECK(body_of(second)["code"] == "conflict");
  CHECK(c.Post("/sessions/" + id + "/topic-count", R"({"delta": 1})", "application/json")->status == 409);
  // reads keep serving the last committed state
  CHECK(body_of(c.Get("/sessions/" + id + "/state"))["iteration"] == 0);

  const auto done = settle(c, std::move(first));
  REQUIRE(done);
  CHECK(done->status == 200);
  CHECK(body_of(done)["iteration"] == 1);
  CHECK(c.Get(ticket["poll"].get<std::string>())->status == 404);
}

TEST_CASE("idle sessions are evicted") {
  TempDir dir;
  dir.write("news.jsonl", labeled_jsonl(6));
  auto options = options_for(dir);
  options.session_timeout = std::chrono::seconds(1);
  Running server(options);
  auto c = server.client();
  const std::string id = create(c);
  CHECK(c.Get("/sessions/" + id + "/state")->status == 200);
  std::this_thread::sleep_for(std::chrono::milliseconds(1200));
  CHECK(c.Get("/sessions/" + id + "/state")->status == 404);
}
