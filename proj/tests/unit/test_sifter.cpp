#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "siftkit/sifter.hpp"
#include "errors.hpp"
#include "synthetic.hpp"

using namespace siftkit;
using siftkit::testing::error_code_of;

namespace {

Target make_target(const Eigen::VectorXd& v, std::vector<int> words = {}) {
  return {{std::move(words)}, v.normalized(), {}};
}

SiftParams params_of(double alpha, double beta, double gamma, double delta = 0.04) {
  SiftParams p;
  p.alpha = alpha;
  p.beta = beta;
  p.gamma = gamma;
  p.delta = delta;
  return p;
}

// Five documents over words a..e (rows 0..4):
//   d0 = {a}, d1 = {a, b}, d2 = {b, c}, d3 = {c, d}, d4 = {e}
struct Toy {
  SparseMatrix x;
  std::unordered_map<std::string, int> doc_index{{"d0", 0}, {"d1", 1}, {"d2", 2}, {"d3", 3}, {"d4", 4}};
  Eigen::MatrixXd topics;
  std::vector<std::vector<int>> members;
  std::vector<bool> stopword = std::vector<bool>(5, false);

  Toy() {
    Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(5, 5);
    dense(0, 0) = 1;
    dense(0, 1) = dense(1, 1) = 1;
    dense(1, 2) = dense(2, 2) = 1;
    dense(2, 3) = dense(3, 3) = 1;
    dense(4, 4) = 1;
    dense.colwise().normalize();
    x = testing::to_sparse(dense);
    topics = Eigen::MatrixXd::Zero(5, 2);
    topics(0, 0) = 1;
    topics(1, 0) = 1;
    topics(3, 1) = 1;
    members = {{0, 1, 2}, {3, 4}};
  }

  HardSiftContext context() const { return {x, doc_index, topics, members, nullptr, stopword}; }
};

}  // namespace

TEST_CASE("sift mode names") {
  CHECK(std::string(to_string(SiftMode::soft)) == "soft");
  CHECK(parse_sift_mode("hard") == SiftMode::hard);
  CHECK(error_code_of([] { parse_sift_mode("medium"); }) == ErrorCode::invalid_argument);
}

TEST_CASE("sift parameter validation") {
  CHECK_NOTHROW(SiftParams{}.validate());
  CHECK_NOTHROW(params_of(0.4, 0.6, 0.0).validate());
  CHECK_NOTHROW(params_of(0.5, 0.6, 0.1).validate());
  CHECK(error_code_of([] { params_of(0.5, 0.5, 0.1).validate(); }) == ErrorCode::invalid_argument);
  CHECK(error_code_of([] { params_of(0.8, 0.3, 0.3).validate(); }) == ErrorCode::invalid_argument);
  CHECK(error_code_of([] { params_of(1.2, 0.0, -0.2).validate(); }) == ErrorCode::invalid_argument);
  CHECK(error_code_of([] { params_of(0.4, 0.6, 0.0, 0.0).validate(); }) == ErrorCode::invalid_argument);
  CHECK(error_code_of([] { params_of(0.4, 0.6, 0.0, 1.0).validate(); }) == ErrorCode::invalid_argument);
  SiftParams bad_k;
  bad_k.sim_k = 0;
  CHECK(error_code_of([&] { bad_k.validate(); }) == ErrorCode::invalid_argument);
}

TEST_CASE("soft relevance components") {
  Toy toy;
  TargetSet set;
  set.explicit_pos.push_back(make_target(Eigen::MatrixXd(toy.x).col(1)));
  auto [plus, minus] = soft_relevance_components(toy.x, 1, set);
  CHECK(plus == doctest::Approx(1.0));
  CHECK(minus == 0.0);

  // cosines 0.2 and 0.6 with a unit document
  SparseMatrix e(3, 1);
  e.insert(0, 0) = 1.0;
  TargetSet two;
  two.explicit_pos.push_back({{}, Eigen::Vector3d(0.2, std::sqrt(1 - 0.04), 0), {}});
  two.implicit_pos.push_back({{}, Eigen::Vector3d(0.6, 0, 0.8), {}});
  auto [p2, m2] = soft_relevance_components(e, 0, two);
  CHECK(p2 == doctest::Approx(0.4));
  CHECK(m2 == 0.0);
}

TEST_CASE("soft recurrence example") {
  // one word space of size 2: x = e0, positive target has cosine 0.3, negative 0.2
  SparseMatrix x(2, 1);
  x.insert(0, 0) = 1.0;
  TargetSet set;
  set.explicit_pos.push_back({{}, Eigen::Vector2d(0.3, std::sqrt(1 - 0.09)), {}});
  set.explicit_neg.push_back({{}, Eigen::Vector2d(0.2, std::sqrt(1 - 0.04)), {}});
  const auto result = soft_sift(set, x, Eigen::VectorXd::Constant(1, 0.5), params_of(0.5, 0.6, 0.1));
  CHECK(result.scores(0) == doctest::Approx(0.41));
  CHECK(result.retrieved == std::vector<int>{0});
  CHECK(result.mode == SiftMode::soft);
}

TEST_CASE("soft threshold is strict") {
  SparseMatrix x(1, 2);
  x.insert(0, 0) = 1.0;
  x.insert(0, 1) = 1.0;
  const TargetSet none;
  Eigen::VectorXd prev(2);
  // alpha = 1 is invalid, so scale by alpha = 0.5 and pick previous scores accordingly
  prev << 0.08, 0.0802;
  const auto result = soft_sift(none, x, prev, params_of(0.5, 0.6, 0.1));
  CHECK(result.scores(0) == 0.04);
  CHECK(result.scores(1) == doctest::Approx(0.0401));
  CHECK(result.retrieved == std::vector<int>{1});
}

TEST_CASE("soft sift without targets is pure decay") {
  const auto x = testing::random_doc_term(20, 30, 0.2, 4);
  const Eigen::VectorXd prev = testing::random_nonneg(30, 1, 5).col(0);
  const auto params = params_of(0.7, 0.5, 0.2);
  const auto result = soft_sift({}, x, prev, params);
  CHECK(result.scores == (params.alpha * prev).eval());
}

TEST_CASE("soft sift matches a per-document recomputation") {
  const int m = 60;
  const int n = 400;
  const auto x = testing::random_doc_term(m, n, 0.08, 12);
  std::mt19937_64 rng(5);
  TargetSet set;
  const Eigen::MatrixXd pool = testing::random_nonneg(m, 7, 13);
  for (int j = 0; j < 3; ++j) set.explicit_pos.push_back(make_target(pool.col(j)));
  set.implicit_pos.push_back(make_target(pool.col(3)));
  set.explicit_neg.push_back(make_target(pool.col(4)));
  set.implicit_neg.push_back(make_target(pool.col(5)));
  const Eigen::VectorXd prev = testing::random_nonneg(n, 1, 14).col(0) * 0.3;
  const auto params = params_of(0.5, 0.6, 0.1, 0.2);
  const auto result = soft_sift(set, x, prev, params);

  const Eigen::MatrixXd dense(x);
  std::vector<int> expected;
  for (int i = 0; i < n; ++i) {
    double plus = 0;
    for (const auto* g : set.positive_vectors()) plus += dense.col(i).dot(*g);
    plus /= 4;
    double minus = 0;
    for (const auto* g : set.negative_vectors()) minus += dense.col(i).dot(*g);
    minus /= 2;
    const double s = params.alpha * prev(i) + params.beta * plus - params.gamma * minus;
    CHECK(std::abs(result.scores(i) - s) <= 1e-12);
    CHECK(std::abs(result.scores(i)) <= params.alpha * std::abs(prev(i)) + params.beta + params.gamma);
    if (s > params.delta) expected.push_back(i);
  }
  CHECK(result.retrieved == expected);
}

TEST_CASE("soft sift rejects bad input before computing") {
  const auto x = testing::random_doc_term(5, 4, 0.5, 1);
  CHECK(error_code_of([&] { soft_sift({}, x, Eigen::VectorXd::Zero(4), params_of(0.5, 0.5, 0.5)); }) ==
        ErrorCode::invalid_argument);
  CHECK(error_code_of([&] { soft_sift({}, x, Eigen::VectorXd::Zero(3), SiftParams{}); }) ==
        ErrorCode::invalid_argument);
}

TEST_CASE("hard sift with a positive keyword retrieves exactly its documents") {
  Toy toy;
  TargetSet set;
  set.explicit_pos.push_back(make_target(Eigen::VectorXd::Unit(5, 0), {0}));
  const auto result = hard_sift(set, {}, {}, toy.context(), SiftParams{});
  CHECK(result.retrieved == std::vector<int>{0, 1});
  CHECK(result.mode == SiftMode::hard);
  CHECK(result.scores.sum() == 2.0);

  // brute force: documents containing every word of the compound
  TargetSet pair;
  pair.explicit_pos.push_back(make_target(Eigen::VectorXd::Ones(5), {1, 2}));
  CHECK(hard_sift(pair, {}, {}, toy.context(), SiftParams{}).retrieved == std::vector<int>{2});
}

TEST_CASE("hard sift with a negative compound excludes its matches") {
  Toy toy;
  TargetSet set;
  set.explicit_neg.push_back(make_target(Eigen::VectorXd::Unit(5, 3), {3}));
  const auto result = hard_sift(set, {}, {0, 1, 2, 3, 4}, toy.context(), SiftParams{});
  CHECK(result.retrieved == std::vector<int>{0, 1, 2, 4});
}

TEST_CASE("hard sift without targets keeps the previous set") {
  Toy toy;
  CHECK(hard_sift({}, {}, {1, 3}, toy.context(), SiftParams{}).retrieved == std::vector<int>{1, 3});
}

TEST_CASE("hard sift applies removals before additions") {
  Toy toy;
  FeedbackBatch batch;
  batch.down_topics = {1};
  batch.up_topics = {0};
  // topic 1 members are {3, 4}; topic 0 vector covers a and b
  const auto result = hard_sift({}, batch, {0, 1, 2, 3, 4}, toy.context(), SiftParams{});
  CHECK(result.retrieved == std::vector<int>{0, 1, 2});

  // d2 is removed with topic 0 but is close to the upvoted doc d1, so it returns
  FeedbackBatch again;
  again.down_topics = {0};
  again.up_docs = {"d1"};
  const auto back = hard_sift({}, again, {0, 1, 2, 3, 4}, toy.context(), SiftParams{});
  CHECK(back.retrieved == std::vector<int>{0, 1, 2, 3, 4});
}

TEST_CASE("hard sift downvoted documents only remove previously retrieved ones") {
  Toy toy;
  TargetSet set;
  set.explicit_pos.push_back(make_target(Eigen::VectorXd::Unit(5, 1), {1}));
  FeedbackBatch batch;
  batch.down_docs = {"d3"};
  // d2 shares c with d3 but was not retrieved before, so the positive keyword keeps it
  const auto result = hard_sift(set, batch, {3}, toy.context(), SiftParams{});
  CHECK(result.retrieved == std::vector<int>{1, 2});
}

TEST_CASE("hard sift is invariant to document order") {
  const int n = 40;
  const auto x = testing::random_doc_term(15, n, 0.2, 17);
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(3));
  const Eigen::MatrixXd dense(x);
  Eigen::MatrixXd shuffled(dense.rows(), n);
  for (int i = 0; i < n; ++i) shuffled.col(perm[i]) = dense.col(i);
  const auto xs = testing::to_sparse(shuffled);

  std::unordered_map<std::string, int> index;
  std::unordered_map<std::string, int> index_s;
  for (int i = 0; i < n; ++i) {
    index["d" + std::to_string(i)] = i;
    index_s["d" + std::to_string(i)] = perm[i];
  }
  const Eigen::MatrixXd topics = testing::random_nonneg(15, 2, 4);
  std::vector<std::vector<int>> members{{0, 1, 2, 3, 4, 5}, {6, 7, 8}};
  std::vector<std::vector<int>> members_s;
  for (const auto& group : members) {
    std::vector<int> g;
    for (const int d : group) g.push_back(perm[d]);
    members_s.push_back(g);
  }
  const std::vector<bool> stop(15, false);
  TargetSet set;
  set.explicit_pos.push_back(make_target(Eigen::VectorXd::Unit(15, 2), {2}));
  set.explicit_neg.push_back(make_target(Eigen::VectorXd::Unit(15, 5), {5}));
  FeedbackBatch batch;
  batch.down_topics = {0};
  batch.up_topics = {1};
  batch.down_docs = {"d10"};
  batch.up_docs = {"d11"};
  std::vector<int> prev{10, 12, 14, 20, 30};
  std::vector<int> prev_s;
  for (const int d : prev) prev_s.push_back(perm[d]);
  const auto params = params_of(0.4, 0.6, 0.0, 0.3);

  const auto a = hard_sift(set, batch, prev, {x, index, topics, members, nullptr, stop}, params);
  const auto b = hard_sift(set, batch, prev_s, {xs, index_s, topics, members_s, nullptr, stop}, params);
  std::vector<int> mapped;
  for (const int d : a.retrieved) mapped.push_back(perm[d]);
  std::sort(mapped.begin(), mapped.end());
  CHECK(mapped == b.retrieved);
}

TEST_CASE("hard sift expands compound words through nearest words") {
  Toy toy;
  WordVectors wv;
  wv.vectors = Eigen::MatrixXd::Zero(5, 2);
  wv.vectors(0, 0) = 1;
  wv.vectors(4, 0) = 1;
  wv.vectors(1, 1) = 1;
  wv.vectors(2, 1) = 1;
  wv.vectors(3, 1) = 1;
  auto ctx = toy.context();
  const HardSiftContext with_vectors{ctx.x, ctx.doc_index, ctx.topic_vectors, ctx.topic_members, &wv, ctx.stopword};
  TargetSet set;
  set.explicit_pos.push_back(make_target(Eigen::VectorXd::Unit(5, 0), {0}));
  // sim(a) = {a, e}
  CHECK(hard_sift(set, {}, {}, with_vectors, SiftParams{}).retrieved == std::vector<int>{0, 1, 4});
}

TEST_CASE("hard sift rejects unknown votes") {
  Toy toy;
  FeedbackBatch topic;
  topic.up_topics = {2};
  CHECK(error_code_of([&] { hard_sift({}, topic, {}, toy.context(), SiftParams{}); }) == ErrorCode::not_found);
  FeedbackBatch doc;
  doc.down_docs = {"nope"};
  CHECK(error_code_of([&] { hard_sift({}, doc, {}, toy.context(), SiftParams{}); }) == ErrorCode::not_found);
}
