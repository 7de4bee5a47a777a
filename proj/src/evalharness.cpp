#include "siftkit/evalharness.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>

#include "siftkit/error.hpp"

namespace siftkit {
namespace {

struct VoteCandidate {
  int index = 0;
  double score = 0.0;
};

// Highest score first, ties to the lower index.
void rank_candidates(std::vector<VoteCandidate>& c) {
  std::sort(c.begin(), c.end(), [](const VoteCandidate& a, const VoteCandidate& b) {
    return a.score != b.score ? a.score > b.score : a.index < b.index;
  });
}

struct Simulator {
  const IdSet& relevant;
  Strategy strategy;
  int votes;
  std::set<std::string> voted_docs;
  std::vector<std::string> warnings;

  bool is_relevant(const SessionState& s, int col) const {
    return relevant.count(s.corpus->documents[static_cast<std::size_t>(col)].id) > 0;
  }

  // Retrieved documents of the given truth value by closeness, skipping
  // documents voted on before.
  std::vector<std::string> pick_docs(const SessionState& s, bool truth, int count) {
    std::vector<VoteCandidate> c;
    for (std::size_t i = 0; i < s.model.columns.size(); ++i) {
      const int col = s.model.columns[i];
      const auto& id = s.corpus->documents[static_cast<std::size_t>(col)].id;
      if (is_relevant(s, col) != truth || voted_docs.count(id)) continue;
      c.push_back({col, s.model.summary.closeness[i]});
    }
    rank_candidates(c);
    std::vector<std::string> out;
    for (std::size_t i = 0; i < c.size() && static_cast<int>(out.size()) < count; ++i) {
      out.push_back(s.corpus->documents[static_cast<std::size_t>(c[i].index)].id);
      voted_docs.insert(out.back());
    }
    return out;
  }

  // Topics whose members are mostly relevant (truth) or not, purest first.
  std::vector<int> pick_topics(const SessionState& s, bool truth, int count) const {
    std::vector<VoteCandidate> c;
    for (std::size_t t = 0; t < s.model.members.size(); ++t) {
      const auto& members = s.model.members[t];
      if (members.empty()) continue;
      const auto hits = std::count_if(members.begin(), members.end(), [&](int col) { return is_relevant(s, col); });
      const double fraction = static_cast<double>(hits) / static_cast<double>(members.size());
      const bool is_true = fraction > 0.5;
      if (is_true != truth) continue;
      c.push_back({static_cast<int>(t), truth ? fraction : 1.0 - fraction});
    }
    rank_candidates(c);
    std::vector<int> out;
    for (std::size_t i = 0; i < c.size() && static_cast<int>(out.size()) < count; ++i) out.push_back(c[i].index);
    return out;
  }

  FeedbackBatch votes_for(const SessionState& s) {
    FeedbackBatch b;
    const int half = std::max(1, votes / 2);
    switch (strategy) {
      case Strategy::plus_doc: b.up_docs = pick_docs(s, true, votes); break;
      case Strategy::plus_topic: b.up_topics = pick_topics(s, true, votes); break;
      case Strategy::minus_doc: b.down_docs = pick_docs(s, false, votes); break;
      case Strategy::minus_topic: b.down_topics = pick_topics(s, false, votes); break;
      case Strategy::pm_doc:
        b.up_docs = pick_docs(s, true, half);
        b.down_docs = pick_docs(s, false, votes - half);
        break;
      case Strategy::pm_topic:
        b.up_topics = pick_topics(s, true, half);
        b.down_topics = pick_topics(s, false, votes - half);
        break;
    }
    const auto cast = b.up_docs.size() + b.down_docs.size() + b.up_topics.size() + b.down_topics.size();
    if (static_cast<int>(cast) < votes) {
      warnings.push_back("iteration " + std::to_string(s.iteration + 1) + ": only " + std::to_string(cast) + " of " +
                         std::to_string(votes) + " votes had eligible candidates");
    }
    return b;
  }
};

IterationMetrics measure(const SessionState& s, const IdSet& relevant) {
  IterationMetrics m;
  m.iteration = s.iteration;
  m.retrieved = static_cast<int>(s.sift.retrieved.size());
  std::vector<std::string> retrieved;
  retrieved.reserve(s.sift.retrieved.size());
  for (const int c : s.sift.retrieved) retrieved.push_back(s.corpus->documents[static_cast<std::size_t>(c)].id);
  m.metrics = precision_recall_f1(retrieved, relevant);

  std::vector<int> order(static_cast<std::size_t>(s.n_docs()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return s.sift.scores(a) > s.sift.scores(b); });
  std::vector<std::string> ranking;
  ranking.reserve(order.size());
  for (const int c : order) ranking.push_back(s.corpus->documents[static_cast<std::size_t>(c)].id);
  m.pres = pres(ranking, relevant, std::max(1, m.retrieved));
  return m;
}

}  // namespace

Metrics precision_recall_f1(const std::vector<std::string>& retrieved, const IdSet& relevant) {
  if (relevant.empty()) throw Error(ErrorCode::invalid_argument, "relevant set is empty");
  const IdSet unique(retrieved.begin(), retrieved.end());
  std::size_t hits = 0;
  for (const auto& id : unique) hits += relevant.count(id);
  Metrics m;
  m.precision = unique.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(unique.size());
  m.recall = static_cast<double>(hits) / static_cast<double>(relevant.size());
  m.f1 = harmonic_mean(m.precision, m.recall);
  return m;
}

double harmonic_mean(double precision, double recall) {
  const double sum = precision + recall;
  return sum > 0.0 ? 2.0 * precision * recall / sum : 0.0;
}

double pres(const std::vector<std::string>& ranking, const IdSet& relevant, int n_max) {
  if (n_max < 1) throw Error(ErrorCode::invalid_argument, "N_max must be at least 1");
  if (relevant.empty()) throw Error(ErrorCode::invalid_argument, "relevant set is empty");
  const auto n = static_cast<double>(relevant.size());
  double rank_sum = 0.0;
  std::size_t found = 0;
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    if (relevant.count(ranking[i])) {
      rank_sum += static_cast<double>(i + 1);
      ++found;
    }
  }
  for (std::size_t miss = 1; found + miss <= relevant.size(); ++miss) {
    rank_sum += static_cast<double>(n_max) + static_cast<double>(miss);
  }
  return 1.0 - (rank_sum - n * (n + 1.0) / 2.0) / (n * static_cast<double>(n_max));
}

const char* to_string(Strategy s) noexcept {
  switch (s) {
    case Strategy::plus_doc: return "pd";
    case Strategy::plus_topic: return "pT";
    case Strategy::minus_doc: return "md";
    case Strategy::minus_topic: return "mT";
    case Strategy::pm_doc: return "pmd";
    case Strategy::pm_topic: return "pmT";
  }
  return "?";
}

Strategy parse_strategy(std::string_view name) {
  for (const Strategy s : all_strategies()) {
    if (name == to_string(s)) return s;
  }
  throw Error(ErrorCode::invalid_argument,
              "unknown strategy '" + std::string(name) + "' (expected pd, pT, md, mT, pmd or pmT)");
}

const std::vector<Strategy>& all_strategies() {
  static const std::vector<Strategy> kAll = {Strategy::plus_doc,    Strategy::plus_topic, Strategy::minus_doc,
                                             Strategy::minus_topic, Strategy::pm_doc,     Strategy::pm_topic};
  return kAll;
}

SiftParams reference_params(Strategy s) {
  SiftParams p;
  auto set = [&](double a, double b, double g) {
    p.alpha = a;
    p.beta = b;
    p.gamma = g;
  };
  switch (s) {
    case Strategy::plus_doc: set(0.4, 0.6, 0.0); break;
    case Strategy::plus_topic: set(0.6, 0.4, 0.0); break;
    case Strategy::minus_doc: set(0.7, 0.5, 0.2); break;
    case Strategy::minus_topic: set(0.5, 0.6, 0.1); break;
    case Strategy::pm_doc: set(0.6, 0.6, 0.2); break;
    case Strategy::pm_topic: set(0.7, 0.5, 0.2); break;
  }
  p.delta = 0.04;
  return p;
}

IdSet relevant_ids(const PreparedCorpus& prepared, const std::unordered_set<std::string>& relevant_labels) {
  IdSet out;
  for (const auto& d : prepared.documents) {
    if (relevant_labels.count(d.label)) out.insert(d.id);
  }
  return out;
}

EvalReport simulate_strategy(const PreparedCorpus& prepared, const IdSet& relevant, Strategy strategy,
                             const SiftParams& params, const SessionConfig& config, const SimulationOptions& options) {
  params.validate();
  if (relevant.empty()) throw Error(ErrorCode::invalid_argument, "relevant set is empty");
  if (options.iterations < 1 || options.runs < 1) {
    throw Error(ErrorCode::invalid_argument, "iterations and runs must be at least 1");
  }
  EvalReport report;
  report.strategy = strategy;
  report.params = params;
  report.runs = options.runs;
  for (int r = 0; r < options.runs; ++r) {
    report.seeds.push_back(static_cast<std::size_t>(r) < options.seeds.size()
                               ? options.seeds[static_cast<std::size_t>(r)]
                               : config.seed + static_cast<std::uint64_t>(r));
  }

  for (int r = 0; r < options.runs; ++r) {
    SessionConfig run_config = config;
    run_config.sift = params;
    run_config.mode = SiftMode::soft;
    run_config.seed = report.seeds[static_cast<std::size_t>(r)];
    SessionState state = init_session(prepared, run_config);
    Simulator sim{relevant, strategy, options.votes_per_iteration, {}, {}};

    std::vector<IterationMetrics> curve;
    for (int t = 1; t <= options.iterations; ++t) {
      FeedbackBatch batch;
      if (t == 1) {
        batch.add_good = options.initial_keywords;
      } else {
        batch = sim.votes_for(state);
      }
      try {
        state = run_iteration(state, batch);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::empty_result) throw;
        sim.warnings.push_back("run " + std::to_string(r) + " iteration " + std::to_string(t) + ": " + e.what());
      }
      IterationMetrics m = measure(state, relevant);
      m.iteration = t;
      curve.push_back(m);
    }
    for (auto& w : sim.warnings) report.warnings.push_back("run " + std::to_string(r) + ": " + std::move(w));
    report.per_run.push_back(std::move(curve));
  }

  for (int t = 0; t < options.iterations; ++t) {
    IterationMetrics avg;
    avg.iteration = t + 1;
    double retrieved = 0.0;
    for (const auto& curve : report.per_run) {
      const auto& m = curve[static_cast<std::size_t>(t)];
      avg.metrics.precision += m.metrics.precision;
      avg.metrics.recall += m.metrics.recall;
      avg.pres += m.pres;
      retrieved += m.retrieved;
    }
    const double runs = static_cast<double>(report.per_run.size());
    avg.metrics.precision /= runs;
    avg.metrics.recall /= runs;
    avg.metrics.f1 = harmonic_mean(avg.metrics.precision, avg.metrics.recall);
    avg.pres /= runs;
    avg.retrieved = static_cast<int>(retrieved / runs + 0.5);
    report.per_iteration.push_back(avg);
  }
  report.final_metrics = report.per_iteration.back();
  return report;
}

std::vector<SiftParams> valid_params(const ParamGrid& grid) {
  std::vector<SiftParams> out;
  for (const double a : grid.alpha) {
    for (const double b : grid.beta) {
      for (const double g : grid.gamma) {
        SiftParams p;
        p.alpha = a;
        p.beta = b;
        p.gamma = g;
        p.delta = grid.delta;
        try {
          p.validate();
        } catch (const Error&) {
          continue;
        }
        out.push_back(p);
      }
    }
  }
  return out;
}

GridResult grid_search(const PreparedCorpus& prepared, const IdSet& relevant, Strategy strategy,
                       const ParamGrid& grid, const SessionConfig& config, const SimulationOptions& options) {
  const auto combos = valid_params(grid);
  if (combos.empty()) throw Error(ErrorCode::invalid_argument, "parameter grid has no valid combination");
  GridResult result;
  std::size_t best = 0;
  for (std::size_t i = 0; i < combos.size(); ++i) {
    result.all.push_back(simulate_strategy(prepared, relevant, strategy, combos[i], config, options));
    if (result.all[i].final_metrics.metrics.f1 > result.all[best].final_metrics.metrics.f1) best = i;
  }
  result.best = combos[best];
  result.report = result.all[best];
  return result;
}

std::string format_report_table(const std::vector<EvalReport>& reports) {
  std::ostringstream out;
  char buf[64];
  auto row = [&](const char* name, auto value) {
    std::snprintf(buf, sizeof buf, "%-10s", name);
    out << buf;
    for (const auto& r : reports) {
      std::snprintf(buf, sizeof buf, " %9.3f", value(r));
      out << buf;
    }
    out << '\n';
  };
  std::snprintf(buf, sizeof buf, "%-10s", "");
  out << buf;
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof buf, " %9s", to_string(r.strategy));
    out << buf;
  }
  out << '\n';
  row("Precision", [](const EvalReport& r) { return r.final_metrics.metrics.precision; });
  row("Recall", [](const EvalReport& r) { return r.final_metrics.metrics.recall; });
  row("F1", [](const EvalReport& r) { return r.final_metrics.metrics.f1; });
  row("PRES", [](const EvalReport& r) { return r.final_metrics.pres; });
  row("alpha", [](const EvalReport& r) { return r.params.alpha; });
  row("beta", [](const EvalReport& r) { return r.params.beta; });
  row("gamma", [](const EvalReport& r) { return r.params.gamma; });
  row("delta", [](const EvalReport& r) { return r.params.delta; });
  return out.str();
}

Json report_to_json(const EvalReport& r) {
  auto metrics = [](const IterationMetrics& m) {
    Json j;
    j["iteration"] = m.iteration;
    j["precision"] = m.metrics.precision;
    j["recall"] = m.metrics.recall;
    j["f1"] = m.metrics.f1;
    j["pres"] = m.pres;
    j["retrieved"] = m.retrieved;
    return j;
  };
  Json j;
  j["strategy"] = to_string(r.strategy);
  j["params"] = {{"alpha", r.params.alpha}, {"beta", r.params.beta}, {"gamma", r.params.gamma},
                 {"delta", r.params.delta}};
  j["runs"] = r.runs;
  j["seeds"] = r.seeds;
  j["final"] = metrics(r.final_metrics);
  Json curve = Json::array();
  for (const auto& m : r.per_iteration) curve.push_back(metrics(m));
  j["perIteration"] = std::move(curve);
  Json runs = Json::array();
  for (const auto& run : r.per_run) {
    Json c = Json::array();
    for (const auto& m : run) c.push_back(metrics(m));
    runs.push_back(std::move(c));
  }
  j["perRun"] = std::move(runs);
  j["warnings"] = r.warnings;
  return j;
}

}  // namespace siftkit
