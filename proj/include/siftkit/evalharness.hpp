#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "siftkit/corpus.hpp"
#include "siftkit/json_io.hpp"
#include "siftkit/session.hpp"
#include "siftkit/sifter.hpp"

namespace siftkit {

struct Metrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

using IdSet = std::unordered_set<std::string>;

// Throws invalid_argument when `relevant` is empty. Duplicate retrieved ids count once.
Metrics precision_recall_f1(const std::vector<std::string>& retrieved, const IdSet& relevant);

// 2PR / (P + R), 0 when both are 0.
double harmonic_mean(double precision, double recall);

// 1 - (sum r_i - n(n+1)/2) / (n * n_max), n = |relevant|. r_i is the 1-based
// position in `ranking`; relevant ids missing from it take n_max + 1,
// n_max + 2, ... in turn.
double pres(const std::vector<std::string>& ranking, const IdSet& relevant, int n_max);

enum class Strategy { plus_doc, plus_topic, minus_doc, minus_topic, pm_doc, pm_topic };

// pd, pT, md, mT, pmd, pmT
const char* to_string(Strategy s) noexcept;
Strategy parse_strategy(std::string_view name);
const std::vector<Strategy>& all_strategies();
// Best-F1 parameters reported for each strategy on the newsgroup experiment.
SiftParams reference_params(Strategy s);

struct IterationMetrics {
  int iteration = 0;
  Metrics metrics;
  double pres = 0.0;
  int retrieved = 0;
};

struct SimulationOptions {
  int iterations = 10;
  int runs = 3;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> initial_keywords = {"game", "team", "player", "play"};
  int votes_per_iteration = 2;
};

struct EvalReport {
  Strategy strategy = Strategy::pm_topic;
  SiftParams params;
  int runs = 0;
  std::vector<std::uint64_t> seeds;
  // Averaged over runs; F1 is the harmonic mean of the averaged P and R.
  std::vector<IterationMetrics> per_iteration;
  IterationMetrics final_metrics;
  std::vector<std::vector<IterationMetrics>> per_run;
  std::vector<std::string> warnings;
};

// Relevant = documents of `prepared` whose label is in `relevant_labels`.
IdSet relevant_ids(const PreparedCorpus& prepared, const std::unordered_set<std::string>& relevant_labels);

// Iteration 1 adds each initial keyword as its own positive target; later
// iterations vote on the previous topics/documents by their labels. Soft
// mode, config.sift replaced by `params`.
EvalReport simulate_strategy(const PreparedCorpus& prepared, const IdSet& relevant, Strategy strategy,
                             const SiftParams& params, const SessionConfig& config,
                             const SimulationOptions& options = {});

struct ParamGrid {
  std::vector<double> alpha = {0.4, 0.5, 0.6, 0.7};
  std::vector<double> beta = {0.4, 0.5, 0.6};
  std::vector<double> gamma = {0.0, 0.1, 0.2};
  double delta = 0.04;
};

// Combinations passing SiftParams::validate, in grid order.
std::vector<SiftParams> valid_params(const ParamGrid& grid);

struct GridResult {
  SiftParams best;
  EvalReport report;
  std::vector<EvalReport> all;
};

// Best final F1; ties keep the earlier combination.
GridResult grid_search(const PreparedCorpus& prepared, const IdSet& relevant, Strategy strategy,
                       const ParamGrid& grid, const SessionConfig& config, const SimulationOptions& options = {});

// Metrics x strategies table of the final iteration plus the parameters used.
std::string format_report_table(const std::vector<EvalReport>& reports);
Json report_to_json(const EvalReport& report);

}  // namespace siftkit
