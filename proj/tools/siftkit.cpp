#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include "siftkit/error.hpp"
#include "siftkit/evalharness.hpp"
#include "siftkit/json_io.hpp"
#include "siftkit/server.hpp"
#include "siftkit/session.hpp"

namespace {

using namespace siftkit;

struct SiftFlags {
  std::optional<double> alpha;
  std::optional<double> beta;
  std::optional<double> gamma;
  std::optional<double> delta;
  std::optional<std::string> mode;
  std::optional<int> topics;
  std::optional<std::uint64_t> seed;
  std::string config;

  void add_to(CLI::App& app) {
    app.add_option("--config", config, "JSON session config overriding the defaults")->check(CLI::ExistingFile);
    app.add_option("--alpha", alpha, "Score decay weight");
    app.add_option("--beta", beta, "Positive target weight");
    app.add_option("--gamma", gamma, "Negative target weight");
    app.add_option("--delta", delta, "Sifting threshold");
    app.add_option("--mode", mode, "Sifting mode")->check(CLI::IsMember({"soft", "hard"}));
    app.add_option("--topics", topics, "Number of topics");
    app.add_option("--seed", seed, "Solver seed");
  }

  SessionConfig apply(SessionConfig c) const {
    if (!config.empty()) c = read_config_file(config, c);
    if (alpha) c.sift.alpha = *alpha;
    if (beta) c.sift.beta = *beta;
    if (gamma) c.sift.gamma = *gamma;
    if (delta) c.sift.delta = *delta;
    if (mode) c.mode = parse_sift_mode(*mode);
    if (topics) c.topics = *topics;
    if (seed) c.seed = *seed;
    return c;
  }
};

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path);
  out << text;
  if (!out) throw Error(ErrorCode::io, "write failed for " + path);
}

PrepareOptions prepare_options(const SessionConfig& config) {
  PrepareOptions options = config.prepare;
  if (!config.stopword_file.empty()) {
    const auto extra = read_stopword_file(config.stopword_file);
    options.extra_stopwords.insert(extra.begin(), extra.end());
  }
  return options;
}

int cmd_prepare(const std::string& corpus, const SiftFlags& flags, std::optional<int> min_df,
                const std::string& stopwords, const std::string& cache_dir, bool no_embeddings) {
  SessionConfig config = flags.apply({});
  config.corpus = corpus;
  if (min_df) config.prepare.min_doc_freq = *min_df;
  if (!stopwords.empty()) config.stopword_file = stopwords;
  if (!cache_dir.empty()) config.vector_cache = cache_dir;
  if (no_embeddings) config.embeddings = false;
  config.validate();

  const auto prepared = prepare_corpus(load_corpus(corpus), prepare_options(config));
  const auto vectors = session_vectors(prepared.documents, prepared.hash, prepared.vocab, config);

  Json j;
  j["corpus"] = corpus;
  j["documents"] = prepared.n_docs();
  j["dropped"] = prepared.dropped_ids.size();
  j["vocabulary"] = prepared.vocab.size();
  j["activeWords"] = prepared.vocab.active_size();
  j["nonzeros"] = prepared.matrix.x.nonZeros();
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(prepared.hash));
  j["hash"] = hash;
  if (vectors) {
    j["vectors"]["dim"] = vectors->dim();
    j["vectors"]["converged"] = vectors->converged;
    j["vectors"]["cache"] = config.vector_cache;
  } else {
    j["vectors"] = nullptr;
  }
  write_output("", j.dump(2) + "\n");
  return 0;
}

int cmd_run(const std::string& corpus, const SiftFlags& flags, const std::string& script, const std::string& out,
            const std::string& snapshot) {
  SessionConfig config = flags.apply({});
  config.corpus = corpus;
  const auto batches = read_feedback_script(script);
  auto state = init_session(config);
  for (std::size_t i = 0; i < batches.size(); ++i) {
    state = run_iteration(state, batches[i]);
    std::cerr << "iteration " << state.iteration << ": " << state.sift.retrieved.size() << " documents retrieved\n";
  }
  if (!snapshot.empty()) save_snapshot(snapshot, state);
  write_output(out, export_results(state).dump(2) + "\n");
  return 0;
}

std::unique_ptr<Server> g_server;

void handle_signal(int) {
  if (g_server) g_server->stop();
}

int cmd_serve(const SiftFlags& flags, const std::string& bind, const std::string& corpus_root,
              std::optional<long long> timeout) {
  ServerOptions options = options_from_env();
  options.defaults = flags.apply({});
  if (!bind.empty()) {
    const auto colon = bind.rfind(':');
    if (colon == std::string::npos) {
      options.host = bind;
    } else {
      if (colon > 0) options.host = bind.substr(0, colon);
      options.port = std::stoi(bind.substr(colon + 1));
    }
  }
  if (!corpus_root.empty()) options.corpus_root = corpus_root;
  if (timeout) options.session_timeout = std::chrono::seconds(*timeout);
  const std::string host = options.host;
  g_server = std::make_unique<Server>(std::move(options));
  const int port = g_server->bind();
  std::signal(SIGINT, handle_signal);
  std::signal(SIGTERM, handle_signal);
  std::cerr << "listening on http://" << host << ":" << port << "\n";
  g_server->listen();
  g_server.reset();
  return 0;
}

int cmd_eval(const std::string& corpus, const SiftFlags& flags, const std::vector<std::string>& strategies,
             bool grid, int iterations, int runs, const std::vector<std::string>& relevant_labels,
             const std::string& format, const std::string& out) {
  SessionConfig config = flags.apply({});
  config.corpus = corpus;
  config.validate();
  const auto prepared = prepare_corpus(load_corpus(corpus), prepare_options(config));
  const auto relevant = relevant_ids(prepared, {relevant_labels.begin(), relevant_labels.end()});
  if (relevant.empty()) throw Error(ErrorCode::invalid_argument, "no document carries a relevant label");

  SimulationOptions options;
  options.iterations = iterations;
  options.runs = runs;
  for (int r = 0; r < runs; ++r) options.seeds.push_back(config.seed + static_cast<std::uint64_t>(r));

  std::vector<Strategy> kinds;
  for (const auto& name : strategies) {
    if (name == "all") {
      kinds = all_strategies();
      break;
    }
    kinds.push_back(parse_strategy(name));
  }

  std::vector<EvalReport> reports;
  for (const Strategy s : kinds) {
    std::cerr << "evaluating " << to_string(s) << "\n";
    if (grid) {
      ParamGrid g;
      if (flags.delta) g.delta = *flags.delta;
      reports.push_back(grid_search(prepared, relevant, s, g, config, options).report);
    } else {
      SiftParams params = reference_params(s);
      if (flags.alpha) params.alpha = *flags.alpha;
      if (flags.beta) params.beta = *flags.beta;
      if (flags.gamma) params.gamma = *flags.gamma;
      if (flags.delta) params.delta = *flags.delta;
      params.validate();
      reports.push_back(simulate_strategy(prepared, relevant, s, params, config, options));
    }
    for (const auto& w : reports.back().warnings) std::cerr << "warning: " << w << "\n";
  }

  if (format == "json") {
    Json j = Json::array();
    for (const auto& r : reports) j.push_back(report_to_json(r));
    write_output(out, j.dump(2) + "\n");
  } else {
    write_output(out, format_report_table(reports));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Interactive search space reduction with targeted topic modeling"};
  app.require_subcommand(1);

  SiftFlags prepare_flags, run_flags, serve_flags, eval_flags;

  auto* prepare = app.add_subcommand("prepare", "Preprocess a corpus and cache its word vectors");
  std::string prepare_corpus_path, stopwords, cache_dir;
  std::optional<int> min_df;
  bool no_embeddings = false;
  prepare->add_option("corpus", prepare_corpus_path, "JSONL file or category directory")->required();
  prepare->add_option("--min-df", min_df, "Minimum document frequency");
  prepare->add_option("--stopwords", stopwords, "Extra stopword file")->check(CLI::ExistingFile);
  prepare->add_option("--cache-dir", cache_dir, "Word vector cache directory");
  prepare->add_flag("--no-embeddings", no_embeddings, "Skip word vectors");
  prepare_flags.add_to(*prepare);

  auto* run = app.add_subcommand("run", "Replay a feedback script and export the result");
  std::string run_corpus, script, run_out, snapshot;
  run->add_option("corpus", run_corpus, "JSONL file or category directory")->required();
  run->add_option("--script", script, "JSON array of feedback batches")->required()->check(CLI::ExistingFile);
  run->add_option("--out,-o", run_out, "Export file (default stdout)");
  run->add_option("--snapshot", snapshot, "Also write a session snapshot");
  run_flags.add_to(*run);

  auto* serve = app.add_subcommand("serve", "Start the HTTP server");
  std::string bind, corpus_root;
  std::optional<long long> timeout;
  serve->add_option("--bind", bind, "host[:port]");
  serve->add_option("--corpus-root", corpus_root, "Directory corpora are resolved against");
  serve->add_option("--session-timeout", timeout, "Idle seconds before a session is evicted");
  serve_flags.add_to(*serve);

  auto* eval = app.add_subcommand("eval", "Simulated relevance feedback on a labeled corpus");
  std::string eval_corpus, format = "table", eval_out;
  std::vector<std::string> strategies{"pmT"};
  std::vector<std::string> relevant{"rec.sport.baseball", "rec.sport.hockey"};
  bool grid = false;
  int iterations = 10, runs = 3;
  eval->add_option("corpus", eval_corpus, "Labeled JSONL file or category directory")->required();
  eval->add_option("--strategy", strategies, "pd, pT, md, mT, pmd, pmT or all")->delimiter(',');
  eval->add_flag("--grid", grid, "Grid search the sifting parameters");
  eval->add_option("--iterations", iterations, "Iterations per run")->check(CLI::PositiveNumber);
  eval->add_option("--runs", runs, "Runs averaged per report")->check(CLI::PositiveNumber);
  eval->add_option("--relevant", relevant, "Relevant labels")->delimiter(',');
  eval->add_option("--format", format, "table or json")->check(CLI::IsMember({"table", "json"}));
  eval->add_option("--out,-o", eval_out, "Report file (default stdout)");
  eval_flags.add_to(*eval);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*prepare) return cmd_prepare(prepare_corpus_path, prepare_flags, min_df, stopwords, cache_dir, no_embeddings);
    if (*run) return cmd_run(run_corpus, run_flags, script, run_out, snapshot);
    if (*serve) return cmd_serve(serve_flags, bind, corpus_root, timeout);
    if (*eval) {
      return cmd_eval(eval_corpus, eval_flags, strategies, grid, iterations, runs, relevant, format, eval_out);
    }
  } catch (const Error& e) {
    std::cerr << "siftkit: " << to_string(e.code()) << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "siftkit: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
