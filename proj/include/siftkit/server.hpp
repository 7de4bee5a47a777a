#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <string>

#include "siftkit/error.hpp"
#include "siftkit/json_io.hpp"
#include "siftkit/session.hpp"

namespace siftkit {

struct ServerOptions {
  std::string host = "127.0.0.1";
  // 0 binds an ephemeral port.
  int port = 8080;
  // Corpus paths in requests are resolved below this directory.
  std::filesystem::path corpus_root = ".";
  // Sessions idle for longer are evicted; zero disables eviction.
  std::chrono::seconds session_timeout{3600};
  // Mutations still running after this long answer 202 with a poll token.
  std::chrono::milliseconds async_after{2000};
  std::string cors_origin = "*";
  // Defaults applied under every session's request config.
  SessionConfig defaults;
};

// SIFTKIT_BIND (host or host:port), SIFTKIT_CORPUS_ROOT and
// SIFTKIT_SESSION_TIMEOUT (seconds) override the given options.
ServerOptions options_from_env(ServerOptions base = {});

struct ViewOptions {
  // Representative documents per topic when no cell areas are given.
  int representatives = 10;
  // Treemap cell area per topic; each topic shows floor(area / square) documents.
  std::vector<double> cell_areas;
  double square = 400.0;
};

struct SessionHandle {
  std::string id;
  std::string corpus;
  std::string created;
  std::string updated;
};

Json handle_to_json(const SessionHandle& handle);

// Read-only projection of a session served by GET /state and every mutation.
Json state_view(const SessionHandle& handle, const SessionState& state, const ViewOptions& options = {});

// HTTP status for a library error code.
int http_status(ErrorCode code) noexcept;

class Server {
 public:
  explicit Server(ServerOptions options);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  // Binds the socket; returns the bound port.
  int bind();
  // Serves until stop(); binds first if needed.
  void listen();
  void stop();
  int port() const noexcept;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace siftkit
