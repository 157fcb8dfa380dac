#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "atena/harness.hpp"
#include "atena/oracles.hpp"

namespace atena::server {

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 binds any free port
  std::string static_dir;  // console bundle, mounted at / when set
  std::uint64_t seed = 0;
  std::size_t history_tail = 50;
};

/// One run loop driven by the interactive oracle, plus the HTTP API a human
/// (or a scripted client) uses to answer feedback requests:
///
///   GET  /api/run/status        progress and metrics so far
///   GET  /api/feedback/pending  oldest open request, or 204
///   POST /api/feedback          {episode_id, success}; 400 / 404 / 409 on errors
///   GET  /api/history?n=K       last K episode records
///   GET  /api/world?index=i     world geometry (defaults to the active world)
class FeedbackServer {
 public:
  /// Binds the port immediately; throws std::runtime_error when it is taken.
  FeedbackServer(harness::ExperimentConfig config, ServerOptions options);
  ~FeedbackServer();
  FeedbackServer(const FeedbackServer&) = delete;
  FeedbackServer& operator=(const FeedbackServer&) = delete;

  int port() const;
  /// Starts the HTTP listener and the run loop.
  void start();
  /// Blocks until the run loop finishes.
  void wait_run();
  bool finished() const;
  /// Valid after wait_run(). Rethrows a run-loop failure.
  harness::RunResult result() const;
  /// Closes the queue, stops the listener and joins all threads.
  void stop();

  oracle::FeedbackQueue& queue();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace atena::server
