#include "atena/server.hpp"

#include <atomic>
#include <condition_variable>
#include <exception>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <thread>

#include <httplib.h>

namespace atena::server {

using Json = nlohmann::ordered_json;

struct FeedbackServer::Impl {
  harness::ExperimentConfig config;
  ServerOptions options;
  harness::Suite suite;
  oracle::FeedbackQueue queue;
  oracle::InteractiveOracle oracle;
  httplib::Server http;
  int bound_port = 0;

  std::thread http_thread;
  std::thread run_thread;

  mutable std::mutex mu;
  std::condition_variable done_cv;
  std::vector<metrics::EpisodeRecord> records;
  int active_world = 0;
  bool done = false;
  std::optional<harness::RunResult> result;
  std::exception_ptr failure;

  Impl(harness::ExperimentConfig c, ServerOptions o)
      : config(std::move(c)),
        options(std::move(o)),
        suite(harness::build_suite(config, options.seed)),
        oracle(queue, config.interactive_timeout_s) {}

  std::size_t total_episodes() const {
    return static_cast<std::size_t>(config.n_test_worlds) *
           static_cast<std::size_t>(config.episodes_per_world);
  }

  static void send_json(httplib::Response& res, int status, const Json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static void send_error(httplib::Response& res, int status, const std::string& error,
                         const std::string& reason) {
    send_json(res, status, Json{{"error", error}, {"reason", reason}});
  }

  void routes() {
    http.Get("/api/run/status", [this](const httplib::Request&, httplib::Response& res) {
      Json j;
      j["schema_version"] = harness::kSchemaVersion;
      std::lock_guard lock(mu);
      j["state"] = failure ? "error" : (done ? "finished" : "running");
      j["seed"] = options.seed;
      j["method"] = std::string(sal::to_string(config.method));
      j["delta"] = config.hyper.delta;
      j["episodes_done"] = records.size();
      j["episodes_total"] = total_episodes();
      j["active_world"] = active_world;
      j["pending"] = queue.pending_count();
      j["metrics"] = records.empty() ? Json(nullptr) : metrics::to_json(metrics::aggregate(records));
      send_json(res, 200, j);
    });

    http.Get("/api/feedback/pending", [this](const httplib::Request&, httplib::Response& res) {
      const auto pending = queue.pending();
      if (!pending) {
        res.status = 204;
        return;
      }
      Json j = oracle::to_json(*pending);
      j["queue_position"] = 0;
      j["pending_count"] = queue.pending_count();
      send_json(res, 200, j);
    });

    http.Post("/api/feedback", [this](const httplib::Request& req, httplib::Response& res) {
      oracle::FeedbackResponse response;
      try {
        response = oracle::response_from_json(nlohmann::json::parse(req.body));
      } catch (const nlohmann::json::parse_error&) {
        send_error(res, 400, "malformed", "body is not valid JSON");
        return;
      } catch (const std::invalid_argument& e) {
        send_error(res, 400, "malformed", e.what());
        return;
      }
      switch (queue.post(response)) {
        case oracle::PostStatus::accepted:
          send_json(res, 200, Json{{"status", "accepted"}, {"episode_id", response.episode_id}});
          return;
        case oracle::PostStatus::unknown_episode:
          send_error(res, 404, "unknown_episode", "no open request for this episode_id");
          return;
        case oracle::PostStatus::duplicate:
          send_error(res, 409, "duplicate", "this episode_id was already answered or withdrawn");
          return;
      }
    });

    http.Get("/api/history", [this](const httplib::Request& req, httplib::Response& res) {
      std::size_t n = options.history_tail;
      if (req.has_param("n")) {
        try {
          n = static_cast<std::size_t>(std::stoul(req.get_param_value("n")));
        } catch (const std::exception&) {
          send_error(res, 400, "malformed", "n must be a non-negative integer");
          return;
        }
      }
      Json j;
      j["schema_version"] = harness::kSchemaVersion;
      auto& list = j["episodes"] = Json::array();
      std::lock_guard lock(mu);
      const std::size_t first = records.size() > n ? records.size() - n : 0;
      for (std::size_t i = first; i < records.size(); ++i) list.push_back(metrics::to_json(records[i]));
      send_json(res, 200, j);
    });

    http.Get("/api/world", [this](const httplib::Request& req, httplib::Response& res) {
      int index = 0;
      if (req.has_param("index")) {
        try {
          index = std::stoi(req.get_param_value("index"));
        } catch (const std::exception&) {
          send_error(res, 400, "malformed", "index must be an integer");
          return;
        }
      } else if (const auto pending = queue.pending()) {
        index = pending->world_index;
      } else {
        std::lock_guard lock(mu);
        index = active_world;
      }
      if (index < 0 || index >= static_cast<int>(suite.test_worlds.size())) {
        send_error(res, 404, "unknown_world", "world index out of range");
        return;
      }
      Json j = env::to_json(suite.test_worlds[index]);
      j["world_index"] = index;
      send_json(res, 200, j);
    });

    if (!options.static_dir.empty()) http.set_mount_point("/", options.static_dir);
  }

  void run_loop() {
    try {
      auto observer = [this](const metrics::EpisodeRecord& rec, const env::GraphWorld&) {
        std::lock_guard lock(mu);
        records.push_back(rec);
        const auto next = records.size();
        active_world = static_cast<int>(std::min<std::size_t>(
            next / static_cast<std::size_t>(config.episodes_per_world),
            static_cast<std::size_t>(config.n_test_worlds - 1)));
      };
      auto r = harness::run(config, options.seed, &oracle, observer);
      std::lock_guard lock(mu);
      result = std::move(r);
    } catch (...) {
      std::lock_guard lock(mu);
      failure = std::current_exception();
    }
    {
      std::lock_guard lock(mu);
      done = true;
    }
    done_cv.notify_all();
  }
};

FeedbackServer::FeedbackServer(harness::ExperimentConfig config, ServerOptions options)
    : impl_(std::make_unique<Impl>(std::move(config), std::move(options))) {
  impl_->routes();
  // SO_REUSEADDR only: a second server on a taken port must fail, not share it.
  impl_->http.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof yes);
  });
  if (impl_->options.port == 0) {
    impl_->bound_port = impl_->http.bind_to_any_port(impl_->options.host);
  } else if (impl_->http.bind_to_port(impl_->options.host, impl_->options.port)) {
    impl_->bound_port = impl_->options.port;
  } else {
    impl_->bound_port = -1;
  }
  if (impl_->bound_port <= 0)
    throw std::runtime_error("serve: cannot bind " + impl_->options.host + ":" +
                             std::to_string(impl_->options.port) + " (port in use?)");
}

FeedbackServer::~FeedbackServer() { stop(); }

int FeedbackServer::port() const { return impl_->bound_port; }

void FeedbackServer::start() {
  impl_->http_thread = std::thread([this] { impl_->http.listen_after_bind(); });
  impl_->http.wait_until_ready();
  impl_->run_thread = std::thread([this] { impl_->run_loop(); });
}

void FeedbackServer::wait_run() {
  std::unique_lock lock(impl_->mu);
  impl_->done_cv.wait(lock, [this] { return impl_->done; });
}

bool FeedbackServer::finished() const {
  std::lock_guard lock(impl_->mu);
  return impl_->done;
}

harness::RunResult FeedbackServer::result() const {
  std::lock_guard lock(impl_->mu);
  if (impl_->failure) std::rethrow_exception(impl_->failure);
  if (!impl_->result) throw std::logic_error("serve: run has not finished");
  return *impl_->result;
}

void FeedbackServer::stop() {
  if (!impl_) return;
  impl_->queue.close();
  if (impl_->run_thread.joinable()) impl_->run_thread.join();
  impl_->http.stop();
  if (impl_->http_thread.joinable()) impl_->http_thread.join();
}

oracle::FeedbackQueue& FeedbackServer::queue() { return impl_->queue; }

}  // namespace atena::server
