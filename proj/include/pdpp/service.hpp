#pragma once

#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include "pdpp/personalization.hpp"
#include "pdpp/similarity.hpp"

namespace httplib {
class Server;
}

namespace pdpp {

// Malformed client input; maps to HTTP 400.
class BadRequest : public Error {
 public:
  BadRequest(const std::string& field, const std::string& message)
      : Error(field.empty() ? message : field + ": " + message), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct RerankRequest {
  UserId user_id;
  std::vector<std::pair<ItemId, double>> candidates;
  std::size_t k = 0;
};

struct RerankResponse {
  std::vector<ItemId> items;
  double alpha_used = 0.0;
  bool cold_start = false;
  std::size_t fallback_fill = 0;
  std::int64_t latency_micros = 0;
};

// {"user_id": ..., "k": ..., "candidates": [{"item_id": ..., "score": ...}]}
RerankRequest parse_rerank_request(std::string_view body);
std::string rerank_request_json(const RerankRequest& request);
std::string rerank_response_json(const RerankResponse& response);
RerankResponse parse_rerank_response(std::string_view body);

struct IngestResult {
  std::size_t accepted = 0;
  std::size_t filtered = 0;  // valid events of a type outside the filter
  std::vector<std::pair<std::size_t, std::string>> rejected;     // (line, reason)
  std::vector<std::pair<std::size_t, std::string>> dead_letters;  // (line, item id)
};

std::string ingest_result_json(const IngestResult& result);

// Online re-ranking plus the nearline α updater. Request handlers read an
// immutable AlphaIndex snapshot without locking; one writer thread folds
// events into user profiles and publishes replacement snapshots.
class RerankService {
 public:
  RerankService(std::shared_ptr<const GenreIndex> genres, PersonalizationParams params,
                std::set<std::string> event_filter = {});
  ~RerankService();

  RerankService(const RerankService&) = delete;
  RerankService& operator=(const RerankService&) = delete;

  // Read-only with respect to service state. Throws BadRequest for invalid
  // requests and NumericError for kernel failures.
  RerankResponse handle_rerank(const RerankRequest& request) const;

  // Parses a JSON-lines batch and queues the valid events. Events become
  // visible to handle_rerank once the writer publishes (normally well under
  // a millisecond; flush() waits for it).
  IngestResult ingest_events(std::string_view jsonl);

  // Replaces the served index. On a malformed snapshot throws IngestError and
  // keeps the current one.
  void rebuild_index(std::istream& snapshot);
  void rebuild_index(const std::filesystem::path& snapshot);

  // Replays historical events into the writer's profiles without publishing.
  // Returns the number of events applied.
  std::size_t load_history(std::istream& jsonl);

  // Publishes an index computed from the current profiles (offline α
  // initializer run in-process).
  void publish_from_profiles();

  // Blocks until every queued event has been applied and published.
  void flush();

  std::shared_ptr<const AlphaIndex> snapshot() const;
  std::uint64_t snapshot_version() const;
  std::vector<DeadLetter> dead_letters() const;
  const GenreIndex& genres() const { return *genres_; }

 private:
  void writer_loop();
  void publish(std::shared_ptr<const AlphaIndex> next);

  std::shared_ptr<const GenreIndex> genres_;
  PersonalizationParams params_;
  std::set<std::string> event_filter_;

  std::shared_ptr<const AlphaIndex> index_;  // accessed via std::atomic_load/store
  std::mutex publish_mutex_;                 // serializes writers only
  std::atomic<std::uint64_t> version_{0};

  // Writer-owned state.
  std::unordered_map<UserId, UserProfile> profiles_;

  mutable std::mutex queue_mutex_;
  std::condition_variable queue_cv_;
  std::condition_variable idle_cv_;
  std::deque<InteractionEvent> queue_;
  std::vector<DeadLetter> dead_letters_;
  bool busy_ = false;
  bool stop_ = false;
  std::thread writer_;
};

struct HttpConfig {
  std::string host = "0.0.0.0";
  int port = 8080;
  std::size_t threads = 32;
};

// POST /rerank, POST /events, GET /healthz.
class HttpFrontend {
 public:
  HttpFrontend(RerankService& service, HttpConfig config);
  ~HttpFrontend();

  // Binds and serves on a background thread; returns the bound port (an
  // ephemeral one when config.port is 0). Throws Error if binding fails.
  int start();
  void stop();
  // Serves on the calling thread until stop().
  void run();

 private:
  int bind();

  RerankService& service_;
  HttpConfig config_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int bound_port_ = -1;
};

}  // namespace pdpp
