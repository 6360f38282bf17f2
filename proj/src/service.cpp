#include "pdpp/service.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <istream>
#include <unordered_set>

#include <httplib.h>
#include <json.hpp>
#include <rapidjson/document.h>
#include <rapidjson/error/en.h>
#include <spdlog/spdlog.h>

#include "pdpp/dpp.hpp"
#include "pdpp/format.hpp"
#include "pdpp/kernel.hpp"

namespace pdpp {
namespace {

using json = nlohmann::json;

template <typename Value>
std::string rj_id_field(const Value& obj, const char* field) {
  auto it = obj.FindMember(field);
  if (it == obj.MemberEnd()) throw BadRequest(field, "missing");
  const auto& v = it->value;
  if (v.IsString()) {
    if (v.GetStringLength() == 0) throw BadRequest(field, "must not be empty");
    return {v.GetString(), v.GetStringLength()};
  }
  if (v.IsInt64()) return std::to_string(v.GetInt64());
  if (v.IsUint64()) return std::to_string(v.GetUint64());
  throw BadRequest(field, "must be a string or integer");
}

}  // namespace

RerankRequest parse_rerank_request(std::string_view body) {
  // Hot path; rapidjson is much cheaper than nlohmann on large candidate lists.
  rapidjson::Document doc;
  doc.Parse(body.data(), body.size());
  if (doc.HasParseError()) {
    throw BadRequest("", std::string("invalid JSON: ") + rapidjson::GetParseError_En(doc.GetParseError()) +
                             " at offset " + std::to_string(doc.GetErrorOffset()));
  }
  if (!doc.IsObject()) throw BadRequest("", "request must be a JSON object");
  RerankRequest req;
  req.user_id = rj_id_field(doc, "user_id");

  auto k = doc.FindMember("k");
  if (k == doc.MemberEnd()) throw BadRequest("k", "missing");
  if (!k->value.IsInt64() || k->value.GetInt64() < 1) throw BadRequest("k", "must be an integer >= 1");
  req.k = static_cast<std::size_t>(k->value.GetInt64());

  auto cands = doc.FindMember("candidates");
  if (cands == doc.MemberEnd()) throw BadRequest("candidates", "missing");
  if (!cands->value.IsArray() || cands->value.Empty()) {
    throw BadRequest("candidates", "must be a non-empty array");
  }
  const auto& arr = cands->value;
  req.candidates.reserve(arr.Size());
  for (rapidjson::SizeType i = 0; i < arr.Size(); ++i) {
    const auto& c = arr[i];
    const auto where = [i] { return "candidates[" + std::to_string(i) + "]"; };
    if (!c.IsObject()) throw BadRequest(where(), "must be an object");
    std::string item;
    try {
      item = rj_id_field(c, "item_id");
    } catch (const BadRequest& e) {
      throw BadRequest(where() + "." + e.field(), "missing or invalid");
    }
    auto s = c.FindMember("score");
    if (s == c.MemberEnd() || !s->value.IsNumber()) throw BadRequest(where() + ".score", "must be a number");
    const double score = s->value.GetDouble();
    if (!std::isfinite(score)) throw BadRequest(where() + ".score", "must be finite");
    req.candidates.emplace_back(std::move(item), score);
  }
  return req;
}

std::string rerank_request_json(const RerankRequest& request) {
  json cands = json::array();
  for (const auto& [item, score] : request.candidates) {
    cands.push_back({{"item_id", item}, {"score", score}});
  }
  json obj = {{"user_id", request.user_id}, {"k", request.k}, {"candidates", std::move(cands)}};
  return obj.dump();
}

std::string rerank_response_json(const RerankResponse& response) {
  nlohmann::ordered_json obj;
  obj["items"] = response.items;
  obj["alpha_used"] = response.alpha_used;
  obj["cold_start"] = response.cold_start;
  obj["fallback_fill"] = response.fallback_fill;
  obj["latency_micros"] = response.latency_micros;
  return obj.dump();
}

RerankResponse parse_rerank_response(std::string_view body) {
  const json obj = json::parse(body);
  RerankResponse r;
  r.items = obj.at("items").get<std::vector<ItemId>>();
  r.alpha_used = obj.at("alpha_used").get<double>();
  r.cold_start = obj.at("cold_start").get<bool>();
  r.fallback_fill = obj.at("fallback_fill").get<std::size_t>();
  r.latency_micros = obj.at("latency_micros").get<std::int64_t>();
  return r;
}

std::string ingest_result_json(const IngestResult& result) {
  nlohmann::ordered_json obj;
  obj["accepted"] = result.accepted;
  obj["filtered"] = result.filtered;
  json rejected = json::array();
  for (const auto& [line, reason] : result.rejected) {
    rejected.push_back({{"line", line}, {"error", reason}});
  }
  obj["rejected"] = rejected;
  json dead = json::array();
  for (const auto& [line, item] : result.dead_letters) {
    dead.push_back({{"line", line}, {"item_id", item}});
  }
  obj["dead_letter"] = dead;
  return obj.dump();
}

RerankService::RerankService(std::shared_ptr<const GenreIndex> genres,
                             PersonalizationParams params, std::set<std::string> event_filter)
    : genres_(std::move(genres)), params_(params), event_filter_(std::move(event_filter)) {
  params_.validate();
  auto empty = std::make_shared<AlphaIndex>();
  empty->params = params_;
  index_ = std::move(empty);
  writer_ = std::thread([this] { writer_loop(); });
}

RerankService::~RerankService() {
  {
    std::lock_guard lock(queue_mutex_);
    stop_ = true;
  }
  queue_cv_.notify_all();
  if (writer_.joinable()) writer_.join();
}

std::shared_ptr<const AlphaIndex> RerankService::snapshot() const {
  return std::atomic_load(&index_);
}

std::uint64_t RerankService::snapshot_version() const { return version_.load(); }

void RerankService::publish(std::shared_ptr<const AlphaIndex> next) {
  // Caller holds publish_mutex_.
  std::atomic_store(&index_, std::move(next));
  ++version_;
}

RerankResponse RerankService::handle_rerank(const RerankRequest& request) const {
  const auto start = std::chrono::steady_clock::now();
  if (request.k < 1) throw BadRequest("k", "must be >= 1");
  if (request.candidates.empty()) throw BadRequest("candidates", "must be non-empty");

  // Duplicate ids collapse onto their first position with the max score.
  std::vector<ItemId> ids;
  std::vector<double> q;
  ids.reserve(request.candidates.size());
  q.reserve(request.candidates.size());
  std::unordered_map<std::string_view, std::size_t> seen;
  seen.reserve(request.candidates.size());
  for (const auto& [item, score] : request.candidates) {
    if (!std::isfinite(score)) throw BadRequest("candidates.score", "must be finite");
    auto [it, inserted] = seen.emplace(item, ids.size());
    if (inserted) {
      ids.push_back(item);
      q.push_back(score);
    } else {
      q[it->second] = std::max(q[it->second], score);
    }
  }

  const auto index = snapshot();
  const AlphaDecision decision = index->lookup(request.user_id);

  auto scores = std::make_shared<const RelevanceScores>(make_relevance(ids, std::move(q)));
  auto sim = std::make_shared<const GenreSimilarity>(genres_, scores->ids);
  Selection sel = fast_greedy_map(KernelSpec(scores, sim, decision.alpha), request.k);

  RerankResponse resp;
  resp.items = std::move(sel.items);
  resp.alpha_used = decision.alpha;
  resp.cold_start = decision.cold_start;
  resp.fallback_fill = sel.fallback_fill;
  resp.latency_micros = std::chrono::duration_cast<std::chrono::microseconds>(
                            std::chrono::steady_clock::now() - start)
                            .count();
  return resp;
}

IngestResult RerankService::ingest_events(std::string_view jsonl) {
  IngestResult result;
  std::vector<InteractionEvent> valid;
  std::vector<DeadLetter> dead;
  std::size_t lineno = 0;
  for (auto line : split(jsonl, "\n")) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    InteractionEvent ev;
    try {
      ev = parse_event(std::string(line));
    } catch (const IngestError& e) {
      result.rejected.emplace_back(lineno, e.what());
      continue;
    }
    if (!event_type_accepted(ev, event_filter_)) {
      ++result.filtered;
      continue;
    }
    if (genres_->find(ev.item_id) == nullptr) {
      result.dead_letters.emplace_back(lineno, ev.item_id);
      dead.push_back(DeadLetter{ev, "unknown item " + ev.item_id});
      continue;
    }
    valid.push_back(std::move(ev));
  }
  result.accepted = valid.size();
  {
    std::lock_guard lock(queue_mutex_);
    for (auto& d : dead) dead_letters_.push_back(std::move(d));
    for (auto& ev : valid) queue_.push_back(std::move(ev));
  }
  if (!valid.empty()) queue_cv_.notify_one();
  return result;
}

void RerankService::writer_loop() {
  std::unique_lock lock(queue_mutex_);
  while (true) {
    queue_cv_.wait(lock, [&] { return stop_ || !queue_.empty(); });
    if (queue_.empty() && stop_) return;
    std::deque<InteractionEvent> batch;
    batch.swap(queue_);
    busy_ = true;
    lock.unlock();

    std::vector<DeadLetter> dead;
    {
      std::lock_guard publish_lock(publish_mutex_);
      std::unordered_set<UserId> touched;
      for (const auto& ev : batch) {
        auto& profile = profiles_[ev.user_id];
        profile.user_id = ev.user_id;
        if (auto d = apply_event(profile, ev, genres_->catalog())) {
          dead.push_back(std::move(*d));
        } else {
          touched.insert(ev.user_id);
        }
      }
      if (!touched.empty()) {
        auto current = std::atomic_load(&index_);
        auto next = std::make_shared<AlphaIndex>(*current);
        for (const auto& user : touched) {
          next->records[user] = make_record(profiles_[user], next->stats, next->params);
        }
        publish(std::move(next));
      }
    }

    lock.lock();
    for (auto& d : dead) dead_letters_.push_back(std::move(d));
    busy_ = false;
    if (queue_.empty()) idle_cv_.notify_all();
  }
}

void RerankService::flush() {
  std::unique_lock lock(queue_mutex_);
  idle_cv_.wait(lock, [&] { return queue_.empty() && !busy_; });
}

void RerankService::rebuild_index(std::istream& snapshot) {
  // Parse fully before taking the publish lock; a bad file never reaches readers.
  auto next = std::make_shared<AlphaIndex>(read_alpha_snapshot(snapshot, params_));
  std::lock_guard lock(publish_mutex_);
  publish(std::move(next));
}

void RerankService::rebuild_index(const std::filesystem::path& snapshot) {
  std::ifstream in(snapshot);
  if (!in) throw IngestError("cannot open snapshot " + snapshot.string());
  rebuild_index(in);
}

std::size_t RerankService::load_history(std::istream& jsonl) {
  std::lock_guard lock(publish_mutex_);
  std::string line;
  std::size_t lineno = 0;
  std::size_t applied = 0;
  while (std::getline(jsonl, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    InteractionEvent ev;
    try {
      ev = parse_event(line);
    } catch (const IngestError& e) {
      throw IngestError("history line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!event_type_accepted(ev, event_filter_)) continue;
    auto& profile = profiles_[ev.user_id];
    profile.user_id = ev.user_id;
    if (!apply_event(profile, ev, genres_->catalog())) ++applied;
  }
  return applied;
}

void RerankService::publish_from_profiles() {
  std::lock_guard lock(publish_mutex_);
  std::vector<UserProfile> all;
  all.reserve(profiles_.size());
  for (const auto& [user, p] : profiles_) all.push_back(p);
  auto next = std::make_shared<AlphaIndex>(build_alpha_index(all, params_));
  publish(std::move(next));
}

std::vector<DeadLetter> RerankService::dead_letters() const {
  std::lock_guard lock(queue_mutex_);
  return dead_letters_;
}

HttpFrontend::HttpFrontend(RerankService& service, HttpConfig config)
    : service_(service), config_(std::move(config)), server_(std::make_unique<httplib::Server>()) {
  const std::size_t threads = std::max<std::size_t>(config_.threads, 1);
  server_->new_task_queue = [threads] { return new httplib::ThreadPool(threads); };

  server_->Post("/rerank", [this](const httplib::Request& req, httplib::Response& res) {
    try {
      const auto request = parse_rerank_request(req.body);
      res.set_content(rerank_response_json(service_.handle_rerank(request)), "application/json");
    } catch (const BadRequest& e) {
      res.status = 400;
      res.set_content(json{{"error", e.what()}, {"field", e.field()}}.dump(), "application/json");
    } catch (const ArgumentError& e) {
      res.status = 400;
      res.set_content(json{{"error", e.what()}, {"field", ""}}.dump(), "application/json");
    } catch (const std::exception& e) {
      spdlog::error("rerank failed: {}; request for replay: {}", e.what(), req.body);
      res.status = 500;
      res.set_content(json{{"error", e.what()}}.dump(), "application/json");
    }
  });

  server_->Post("/events", [this](const httplib::Request& req, httplib::Response& res) {
    const auto result = service_.ingest_events(req.body);
    if (result.accepted == 0 && result.filtered == 0 && result.dead_letters.empty() &&
        !result.rejected.empty()) {
      res.status = 400;
    }
    res.set_content(ingest_result_json(result), "application/json");
  });

  server_->Get("/healthz", [this](const httplib::Request&, httplib::Response& res) {
    const auto snap = service_.snapshot();
    nlohmann::ordered_json obj;
    obj["status"] = "ok";
    obj["users"] = snap->records.size();
    obj["snapshot_version"] = service_.snapshot_version();
    obj["alpha_0"] = snap->params.alpha_0;
    res.set_content(obj.dump(), "application/json");
  });
}

HttpFrontend::~HttpFrontend() { stop(); }

int HttpFrontend::bind() {
  if (config_.port == 0) {
    bound_port_ = server_->bind_to_any_port(config_.host);
  } else {
    bound_port_ = server_->bind_to_port(config_.host, config_.port) ? config_.port : -1;
  }
  if (bound_port_ < 0) {
    throw Error("cannot bind " + config_.host + ":" + std::to_string(config_.port));
  }
  return bound_port_;
}

int HttpFrontend::start() {
  const int port = bind();
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port;
}

void HttpFrontend::run() {
  bind();
  spdlog::info("serving on {}:{}", config_.host, bound_port_);
  server_->listen_after_bind();
}

void HttpFrontend::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace pdpp
