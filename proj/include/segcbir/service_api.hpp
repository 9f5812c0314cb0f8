#pragma once

// HTTP facade over retrieval sessions.
//
//   POST /sessions                   {query_image_id, scheme, scope, r_max}
//   GET  /sessions/{id}
//   POST /sessions/{id}/feedback     {marks: {"<image id>": "relevant"|"nonrelevant"}}
//   GET  /sessions/{id}/metrics
//   GET  /images/{id}?variant=full|thumb
//
// Errors are {code, message} with code equal to the HTTP status. The handlers
// in SessionService are transport-free; mount_routes() binds them to an
// httplib::Server.

#include <charconv>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "segcbir/evaluation.hpp"
#include "segcbir/image_io.hpp"
#include "segcbir/index_store.hpp"
#include "segcbir/retrieval_engine.hpp"

namespace segcbir {

using json = nlohmann::json;

struct ApiResponse {
  int status = 200;
  json body;
};

struct ImageResponse {
  int status = 200;
  std::string content_type;
  std::string bytes;  // image bytes, or a JSON error body
};

struct ServiceOptions {
  std::chrono::seconds ttl{3600};
  SessionConfig defaults;
  std::string image_root;  // overrides the index's recorded root when set
};

namespace detail {

inline ApiResponse error(int status, const std::string& message) {
  return {status, json{{"code", status}, {"message", message}}};
}

inline json page_json(const RetrievalPage& page) {
  json images = json::array();
  for (std::size_t i = 0; i < page.images.size(); ++i) {
    const auto id = page.images[i];
    images.push_back({{"id", id},
                      {"rank", i + 1},
                      {"score", page.scores.size() > i ? page.scores[i] : 0.0},
                      {"thumb_url", "/images/" + std::to_string(id) + "?variant=thumb"}});
  }
  return {{"iteration", page.iteration},
          {"slots", page.slots},
          {"images", images},
          {"carried_relevant", page.carried_relevant}};
}

inline json config_json(const SessionConfig& c) {
  return {{"scope", c.scope},
          {"r_max", c.r_max},
          {"total_iterations", c.total_iterations},
          {"eps", c.eps.value},
          {"seed", c.seed},
          {"reweight", std::string(to_string(c.reweighting))}};
}

inline json metrics_json(const std::vector<IterationMetrics>& ms) {
  json out = json::array();
  for (const auto& m : ms) {
    out.push_back({{"iteration", m.iteration},
                   {"shown", m.shown},
                   {"relevant", m.relevant},
                   {"precision", m.precision},
                   {"recall", m.recall},
                   {"re", m.re},
                   {"fd", m.fd}});
  }
  return out;
}

inline std::optional<std::size_t> positive_int(const json& body, const char* key,
                                               std::size_t fallback, bool& bad) {
  if (!body.contains(key)) return fallback;
  const auto& v = body.at(key);
  if (!v.is_number_integer() || v.get<std::int64_t>() < 1) {
    bad = true;
    return std::nullopt;
  }
  return static_cast<std::size_t>(v.get<std::int64_t>());
}

inline std::optional<std::uint64_t> parse_id(const std::string& text) {
  std::uint64_t v = 0;
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (text.empty() || ec != std::errc{} || ptr != end) return std::nullopt;
  return v;
}

}  // namespace detail

class SessionService {
 public:
  SessionService(const FeatureIndex& index, const SearchIndex& search, ServiceOptions options = {})
      : index_(&index), search_(&search), options_(std::move(options)) {}

  ApiResponse create_session(const json& body) {
    if (!body.is_object()) return detail::error(422, "request body must be an object");
    if (!body.contains("query_image_id") || !body["query_image_id"].is_number_integer()) {
      return detail::error(422, "query_image_id must be an integer");
    }
    const auto raw_id = body["query_image_id"].get<std::int64_t>();
    if (raw_id < 0 || static_cast<std::uint64_t>(raw_id) >= search_->size()) {
      return detail::error(404, "unknown image " + std::to_string(raw_id));
    }
    const std::string scheme_text = body.value("scheme", std::string("wos"));
    const auto scheme = parse_scheme(scheme_text);
    if (!scheme) return detail::error(422, "unknown scheme '" + scheme_text + "'");

    SessionConfig config = options_.defaults;
    bool bad = false;
    config.scope = detail::positive_int(body, "scope", config.scope, bad).value_or(0);
    config.r_max = detail::positive_int(body, "r_max", config.r_max, bad).value_or(0);
    if (bad) return detail::error(422, "scope and r_max must be positive integers");
    if (body.contains("reweight")) {
      const auto rw = body["reweight"].is_string()
                          ? parse_reweighting(body["reweight"].get<std::string>())
                          : std::nullopt;
      if (!rw) return detail::error(422, "reweight must be 'rw' or 'rw-ibcd'");
      config.reweighting = *rw;
    }
    try {
      config.validate();
    } catch (const DomainError& e) {
      return detail::error(422, e.what());
    }

    auto entry = std::make_shared<Entry>(
        Session(*search_, static_cast<ImageId>(raw_id), *scheme, config));
    entry->touched = now();
    const std::string id = new_session_id();
    {
      std::lock_guard lock(map_mutex_);
      purge_expired_locked();
      sessions_[id] = entry;
    }
    std::lock_guard lock(entry->mutex);
    return {201, session_reply(id, entry->session)};
  }

  ApiResponse get_session(const std::string& id) {
    auto entry = find(id);
    if (!entry) return detail::error(404, "no such session");
    std::lock_guard lock(entry->mutex);
    const Session& s = entry->session;
    const RfState& st = s.state();
    json body = session_reply(id, s);
    body["scheme"] = std::string(to_string(s.scheme()));
    body["config"] = detail::config_json(s.config());
    body["state"] = {{"query_id", st.query_id},
                     {"iteration", st.iteration},
                     {"relevant", st.relevant},
                     {"nonrelevant", st.nonrelevant},
                     {"weights", std::vector<double>(st.weights.values().begin(),
                                                     st.weights.values().end())},
                     {"shown", st.shown}};
    body["rf_steps"] = s.rf_steps_taken();
    body["rf_budget"] = s.rf_budget();
    return {200, body};
  }

  ApiResponse submit_feedback(const std::string& id, const json& body) {
    auto entry = find(id);
    if (!entry) return detail::error(404, "no such session");
    if (!body.is_object() || !body.contains("marks") || !body["marks"].is_object()) {
      return detail::error(422, "body must contain a 'marks' object");
    }
    Marks marks;
    for (const auto& [key, value] : body["marks"].items()) {
      const auto image = detail::parse_id(key);
      if (!image) return detail::error(422, "bad image id '" + key + "'");
      if (!value.is_string() || (value != "relevant" && value != "nonrelevant")) {
        return detail::error(422, "marks must be 'relevant' or 'nonrelevant'");
      }
      if (*image >= search_->size()) return detail::error(409, "unknown image " + key);
      marks[static_cast<ImageId>(*image)] = value == "relevant";
    }
    std::lock_guard lock(entry->mutex);
    try {
      entry->session.submit(marks);
    } catch (const FeedbackError& e) {
      return detail::error(409, e.what());
    }
    return {200, session_reply(id, entry->session)};
  }

  /// Metrics from the session's own marks; recall uses the query's category size.
  ApiResponse get_metrics(const std::string& id) {
    auto entry = find(id);
    if (!entry) return detail::error(404, "no such session");
    std::lock_guard lock(entry->mutex);
    const Session& s = entry->session;
    const auto cat = search_->category(s.state().query_id);
    const auto ms = session_metrics(s.transcript(), search_->category_size(cat), s.config().scope);
    return {200, json{{"session_id", id},
                      {"status", std::string(to_string(s.status()))},
                      {"iterations", detail::metrics_json(ms)}}};
  }

  ImageResponse get_image(const std::string& id_text, const std::string& variant) {
    auto fail = [](int status, const std::string& msg) {
      return ImageResponse{status, "application/json", detail::error(status, msg).body.dump()};
    };
    const auto parsed = detail::parse_id(id_text);
    if (!parsed || *parsed >= index_->size()) return fail(404, "unknown image");
    const auto id = static_cast<ImageId>(*parsed);
    if (variant != "full" && variant != "thumb") return fail(422, "variant must be full or thumb");

    const auto path = image_path(id);
    std::ifstream in(path, std::ios::binary);
    if (!in) return fail(404, "image file missing");
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (variant == "full") {
      const auto type = sniff_content_type(
          std::span(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
      return {200, std::string(type), std::move(bytes)};
    }

    {
      std::lock_guard lock(thumb_mutex_);
      if (auto it = thumbs_.find(id); it != thumbs_.end()) return {200, "image/png", it->second};
    }
    try {
      const auto img = decode_image(
          std::span(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
      const auto png = encode_png(make_thumbnail(img, 256));
      std::string thumb(png.begin(), png.end());
      std::lock_guard lock(thumb_mutex_);
      thumbs_.emplace(id, thumb);
      return {200, "image/png", std::move(thumb)};
    } catch (const DecodeError& e) {
      return fail(500, e.what());
    }
  }

  std::size_t session_count() {
    std::lock_guard lock(map_mutex_);
    return sessions_.size();
  }

 private:
  using Clock = std::chrono::steady_clock;

  struct Entry {
    explicit Entry(Session s) : session(std::move(s)) {}
    std::mutex mutex;
    Session session;
    Clock::time_point touched;
  };

  static Clock::time_point now() { return Clock::now(); }

  std::filesystem::path image_path(ImageId id) const {
    if (options_.image_root.empty()) return index_->image_path(id);
    return std::filesystem::path(options_.image_root) / index_->images.at(id).path;
  }

  json session_reply(const std::string& id, const Session& s) const {
    json body{{"session_id", id},
              {"status", std::string(to_string(s.status()))},
              {"iteration", s.state().iteration}};
    if (s.status() == SessionStatus::AwaitingFeedback) {
      body["page"] = detail::page_json(s.current_page());
    }
    return body;
  }

  std::shared_ptr<Entry> find(const std::string& id) {
    std::lock_guard lock(map_mutex_);
    purge_expired_locked();
    auto it = sessions_.find(id);
    if (it == sessions_.end()) return nullptr;
    it->second->touched = now();
    return it->second;
  }

  void purge_expired_locked() {
    const auto cutoff = now() - options_.ttl;
    for (auto it = sessions_.begin(); it != sessions_.end();) {
      it = it->second->touched < cutoff ? sessions_.erase(it) : std::next(it);
    }
  }

  std::string new_session_id() {
    std::lock_guard lock(rng_mutex_);
    static constexpr char hex[] = "0123456789abcdef";
    std::string id;
    for (int i = 0; i < 32; ++i) id += hex[rng_() & 0xF];
    return id;
  }

  const FeatureIndex* index_;
  const SearchIndex* search_;
  ServiceOptions options_;
  std::mutex map_mutex_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  std::mutex thumb_mutex_;
  std::map<ImageId, std::string> thumbs_;
  std::mutex rng_mutex_;
  std::mt19937_64 rng_{std::random_device{}()};
};

inline void mount_routes(httplib::Server& server, SessionService& service) {
  auto reply = [](httplib::Response& res, const ApiResponse& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  auto parse = [](const httplib::Request& req) -> std::optional<json> {
    try {
      return req.body.empty() ? json::object() : json::parse(req.body);
    } catch (const json::parse_error&) {
      return std::nullopt;
    }
  };

  server.Post("/sessions", [&service, reply, parse](const httplib::Request& req,
                                                   httplib::Response& res) {
    const auto body = parse(req);
    reply(res, body ? service.create_session(*body) : detail::error(422, "malformed JSON"));
  });
  server.Get(R"(/sessions/([0-9a-f]+))",
             [&service, reply](const httplib::Request& req, httplib::Response& res) {
               reply(res, service.get_session(req.matches[1]));
             });
  server.Post(R"(/sessions/([0-9a-f]+)/feedback)",
              [&service, reply, parse](const httplib::Request& req, httplib::Response& res) {
                const auto body = parse(req);
                reply(res, body ? service.submit_feedback(req.matches[1], *body)
                                : detail::error(422, "malformed JSON"));
              });
  server.Get(R"(/sessions/([0-9a-f]+)/metrics)",
             [&service, reply](const httplib::Request& req, httplib::Response& res) {
               reply(res, service.get_metrics(req.matches[1]));
             });
  server.Get(R"(/images/([^/]+))", [&service](const httplib::Request& req,
                                              httplib::Response& res) {
    const std::string variant =
        req.has_param("variant") ? req.get_param_value("variant") : std::string("full");
    auto img = service.get_image(req.matches[1], variant);
    res.status = img.status;
    res.set_content(std::move(img.bytes), img.content_type);
  });
}

}  // namespace segcbir
