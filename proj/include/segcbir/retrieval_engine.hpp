#pragma once

// Query sessions: initial retrieval without segmentation (WOS) and with
// segmentation (WS), the intersection / union / combination initial displays,
// and the relevance-feedback loop that never shows an image twice and asks
// for only S - |R| new images per step.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "segcbir/errors.hpp"
#include "segcbir/index_store.hpp"
#include "segcbir/relevance_feedback.hpp"
#include "segcbir/similarity.hpp"

namespace segcbir {

enum class Scheme { Wos, WsInter, WsUnion, WsComb };
enum class Reweighting { Rw, RwIbcd };

inline std::string_view to_string(Scheme s) {
  switch (s) {
    case Scheme::Wos: return "wos";
    case Scheme::WsInter: return "ws-inter";
    case Scheme::WsUnion: return "ws-union";
    case Scheme::WsComb: return "ws-comb";
  }
  return "?";
}

inline std::optional<Scheme> parse_scheme(std::string_view s) {
  if (s == "wos") return Scheme::Wos;
  if (s == "ws-inter") return Scheme::WsInter;
  if (s == "ws-union") return Scheme::WsUnion;
  if (s == "ws-comb") return Scheme::WsComb;
  return std::nullopt;
}

inline std::string_view to_string(Reweighting r) {
  return r == Reweighting::Rw ? "rw" : "rw-ibcd";
}

inline std::optional<Reweighting> parse_reweighting(std::string_view s) {
  if (s == "rw") return Reweighting::Rw;
  if (s == "rw-ibcd") return Reweighting::RwIbcd;
  return std::nullopt;
}

/// Iterations consumed by a scheme's initial display. Union and combination
/// show up to 2S images up front, which counts as two iterations.
inline std::size_t initial_slots(Scheme s) {
  return (s == Scheme::WsUnion || s == Scheme::WsComb) ? 2 : 1;
}

inline constexpr std::size_t kDefaultScope = 20;
inline constexpr std::size_t kDefaultIterations = 7;

struct SessionConfig {
  std::size_t scope = kDefaultScope;
  std::size_t r_max = kMaxMatchedSegments;
  std::size_t total_iterations = kDefaultIterations;
  Epsilon eps;
  std::uint64_t seed = 0;
  Reweighting reweighting = Reweighting::RwIbcd;

  void validate() const {
    if (scope < 1) throw DomainError("scope must be at least 1");
    if (r_max < 1 || r_max > kMaxMatchedSegments) {
      throw DomainError("r_max must be in [1, 4]");
    }
    if (total_iterations < 2) throw DomainError("need at least two iterations");
  }

  /// RF steps that follow the initial display (6 for WOS / intersection and
  /// 5 for union / combination at the default 7 iterations).
  std::size_t rf_budget(Scheme s) const {
    const std::size_t used = initial_slots(s);
    return total_iterations > used ? total_iterations - used : 0;
  }
};

/// Normalized, read-only view of a FeatureIndex used for retrieval.
class SearchIndex {
 public:
  SearchIndex(std::vector<FeatureVector> globals, std::vector<SegmentSet> segments,
              std::vector<std::uint32_t> categories)
      : globals_(std::move(globals)),
        segments_(std::move(segments)),
        categories_(std::move(categories)) {
    if (globals_.size() != segments_.size() || globals_.size() != categories_.size()) {
      throw DomainError("search index columns have different lengths");
    }
    for (auto c : categories_) {
      if (c >= category_sizes_.size()) category_sizes_.resize(c + 1, 0);
      ++category_sizes_[c];
    }
  }

  explicit SearchIndex(const FeatureIndex& index)
      : SearchIndex(normalized_globals(index), normalized_segments(index),
                    categories_of(index)) {}

  std::size_t size() const { return globals_.size(); }
  FeatureTable globals() const { return globals_; }
  std::span<const SegmentSet> segments() const { return segments_; }
  std::uint32_t category(ImageId id) const { return categories_.at(id); }
  std::uint32_t category_size(std::uint32_t category) const {
    return category < category_sizes_.size() ? category_sizes_[category] : 0;
  }

  void check_id(ImageId id) const {
    if (id >= size()) throw DomainError("unknown image id " + std::to_string(id));
  }

 private:
  static std::vector<FeatureVector> normalized_globals(const FeatureIndex& index) {
    std::vector<FeatureVector> out;
    out.reserve(index.size());
    for (const auto& img : index.images) out.push_back(index.global_norm.apply(img.global));
    return out;
  }
  static std::vector<SegmentSet> normalized_segments(const FeatureIndex& index) {
    std::vector<SegmentSet> out;
    out.reserve(index.size());
    for (const auto& img : index.images) {
      SegmentSet s = img.segments;
      for (auto& seg : s.segments) seg = index.segment_norm.apply(seg);
      out.push_back(std::move(s));
    }
    return out;
  }
  static std::vector<std::uint32_t> categories_of(const FeatureIndex& index) {
    std::vector<std::uint32_t> out;
    for (const auto& img : index.images) out.push_back(img.category);
    return out;
  }

  std::vector<FeatureVector> globals_;
  std::vector<SegmentSet> segments_;
  std::vector<std::uint32_t> categories_;
  std::vector<std::uint32_t> category_sizes_;
};

/// Query descriptors, already normalized. `id` is set for indexed images.
struct Query {
  std::optional<ImageId> id;
  FeatureVector global{};
  SegmentSet segments;

  static Query from_index(const SearchIndex& search, ImageId id) {
    search.check_id(id);
    return {id, search.globals()[id], search.segments()[id]};
  }

  static Query from_features(const FeatureIndex& index, const ImageFeatures& f) {
    Query q;
    q.global = index.global_norm.apply(f.global);
    q.segments = f.segments;
    for (auto& seg : q.segments.segments) seg = index.segment_norm.apply(seg);
    return q;
  }
};

struct RetrievalPage {
  std::size_t iteration = 1;  // first iteration slot this page occupies
  std::size_t slots = 1;      // iteration slots consumed
  std::vector<ImageId> images;
  std::vector<double> scores;  // ranking score that placed each image
  std::vector<ImageId> carried_relevant;

  std::size_t size() const { return images.size(); }
  bool operator==(const RetrievalPage&) const = default;
};

namespace detail {

// Ascending by score; the query itself wins ties, then ascending id.
inline void sort_ascending(std::vector<ScoredImage>& list, std::optional<ImageId> query) {
  std::sort(list.begin(), list.end(), [&](const ScoredImage& a, const ScoredImage& b) {
    if (a.score != b.score) return a.score < b.score;
    const bool aq = query && a.id == *query;
    const bool bq = query && b.id == *query;
    if (aq != bq) return aq;
    return a.id < b.id;
  });
}

inline RetrievalPage top_page(const std::vector<ScoredImage>& ranked, std::size_t scope) {
  RetrievalPage page;
  for (std::size_t i = 0; i < std::min(scope, ranked.size()); ++i) {
    page.images.push_back(ranked[i].id);
    page.scores.push_back(ranked[i].score);
  }
  return page;
}

}  // namespace detail

/// Every database image by uniform-weight L2 distance to the query's global
/// descriptor, nearest first.
inline std::vector<ScoredImage> rank_wos(const Query& query, const SearchIndex& search) {
  if (search.size() == 0) throw DomainError("index is empty");
  const auto w = WeightVector::uniform();
  std::vector<ScoredImage> out;
  out.reserve(search.size());
  for (ImageId id = 0; id < search.size(); ++id) {
    out.push_back({id, weighted_distance(query.global, search.globals()[id], w)});
  }
  detail::sort_ascending(out, query.id);
  return out;
}

/// Every database image by segment rank-sum distance, lowest first.
inline std::vector<ScoredImage> rank_ws(const Query& query, const SearchIndex& search,
                                        std::size_t r_max) {
  if (search.size() == 0) throw DomainError("index is empty");
  const auto result = d_seg(query.segments, search.segments(), WeightVector::uniform(), r_max);
  std::vector<ScoredImage> out;
  out.reserve(search.size());
  for (ImageId id = 0; id < search.size(); ++id) out.push_back({id, result.scores[id]});
  detail::sort_ascending(out, query.id);
  return out;
}

inline RetrievalPage initial_wos(const Query& query, const SearchIndex& search,
                                 const SessionConfig& config) {
  return detail::top_page(rank_wos(query, search), config.scope);
}

inline RetrievalPage initial_ws(const Query& query, const SearchIndex& search,
                                const SessionConfig& config) {
  return detail::top_page(rank_ws(query, search, config.r_max), config.scope);
}

/// Split of the non-shared part of an intersection display.
struct IntersectionSplit {
  std::size_t shared = 0;    // c
  std::size_t from_ws = 0;   // d1 = floor((S - c) / 2)
  std::size_t from_wos = 0;  // d2 = S - c - d1
};

inline IntersectionSplit intersection_split(std::size_t scope, std::size_t shared) {
  IntersectionSplit s;
  s.shared = std::min(shared, scope);
  s.from_ws = (scope - s.shared) / 2;
  s.from_wos = scope - s.shared - s.from_ws;
  return s;
}

/// D_inter, then the best d1 remaining WS images, then the best d2 remaining
/// WOS images, each in its own source order. If one source runs short the
/// other fills in.
inline std::vector<ImageId> init_intersection(const RetrievalPage& wos,
                                              const RetrievalPage& ws,
                                              std::size_t scope) {
  const std::set<ImageId> ws_set(ws.images.begin(), ws.images.end());
  const std::set<ImageId> wos_set(wos.images.begin(), wos.images.end());
  std::vector<ImageId> shared;
  for (ImageId id : wos.images) {
    if (ws_set.contains(id)) shared.push_back(id);
  }
  std::vector<ImageId> ws_rest;
  for (ImageId id : ws.images) {
    if (!wos_set.contains(id)) ws_rest.push_back(id);
  }
  std::vector<ImageId> wos_rest;
  for (ImageId id : wos.images) {
    if (!ws_set.contains(id)) wos_rest.push_back(id);
  }
  const auto split = intersection_split(scope, shared.size());
  std::size_t take_ws = std::min(split.from_ws, ws_rest.size());
  std::size_t take_wos = std::min(split.from_wos, wos_rest.size());
  const std::size_t want = scope - split.shared;
  while (take_ws + take_wos < want &&
         (take_ws < ws_rest.size() || take_wos < wos_rest.size())) {
    if (take_wos < wos_rest.size()) {
      ++take_wos;
    } else {
      ++take_ws;
    }
  }
  std::vector<ImageId> out(shared.begin(), shared.begin() + static_cast<std::ptrdiff_t>(split.shared));
  out.insert(out.end(), ws_rest.begin(), ws_rest.begin() + static_cast<std::ptrdiff_t>(take_ws));
  out.insert(out.end(), wos_rest.begin(), wos_rest.begin() + static_cast<std::ptrdiff_t>(take_wos));
  return out;
}

/// D_WOS in its own order followed by the WS images it does not contain.
inline std::vector<ImageId> init_union(const RetrievalPage& wos, const RetrievalPage& ws) {
  std::vector<ImageId> out = wos.images;
  const std::set<ImageId> seen(wos.images.begin(), wos.images.end());
  for (ImageId id : ws.images) {
    if (!seen.contains(id)) out.push_back(id);
  }
  return out;
}

/// Relevant / nonrelevant marks for one page; true means relevant.
using Marks = std::map<ImageId, bool>;

class FeedbackError : public DomainError {
 public:
  enum class Kind { Incomplete, UnknownImage, WrongState };
  FeedbackError(Kind kind, const std::string& what) : DomainError(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Folds one page's marks into the cumulative sets. The marks must cover the
/// page exactly. The query is always relevant.
inline void fold_feedback(RfState& state, const RetrievalPage& page, const Marks& marks,
                          std::size_t database_size) {
  const std::set<ImageId> on_page(page.images.begin(), page.images.end());
  for (const auto& [id, relevant] : marks) {
    if (id >= database_size) {
      throw FeedbackError(FeedbackError::Kind::UnknownImage,
                          "unknown image id " + std::to_string(id));
    }
    if (!on_page.contains(id)) {
      throw FeedbackError(FeedbackError::Kind::UnknownImage,
                          "image " + std::to_string(id) + " is not on the current page");
    }
  }
  for (ImageId id : page.images) {
    if (!marks.contains(id)) {
      throw FeedbackError(FeedbackError::Kind::Incomplete,
                          "missing mark for image " + std::to_string(id));
    }
  }
  for (ImageId id : page.images) {
    if (marks.at(id) || id == state.query_id) {
      state.relevant.insert(id);
    } else {
      state.nonrelevant.insert(id);
    }
  }
}

/// Id sets the reweighting statistics are computed from.
struct StatsSource {
  std::vector<ImageId> relevant;
  std::vector<ImageId> nonrelevant;
};

/// Recomputes the weights and returns the next S - |R| never-shown images.
inline RetrievalPage next_feedback_page(RfState& state, const SearchIndex& search,
                                        const SessionConfig& config,
                                        const std::optional<StatsSource>& source = {}) {
  const FeatureStats stats =
      source ? compute_stats(source->relevant, source->nonrelevant, search.globals())
             : compute_stats(state, search.globals());
  state.weights = reweight(stats, ReweightScheme::DeltaTimesRatio, config.eps);

  const ScoreMode mode =
      config.reweighting == Reweighting::RwIbcd ? ScoreMode::Ibcd : ScoreMode::QueryDistance;
  const auto ranked = rank_candidates(state, search.globals(), state.shown_set, mode);
  const std::size_t quota =
      config.scope > state.relevant.size() ? config.scope - state.relevant.size() : 0;

  RetrievalPage page;
  page.iteration = state.iteration + 1;
  page.carried_relevant.assign(state.relevant.begin(), state.relevant.end());
  for (std::size_t i = 0; i < std::min(quota, ranked.size()); ++i) {
    page.images.push_back(ranked[i].id);
    page.scores.push_back(ranked[i].score);
  }
  state.record_shown(page.images);
  state.iteration += page.slots;
  return page;
}

/// One feedback step: fold the marks for `last`, reweight, return the next page.
inline RetrievalPage rf_step(RfState& state, const RetrievalPage& last, const Marks& marks,
                             const SearchIndex& search, const SessionConfig& config) {
  fold_feedback(state, last, marks, search.size());
  return next_feedback_page(state, search, config);
}

enum class SessionStatus { AwaitingFeedback, Converged, Exhausted };

inline std::string_view to_string(SessionStatus s) {
  switch (s) {
    case SessionStatus::AwaitingFeedback: return "awaiting_feedback";
    case SessionStatus::Converged: return "converged";
    case SessionStatus::Exhausted: return "exhausted";
  }
  return "?";
}

struct TranscriptEntry {
  RetrievalPage page;
  Marks marks;                  // empty until feedback arrives
  WeightVector weights;         // weights in force when the page was ranked
  std::size_t relevant_after = 0;
  std::size_t nonrelevant_after = 0;

  bool operator==(const TranscriptEntry&) const = default;
};

struct Transcript {
  ImageId query = 0;
  Scheme scheme = Scheme::Wos;
  std::vector<TranscriptEntry> entries;
  SessionStatus status = SessionStatus::AwaitingFeedback;

  bool operator==(const Transcript&) const = default;
};

/// A single query session. Owns its RfState; the SearchIndex is shared.
class Session {
 public:
  Session(const SearchIndex& search, ImageId query, Scheme scheme, SessionConfig config)
      : search_(&search), scheme_(scheme), config_(std::move(config)) {
    config_.validate();
    if (search.size() == 0) throw DomainError("index is empty");
    const Query q = Query::from_index(search, query);
    state_.query_id = query;
    state_.query = q.global;
    transcript_.query = query;
    transcript_.scheme = scheme;

    const RetrievalPage wos = initial_wos(q, search, config_);
    RetrievalPage first;
    switch (scheme) {
      case Scheme::Wos:
        first = wos;
        break;
      case Scheme::WsInter:
        first.images = init_intersection(wos, initial_ws(q, search, config_), config_.scope);
        break;
      case Scheme::WsUnion:
        first.images = init_union(wos, initial_ws(q, search, config_));
        first.slots = 2;
        break;
      case Scheme::WsComb:
        ws_page_ = initial_ws(q, search, config_);
        wos_page_ = wos;
        first = ws_page_;
        break;
    }
    first.iteration = 1;
    push_page(std::move(first));
  }

  Scheme scheme() const { return scheme_; }
  const SessionConfig& config() const { return config_; }
  SessionStatus status() const { return transcript_.status; }
  const RfState& state() const { return state_; }
  const Transcript& transcript() const { return transcript_; }
  std::size_t rf_steps_taken() const { return rf_steps_; }
  std::size_t rf_budget() const { return config_.rf_budget(scheme_); }

  /// Page awaiting feedback (the last page shown once the session is terminal).
  const RetrievalPage& current_page() const { return transcript_.entries.back().page; }

  /// Applies marks for the current page and advances the session.
  void submit(const Marks& marks) {
    if (status() != SessionStatus::AwaitingFeedback) {
      throw FeedbackError(FeedbackError::Kind::WrongState, "session is no longer active");
    }
    auto& entry = transcript_.entries.back();
    fold_feedback(state_, entry.page, marks, search_->size());
    entry.marks = marks;
    entry.relevant_after = state_.relevant.size();
    entry.nonrelevant_after = state_.nonrelevant.size();
    advance();
  }

 private:
  void push_page(RetrievalPage page) {
    if (page.iteration == 1) {
      state_.record_shown(page.images);
      state_.iteration = page.slots;
    }
    page.carried_relevant.assign(state_.relevant.begin(), state_.relevant.end());
    TranscriptEntry entry;
    entry.weights = state_.weights;
    entry.page = std::move(page);
    transcript_.entries.push_back(std::move(entry));
  }

  void advance() {
    if (state_.relevant.size() >= config_.scope) {
      transcript_.status = SessionStatus::Converged;
      return;
    }
    std::optional<StatsSource> source;
    if (scheme_ == Scheme::WsComb && transcript_.entries.size() == 1) {
      // Second display: the WOS images the WS page did not already show.
      RetrievalPage second;
      second.iteration = 2;
      for (std::size_t i = 0; i < wos_page_.images.size(); ++i) {
        if (!state_.was_shown(wos_page_.images[i])) {
          second.images.push_back(wos_page_.images[i]);
          second.scores.push_back(wos_page_.scores[i]);
        }
      }
      state_.record_shown(second.images);
      state_.iteration = 2;
      if (!second.images.empty()) {
        push_page(std::move(second));
        return;
      }
    }
    if (scheme_ == Scheme::WsComb && rf_steps_ == 0) source = combination_source();
    if (rf_steps_ >= rf_budget()) {
      transcript_.status = SessionStatus::Exhausted;
      return;
    }
    RetrievalPage page = next_feedback_page(state_, *search_, config_, source);
    ++rf_steps_;
    if (page.images.empty()) {
      transcript_.status = SessionStatus::Exhausted;
      return;
    }
    TranscriptEntry entry;
    entry.weights = state_.weights;
    entry.page = std::move(page);
    transcript_.entries.push_back(std::move(entry));
  }

  // Marked sets of whichever initial page found more relevant images (WS on ties).
  StatsSource combination_source() const {
    auto split = [&](const RetrievalPage& page) {
      StatsSource s;
      for (ImageId id : page.images) {
        if (state_.relevant.contains(id)) {
          s.relevant.push_back(id);
        } else if (state_.nonrelevant.contains(id)) {
          s.nonrelevant.push_back(id);
        }
      }
      if (std::find(s.relevant.begin(), s.relevant.end(), state_.query_id) == s.relevant.end()) {
        s.relevant.push_back(state_.query_id);
      }
      return s;
    };
    StatsSource ws = split(ws_page_);
    StatsSource wos = split(wos_page_);
    return ws.relevant.size() >= wos.relevant.size() ? ws : wos;
  }

  const SearchIndex* search_;
  Scheme scheme_;
  SessionConfig config_;
  RfState state_;
  Transcript transcript_;
  std::size_t rf_steps_ = 0;
  RetrievalPage ws_page_;
  RetrievalPage wos_page_;
};

/// Produces marks for a page; used to drive sessions non-interactively.
using FeedbackSource = std::function<Marks(const RetrievalPage&, const RfState&)>;

inline Transcript run_session(const SearchIndex& search, ImageId query, Scheme scheme,
                              const SessionConfig& config, const FeedbackSource& feedback) {
  Session session(search, query, scheme, config);
  while (session.status() == SessionStatus::AwaitingFeedback) {
    session.submit(feedback(session.current_page(), session.state()));
  }
  return session.transcript();
}

}  // namespace segcbir
