#pragma once

// Oracle-driven evaluation. Category labels stand in for the user: an image
// is relevant iff it shares the query's category. Metrics are cumulative over
// everything displayed so far, reported per iteration slot and averaged over
// a query set.

#include <algorithm>
#include <charconv>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "segcbir/errors.hpp"
#include "segcbir/parallel.hpp"
#include "segcbir/random.hpp"
#include "segcbir/retrieval_engine.hpp"

namespace segcbir {

/// Ground-truth relevance from category labels.
class Oracle {
 public:
  explicit Oracle(std::vector<std::uint32_t> labels) : labels_(std::move(labels)) {
    for (auto c : labels_) {
      if (c >= sizes_.size()) sizes_.resize(c + 1, 0);
      ++sizes_[c];
    }
  }

  static Oracle from_search(const SearchIndex& search) {
    std::vector<std::uint32_t> labels;
    for (ImageId id = 0; id < search.size(); ++id) labels.push_back(search.category(id));
    return Oracle(std::move(labels));
  }

  std::uint32_t category(ImageId id) const {
    if (id >= labels_.size()) throw DomainError("unlabeled image id " + std::to_string(id));
    return labels_[id];
  }
  std::uint32_t category_size(std::uint32_t c) const {
    return c < sizes_.size() ? sizes_[c] : 0;
  }
  std::size_t size() const { return labels_.size(); }

  Marks feedback(const RetrievalPage& page, std::uint32_t query_category) const {
    Marks marks;
    for (ImageId id : page.images) marks[id] = category(id) == query_category;
    return marks;
  }

  FeedbackSource source(ImageId query) const {
    const std::uint32_t c = category(query);
    return [this, c](const RetrievalPage& page, const RfState&) { return feedback(page, c); };
  }

 private:
  std::vector<std::uint32_t> labels_;
  std::vector<std::uint32_t> sizes_;
};

inline double precision_pct(std::size_t relevant, std::size_t shown) {
  return shown == 0 ? 0.0 : 100.0 * static_cast<double>(relevant) / static_cast<double>(shown);
}
inline double recall_pct(std::size_t relevant, std::size_t category_size) {
  return category_size == 0
             ? 0.0
             : 100.0 * static_cast<double>(relevant) / static_cast<double>(category_size);
}
inline double retrieval_efficiency_pct(std::size_t relevant, std::size_t scope) {
  return std::min(100.0, 100.0 * static_cast<double>(relevant) / static_cast<double>(scope));
}
inline double false_discovery_pct(std::size_t nonrelevant, std::size_t shown) {
  return shown == 0 ? 0.0
                    : 100.0 * static_cast<double>(nonrelevant) / static_cast<double>(shown);
}

struct IterationMetrics {
  std::size_t iteration = 0;
  std::size_t shown = 0;        // cumulative
  std::size_t relevant = 0;     // cumulative
  std::size_t nonrelevant = 0;  // cumulative
  double precision = 0.0;
  double recall = 0.0;
  double re = 0.0;
  double fd = 0.0;
};

/// Cumulative metrics per iteration slot. Only marked pages count. A page
/// occupying two slots fills both. With `through` > 0, the last value is
/// carried forward to that many slots (sessions that stopped early keep their
/// final state).
inline std::vector<IterationMetrics> session_metrics(const Transcript& t,
                                                     std::size_t category_size,
                                                     std::size_t scope,
                                                     std::size_t through = 0) {
  std::vector<IterationMetrics> out;
  std::size_t shown = 0;
  std::size_t relevant = 0;
  auto emit = [&](std::size_t slot) {
    IterationMetrics m;
    m.iteration = slot;
    m.shown = shown;
    m.relevant = relevant;
    m.nonrelevant = shown - relevant;
    m.precision = precision_pct(relevant, shown);
    m.recall = recall_pct(relevant, category_size);
    m.re = retrieval_efficiency_pct(relevant, scope);
    m.fd = false_discovery_pct(shown - relevant, shown);
    out.push_back(m);
  };
  for (const auto& entry : t.entries) {
    if (entry.marks.size() != entry.page.images.size()) break;
    while (out.size() + 1 < entry.page.iteration) emit(out.size() + 1);
    for (ImageId id : entry.page.images) {
      ++shown;
      if (entry.marks.at(id) || id == t.query) ++relevant;
    }
    for (std::size_t s = 0; s < entry.page.slots; ++s) emit(entry.page.iteration + s);
  }
  while (!out.empty() && out.size() < through) emit(out.size() + 1);
  return out;
}

/// Which queries to run.
struct QuerySelection {
  std::size_t sample = 0;  // 0 means every image

  static QuerySelection parse(const std::string& text) {
    if (text == "all") return {};
    const std::string prefix = "sample:";
    if (text.rfind(prefix, 0) == 0) {
      const std::string digits = text.substr(prefix.size());
      std::size_t k = 0;
      const auto [end, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), k);
      if (ec == std::errc{} && end == digits.data() + digits.size() && k > 0) return {k};
    }
    throw DomainError("query selection must be 'all' or 'sample:K' with K > 0");
  }
};

/// Seeded query set stratified by category: categories take turns, each
/// drawing from its own shuffled member list. Returned in ascending id order.
inline std::vector<ImageId> select_queries(const Oracle& oracle, QuerySelection sel,
                                           std::uint64_t seed) {
  std::vector<ImageId> all(oracle.size());
  for (ImageId id = 0; id < all.size(); ++id) all[id] = id;
  if (sel.sample == 0 || sel.sample >= all.size()) return all;

  std::map<std::uint32_t, std::vector<ImageId>> by_category;
  for (ImageId id : all) by_category[oracle.category(id)].push_back(id);
  Rng rng(seed);
  for (auto& [c, members] : by_category) rng.shuffle(members);

  std::vector<ImageId> picked;
  std::size_t round = 0;
  while (picked.size() < sel.sample) {
    for (auto& [c, members] : by_category) {
      if (round < members.size() && picked.size() < sel.sample) picked.push_back(members[round]);
    }
    ++round;
  }
  std::sort(picked.begin(), picked.end());
  return picked;
}

struct EvalRecord {
  ImageId query_id = 0;
  std::uint32_t category = 0;
  Scheme scheme = Scheme::Wos;
  Reweighting reweighting = Reweighting::RwIbcd;
  IterationMetrics metrics;
};

inline nlohmann::json to_json(const EvalRecord& r) {
  return {{"query_id", r.query_id},
          {"category", r.category},
          {"scheme", std::string(to_string(r.scheme))},
          {"reweight", std::string(to_string(r.reweighting))},
          {"iteration", r.metrics.iteration},
          {"shown", r.metrics.shown},
          {"relevant", r.metrics.relevant},
          {"precision", r.metrics.precision},
          {"recall", r.metrics.recall},
          {"re", r.metrics.re},
          {"fd", r.metrics.fd}};
}

/// Per-iteration averages for one (scheme, reweighting) arm.
struct ArmSummary {
  Scheme scheme = Scheme::Wos;
  Reweighting reweighting = Reweighting::RwIbcd;
  std::size_t queries = 0;
  std::vector<double> precision;  // index = iteration - 1
  std::vector<double> recall;
  std::vector<double> re;
  std::vector<double> fd;
  std::vector<std::size_t> shown_total;  // summed over queries
  std::vector<std::size_t> relevant_total;

  double final_re() const { return re.empty() ? 0.0 : re.back(); }
  double final_fd() const { return fd.empty() ? 0.0 : fd.back(); }
  double final_precision() const { return precision.empty() ? 0.0 : precision.back(); }
  double final_recall() const { return recall.empty() ? 0.0 : recall.back(); }
};

struct EvalReport {
  SessionConfig config;
  std::vector<ImageId> queries;
  std::vector<ArmSummary> arms;
  std::vector<EvalRecord> records;

  const ArmSummary* arm(Scheme s, Reweighting r) const {
    for (const auto& a : arms) {
      if (a.scheme == s && a.reweighting == r) return &a;
    }
    return nullptr;
  }
};

struct ExperimentArm {
  Scheme scheme = Scheme::Wos;
  Reweighting reweighting = Reweighting::RwIbcd;
};

/// Runs every arm for every query with oracle feedback and averages the
/// per-iteration metrics.
inline EvalReport run_experiment(const SearchIndex& search, const Oracle& oracle,
                                 const SessionConfig& config,
                                 const std::vector<ExperimentArm>& arms,
                                 const std::vector<ImageId>& queries,
                                 std::size_t workers = default_worker_count()) {
  config.validate();
  if (arms.empty()) throw DomainError("no schemes to evaluate");
  EvalReport report;
  report.config = config;
  report.queries = queries;
  const std::size_t slots = config.total_iterations;

  for (const auto& arm : arms) {
    std::vector<std::vector<IterationMetrics>> per_query(queries.size());
    SessionConfig cfg = config;
    cfg.reweighting = arm.reweighting;
    parallel_for(
        queries.size(),
        [&](std::size_t i) {
          const ImageId q = queries[i];
          const Transcript t = run_session(search, q, arm.scheme, cfg, oracle.source(q));
          per_query[i] = session_metrics(t, oracle.category_size(oracle.category(q)),
                                         cfg.scope, slots);
        },
        workers);

    ArmSummary summary;
    summary.scheme = arm.scheme;
    summary.reweighting = arm.reweighting;
    summary.queries = queries.size();
    summary.precision.assign(slots, 0.0);
    summary.recall.assign(slots, 0.0);
    summary.re.assign(slots, 0.0);
    summary.fd.assign(slots, 0.0);
    summary.shown_total.assign(slots, 0);
    summary.relevant_total.assign(slots, 0);
    for (std::size_t i = 0; i < queries.size(); ++i) {
      for (const auto& m : per_query[i]) {
        if (m.iteration > slots) continue;
        const std::size_t k = m.iteration - 1;
        summary.precision[k] += m.precision;
        summary.recall[k] += m.recall;
        summary.re[k] += m.re;
        summary.fd[k] += m.fd;
        summary.shown_total[k] += m.shown;
        summary.relevant_total[k] += m.relevant;
        report.records.push_back(
            {queries[i], oracle.category(queries[i]), arm.scheme, arm.reweighting, m});
      }
    }
    if (!queries.empty()) {
      const double n = static_cast<double>(queries.size());
      for (std::size_t k = 0; k < slots; ++k) {
        summary.precision[k] /= n;
        summary.recall[k] /= n;
        summary.re[k] /= n;
        summary.fd[k] /= n;
      }
    }
    report.arms.push_back(std::move(summary));
  }
  return report;
}

struct RSweepRow {
  std::size_t r_max = 0;
  double mean_re = 0.0;
  std::size_t relevant_total = 0;
};

/// Mean Retrieval Efficiency of the first WS page for each r_max.
inline std::vector<RSweepRow> run_r_sweep(const SearchIndex& search, const Oracle& oracle,
                                          const SessionConfig& config,
                                          const std::vector<ImageId>& queries,
                                          std::vector<std::size_t> r_values = {1, 2, 3, 4},
                                          std::size_t workers = default_worker_count()) {
  std::vector<RSweepRow> rows;
  for (std::size_t r : r_values) {
    SessionConfig cfg = config;
    cfg.r_max = r;
    cfg.validate();
    std::vector<std::size_t> hits(queries.size(), 0);
    parallel_for(
        queries.size(),
        [&](std::size_t i) {
          const ImageId q = queries[i];
          const auto page = initial_ws(Query::from_index(search, q), search, cfg);
          const auto c = oracle.category(q);
          for (ImageId id : page.images) hits[i] += oracle.category(id) == c ? 1 : 0;
        },
        workers);
    RSweepRow row;
    row.r_max = r;
    for (std::size_t h : hits) {
      row.relevant_total += h;
      row.mean_re += retrieval_efficiency_pct(h, cfg.scope);
    }
    if (!queries.empty()) row.mean_re /= static_cast<double>(queries.size());
    rows.push_back(row);
  }
  return rows;
}

namespace detail {

inline std::string fmt2(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

}  // namespace detail

/// Line-delimited JSON, one record per (query, scheme, reweighting, iteration).
inline void write_records(std::ostream& out, const EvalReport& report) {
  for (const auto& r : report.records) out << to_json(r).dump() << '\n';
}

/// Summary tables: final-iteration RE / FD / precision / recall per arm, and
/// RE per iteration.
inline std::string render_summary(const EvalReport& report, const std::string& db_name) {
  std::ostringstream out;
  out << "database: " << db_name << "  queries: " << report.queries.size()
      << "  scope: " << report.config.scope << "  r_max: " << report.config.r_max
      << "  iterations: " << report.config.total_iterations << "\n\n";
  out << "scheme\treweight\tRE\tFD\tprecision\trecall\n";
  for (const auto& a : report.arms) {
    out << to_string(a.scheme) << '\t' << to_string(a.reweighting) << '\t'
        << detail::fmt2(a.final_re()) << '\t' << detail::fmt2(a.final_fd()) << '\t'
        << detail::fmt2(a.final_precision()) << '\t' << detail::fmt2(a.final_recall()) << '\n';
  }
  out << "\nRE by iteration\nscheme\treweight";
  for (std::size_t k = 1; k <= report.config.total_iterations; ++k) out << "\tt=" << k;
  out << '\n';
  for (const auto& a : report.arms) {
    out << to_string(a.scheme) << '\t' << to_string(a.reweighting);
    for (double v : a.re) out << '\t' << detail::fmt2(v);
    out << '\n';
  }
  return out.str();
}

inline std::string render_r_sweep(const std::vector<RSweepRow>& rows, const std::string& db_name) {
  std::ostringstream out;
  out << "Retrieval Efficiency after 1 iteration (WS)\ndatabase";
  for (const auto& r : rows) out << "\tr=" << r.r_max;
  out << '\n' << db_name;
  for (const auto& r : rows) out << '\t' << detail::fmt2(r.mean_re);
  out << '\n';
  return out.str();
}

}  // namespace segcbir
