#pragma once

// Relevance feedback mathematics: feature statistics over the marked sets,
// the reweighting formulas, instance-based distances and the cluster-density
// relevance score.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <set>
#include <span>
#include <vector>

#include "segcbir/color_features.hpp"
#include "segcbir/errors.hpp"
#include "segcbir/similarity.hpp"

namespace segcbir {

using ImageId = std::uint32_t;

/// Per-image feature vectors indexed by ImageId.
using FeatureTable = std::span<const FeatureVector>;

struct Epsilon {
  double value = 1e-6;

  Epsilon() = default;
  explicit Epsilon(double v) : value(v) {
    if (!(v > 0.0) || !std::isfinite(v)) throw DomainError("epsilon must be positive");
  }
};

/// One query session's feedback state. The query id is kept in `relevant`
/// by the engine once the first page has been marked.
struct RfState {
  ImageId query_id = 0;
  FeatureVector query{};
  std::set<ImageId> relevant;
  std::set<ImageId> nonrelevant;
  WeightVector weights = WeightVector::uniform();
  std::vector<ImageId> shown;  // display order
  std::set<ImageId> shown_set;
  std::size_t iteration = 0;

  bool was_shown(ImageId id) const { return shown_set.contains(id); }

  void record_shown(std::span<const ImageId> ids) {
    for (ImageId id : ids) {
      if (shown_set.insert(id).second) shown.push_back(id);
    }
  }
};

struct FeatureStats {
  FeatureVector sigma_all{};  // population std-dev over R u N
  FeatureVector sigma_rel{};  // population std-dev over R
  FeatureVector dominant_min{};
  FeatureVector dominant_max{};
  FeatureVector delta{};  // discriminant ratio, in [0, 1]
};

enum class ReweightScheme { SigmaRatio, DeltaOverSigma, DeltaTimesRatio };

namespace detail {

inline const FeatureVector& lookup(FeatureTable table, ImageId id) {
  if (id >= table.size()) throw DomainError("image id out of range");
  return table[id];
}

inline double population_sd(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  return std::sqrt(var / static_cast<double>(xs.size()));
}

}  // namespace detail

/// Statistics over explicit relevant / nonrelevant id sets.
inline FeatureStats compute_stats(std::span<const ImageId> relevant,
                                  std::span<const ImageId> nonrelevant,
                                  FeatureTable table) {
  if (relevant.empty()) throw DomainError("relevant set is empty");
  FeatureStats st;
  std::vector<double> rel(relevant.size());
  std::vector<double> all(relevant.size() + nonrelevant.size());
  for (std::size_t j = 0; j < kFeatureDim; ++j) {
    for (std::size_t i = 0; i < relevant.size(); ++i) {
      rel[i] = all[i] = detail::lookup(table, relevant[i])[j];
    }
    std::size_t inside = 0;
    const auto [lo, hi] = std::minmax_element(rel.begin(), rel.end());
    st.dominant_min[j] = *lo;
    st.dominant_max[j] = *hi;
    for (std::size_t i = 0; i < nonrelevant.size(); ++i) {
      const double x = detail::lookup(table, nonrelevant[i])[j];
      all[relevant.size() + i] = x;
      if (x >= *lo && x <= *hi) ++inside;
    }
    st.sigma_rel[j] = detail::population_sd(rel);
    st.sigma_all[j] = detail::population_sd(all);
    st.delta[j] = nonrelevant.empty()
                      ? 1.0
                      : 1.0 - static_cast<double>(inside) /
                                  static_cast<double>(nonrelevant.size());
  }
  return st;
}

inline FeatureStats compute_stats(const RfState& state, FeatureTable table) {
  const std::vector<ImageId> rel(state.relevant.begin(), state.relevant.end());
  const std::vector<ImageId> non(state.nonrelevant.begin(), state.nonrelevant.end());
  return compute_stats(rel, non, table);
}

/// New feature weights from the statistics. A zero sigma_rel is replaced by
/// eps. If every weight comes out zero (no spread anywhere) the uniform
/// weights are returned.
inline WeightVector reweight(const FeatureStats& stats, ReweightScheme scheme,
                             Epsilon eps = {}) {
  std::vector<double> w(kFeatureDim);
  bool any_positive = false;
  for (std::size_t j = 0; j < kFeatureDim; ++j) {
    const double sd_all = stats.sigma_all[j];
    const double sd_rel = stats.sigma_rel[j] > 0.0 ? stats.sigma_rel[j] : eps.value;
    switch (scheme) {
      case ReweightScheme::SigmaRatio:
        w[j] = (sd_all == 0.0 && stats.sigma_rel[j] == 0.0) ? 1.0 : sd_all / sd_rel;
        break;
      case ReweightScheme::DeltaOverSigma:
        w[j] = stats.delta[j] / sd_rel;
        break;
      case ReweightScheme::DeltaTimesRatio:
        w[j] = stats.delta[j] * (sd_all / sd_rel);
        break;
    }
    any_positive = any_positive || w[j] > 0.0;
  }
  if (!any_positive) return WeightVector::uniform();
  return WeightVector(std::move(w));
}

/// Minimum weighted distance from the candidate to the query and the
/// relevant images.
inline double d_R(const FeatureVector& candidate, const RfState& state,
                  FeatureTable table) {
  double best = weighted_distance(candidate, state.query, state.weights);
  for (ImageId id : state.relevant) {
    best = std::min(best,
                    weighted_distance(candidate, detail::lookup(table, id), state.weights));
  }
  return best;
}

/// Minimum weighted distance to the nonrelevant images; 1 when there are none.
inline double d_N(const FeatureVector& candidate, const RfState& state,
                  FeatureTable table) {
  if (state.nonrelevant.empty()) return 1.0;
  double best = std::numeric_limits<double>::infinity();
  for (ImageId id : state.nonrelevant) {
    best = std::min(best,
                    weighted_distance(candidate, detail::lookup(table, id), state.weights));
  }
  return best;
}

/// Mean weighted distance to the relevant images; 0 when there are none.
inline double d_C(const FeatureVector& candidate, const RfState& state,
                  FeatureTable table) {
  if (state.relevant.empty()) return 0.0;
  double sum = 0.0;
  for (ImageId id : state.relevant) {
    sum += weighted_distance(candidate, detail::lookup(table, id), state.weights);
  }
  return sum / static_cast<double>(state.relevant.size());
}

enum class ScoreMode {
  Basic,         // (1 + d_R / d_N)^-1
  Ibcd,          // (1 + d_C * d_R / d_N)^-1
  QueryDistance  // (1 + d(Q, I))^-1, ranking by reweighted distance alone
};

/// Score from precomputed distances. d_N == 0 means the candidate coincides
/// with a nonrelevant image and scores 0.
inline double relevance_score(double dr, double dn, double dc, ScoreMode mode) {
  if (mode == ScoreMode::QueryDistance) return 1.0 / (1.0 + dr);
  if (dn == 0.0) return dr == 0.0 ? 1.0 : 0.0;
  const double ratio = dr / dn;
  return mode == ScoreMode::Basic ? 1.0 / (1.0 + ratio) : 1.0 / (1.0 + dc * ratio);
}

inline double relevance_score(const FeatureVector& candidate, const RfState& state,
                              FeatureTable table, ScoreMode mode) {
  if (mode == ScoreMode::QueryDistance) {
    return relevance_score(weighted_distance(candidate, state.query, state.weights),
                           0.0, 0.0, mode);
  }
  const double dr = d_R(candidate, state, table);
  const double dn = d_N(candidate, state, table);
  const double dc = mode == ScoreMode::Ibcd ? d_C(candidate, state, table) : 0.0;
  return relevance_score(dr, dn, dc, mode);
}

struct ScoredImage {
  ImageId id = 0;
  double score = 0.0;

  bool operator==(const ScoredImage&) const = default;
};

/// Scores every image not in `exclude`, highest score first, ties by id.
inline std::vector<ScoredImage> rank_candidates(const RfState& state, FeatureTable table,
                                                const std::set<ImageId>& exclude,
                                                ScoreMode mode = ScoreMode::Ibcd) {
  std::vector<ScoredImage> out;
  for (ImageId id = 0; id < table.size(); ++id) {
    if (exclude.contains(id)) continue;
    out.push_back({id, relevance_score(table[id], state, table, mode)});
  }
  std::sort(out.begin(), out.end(), [](const ScoredImage& a, const ScoredImage& b) {
    return a.score != b.score ? a.score > b.score : a.id < b.id;
  });
  return out;
}

}  // namespace segcbir
