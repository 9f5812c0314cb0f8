#pragma once

// Weighted feature distances and the segment rank-sum distance.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "segcbir/color_features.hpp"
#include "segcbir/errors.hpp"
#include "segcbir/segmentation.hpp"

namespace segcbir {

enum class Norm { L1, L2 };

inline constexpr std::size_t kMaxMatchedSegments = 4;

/// Non-negative per-feature weights, at least one strictly positive.
class WeightVector {
 public:
  WeightVector() = default;

  explicit WeightVector(std::vector<double> w) : w_(std::move(w)) {
    bool any_positive = false;
    for (double x : w_) {
      if (!std::isfinite(x) || x < 0.0) {
        throw DomainError("weights must be finite and non-negative");
      }
      any_positive = any_positive || x > 0.0;
    }
    if (!any_positive) throw DomainError("at least one weight must be positive");
  }

  static WeightVector uniform(std::size_t dim = kFeatureDim) {
    return WeightVector(std::vector<double>(dim, 1.0 / static_cast<double>(dim)));
  }

  std::size_t size() const { return w_.size(); }
  double operator[](std::size_t i) const { return w_[i]; }
  std::span<const double> values() const { return w_; }

  bool operator==(const WeightVector&) const = default;

 private:
  std::vector<double> w_;
};

/// L1: sum w_j |a_j - b_j|.  L2: sqrt(sum w_j (a_j - b_j)^2).
inline double weighted_distance(std::span<const double> a,
                                std::span<const double> b,
                                std::span<const double> w, Norm norm = Norm::L2) {
  if (a.size() != b.size() || a.size() != w.size()) {
    throw DomainError("distance operands have different lengths");
  }
  double sum = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    if (std::isnan(a[j]) || std::isnan(b[j])) {
      throw DomainError("NaN feature value");
    }
    const double d = a[j] - b[j];
    sum += norm == Norm::L1 ? w[j] * std::abs(d) : w[j] * d * d;
  }
  return norm == Norm::L1 ? sum : std::sqrt(sum);
}

inline double weighted_distance(const FeatureVector& a, const FeatureVector& b,
                                const WeightVector& w, Norm norm = Norm::L2) {
  return weighted_distance(std::span<const double>(a), std::span<const double>(b),
                           w.values(), norm);
}

/// Dense n_Q x n_I matrix of segment-to-segment distances.
struct SegmentDistanceMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> entries;  // row-major

  SegmentDistanceMatrix() = default;
  SegmentDistanceMatrix(std::size_t r, std::size_t c, std::vector<double> e)
      : rows(r), cols(c), entries(std::move(e)) {
    if (entries.size() != rows * cols) {
      throw DomainError("distance matrix entry count does not match shape");
    }
  }

  double operator()(std::size_t i, std::size_t j) const {
    return entries[i * cols + j];
  }
};

inline SegmentDistanceMatrix segment_distances(const SegmentSet& query,
                                               const SegmentSet& image,
                                               const WeightVector& w) {
  std::vector<double> e;
  e.reserve(query.size() * image.size());
  for (const auto& qs : query.segments) {
    for (const auto& is : image.segments) e.push_back(weighted_distance(qs, is, w));
  }
  return {query.size(), image.size(), std::move(e)};
}

struct GreedyMatchResult {
  std::vector<double> d;  // d[i] is the (i+1)-th extracted minimum
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // 0-based (row, col)
};

/// Repeatedly takes the global minimum of the remaining matrix and deletes its
/// row and column. Ties go to the smallest row, then the smallest column.
inline GreedyMatchResult greedy_match(const SegmentDistanceMatrix& m,
                                      std::size_t r) {
  if (r < 1 || r > std::min(m.rows, m.cols)) {
    throw DomainError("match count r must be in [1, min(rows, cols)]");
  }
  std::vector<bool> row_used(m.rows, false);
  std::vector<bool> col_used(m.cols, false);
  GreedyMatchResult out;
  out.d.reserve(r);
  out.pairs.reserve(r);
  for (std::size_t step = 0; step < r; ++step) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0;
    std::size_t bj = 0;
    bool found = false;
    for (std::size_t i = 0; i < m.rows; ++i) {
      if (row_used[i]) continue;
      for (std::size_t j = 0; j < m.cols; ++j) {
        if (col_used[j]) continue;
        if (!found || m(i, j) < best) {
          best = m(i, j);
          bi = i;
          bj = j;
          found = true;
        }
      }
    }
    row_used[bi] = true;
    col_used[bj] = true;
    out.d.push_back(best);
    out.pairs.emplace_back(bi, bj);
  }
  return out;
}

/// Ascending ranks starting at 1; tied values share the mean of their ranks.
inline std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = rank;
    i = j + 1;
  }
  return ranks;
}

struct DsegResult {
  std::size_t r = 0;
  std::vector<double> scores;                   // one per database image
  std::vector<std::vector<double>> level_distances;  // [i][j] = d_(i+1)(Q, I_j)
};

/// Segment rank-sum distance of the query against every database entry.
/// r = min(r_max, fewest segments over the query and the database).
inline DsegResult d_seg(const SegmentSet& query, std::span<const SegmentSet> database,
                        const WeightVector& w,
                        std::size_t r_max = kMaxMatchedSegments) {
  if (database.empty()) throw DomainError("d_seg needs a non-empty database");
  if (query.size() == 0) throw DomainError("query has no segments");
  if (r_max < 1) throw DomainError("r_max must be at least 1");
  std::size_t q = query.size();
  for (const auto& s : database) {
    if (s.size() == 0) throw DomainError("database image has no segments");
    q = std::min(q, s.size());
  }

  DsegResult out;
  out.r = std::min(r_max, q);
  out.level_distances.assign(out.r, std::vector<double>(database.size()));
  for (std::size_t j = 0; j < database.size(); ++j) {
    const auto match = greedy_match(segment_distances(query, database[j], w), out.r);
    for (std::size_t i = 0; i < out.r; ++i) out.level_distances[i][j] = match.d[i];
  }
  out.scores.assign(database.size(), 0.0);
  for (const auto& level : out.level_distances) {
    const auto ranks = average_ranks(level);
    for (std::size_t j = 0; j < ranks.size(); ++j) out.scores[j] += ranks[j];
  }
  return out;
}

}  // namespace segcbir
