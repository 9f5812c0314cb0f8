#pragma once

// Unrestricted segmentation: the image is tiled into fixed-size blocks, each
// block gets the colour co-occurrence descriptor, and the block descriptors
// are clustered with k-means. Segments need not be spatially contiguous.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "segcbir/color_features.hpp"
#include "segcbir/errors.hpp"
#include "segcbir/random.hpp"

namespace segcbir {

inline constexpr std::size_t kDefaultBlockSize = 4;
inline constexpr std::size_t kDefaultClusters = 8;
inline constexpr std::size_t kMaxLloydIterations = 100;

struct Block {
  std::size_t row = 0;
  std::size_t col = 0;
  FeatureVector features{};
};

struct SegmentSet {
  std::uint32_t image_id = 0;
  std::vector<FeatureVector> segments;
  std::vector<std::uint32_t> member_counts;

  std::size_t size() const { return segments.size(); }
  bool operator==(const SegmentSet&) const = default;
};

/// Tiles the image into block_h x block_w blocks, dropping trailing pixels
/// that do not fill a whole block.
inline std::vector<Block> split_blocks(const HsvImage& image,
                                       std::size_t block_h = kDefaultBlockSize,
                                       std::size_t block_w = kDefaultBlockSize) {
  if (block_h == 0 || block_w == 0) throw DomainError("block size must be positive");
  if (block_h * block_w < 2) {
    throw DomainError("blocks need at least two pixels");
  }
  if (image.height < block_h || image.width < block_w) {
    throw DomainError("image is smaller than one block");
  }
  const std::size_t rows = image.height / block_h;
  const std::size_t cols = image.width / block_w;
  const QuantizedHsv planes = quantize_hsv(image);

  std::vector<Block> blocks;
  blocks.reserve(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      blocks.push_back(
          {r, c,
           extract_features(planes, c * block_w, r * block_h, block_w, block_h)});
    }
  }
  return blocks;
}

struct KMeansResult {
  std::vector<FeatureVector> centroids;
  std::vector<std::uint32_t> labels;        // one per point
  std::vector<std::uint32_t> member_counts;  // one per centroid
  std::vector<double> objective_trace;       // SSE after each assignment step
  std::size_t iterations = 0;
};

namespace detail {

inline double squared_distance(const FeatureVector& a, const FeatureVector& b) {
  double sum = 0.0;
  for (std::size_t j = 0; j < kFeatureDim; ++j) {
    const double d = a[j] - b[j];
    sum += d * d;
  }
  return sum;
}

// k-means++ seeding. Stops early once every point coincides with a chosen
// centre, so m distinct points never produce more than m centres.
inline std::vector<FeatureVector> kmeanspp_seed(
    std::span<const FeatureVector> points, std::size_t k, Rng& rng) {
  std::vector<FeatureVector> centres;
  centres.push_back(points[rng.below(points.size())]);
  std::vector<double> nearest(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    nearest[i] = squared_distance(points[i], centres[0]);
  }
  while (centres.size() < k) {
    double total = 0.0;
    for (double d : nearest) total += d;
    if (total <= 0.0) break;
    const double target = rng.uniform() * total;
    double acc = 0.0;
    std::size_t pick = points.size();
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (nearest[i] <= 0.0) continue;
      acc += nearest[i];
      pick = i;
      if (acc > target) break;
    }
    centres.push_back(points[pick]);
    for (std::size_t i = 0; i < points.size(); ++i) {
      nearest[i] = std::min(nearest[i], squared_distance(points[i], centres.back()));
    }
  }
  return centres;
}

}  // namespace detail

/// Lloyd's algorithm with k-means++ seeding. Converges when no assignment
/// changes or after `max_iterations` assignment passes. Ties go to the lowest
/// centroid index; an empty cluster keeps its previous centroid.
inline KMeansResult lloyd_kmeans(std::span<const FeatureVector> points,
                                 std::size_t k, std::uint64_t seed,
                                 std::size_t max_iterations = kMaxLloydIterations) {
  if (points.empty()) throw DomainError("k-means needs at least one point");
  if (k == 0) throw DomainError("k must be positive");

  Rng rng(seed);
  KMeansResult result;
  result.centroids = detail::kmeanspp_seed(points, k, rng);
  const std::size_t centres = result.centroids.size();
  result.labels.assign(points.size(), std::numeric_limits<std::uint32_t>::max());

  for (std::size_t iter = 0; iter < max_iterations; ++iter) {
    bool changed = false;
    double objective = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      std::uint32_t best = 0;
      double best_d = detail::squared_distance(points[i], result.centroids[0]);
      for (std::uint32_t c = 1; c < centres; ++c) {
        const double d = detail::squared_distance(points[i], result.centroids[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      objective += best_d;
      if (result.labels[i] != best) {
        result.labels[i] = best;
        changed = true;
      }
    }
    result.objective_trace.push_back(objective);
    result.iterations = iter + 1;
    if (!changed) break;

    // Running means, so a cluster of identical points keeps exactly that point.
    std::vector<FeatureVector> means(centres, FeatureVector{});
    std::vector<std::uint32_t> counts(centres, 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto c = result.labels[i];
      const double n = ++counts[c];
      for (std::size_t j = 0; j < kFeatureDim; ++j) means[c][j] += (points[i][j] - means[c][j]) / n;
    }
    for (std::size_t c = 0; c < centres; ++c) {
      if (counts[c] > 0) result.centroids[c] = means[c];
    }
  }

  result.member_counts.assign(centres, 0);
  for (auto label : result.labels) ++result.member_counts[label];
  return result;
}

/// Clusters block descriptors into at most k segments. Empty clusters are
/// discarded; each segment is represented by its centroid.
inline SegmentSet kmeans_segment(std::span<const Block> blocks,
                                 std::size_t k = kDefaultClusters,
                                 std::uint64_t seed = 0,
                                 std::uint32_t image_id = 0) {
  if (blocks.empty()) throw DomainError("segmentation needs at least one block");
  std::vector<FeatureVector> points;
  points.reserve(blocks.size());
  for (const auto& b : blocks) points.push_back(b.features);

  const KMeansResult km = lloyd_kmeans(points, k, seed);
  SegmentSet set;
  set.image_id = image_id;
  for (std::size_t c = 0; c < km.centroids.size(); ++c) {
    if (km.member_counts[c] == 0) continue;
    set.segments.push_back(km.centroids[c]);
    set.member_counts.push_back(km.member_counts[c]);
  }
  return set;
}

}  // namespace segcbir
