#pragma once

// Independent reference implementations used by the unit tests and the
// acceptance gate. They favour the most literal formulation over speed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <tuple>
#include <vector>

#include "segcbir/color_features.hpp"
#include "segcbir/random.hpp"
#include "segcbir/relevance_feedback.hpp"
#include "segcbir/similarity.hpp"

namespace segcbir::test_support {

using Matrix = std::vector<std::vector<double>>;

// Walks every ordered 4-neighbour pair; each unordered pair shows up twice,
// so the counts are halved.
inline std::vector<double> oracle_ccm(const QuantizedPlane& p) {
  const std::size_t L = p.levels;
  std::vector<double> ordered(L * L, 0.0);
  const int dx[4] = {1, -1, 0, 0};
  const int dy[4] = {0, 0, 1, -1};
  for (std::size_t r = 0; r < p.height; ++r) {
    for (std::size_t c = 0; c < p.width; ++c) {
      for (int d = 0; d < 4; ++d) {
        const long rr = static_cast<long>(r) + dy[d];
        const long cc = static_cast<long>(c) + dx[d];
        if (rr < 0 || cc < 0 || rr >= static_cast<long>(p.height) ||
            cc >= static_cast<long>(p.width)) {
          continue;
        }
        ordered[p.at(r, c) * L + p.at(rr, cc)] += 1.0;
      }
    }
  }
  double total = 0.0;
  for (double x : ordered) total += x;
  total /= 2.0;
  std::vector<double> out(L * L);
  for (std::size_t i = 0; i < L; ++i) {
    for (std::size_t j = 0; j < L; ++j) {
      const double unordered = i == j ? ordered[i * L + j] / 2.0 : ordered[i * L + j];
      out[i * L + j] = unordered / total;
    }
  }
  return out;
}

/// At most 6x6 with at most 4 levels, and always at least two cells.
inline QuantizedPlane random_plane(Rng& rng) {
  const std::size_t w = 1 + rng.below(6);
  const std::size_t h = (w == 1 ? 2 : 1) + rng.below(w == 1 ? 5 : 6);
  const std::size_t L = 1 + rng.below(4);
  std::vector<std::uint8_t> cells(w * h);
  for (auto& c : cells) c = static_cast<std::uint8_t>(rng.below(L));
  return QuantizedPlane{w, h, L, std::move(cells)};
}

// Physically erases the chosen row and column each step and keeps track of
// the original indices.
inline GreedyMatchResult oracle_greedy(Matrix m, std::size_t r) {
  std::vector<std::size_t> rows(m.size()), cols(m[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  for (std::size_t j = 0; j < cols.size(); ++j) cols[j] = j;
  GreedyMatchResult out;
  for (std::size_t step = 0; step < r; ++step) {
    std::tuple<double, std::size_t, std::size_t> best{1e300, 0, 0};
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < m.size(); ++i) {
      for (std::size_t j = 0; j < m[i].size(); ++j) {
        const auto cand = std::make_tuple(m[i][j], rows[i], cols[j]);
        if (cand < best) {
          best = cand;
          bi = i;
          bj = j;
        }
      }
    }
    out.d.push_back(std::get<0>(best));
    out.pairs.emplace_back(std::get<1>(best), std::get<2>(best));
    m.erase(m.begin() + static_cast<long>(bi));
    for (auto& row : m) row.erase(row.begin() + static_cast<long>(bj));
    rows.erase(rows.begin() + static_cast<long>(bi));
    cols.erase(cols.begin() + static_cast<long>(bj));
  }
  return out;
}

inline double oracle_l2(const FeatureVector& a, const FeatureVector& b,
                        const std::vector<double>& w) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += w[j] * (a[j] - b[j]) * (a[j] - b[j]);
  return std::sqrt(s);
}

inline double oracle_l2(const FeatureVector& a, const FeatureVector& b, const WeightVector& w) {
  return oracle_l2(a, b, std::vector<double>(w.values().begin(), w.values().end()));
}

// Rank = (#strictly smaller) + (#equal + 1) / 2.
inline std::vector<double> oracle_ranks(const std::vector<double>& v) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::size_t less = 0, equal = 0;
    for (double x : v) {
      less += x < v[i];
      equal += x == v[i];
    }
    out[i] = static_cast<double>(less) + (static_cast<double>(equal) + 1.0) / 2.0;
  }
  return out;
}

inline std::vector<double> oracle_dseg(const SegmentSet& q, const std::vector<SegmentSet>& db,
                                       const std::vector<double>& w, std::size_t r_max) {
  std::size_t r = q.size();
  for (const auto& s : db) r = std::min(r, s.size());
  r = std::min(r, r_max);
  std::vector<std::vector<double>> level(r, std::vector<double>(db.size()));
  for (std::size_t j = 0; j < db.size(); ++j) {
    Matrix m(q.size(), std::vector<double>(db[j].size()));
    for (std::size_t a = 0; a < q.size(); ++a) {
      for (std::size_t b = 0; b < db[j].size(); ++b) {
        m[a][b] = oracle_l2(q.segments[a], db[j].segments[b], w);
      }
    }
    const auto g = oracle_greedy(m, r);
    for (std::size_t i = 0; i < r; ++i) level[i][j] = g.d[i];
  }
  std::vector<double> score(db.size(), 0.0);
  for (const auto& l : level) {
    const auto ranks = oracle_ranks(l);
    for (std::size_t j = 0; j < db.size(); ++j) score[j] += ranks[j];
  }
  return score;
}

/// Coarse vectors take values in {0, 0.5, 1} and produce many ties.
inline SegmentSet random_set(Rng& rng, std::size_t max_segments, bool coarse) {
  SegmentSet s;
  const std::size_t n = 1 + rng.below(max_segments);
  for (std::size_t i = 0; i < n; ++i) {
    FeatureVector f{};
    for (auto& x : f) x = coarse ? 0.5 * static_cast<double>(rng.below(3)) : rng.uniform();
    s.segments.push_back(f);
    s.member_counts.push_back(1);
  }
  return s;
}

// Direct cluster-density score for one candidate.
inline double oracle_ibcd(const FeatureVector& x, const RfState& st,
                          const std::vector<FeatureVector>& t) {
  double dr = oracle_l2(x, st.query, st.weights);
  double dc = 0.0;
  for (ImageId id : st.relevant) {
    dr = std::min(dr, oracle_l2(x, t[id], st.weights));
    dc += oracle_l2(x, t[id], st.weights);
  }
  dc = st.relevant.empty() ? 0.0 : dc / static_cast<double>(st.relevant.size());
  double dn = st.nonrelevant.empty() ? 1.0 : 1e300;
  for (ImageId id : st.nonrelevant) dn = std::min(dn, oracle_l2(x, t[id], st.weights));
  if (dn == 0.0) return dr == 0.0 ? 1.0 : 0.0;
  return 1.0 / (1.0 + dc * dr / dn);
}

}  // namespace segcbir::test_support
