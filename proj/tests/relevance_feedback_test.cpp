#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "segcbir/random.hpp"
#include "segcbir/relevance_feedback.hpp"
#include "support/oracles.hpp"

namespace {

using namespace segcbir;
using namespace segcbir::test_support;

FeatureVector filled(double x) {
  FeatureVector f{};
  f.fill(x);
  return f;
}

FeatureVector random_vector(Rng& rng) {
  FeatureVector f{};
  for (auto& x : f) x = rng.uniform();
  return f;
}

std::vector<FeatureVector> random_table(Rng& rng, std::size_t n) {
  std::vector<FeatureVector> t(n);
  for (auto& f : t) f = random_vector(rng);
  return t;
}

RfState state_for(const std::vector<FeatureVector>& table, ImageId query) {
  RfState st;
  st.query_id = query;
  st.query = table[query];
  st.relevant = {query};
  return st;
}

TEST(Stats, DiscriminantRatioCases) {
  // Feature 0 of the relevant set spans [0.2, 0.4].
  std::vector<FeatureVector> t(7, filled(0.0));
  t[0][0] = 0.2;
  t[1][0] = 0.4;
  t[2][0] = 0.2;  // on the lower endpoint: inside
  t[3][0] = 0.4;  // on the upper endpoint: inside
  t[4][0] = 0.9;
  t[5][0] = 0.1;
  t[6][0] = 0.3;
  const std::vector<ImageId> rel = {0, 1};

  const std::vector<ImageId> all_in = {2, 3, 6};
  EXPECT_EQ(compute_stats(rel, all_in, t).delta[0], 0.0);
  const std::vector<ImageId> none_in = {4, 5};
  EXPECT_EQ(compute_stats(rel, none_in, t).delta[0], 1.0);
  const std::vector<ImageId> half = {2, 4, 5, 6};
  EXPECT_EQ(compute_stats(rel, half, t).delta[0], 0.5);
  const auto no_n = compute_stats(rel, std::vector<ImageId>{}, t);
  EXPECT_EQ(no_n.delta[0], 1.0);
  EXPECT_EQ(no_n.dominant_min[0], 0.2);
  EXPECT_EQ(no_n.dominant_max[0], 0.4);
  EXPECT_THROW(compute_stats(std::vector<ImageId>{}, half, t), DomainError);
}

TEST(Stats, PopulationStandardDeviations) {
  std::vector<FeatureVector> t(4, filled(0.0));
  t[0][3] = 1.0;
  t[1][3] = 3.0;
  t[2][3] = 5.0;
  t[3][3] = 7.0;
  const auto st = compute_stats(std::vector<ImageId>{0, 1}, std::vector<ImageId>{2, 3}, t);
  EXPECT_DOUBLE_EQ(st.sigma_rel[3], 1.0);
  EXPECT_DOUBLE_EQ(st.sigma_all[3], std::sqrt(5.0));
  EXPECT_EQ(st.sigma_rel[0], 0.0);
}

TEST(Stats, DeltaStaysInUnitIntervalAndFallsWithInsideCount) {
  Rng rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    const auto t = random_table(rng, 12);
    std::vector<ImageId> rel = {0, 1, 2}, non;
    for (ImageId i = 3; i < 3 + rng.below(9); ++i) non.push_back(i);
    const auto st = compute_stats(rel, non, t);
    for (std::size_t j = 0; j < kFeatureDim; ++j) {
      EXPECT_GE(st.delta[j], 0.0);
      EXPECT_LE(st.delta[j], 1.0);
      EXPECT_LE(st.dominant_min[j], st.dominant_max[j]);
    }
  }
  std::vector<FeatureVector> t(6, filled(0.0));
  t[1] = filled(1.0);
  for (ImageId i = 2; i < 6; ++i) t[i] = filled(2.0);
  double previous = 2.0;
  for (ImageId inside = 0; inside <= 4; ++inside) {
    if (inside > 0) t[1 + inside] = filled(0.5);
    const double d = compute_stats(std::vector<ImageId>{0, 1}, std::vector<ImageId>{2, 3, 4, 5}, t).delta[0];
    EXPECT_LT(d, previous);
    previous = d;
  }
}

FeatureStats one_feature(double sd_all, double sd_rel, double delta) {
  FeatureStats st;
  st.sigma_all.fill(1.0);
  st.sigma_rel.fill(1.0);
  st.delta.fill(1.0);
  st.sigma_all[0] = sd_all;
  st.sigma_rel[0] = sd_rel;
  st.delta[0] = delta;
  return st;
}

TEST(Reweight, SigmaRatio) {
  EXPECT_NEAR(reweight(one_feature(0.7, 0.7, 0.3), ReweightScheme::SigmaRatio)[0], 1.0, 1e-12);
  EXPECT_NEAR(reweight(one_feature(1.0, 0.0, 0.3), ReweightScheme::SigmaRatio, Epsilon(1e-6))[0],
              1e6, 1e-12 * 1e6);
  EXPECT_EQ(reweight(one_feature(0.0, 0.0, 0.3), ReweightScheme::SigmaRatio)[0], 1.0);
  EXPECT_NEAR(reweight(one_feature(2.0, 0.5, 0.3), ReweightScheme::SigmaRatio)[0], 4.0, 1e-12);
}

TEST(Reweight, DeltaOverSigma) {
  EXPECT_NEAR(reweight(one_feature(2.0, 0.5, 0.5), ReweightScheme::DeltaOverSigma)[0], 1.0, 1e-12);
  EXPECT_NEAR(reweight(one_feature(2.0, 0.0, 0.5), ReweightScheme::DeltaOverSigma, Epsilon(1e-3))[0],
              500.0, 1e-12 * 500.0);
  EXPECT_EQ(reweight(one_feature(2.0, 0.5, 0.0), ReweightScheme::DeltaOverSigma)[0], 0.0);
}

TEST(Reweight, DeltaTimesRatio) {
  EXPECT_NEAR(reweight(one_feature(2.0, 0.5, 0.5), ReweightScheme::DeltaTimesRatio)[0], 2.0, 1e-12);
  EXPECT_NEAR(reweight(one_feature(2.0, 0.5, 1.0), ReweightScheme::DeltaTimesRatio)[0], 4.0, 1e-12);
  EXPECT_EQ(reweight(one_feature(2.0, 0.5, 0.0), ReweightScheme::DeltaTimesRatio)[0], 0.0);
  EXPECT_NEAR(reweight(one_feature(0.5, 0.0, 1.0), ReweightScheme::DeltaTimesRatio, Epsilon(1e-6))[0],
              5e5, 1e-12 * 5e5);
}

TEST(Reweight, AllZeroFallsBackToUniform) {
  FeatureStats st;  // every sigma and delta is zero
  EXPECT_EQ(reweight(st, ReweightScheme::DeltaTimesRatio), WeightVector::uniform());
  EXPECT_THROW(Epsilon(0.0), DomainError);
}

TEST(Distances, HandExamples) {
  // Two active coordinates with unit weights give plain 2-d distances.
  std::vector<double> w(kFeatureDim, 0.0);
  w[0] = w[1] = 1.0;
  auto at = [](double x, double y) {
    FeatureVector f{};
    f[0] = x;
    f[1] = y;
    return f;
  };
  const std::vector<FeatureVector> t = {at(0, 0), at(3, 4), at(0, 2), at(0, 4), at(3, 0), at(0, 8)};
  RfState st;
  st.query_id = 0;
  st.query = t[0];
  st.weights = WeightVector(w);
  const FeatureVector cand = at(3, 4);
  EXPECT_DOUBLE_EQ(d_R(cand, st, t), 5.0);
  st.relevant = {4};
  EXPECT_DOUBLE_EQ(d_R(cand, st, t), 4.0);
  EXPECT_DOUBLE_EQ(d_R(t[0], st, t), 0.0);

  EXPECT_EQ(d_N(cand, st, t), 1.0);
  st.nonrelevant = {3, 5};  // distances 3 and 5
  EXPECT_DOUBLE_EQ(d_N(cand, st, t), 3.0);
  EXPECT_EQ(d_N(t[3], st, t), 0.0);

  RfState empty;
  EXPECT_EQ(d_C(cand, empty, t), 0.0);
  st.relevant = {2, 3};  // from (0,0): 2 and 4
  EXPECT_DOUBLE_EQ(d_C(t[0], st, t), 3.0);
  st.relevant = {1};
  EXPECT_EQ(d_C(t[1], st, t), 0.0);
}

TEST(Score, HandExamples) {
  EXPECT_DOUBLE_EQ(relevance_score(1.0, 1.0, 0.0, ScoreMode::Basic), 0.5);
  EXPECT_DOUBLE_EQ(relevance_score(1.0, 2.0, 2.0, ScoreMode::Ibcd), 0.5);
  EXPECT_EQ(relevance_score(0.0, 1.0, 0.0, ScoreMode::Ibcd), 1.0);
  EXPECT_EQ(relevance_score(0.3, 0.0, 0.5, ScoreMode::Ibcd), 0.0);
  EXPECT_EQ(relevance_score(0.0, 0.0, 0.5, ScoreMode::Basic), 1.0);
  EXPECT_DOUBLE_EQ(relevance_score(3.0, 0.0, 0.0, ScoreMode::QueryDistance), 0.25);

  Rng rng(32);
  const auto t = random_table(rng, 4);
  const auto st = state_for(t, 2);
  EXPECT_EQ(relevance_score(t[2], st, t, ScoreMode::Ibcd), 1.0);
}

TEST(Score, BoundedOnRandomStates) {
  Rng rng(33);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto t = random_table(rng, 10);
    RfState st = state_for(t, static_cast<ImageId>(rng.below(10)));
    for (ImageId i = 0; i < 10; ++i) {
      const auto u = rng.below(3);
      if (i == st.query_id || u == 0) continue;
      (u == 1 ? st.relevant : st.nonrelevant).insert(i);
    }
    std::vector<double> w(kFeatureDim);
    for (auto& x : w) x = rng.uniform(0.01, 5.0);
    st.weights = WeightVector(w);
    const auto cand = trial % 7 == 0 ? t[*st.nonrelevant.begin() % 10] : random_vector(rng);
    for (auto mode : {ScoreMode::Basic, ScoreMode::Ibcd, ScoreMode::QueryDistance}) {
      const double rs = relevance_score(cand, st, t, mode);
      ASSERT_GE(rs, 0.0);
      ASSERT_LE(rs, 1.0);
    }
  }
}

TEST(Rank, QueryOnlyStateOrdersByQueryDistance) {
  Rng rng(34);
  for (int trial = 0; trial < 20; ++trial) {
    const auto t = random_table(rng, 60);
    const auto st = state_for(t, static_cast<ImageId>(rng.below(60)));
    const auto ranked = rank_candidates(st, t, {}, ScoreMode::Ibcd);
    std::vector<std::pair<double, ImageId>> by_dr;
    for (ImageId i = 0; i < t.size(); ++i) by_dr.emplace_back(d_R(t[i], st, t), i);
    std::sort(by_dr.begin(), by_dr.end());
    ASSERT_EQ(ranked.size(), by_dr.size());
    for (std::size_t i = 0; i < ranked.size(); ++i) EXPECT_EQ(ranked[i].id, by_dr[i].second);
  }
}

TEST(Rank, MatchesBruteForceScores) {
  Rng rng(35);
  const auto t = random_table(rng, 5);
  RfState st = state_for(t, 0);
  st.relevant.insert(1);
  st.nonrelevant.insert(2);
  st.weights = reweight(compute_stats(st, t), ReweightScheme::DeltaTimesRatio);
  const auto ranked = rank_candidates(st, t, {0, 1, 2});
  ASSERT_EQ(ranked.size(), 2u);
  std::vector<std::pair<double, ImageId>> want = {{-oracle_ibcd(t[3], st, t), 3},
                                                  {-oracle_ibcd(t[4], st, t), 4}};
  std::sort(want.begin(), want.end());
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(ranked[i].id, want[i].second);
    EXPECT_NEAR(ranked[i].score, -want[i].first, 1e-12);
  }
  EXPECT_TRUE(rank_candidates(st, t, {0, 1, 2, 3, 4}).empty());
}

TEST(Rank, InvariantUnderWeightScaling) {
  Rng rng(36);
  for (int trial = 0; trial < 20; ++trial) {
    const auto t = random_table(rng, 40);
    RfState st = state_for(t, 0);
    for (ImageId i = 1; i < 6; ++i) st.relevant.insert(i);
    for (ImageId i = 6; i < 12; ++i) st.nonrelevant.insert(i);
    std::vector<double> w(kFeatureDim), w4(kFeatureDim);
    for (std::size_t j = 0; j < kFeatureDim; ++j) {
      w[j] = rng.uniform(0.1, 2.0);
      w4[j] = 4.0 * w[j];
    }
    st.weights = WeightVector(w);
    const auto a = rank_candidates(st, t, {});
    st.weights = WeightVector(w4);
    const auto b = rank_candidates(st, t, {});
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].id, b[i].id);
  }
}

TEST(Distances, MonotoneUnderSetGrowth) {
  Rng rng(37);
  for (int trial = 0; trial < 50; ++trial) {
    const auto t = random_table(rng, 10);
    RfState st = state_for(t, 0);
    const auto cand = random_vector(rng);
    for (ImageId i = 1; i < 5; ++i) {
      const double before_r = d_R(cand, st, t);
      st.relevant.insert(i);
      EXPECT_LE(d_R(cand, st, t), before_r);
    }
    double before_n = 1e300;
    for (ImageId i = 5; i < 10; ++i) {
      st.nonrelevant.insert(i);
      const double now = d_N(cand, st, t);
      EXPECT_LE(now, before_n);
      before_n = now;
    }
  }
}

TEST(Distances, MeanRelevantDistanceCanGrowWithTheSet) {
  // The cluster-density term is a mean, so a far new member raises it.
  std::vector<FeatureVector> t = {filled(0.0), filled(0.1), filled(1.0)};
  RfState st = state_for(t, 0);
  st.relevant = {1};
  const double before = d_C(t[1], st, t);
  st.relevant.insert(2);
  EXPECT_GT(d_C(t[1], st, t), before);
}

}  // namespace
