#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <sstream>

#include "segcbir/evaluation.hpp"

namespace {

using namespace segcbir;

TEST(Metrics, WorkedExamples) {
  EXPECT_DOUBLE_EQ(recall_pct(19, 200), 9.5);
  EXPECT_NEAR(false_discovery_pct(7, 12), 58.33, 0.005);
  EXPECT_DOUBLE_EQ(retrieval_efficiency_pct(17, 20), 85.0);
  EXPECT_DOUBLE_EQ(retrieval_efficiency_pct(25, 20), 100.0);
  EXPECT_DOUBLE_EQ(precision_pct(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(false_discovery_pct(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(recall_pct(3, 0), 0.0);
}

TEST(Metrics, FalseDiscoveryIsComplementOfPrecision) {
  for (std::size_t shown = 1; shown < 60; ++shown) {
    for (std::size_t rel = 0; rel <= shown; ++rel) {
      EXPECT_NEAR(false_discovery_pct(shown - rel, shown), 100.0 - precision_pct(rel, shown),
                  1e-9);
    }
  }
}

Transcript two_page_transcript() {
  Transcript t;
  t.query = 0;
  TranscriptEntry a;
  a.page.images = {0, 1, 2, 3};
  a.page.iteration = 1;
  a.marks = {{0, false}, {1, true}, {2, false}, {3, false}};
  TranscriptEntry b;
  b.page.images = {4, 5};
  b.page.iteration = 2;
  b.marks = {{4, true}, {5, true}};
  t.entries = {a, b};
  t.status = SessionStatus::Exhausted;
  return t;
}

TEST(SessionMetrics, CumulativeAndCountsQueryAsRelevant) {
  const auto ms = session_metrics(two_page_transcript(), 10, 4);
  ASSERT_EQ(ms.size(), 2u);
  EXPECT_EQ(ms[0].shown, 4u);
  EXPECT_EQ(ms[0].relevant, 2u);
  EXPECT_DOUBLE_EQ(ms[0].re, 50.0);
  EXPECT_DOUBLE_EQ(ms[0].fd, 50.0);
  EXPECT_EQ(ms[1].shown, 6u);
  EXPECT_EQ(ms[1].relevant, 4u);
  EXPECT_DOUBLE_EQ(ms[1].recall, 40.0);
  EXPECT_DOUBLE_EQ(ms[1].re, 100.0);
}

TEST(SessionMetrics, CarriesForwardAndSkipsUnmarkedPages) {
  auto t = two_page_transcript();
  TranscriptEntry pending;
  pending.page.images = {6};
  pending.page.iteration = 3;
  t.entries.push_back(pending);
  const auto ms = session_metrics(t, 10, 4, 5);
  ASSERT_EQ(ms.size(), 5u);
  for (std::size_t k = 2; k < 5; ++k) {
    EXPECT_EQ(ms[k].iteration, k + 1);
    EXPECT_EQ(ms[k].shown, 6u);
    EXPECT_EQ(ms[k].relevant, 4u);
  }
}

TEST(SessionMetrics, TwoSlotPageFillsBoth) {
  Transcript t;
  TranscriptEntry a;
  a.page.images = {0, 1};
  a.page.slots = 2;
  a.marks = {{0, true}, {1, false}};
  t.entries = {a};
  const auto ms = session_metrics(t, 5, 2);
  ASSERT_EQ(ms.size(), 2u);
  EXPECT_EQ(ms[0].iteration, 1u);
  EXPECT_EQ(ms[1].iteration, 2u);
  EXPECT_EQ(ms[1].shown, 2u);
}

TEST(QuerySelection, Parse) {
  EXPECT_EQ(QuerySelection::parse("all").sample, 0u);
  EXPECT_EQ(QuerySelection::parse("sample:200").sample, 200u);
  for (const char* bad : {"", "sample:", "sample:0", "sample:-3", "sample:12x", "some"}) {
    EXPECT_THROW(QuerySelection::parse(bad), DomainError) << bad;
  }
}

TEST(QuerySelection, StratifiedAndDeterministic) {
  std::vector<std::uint32_t> labels;
  for (std::uint32_t c = 0; c < 10; ++c) labels.insert(labels.end(), 50, c);
  const Oracle oracle(labels);
  const auto a = select_queries(oracle, {200}, 7);
  EXPECT_EQ(a, select_queries(oracle, {200}, 7));
  EXPECT_NE(a, select_queries(oracle, {200}, 8));
  ASSERT_EQ(a.size(), 200u);
  EXPECT_TRUE(std::is_sorted(a.begin(), a.end()));
  std::map<std::uint32_t, int> per;
  for (ImageId id : a) ++per[oracle.category(id)];
  for (const auto& [c, n] : per) EXPECT_EQ(n, 20);
  EXPECT_EQ(select_queries(oracle, {}, 1).size(), 500u);
}

TEST(QuerySelection, SmallCategoriesAreExhaustedThenOthersFill) {
  std::vector<std::uint32_t> labels{0, 0, 1, 1, 1, 1, 1, 1, 1, 1};
  const Oracle oracle(labels);
  const auto picked = select_queries(oracle, {6}, 3);
  ASSERT_EQ(picked.size(), 6u);
  EXPECT_EQ(std::count_if(picked.begin(), picked.end(), [&](ImageId id) { return id < 2; }), 2);
}

TEST(Experiment, AveragesAndWritesRecords) {
  std::vector<FeatureVector> g;
  std::vector<SegmentSet> s;
  std::vector<std::uint32_t> c;
  Rng rng(11);
  for (ImageId i = 0; i < 120; ++i) {
    c.push_back(i % 3);
    FeatureVector f;
    for (auto& x : f) x = std::clamp(c.back() / 3.0 + rng.uniform(0.0, 0.4), 0.0, 1.0);
    g.push_back(f);
    SegmentSet seg;
    seg.image_id = i;
    seg.segments = {f};
    seg.member_counts = {1};
    s.push_back(seg);
  }
  const SearchIndex search(g, s, c);
  const auto oracle = Oracle::from_search(search);
  SessionConfig config;
  config.scope = 10;
  const auto queries = select_queries(oracle, {12}, 1);
  const auto report = run_experiment(search, oracle, config,
                                     {{Scheme::Wos, Reweighting::Rw},
                                      {Scheme::WsComb, Reweighting::RwIbcd}},
                                     queries, 1);
  ASSERT_EQ(report.arms.size(), 2u);
  for (const auto& arm : report.arms) {
    ASSERT_EQ(arm.re.size(), 7u);
    for (std::size_t k = 1; k < 7; ++k) EXPECT_GE(arm.re[k], arm.re[k - 1]);
    for (std::size_t k = 0; k < 7; ++k) {
      EXPECT_NEAR(arm.fd[k] + arm.precision[k], 100.0, 1e-9);
    }
  }
  EXPECT_EQ(report.records.size(), 2u * 12u * 7u);
  EXPECT_EQ(report.arm(Scheme::WsComb, Reweighting::RwIbcd)->queries, 12u);
  EXPECT_EQ(report.arm(Scheme::WsUnion, Reweighting::Rw), nullptr);

  std::ostringstream out;
  write_records(out, report);
  std::istringstream in(out.str());
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_TRUE(j.contains("re"));
    EXPECT_TRUE(j.contains("fd"));
    ++n;
  }
  EXPECT_EQ(n, report.records.size());
  EXPECT_NE(render_summary(report, "toy").find("ws-comb"), std::string::npos);

  // Identical reports for one and several workers.
  const auto again = run_experiment(search, oracle, config,
                                    {{Scheme::Wos, Reweighting::Rw},
                                     {Scheme::WsComb, Reweighting::RwIbcd}},
                                    queries, 3);
  EXPECT_EQ(again.arms[1].re, report.arms[1].re);
}

TEST(Experiment, RejectsNoArms) {
  const SearchIndex search({FeatureVector{}}, {SegmentSet{}}, {0});
  EXPECT_THROW(run_experiment(search, Oracle::from_search(search), SessionConfig{}, {}, {0}),
               DomainError);
}

}  // namespace
