#include <doctest.h>

#include <cmath>

#include "paper_tables.hpp"
#include "test_util.hpp"
#include "wasr/metrics.hpp"

using namespace wasr;

namespace {

Polyline flat_edge(int width, double row) { return {{0.0, row}, {width - 1.0, row}}; }

std::vector<Box> random_boxes(Rng& rng, int n) {
  std::vector<Box> out;
  for (int i = 0; i < n; ++i) {
    const int x1 = static_cast<int>(rng.uniform(0, 40)), y1 = static_cast<int>(rng.uniform(0, 30));
    out.push_back({x1, y1, x1 + static_cast<int>(rng.uniform(1, 12)), y1 + static_cast<int>(rng.uniform(1, 12))});
  }
  return out;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("edge error examples") {
  const Polyline gt = flat_edge(8, 10.0);
  CHECK(*edge_error(WaterEdge(8, 10), gt) == 0.0);
  CHECK(*edge_error(WaterEdge(8, 12), gt) == doctest::Approx(2.0));
  WaterEdge half(8, 10);
  for (int c = 0; c < 4; ++c) half[static_cast<std::size_t>(c)] = 13;
  CHECK(*edge_error(half, gt) == doctest::Approx(std::sqrt(4.5)));
  CHECK(*edge_error(half, gt) == doctest::Approx(2.1213).epsilon(1e-4));
  CHECK_FALSE(edge_error(WaterEdge(8, kNoWater), gt).has_value());

  const auto rows = rasterize_edge({{1.0, 4.0}, {3.0, 8.0}}, 5);
  CHECK(std::isnan(rows[0]));
  CHECK(rows[1] == 4.0);
  CHECK(rows[2] == 6.0);
  CHECK(rows[3] == 8.0);
  CHECK(std::isnan(rows[4]));
  CHECK_THROWS(rasterize_edge({{3.0, 1.0}, {1.0, 1.0}}, 5));
}

TEST_CASE("box IoU and matching") {
  CHECK(box_iou({0, 0, 9, 9}, {0, 0, 9, 9}) == 1.0);
  CHECK(box_iou({0, 0, 9, 9}, {10, 0, 19, 9}) == 0.0);
  CHECK(box_iou({0, 0, 9, 9}, {5, 0, 14, 9}) == doctest::Approx(50.0 / 150.0));

  CHECK(match_detections({{0, 0, 9, 9}}, {{0, 0, 9, 9}}) == MatchCounts{1, 0, 0});
  CHECK(match_detections({{0, 0, 9, 9}}, {{7, 0, 16, 9}}) == MatchCounts{0, 1, 1});  // IoU 0.25
  CHECK(match_detections({{0, 0, 9, 9}}, {{5, 0, 14, 9}}) == MatchCounts{1, 0, 0});  // IoU 0.33
  CHECK(match_detections({}, {{0, 0, 1, 1}, {4, 4, 5, 5}}) == MatchCounts{0, 0, 2});
  CHECK(match_detections({{0, 0, 1, 1}}, {}) == MatchCounts{0, 1, 0});

  // One prediction covering two GT boxes matches at most one.
  CHECK(match_detections({{0, 0, 9, 9}, {0, 0, 9, 9}}, {{0, 0, 9, 9}}) == MatchCounts{1, 1, 0});
  // Greedy picks the highest IoU pair first.
  CHECK(match_detections({{0, 0, 9, 9}}, {{1, 0, 10, 9}, {0, 0, 9, 9}}) == MatchCounts{1, 0, 1});
}

TEST_CASE("F-measure reproduces the published tables") {
  for (const auto& row : test::kResultsTable) {
    const auto f = f_measure(row.tp, row.fp, row.fn);
    REQUIRE(f.has_value());
    CHECK_MESSAGE(std::abs(*f - row.f) <= 0.05, row.name);
  }
  for (const auto& row : test::kAblationTable) CHECK_MESSAGE(std::abs(*f_measure(row.tp, row.fp, row.fn) - row.f) <= 0.05, row.name);
  CHECK_FALSE(f_measure(0, 0, 0).has_value());
  CHECK(*f_measure(0, 0, 5) == 0.0);
  CHECK(*f_measure(3, 0, 0) == 100.0);
  CHECK_THROWS(f_measure(-1, 0, 0));
}

TEST_CASE("matching symmetry and count conservation") {
  Rng rng(8);
  for (int t = 0; t < 300; ++t) {
    const auto p = random_boxes(rng, static_cast<int>(rng.uniform(0, 6)));
    const auto g = random_boxes(rng, static_cast<int>(rng.uniform(0, 6)));
    const MatchCounts a = match_detections(p, g);
    const MatchCounts b = match_detections(g, p);
    CHECK(a.tp + a.fp == static_cast<std::int64_t>(p.size()));
    CHECK(a.tp + a.fn == static_cast<std::int64_t>(g.size()));
    CHECK(a.tp == b.tp);
    CHECK(a.fp == b.fn);
  }
}

TEST_CASE("evaluate aggregates per frame") {
  const FrameGT gt_a{{{0, 0, 9, 9}}, flat_edge(8, 10.0)};
  const FrameGT gt_b{{{20, 20, 29, 29}, {40, 5, 45, 9}}, flat_edge(8, 10.0)};
  FramePrediction pa{0, {{{0, 0, 9, 9}, 100}}, WaterEdge(8, 12)};
  FramePrediction pb{1, {{{0, 0, 3, 3}, 16}}, WaterEdge(8, 14)};
  const std::vector<FrameRecord> recs{{0, "s1", &pa, &gt_a}, {1, "s2", &pb, &gt_b}};
  const EvalReport r = evaluate(recs);
  CHECK(r.overall.frames == 2);
  CHECK(r.overall.counts == MatchCounts{1, 1, 2});
  CHECK(r.overall.mu_edg == doctest::Approx(3.0));
  CHECK(r.overall.std_edg == doctest::Approx(1.0));
  CHECK(*r.overall.f == doctest::Approx(40.0));
  REQUIRE(r.sequences.size() == 2);
  MatchCounts sum;
  for (const auto& [name, seq] : r.sequences) sum += seq.counts;
  CHECK(sum == r.overall.counts);

  const std::vector<FrameRecord> missing{{0, "s1", &pa, nullptr}};
  const EvalReport m = evaluate(missing);
  CHECK(m.missing_gt == 1);
  CHECK(m.overall.frames == 0);
  CHECK_FALSE(m.overall.f.has_value());
  CHECK_THROWS(evaluate({{0, "s1", nullptr, &gt_a}}));

  CHECK(report_json(r).find("\"f_measure\"") != std::string::npos);
  CHECK(report_table(r).find("40.0") != std::string::npos);
}

}  // TEST_SUITE("metrics")
