#include <doctest.h>

#include <cmath>
#include <random>

#include "fairsight/error.hpp"
#include "fairsight/scoring.hpp"
#include "helpers.hpp"

using namespace fairsight;
using doctest::Approx;
using testing::box;
using testing::cls;
using testing::det;

namespace {

GroupStats stats(double m0, double m1) {
  GroupStats s;
  s.mean_conf_g0 = m0;
  s.mean_conf_g1 = m1;
  s.count_g0 = s.count_g1 = 1;
  return s;
}

HyperParams with_lambda(double lambda, int grid = 4) {
  HyperParams p;
  p.lambda = lambda;
  p.grid = grid;
  return p;
}

}  // namespace

TEST_SUITE("scoring") {
  TEST_CASE("softmax") {
    const std::vector<double> half{0.0, 0.0};
    CHECK(softmax(half) == std::vector<double>{0.5, 0.5});

    const std::vector<double> big{1000.0, 0.0};
    const auto p = softmax(big);
    CHECK(std::isfinite(p[0]));
    CHECK(p[0] == Approx(1.0));
    CHECK(p[1] == Approx(0.0));

    // mpmath, 50 digits
    const std::vector<double> ramp{1.0, 2.0, 3.0};
    const auto q = softmax(ramp);
    CHECK(q[0] == Approx(0.090030573170380457998).epsilon(1e-12));
    CHECK(q[1] == Approx(0.24472847105479765247).epsilon(1e-12));
    CHECK(q[2] == Approx(0.66524095577482188953).epsilon(1e-12));
  }

  TEST_CASE("classification error") {
    CHECK(classification_error(cls({0, 0}, 0, 0)) == 0.5);
    CHECK(classification_error(cls({100, 0}, 0, 0)) == Approx(0.0));
    CHECK(classification_error(cls({1, 2, 3}, 2, 0)) ==
          Approx(0.33475904422517811047).epsilon(1e-12));
  }

  TEST_CASE("iou") {
    CHECK(iou(box(3, 4, 5, 6), box(3, 4, 5, 6)) == 1.0);
    CHECK(iou(box(0, 0, 1, 1), box(5, 5, 1, 1)) == 0.0);
    CHECK(iou(box(0, 0, 2, 2), box(1, 0, 2, 2)) == Approx(1.0 / 3.0).epsilon(1e-15));
  }

  TEST_CASE("greedy matching") {
    const std::vector<BoundingBox> truth{box(10, 10, 20, 20)};
    const std::vector<BoundingBox> atop{box(10, 10, 20, 20, 0.9)};
    auto m = match_boxes(atop, truth, 0.5);
    REQUIRE(m.pairs.size() == 1);
    CHECK(m.pairs[0].iou == 1.0);

    m = match_boxes({}, truth, 0.5);
    CHECK(m.pairs.empty());
    CHECK(m.unmatched_ground_truth == std::vector<std::size_t>{0});

    // Two overlapping predictions, canonical order: the more confident one wins
    // even though the second overlaps better.
    const std::vector<BoundingBox> two{box(12, 10, 20, 20, 0.9), box(10, 10, 20, 20, 0.6)};
    m = match_boxes(two, truth, 0.5);
    REQUIRE(m.pairs.size() == 1);
    CHECK(m.pairs[0].prediction == 0);
    CHECK(m.unmatched_predictions == std::vector<std::size_t>{1});

    // Class mismatch never matches.
    const std::vector<BoundingBox> other{box(10, 10, 20, 20, 0.9, 1)};
    CHECK(match_boxes(other, truth, 0.5).pairs.empty());

    // Equal IoU ties go to the lower ground-truth index.
    const std::vector<BoundingBox> twins{box(0, 0, 2, 2), box(0, 0, 2, 2)};
    const std::vector<BoundingBox> one{box(0, 0, 2, 2, 0.5)};
    CHECK(match_boxes(one, twins, 0.5).pairs[0].ground_truth == 0);
  }

  TEST_CASE("detection error") {
    CHECK(detection_error(det({box(0, 0, 10, 10, 0.9)}, {box(0, 0, 10, 10)}), 0.5) == 0.0);
    CHECK(detection_error(det({}, {box(0, 0, 10, 10), box(50, 50, 10, 10)}), 0.5) == 1.0);
    CHECK(detection_error(det({box(0, 0, 10, 10, 0.9)}, {}), 0.5) == 0.0);
    // one match at IoU 1/3 (threshold lowered to admit it) plus one miss
    const auto r = det({box(1, 0, 2, 2, 0.9)}, {box(0, 0, 2, 2), box(50, 50, 2, 2)});
    CHECK(detection_error(r, 0.3) == Approx(5.0 / 6.0).epsilon(1e-15));
  }

  TEST_CASE("classification penalty is a one-sided shortfall") {
    // logits [ln c, ln(1-c)] give true-class confidence c
    auto with_conf = [](double c, int group) {
      return cls({std::log(c), std::log(1.0 - c)}, 0, group);
    };
    CHECK(fairness_penalty_classification(with_conf(0.6, 1), stats(0.6, 0.2)) ==
          Approx(0.0).epsilon(1e-12));
    CHECK(fairness_penalty_classification(with_conf(0.6, 1), stats(0.9, 0.2)) ==
          Approx(0.3).epsilon(1e-12));
    CHECK(fairness_penalty_classification(with_conf(0.95, 1), stats(0.9, 0.2)) == 0.0);
    // group 0 is compared against group 1's mean
    CHECK(fairness_penalty_classification(with_conf(0.6, 0), stats(0.1, 0.9)) ==
          Approx(0.3).epsilon(1e-12));
  }

  TEST_CASE("detection penalty") {
    CHECK(fairness_penalty_detection(det({box(0, 0, 5, 5, 0.5)}, {}, 1), stats(0.5, 0.0)) == 0.0);
    CHECK(fairness_penalty_detection(det({box(0, 0, 5, 5, 0.4), box(9, 9, 5, 5, 0.6)}, {}, 1),
                                     stats(0.8, 0.0)) == Approx(0.3).epsilon(1e-12));
    CHECK(fairness_penalty_detection(det({}, {}, 1), stats(0.7, 0.0)) == 0.7);
  }

  TEST_CASE("undefined opposite mean") {
    GroupStats only0;
    only0.mean_conf_g0 = 0.8;
    only0.count_g0 = 3;
    CHECK_THROWS_AS(fairness_penalty_classification(cls({1, 0}, 0, 0), only0), Error);
    // lambda = 0 never consults the mean
    CHECK(nonconformity(cls({1, 0}, 0, 0), only0, with_lambda(0.0)).penalty == 0.0);
  }

  TEST_CASE("nonconformity decomposition") {
    const auto r = cls({std::log(0.8), std::log(0.2)}, 0, 1);  // error 0.2
    const auto s = stats(1.1, 0.0);                            // shortfall 0.3
    const auto b = nonconformity(r, s, with_lambda(0.7));
    CHECK(b.error == Approx(0.2).epsilon(1e-12));
    CHECK(b.penalty == Approx(0.3).epsilon(1e-12));
    CHECK(b.total == Approx(0.41).epsilon(1e-12));
    CHECK(b.total == b.error + 0.7 * b.penalty);

    CHECK(nonconformity(r, s, with_lambda(0.0)).total == b.error);

    const auto perfect = cls({800, 0}, 0, 0);
    CHECK(nonconformity(perfect, stats(0.0, 0.5), with_lambda(0.7)).total == 0.0);
  }

  TEST_CASE("score is non-negative and non-decreasing in lambda") {
    std::mt19937_64 gen(7);
    std::normal_distribution<double> logit(0.0, 2.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int i = 0; i < 500; ++i) {
      const auto r = cls({logit(gen), logit(gen), logit(gen)}, i % 3, i % 2);
      const auto s = stats(unit(gen), unit(gen));
      double prev = -1.0;
      for (double lambda : {0.0, 0.1, 0.3, 0.7, 1.1, 2.0}) {
        const auto b = nonconformity(r, s, with_lambda(lambda));
        CHECK(b.total >= 0.0);
        CHECK(b.total >= prev);
        prev = b.total;
      }
    }
  }

  TEST_CASE("regions by box centre") {
    CHECK(region_of(box(0, 0, 10, 10), 100, 100, 2) == RegionIndex{0, 0});
    CHECK(region_of(box(60, 10, 10, 10), 100, 100, 2) == RegionIndex{0, 1});
    CHECK(region_of(box(10, 60, 10, 10), 100, 100, 2) == RegionIndex{1, 0});
    CHECK(region_of(box(95, 95, 5, 5), 100, 100, 4) == RegionIndex{3, 3});
  }

  TEST_CASE("G=1 regional score is the whole-image score") {
    const auto r = det({box(0, 0, 10, 10, 0.6), box(40, 40, 20, 20, 0.3)},
                       {box(1, 1, 10, 10), box(70, 70, 10, 10)}, 1);
    const auto s = stats(0.8, 0.5);
    const auto p = with_lambda(0.7, 1);
    const auto regional = regional_scores(r, s, p);
    CHECK(regional.score.at(0, 0) == nonconformity(r, s, p).total);
    CHECK(record_score(r, s, p) == nonconformity(r, s, p).total);
  }

  TEST_CASE("boxes in one quadrant leave three empty cells at zero") {
    const auto r = det({box(5, 5, 10, 10, 0.3)}, {box(20, 20, 10, 10)}, 0);
    const auto regional = regional_scores(r, stats(0.5, 0.9), with_lambda(0.7, 2));
    CHECK(regional.score.at(0, 0) > 0.0);
    CHECK(regional.nonempty.at(0, 0));
    for (auto [row, col] : {std::pair{0, 1}, {1, 0}, {1, 1}}) {
      CHECK(regional.score.at(row, col) == 0.0);
      CHECK_FALSE(regional.nonempty.at(row, col));
    }
  }

  TEST_CASE("aggregation") {
    Grid<double> g(2, 0.0);
    g.at(0, 1) = 0.2;
    g.at(1, 0) = 0.5;
    CHECK(aggregate(g, RegionAggregation::max) == 0.5);
    CHECK(aggregate(g, RegionAggregation::sum) == Approx(0.7));
  }

  TEST_CASE("partition property: every box lands in exactly one cell") {
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> pos(0.0, 90.0);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<BoundingBox> preds;
      for (int i = 0; i < 8; ++i) preds.push_back(box(pos(gen), pos(gen), 10, 10, 0.5));
      for (int g : {1, 2, 3, 5}) {
        Grid<int> counts(g, 0);
        for (const auto& b : preds) ++counts.at(region_of(b, 100, 100, g));
        int total = 0;
        for (int c : counts.cells()) total += c;
        CHECK(total == 8);
      }
    }
  }
}
