#include <doctest.h>

#include <cmath>
#include <random>

#include "fairsight/error.hpp"
#include "fairsight/repair.hpp"
#include "fairsight/scoring.hpp"
#include "helpers.hpp"

using namespace fairsight;
using doctest::Approx;
using testing::box;
using testing::cls;
using testing::det;

namespace {

CalibrationArtifact classification_artifact(double q, bool adaptive = false) {
  CalibrationArtifact a;
  a.task = Task::classification;
  a.q_alpha = Threshold::finite(q);
  a.stats.mean_conf_g0 = 0.8;
  a.stats.mean_conf_g1 = 0.7;
  a.stats.count_g0 = a.stats.count_g1 = 10;
  a.params.lambda = 0.7;
  a.params.adaptive_enabled = adaptive;
  a.n = 20;
  return a;
}

CalibrationArtifact detection_artifact(double q, double region, int grid = 2) {
  CalibrationArtifact a;
  a.task = Task::detection;
  a.q_alpha = Threshold::finite(q);
  a.region_q = Grid<Threshold>(grid, Threshold::finite(region));
  a.stats.mean_conf_g0 = 0.8;
  a.stats.mean_conf_g1 = 0.7;
  a.stats.count_g0 = a.stats.count_g1 = 10;
  a.params.lambda = 0.7;
  a.params.grid = grid;
  a.eta_selected = 1.2;
  a.n = 20;
  return a;
}

}  // namespace

TEST_SUITE("repair") {
  TEST_CASE("logit correction") {
    CHECK(logit_correction(0.5, 0.5, 0.8, 0.15) == 0.0);
    CHECK(logit_correction(0.9, 0.5, 0.5, 0.15) == 0.15);
    CHECK(logit_correction(0.6, 0.5, 0.5, 0.15) == Approx(0.05).epsilon(1e-12));
  }

  TEST_CASE("classification repair touches only the reference logit") {
    HyperParams p;
    p.kappa = 0.5;
    p.delta_max = 0.15;
    const auto r = cls({0.3, -0.2, 1.0}, 1, 1);
    const auto out = repair_classification(r, 0.9, 0.5, p);
    CHECK(out[0] == r.logits[0]);
    CHECK(out[2] == r.logits[2]);
    CHECK(out[1] == r.logits[1] + 0.15);
    CHECK(repair_classification(r, 0.5, 0.5, p) == r.logits);
  }

  TEST_CASE("repair never lowers the true-class probability") {
    std::mt19937_64 gen(5);
    std::normal_distribution<double> logit(0.0, 2.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    HyperParams p;
    for (int i = 0; i < 1000; ++i) {
      const auto r = cls({logit(gen), logit(gen), logit(gen), logit(gen)}, i % 4, i % 2);
      const double q = unit(gen);
      const double score = q + unit(gen);
      auto repaired = r;
      repaired.logits = repair_classification(r, score, q, p);
      CHECK(true_class_confidence(repaired) >= true_class_confidence(r));
    }
  }

  TEST_CASE("detection repair scaling") {
    const auto r = det({box(5, 5, 10, 10, 0.6), box(60, 60, 10, 10, 0.9)}, {}, 1);
    CHECK(repair_detection(r, {}, 2, 1.0) == r.predictions);

    const auto all = repair_detection(r, {}, 2, 1.2);
    CHECK(*all[0].confidence == Approx(0.72).epsilon(1e-12));
    CHECK(*all[1].confidence == 1.0);
    CHECK(all[0].x == r.predictions[0].x);

    // a violated cell limits scaling to its boxes
    const auto local = repair_detection(r, {{1, 1}}, 2, 1.2);
    CHECK(*local[0].confidence == 0.6);
    CHECK(*local[1].confidence == 1.0);

    // non-protected records pass through
    auto open = r;
    open.protected_attr = 0;
    CHECK(repair_detection(open, {}, 2, 1.2) == open.predictions);
  }

  TEST_CASE("adaptive update") {
    CHECK(adaptive_update(0.5, 0.7, 0.9) == 0.5);
    CHECK(adaptive_update(1.0, 0.5, 0.9) == Approx(0.95).epsilon(1e-15));
    CHECK(adaptive_update(Threshold::infinite(), 0.2, 0.9).is_infinite());

    double q = 1.0;
    const double s = 0.3, g = 0.9;
    for (int t = 1; t <= 200; ++t) {
      q = adaptive_update(q, s, g);
      CHECK(q == Approx(s + std::pow(g, t) * (1.0 - s)).epsilon(1e-12));
    }
  }

  TEST_CASE("engine accept branch passes output through") {
    OnlineEngine engine(classification_artifact(0.9));
    const auto r = cls({0.0, 4.0}, 1, 0);
    const auto out = engine.process(r);
    CHECK_FALSE(out.repaired);
    CHECK(out.repaired_output == out.original_output);
    CHECK(out.threshold_after == out.threshold_before);
    CHECK(engine.violation_count() == 0);
    CHECK(engine.processed_count() == 1);
  }

  TEST_CASE("engine violation repairs a single coordinate") {
    OnlineEngine engine(classification_artifact(0.2));
    const auto r = cls({2.0, 0.0, 0.5}, 1, 1);
    const auto out = engine.process(r);
    REQUIRE(out.repaired);
    const auto& before = std::get<std::vector<double>>(out.original_output);
    const auto& after = std::get<std::vector<double>>(out.repaired_output);
    int changed = 0;
    for (std::size_t i = 0; i < before.size(); ++i) changed += before[i] != after[i];
    CHECK(changed == 1);
    CHECK(after[1] - before[1] > 0.0);
    CHECK(after[1] - before[1] <= 0.15 + 1e-15);
    CHECK(engine.violation_count() == 1);
  }

  TEST_CASE("task mismatch") {
    OnlineEngine engine(classification_artifact(0.5));
    CHECK_THROWS_AS(engine.process(Record(det({}, {}, 0))), Error);
  }

  TEST_CASE("passthrough mode neither scores nor repairs") {
    OnlineEngine engine(classification_artifact(0.0), EngineMode::passthrough);
    const auto out = engine.process(Record(cls({3.0, 0.0}, 1, 1)));
    CHECK_FALSE(out.score.has_value());
    CHECK_FALSE(out.repaired);
    CHECK(out.repaired_output == out.original_output);
  }

  TEST_CASE("all-violating stream with adaptive on: threshold never rises") {
    OnlineEngine engine(detection_artifact(0.95, 0.01));
    auto a = engine.artifact();
    a.params.adaptive_enabled = true;
    OnlineEngine adaptive(a);
    std::mt19937_64 gen(8);
    std::uniform_real_distribution<double> conf(0.05, 0.95);
    Threshold prev = adaptive.current_q();
    for (int i = 0; i < 100; ++i) {
      const auto r = det({box(31, 30, 10, 10, conf(gen))}, {box(30, 30, 10, 10)}, i % 2);
      const auto out = adaptive.process(r);
      CHECK(out.repaired);
      CHECK(threshold_le(out.threshold_after, out.threshold_before));
      CHECK(threshold_le(adaptive.current_q(), a.q_alpha));
      CHECK(threshold_le(adaptive.current_q(), prev));
      prev = adaptive.current_q();
    }
    CHECK(adaptive.current_q().value() < 0.95);
  }

  TEST_CASE("fixed point: scores at or above q leave it unchanged") {
    OnlineEngine engine(classification_artifact(0.1, true));
    for (int i = 0; i < 50; ++i) {
      engine.process(Record(cls({3.0, 0.0}, 1, i % 2)));  // error ~0.95
    }
    CHECK(engine.violation_count() == 50);
    CHECK(engine.current_q() == Threshold::finite(0.1));
  }

  TEST_CASE("detection outcome invariants") {
    OnlineEngine engine(detection_artifact(0.5, 0.3));
    const auto r = det({box(5, 5, 10, 10, 0.4), box(60, 60, 10, 10, 0.9)},
                       {box(5, 5, 10, 10), box(60, 60, 10, 10)}, 1);
    const auto out = engine.process(Record(r));
    const auto regional = regional_scores(r, engine.artifact().stats, engine.artifact().params);
    bool any_region = false;
    for (int row = 0; row < 2; ++row) {
      for (int col = 0; col < 2; ++col) {
        any_region |= regional.nonempty.at(row, col) && regional.score.at(row, col) > 0.3;
      }
    }
    CHECK(out.repaired == (*out.score > 0.5 || any_region));
    REQUIRE(out.violated_regions.has_value());
    const auto& before = std::get<std::vector<BoundingBox>>(out.original_output);
    const auto& after = std::get<std::vector<BoundingBox>>(out.repaired_output);
    for (std::size_t i = 0; i < before.size(); ++i) {
      auto a = after[i], b = before[i];
      a.confidence = b.confidence = 0.0;
      CHECK(a == b);  // geometry and class untouched
    }
  }
}

TEST_SUITE("repair") {
  TEST_CASE("adaptive update is exactly the identity when the score is not below q") {
    std::mt19937_64 gen(13);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int i = 0; i < 10000; ++i) {
      const double q = unit(gen), g = unit(gen);
      CHECK(adaptive_update(q, q + unit(gen), g) == q);
      CHECK(adaptive_update(q, q * unit(gen), g) <= q);
    }
  }
}
