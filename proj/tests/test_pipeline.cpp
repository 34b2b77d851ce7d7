#include <doctest.h>

#include <cmath>

#include "fairsight/error.hpp"
#include "fairsight/pipeline.hpp"

using namespace fairsight;

namespace {

std::vector<Record> synth(Task task, std::uint64_t seed, std::size_t n, double suppression) {
  BiasScenario s;
  s.task = task;
  s.seed = seed;
  s.n_records = n;
  s.confidence_suppression = suppression;
  return generate(s);
}

struct Run {
  CalibrationReport calibration;
  ApplyResult applied;
  Evaluation evaluation;
};

Run run(const std::vector<Record>& cal, const std::vector<Record>& test, const HyperParams& p) {
  Run out;
  out.calibration = calibrate(cal, p);
  out.applied = apply_records(out.calibration.artifact, test);
  out.evaluation = evaluate_pair(test, repaired_records(test, out.applied.outcomes), p);
  return out;
}

HyperParams classification_params() {
  HyperParams p;
  p.alpha = 0.2;
  p.lambda = 0.7;
  return p;
}

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("unbiased data: repair barely moves parity") {
    const auto cal = synth(Task::classification, 31, 5000, 1.0);
    const auto test = synth(Task::classification, test_seed(31), 5000, 1.0);
    const auto r = run(cal, test, classification_params());
    const double change =
        r.evaluation.classification_after->dpd - r.evaluation.classification_before->dpd;
    CHECK(std::abs(change) < 0.02);
  }

  TEST_CASE("biased data: repair lowers parity difference") {
    const auto cal = synth(Task::classification, 32, 5000, 0.8);
    const auto test = synth(Task::classification, test_seed(32), 5000, 0.8);
    const auto r = run(cal, test, classification_params());
    CHECK(r.evaluation.classification_after->dpd < r.evaluation.classification_before->dpd);
    CHECK(r.evaluation.classification_after->n_evaluated == 5000);
  }

  TEST_CASE("in-sample violation rate stays within the budget") {
    for (double alpha : {0.05, 0.1, 0.2}) {
      auto p = classification_params();
      p.alpha = alpha;
      const auto cal = synth(Task::classification, 33, 999, 0.8);
      const auto cal_report = calibrate(cal, p);
      const auto applied = apply_records(cal_report.artifact, cal);
      const double rate = static_cast<double>(applied.violations) / cal.size();
      CHECK(rate <= alpha + 1.0 / (cal.size() + 1.0));
    }
  }

  TEST_CASE("adaptive detection run never raises the threshold") {
    HyperParams p;
    p.alpha = 0.3;
    p.adaptive_enabled = true;
    const auto cal = synth(Task::detection, 34, 600, 0.8);
    const auto test = synth(Task::detection, test_seed(34), 600, 0.8);
    const auto cal_report = calibrate(cal, p);
    const auto applied = apply_records(cal_report.artifact, test);
    CHECK(threshold_le(applied.final_q, cal_report.artifact.q_alpha));
    for (const auto& o : applied.outcomes) CHECK(threshold_le(o.threshold_after, o.threshold_before));
  }

  TEST_CASE("passthrough leaves outputs and metrics unchanged") {
    const auto cal = synth(Task::classification, 35, 400, 0.8);
    const auto cal_report = calibrate(cal, classification_params());
    const auto applied = apply_records(cal_report.artifact, cal, EngineMode::passthrough);
    CHECK(applied.violations == 0);
    const auto same = repaired_records(cal, applied.outcomes);
    CHECK(same == cal);
  }

  TEST_CASE("outcomes must line up with records") {
    const auto cal = synth(Task::classification, 36, 10, 0.8);
    const auto applied = apply_records(calibrate(cal, classification_params()).artifact, cal);
    auto fewer = applied.outcomes;
    fewer.pop_back();
    CHECK_THROWS_AS(repaired_records(cal, fewer), Error);
    auto renamed = applied.outcomes;
    renamed[3].id = "other";
    CHECK_THROWS_AS(repaired_records(cal, renamed), Error);
  }

  TEST_CASE("reports without counterfactuals leave the consistency cell empty") {
    auto cal = synth(Task::classification, 37, 300, 0.8);
    for (auto& r : cal) std::get<ClassificationRecord>(r).counterfactual_logits.reset();
    const auto r = run(cal, cal, classification_params());
    CHECK_FALSE(r.evaluation.classification_before->individual_consistency_rate.has_value());
    const auto json = report_json(r.evaluation);
    CHECK(json["before"]["individual_consistency_rate"].is_null());
    const auto csv = report_csv(r.evaluation);
    CHECK(csv.rfind("phase,", 0) == 0);
    CHECK(csv.find(",,") != std::string::npos);
  }

  TEST_CASE("a single-value sweep matches a plain run") {
    const auto cal = synth(Task::classification, 38, 1000, 0.8);
    const auto test = synth(Task::classification, test_seed(38), 1000, 0.8);
    const auto base = classification_params();
    const std::vector<double> values{0.7};
    const auto rows = run_sweep(cal, test, base, "lambda", values);
    REQUIRE(rows.size() == 1);
    const auto plain = run(cal, test, sweep_params(base, "lambda", 0.7));
    CHECK(rows[0].q_alpha == plain.calibration.artifact.q_alpha);
    CHECK(rows[0].evaluation.classification_after->dpd ==
          plain.evaluation.classification_after->dpd);
    CHECK(report_json(rows[0].evaluation) == report_json(plain.evaluation));
  }

  TEST_CASE("kappa sweep: parity difference does not grow with kappa") {
    const auto cal = synth(Task::classification, 39, 5000, 0.8);
    const auto test = synth(Task::classification, test_seed(39), 5000, 0.8);
    const std::vector<double> values{0.2, 0.5, 0.8};
    const auto rows = run_sweep(cal, test, classification_params(), "kappa", values);
    for (std::size_t i = 1; i < rows.size(); ++i) {
      CHECK(rows[i].evaluation.classification_after->dpd <=
            rows[i - 1].evaluation.classification_after->dpd + 1e-12);
    }
    const auto csv = sweep_csv("kappa", rows);
    CHECK(csv.rfind("kappa,q_alpha,violation_rate,", 0) == 0);
  }

  TEST_CASE("sweep axis and values are checked") {
    const auto cal = synth(Task::classification, 40, 50, 0.8);
    const std::vector<double> none;
    const std::vector<double> one{0.5};
    CHECK_THROWS_AS(run_sweep(cal, cal, classification_params(), "lambda", none), Error);
    CHECK_THROWS_AS(run_sweep(cal, cal, classification_params(), "alpha", one), Error);
  }
}
