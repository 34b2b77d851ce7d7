#include "fairsight/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>

#include "fairsight/error.hpp"
#include "fairsight/validate.hpp"

namespace fairsight {

Rng::Rng(std::uint64_t seed) : engine_(seed) {}

std::uint64_t Rng::next_u64() { return engine_(); }

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

int Rng::uniform_int(int lo, int hi) {
  const double span = static_cast<double>(hi) - static_cast<double>(lo) + 1.0;
  return lo + static_cast<int>(std::floor(uniform() * span));
}

double Rng::normal(double mean, double sd) {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return mean + sd * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

int Rng::poisson(double mean) {
  const double limit = std::exp(-mean);
  int k = 0;
  double p = uniform();
  while (p > limit) {
    ++k;
    p *= uniform();
  }
  return k;
}

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::ConfigError, "scenario." + what);
}

std::string make_id(char prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%c%06zu", prefix, i);
  return buf;
}

ClassificationRecord classification_record(const BiasScenario& s, Rng& rng, std::size_t i) {
  const int k = static_cast<int>(s.classes);
  const int group = rng.bernoulli(s.group1_fraction) ? 1 : 0;
  const int truth = rng.uniform_int(0, k - 1);

  int target = truth;
  if (!rng.bernoulli(s.base_accuracy)) {
    target = rng.uniform_int(0, k - 2);
    if (target >= truth) ++target;
  }
  const double margin = rng.normal(s.margin_mean, s.margin_sd);

  int label = truth;
  if (s.label_noise > 0.0 && rng.bernoulli(s.label_noise)) {
    label = rng.uniform_int(0, k - 2);
    if (label >= truth) ++label;
  }

  auto logits_for = [&](int g) {
    std::vector<double> logits(s.classes, 0.0);
    logits[0] = s.decision_bias;
    logits[static_cast<std::size_t>(target)] +=
        g == 1 ? margin * s.confidence_suppression : margin;
    return logits;
  };

  ClassificationRecord r;
  r.id = make_id('c', i);
  r.logits = logits_for(group);
  r.ref_label = static_cast<std::size_t>(label);
  r.protected_attr = group;
  r.counterfactual_logits = logits_for(1 - group);
  return r;
}

bool overlaps(const BoundingBox& a, const BoundingBox& b) {
  return a.x < b.x + b.w && b.x < a.x + a.w && a.y < b.y + b.h && b.y < a.y + a.h;
}

BoundingBox random_box(const BiasScenario& s, Rng& rng) {
  BoundingBox b;
  b.w = rng.uniform(s.box_min, s.box_max);
  b.h = rng.uniform(s.box_min, s.box_max);
  b.x = rng.uniform(0.0, s.image_size - b.w);
  b.y = rng.uniform(0.0, s.image_size - b.h);
  b.class_id = rng.uniform_int(0, s.num_box_classes - 1);
  return b;
}

double clipped_confidence(Rng& rng, double mean, double sd) {
  return std::clamp(rng.normal(mean, sd), 0.01, 1.0);
}

DetectionRecord detection_record(const BiasScenario& s, Rng& rng, std::size_t i) {
  DetectionRecord r;
  r.id = make_id('d', i);
  r.protected_attr = rng.bernoulli(s.group1_fraction) ? 1 : 0;
  r.image_w = s.image_size;
  r.image_h = s.image_size;

  const int wanted = rng.uniform_int(s.boxes_min, s.boxes_max);
  for (int tries = 0; static_cast<int>(r.ground_truth.size()) < wanted && tries < 100; ++tries) {
    const BoundingBox b = random_box(s, rng);
    if (std::none_of(r.ground_truth.begin(), r.ground_truth.end(),
                     [&](const BoundingBox& g) { return overlaps(b, g); })) {
      r.ground_truth.push_back(b);
    }
  }

  for (const auto& g : r.ground_truth) {
    if (!rng.bernoulli(s.detect_prob)) continue;
    BoundingBox p = g;
    p.x = g.x + rng.normal(0.0, s.position_jitter);
    p.y = g.y + rng.normal(0.0, s.position_jitter);
    p.w = g.w * std::exp(rng.normal(0.0, s.size_jitter));
    p.h = g.h * std::exp(rng.normal(0.0, s.size_jitter));
    double c = clipped_confidence(rng, s.tp_conf_mean, s.tp_conf_sd);
    if (r.protected_attr == 1) c *= s.confidence_suppression;
    p.confidence = c;
    r.predictions.push_back(p);
  }

  const int false_positives = rng.poisson(s.fp_rate);
  for (int j = 0; j < false_positives; ++j) {
    BoundingBox p = random_box(s, rng);
    p.confidence = clipped_confidence(rng, s.fp_conf_mean, s.fp_conf_sd);
    r.predictions.push_back(p);
  }
  return r;
}

}  // namespace

void validate(const BiasScenario& s) {
  require(s.group1_fraction > 0.0 && s.group1_fraction < 1.0, "group1_fraction must be in (0,1)");
  require(s.base_accuracy > 0.0 && s.base_accuracy < 1.0, "base_accuracy must be in (0,1)");
  require(s.confidence_suppression > 0.0 && s.confidence_suppression <= 1.0,
          "confidence_suppression must be in (0,1]");
  require(s.label_noise >= 0.0 && s.label_noise < 1.0, "label_noise must be in [0,1)");
  require(s.classes >= 2, "classes must be at least 2");
  require(std::isfinite(s.margin_mean) && s.margin_sd >= 0.0, "margin_sd must be >= 0");
  require(std::isfinite(s.decision_bias), "decision_bias must be finite");
  require(s.boxes_min >= 0 && s.boxes_min <= s.boxes_max, "boxes_min..boxes_max is empty");
  require(s.image_size >= 1, "image_size must be positive");
  require(s.box_min > 0.0 && s.box_min <= s.box_max && s.box_max <= s.image_size,
          "box size range must satisfy 0 < box_min <= box_max <= image_size");
  require(s.detect_prob >= 0.0 && s.detect_prob <= 1.0, "detect_prob must be in [0,1]");
  require(s.position_jitter >= 0.0 && s.size_jitter >= 0.0, "jitter must be >= 0");
  require(s.tp_conf_sd >= 0.0 && s.fp_conf_sd >= 0.0, "confidence sd must be >= 0");
  require(s.fp_rate >= 0.0 && s.fp_rate <= 50.0, "fp_rate must be in [0,50]");
  require(s.num_box_classes >= 1, "num_box_classes must be at least 1");
}

std::vector<Record> generate(const BiasScenario& s) {
  validate(s);
  Rng rng(s.seed);
  std::vector<Record> out;
  out.reserve(s.n_records);
  for (std::size_t i = 0; i < s.n_records; ++i) {
    if (s.task == Task::classification) {
      out.emplace_back(validate(classification_record(s, rng, i)));
    } else {
      out.emplace_back(validate(detection_record(s, rng, i)));
    }
  }
  return out;
}

}  // namespace fairsight
