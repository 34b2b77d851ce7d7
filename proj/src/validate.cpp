#include "fairsight/validate.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fairsight/error.hpp"

namespace fairsight {
namespace {

void require_finite(double v, const std::string& what) {
  if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteValue, what + " is not finite");
}

void require_protected(int a, const std::string& id) {
  if (a != 0 && a != 1) {
    throw Error(ErrorCode::InvalidProtectedAttribute,
                "record '" + id + "': protected must be 0 or 1, got " + std::to_string(a));
  }
}

bool in_range(double lo, double v, double hi) { return v >= lo && v <= hi; }

}  // namespace

ClassificationRecord validate(ClassificationRecord record) {
  const std::string where = "record '" + record.id + "'";
  if (record.logits.size() < 2) {
    throw Error(ErrorCode::EmptyLogits, where + ": logits need at least 2 entries");
  }
  for (double v : record.logits) require_finite(v, where + ": logit");
  if (record.ref_label >= record.logits.size()) {
    throw Error(ErrorCode::LabelOutOfRange,
                where + ": ref_label " + std::to_string(record.ref_label) + " >= " +
                    std::to_string(record.logits.size()));
  }
  require_protected(record.protected_attr, record.id);
  if (record.counterfactual_logits) {
    if (record.counterfactual_logits->size() != record.logits.size()) {
      throw Error(ErrorCode::LengthMismatch,
                  where + ": counterfactual_logits length differs from logits");
    }
    for (double v : *record.counterfactual_logits) {
      require_finite(v, where + ": counterfactual logit");
    }
  }
  return record;
}

BoundingBox clip_to_image(const BoundingBox& box, int image_w, int image_h) {
  const double x0 = std::max(box.x, 0.0);
  const double y0 = std::max(box.y, 0.0);
  const double x1 = std::min(box.x + box.w, static_cast<double>(image_w));
  const double y1 = std::min(box.y + box.h, static_cast<double>(image_h));
  BoundingBox out = box;
  out.x = x0;
  out.y = y0;
  out.w = x1 - x0;
  out.h = y1 - y0;
  return out;
}

DetectionRecord validate(DetectionRecord record) {
  const std::string where = "record '" + record.id + "'";
  require_protected(record.protected_attr, record.id);
  if (record.image_w <= 0 || record.image_h <= 0) {
    throw Error(ErrorCode::NegativeExtent, where + ": image size must be positive");
  }

  auto check_box = [&](BoundingBox& box, bool is_prediction) {
    require_finite(box.x, where + ": box x");
    require_finite(box.y, where + ": box y");
    require_finite(box.w, where + ": box w");
    require_finite(box.h, where + ": box h");
    if (box.w <= 0.0 || box.h <= 0.0) {
      throw Error(ErrorCode::NegativeExtent, where + ": box extents must be positive");
    }
    if (is_prediction) {
      if (!box.confidence) {
        throw Error(ErrorCode::ConfidenceOutOfRange, where + ": prediction without confidence");
      }
      require_finite(*box.confidence, where + ": confidence");
      if (!in_range(0.0, *box.confidence, 1.0)) {
        throw Error(ErrorCode::ConfidenceOutOfRange, where + ": confidence outside [0,1]");
      }
    } else {
      box.confidence.reset();
    }
    box = clip_to_image(box, record.image_w, record.image_h);
    if (box.w <= 0.0 || box.h <= 0.0) {
      throw Error(ErrorCode::NegativeExtent, where + ": box lies outside the image");
    }
  };

  for (auto& box : record.predictions) check_box(box, true);
  for (auto& box : record.ground_truth) check_box(box, false);

  std::stable_sort(record.predictions.begin(), record.predictions.end(),
                   [](const BoundingBox& a, const BoundingBox& b) {
                     return *a.confidence > *b.confidence;
                   });
  return record;
}

Record validate(Record record) {
  return std::visit([](auto&& r) -> Record { return validate(std::move(r)); },
                    std::move(record));
}

void validate(const HyperParams& p) {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::ConfigError, msg); };
  auto finite = [](double v) { return std::isfinite(v); };

  if (!(p.alpha > 0.0 && p.alpha < 1.0)) fail("params.alpha must lie in (0,1)");
  if (!finite(p.lambda) || p.lambda < 0.0) fail("params.lambda must be >= 0");
  if (!(p.gamma > 0.0 && p.gamma < 1.0)) fail("params.gamma must lie in (0,1)");
  if (!finite(p.kappa) || p.kappa <= 0.0) fail("params.kappa must be > 0");
  if (!finite(p.delta_max) || p.delta_max <= 0.0) fail("params.delta_max must be > 0");
  if (p.eta_candidates.empty()) fail("params.eta_candidates must be non-empty");
  for (std::size_t i = 0; i < p.eta_candidates.size(); ++i) {
    if (!finite(p.eta_candidates[i]) || p.eta_candidates[i] <= 0.0) {
      fail("params.eta_candidates must be > 0");
    }
    if (i > 0 && !(p.eta_candidates[i] > p.eta_candidates[i - 1])) {
      fail("params.eta_candidates must be strictly increasing");
    }
  }
  if (!finite(p.epsilon) || p.epsilon < 0.0) fail("params.epsilon must be >= 0");
  if (!finite(p.delta) || p.delta < 0.0) fail("params.delta must be >= 0");
  if (p.grid < 1) fail("params.grid must be a positive integer");
  if (p.kappa_grid.empty() || p.delta_max_grid.empty()) {
    fail("params.kappa_grid and params.delta_max_grid must be non-empty");
  }
  for (double k : p.kappa_grid) {
    if (!finite(k) || k <= 0.0) fail("params.kappa_grid entries must be > 0");
  }
  for (double d : p.delta_max_grid) {
    if (!finite(d) || d <= 0.0) fail("params.delta_max_grid entries must be > 0");
  }
  if (!finite(p.eta_tie_tolerance) || p.eta_tie_tolerance < 0.0) {
    fail("params.eta_tie_tolerance must be >= 0");
  }
  if (!(p.iou_threshold > 0.0 && p.iou_threshold <= 1.0)) {
    fail("params.iou_threshold must lie in (0,1]");
  }
}

}  // namespace fairsight
