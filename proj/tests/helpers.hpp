#pragma once

#include <string>
#include <vector>

#include "fairsight/types.hpp"

namespace testing {

inline fairsight::ClassificationRecord cls(std::vector<double> logits, std::size_t label, int group,
                                           std::string id = "r") {
  fairsight::ClassificationRecord r;
  r.id = std::move(id);
  r.logits = std::move(logits);
  r.ref_label = label;
  r.protected_attr = group;
  return r;
}

inline fairsight::BoundingBox box(double x, double y, double w, double h, double conf = -1.0,
                                  int class_id = 0) {
  fairsight::BoundingBox b{x, y, w, h, std::nullopt, class_id};
  if (conf >= 0.0) b.confidence = conf;
  return b;
}

inline fairsight::DetectionRecord det(std::vector<fairsight::BoundingBox> predictions,
                                      std::vector<fairsight::BoundingBox> truth, int group = 0,
                                      int size = 100, std::string id = "d") {
  fairsight::DetectionRecord r;
  r.id = std::move(id);
  r.protected_attr = group;
  r.image_w = size;
  r.image_h = size;
  r.predictions = std::move(predictions);
  r.ground_truth = std::move(truth);
  return r;
}

}  // namespace testing
