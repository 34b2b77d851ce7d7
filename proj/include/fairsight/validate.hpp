#pragma once

#include "fairsight/types.hpp"

namespace fairsight {

// Each validator returns the record in canonical form or throws Error naming
// the violated invariant. Validation is idempotent.

ClassificationRecord validate(ClassificationRecord record);

// Clips every box to the image rectangle and stable-sorts predictions by
// descending confidence.
DetectionRecord validate(DetectionRecord record);

Record validate(Record record);

// Throws ConfigError on any out-of-range field.
void validate(const HyperParams& params);

// Intersection of a box with [0,w]x[0,h]. Extents may become non-positive when
// the box lies outside the image.
BoundingBox clip_to_image(const BoundingBox& box, int image_w, int image_h);

}  // namespace fairsight
