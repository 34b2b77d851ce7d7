#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace fairsight {

enum class Task { classification, detection };

std::string_view to_string(Task task) noexcept;
std::optional<Task> parse_task(std::string_view text) noexcept;

// Calibrated threshold. The infinite state means "never flag" and is kept
// distinct from any finite score.
class Threshold {
 public:
  constexpr Threshold() = default;

  static constexpr Threshold finite(double value) { return Threshold(value, false); }
  static constexpr Threshold infinite() { return Threshold(0.0, true); }

  constexpr bool is_infinite() const { return infinite_; }
  // Meaningless when is_infinite().
  constexpr double value() const { return value_; }

  // Strict exceedance; an infinite threshold is never exceeded.
  constexpr bool exceeded_by(double score) const { return !infinite_ && score > value_; }

  friend constexpr bool operator==(const Threshold& a, const Threshold& b) {
    return a.infinite_ == b.infinite_ && (a.infinite_ || a.value_ == b.value_);
  }

 private:
  constexpr Threshold(double value, bool infinite) : value_(value), infinite_(infinite) {}

  double value_ = 0.0;
  bool infinite_ = true;
};

// Order used by monotonicity checks: every finite value is below infinite.
constexpr bool threshold_le(const Threshold& a, const Threshold& b) {
  if (b.is_infinite()) return true;
  if (a.is_infinite()) return false;
  return a.value() <= b.value();
}

struct BoundingBox {
  double x = 0.0;  // top-left, pixels
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;
  std::optional<double> confidence;  // absent on ground truth
  int class_id = 0;

  double area() const { return w * h; }
  double center_x() const { return x + 0.5 * w; }
  double center_y() const { return y + 0.5 * h; }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

struct ClassificationRecord {
  std::string id;
  std::vector<double> logits;
  std::size_t ref_label = 0;
  int protected_attr = 0;  // A in {0, 1}
  std::optional<std::vector<double>> counterfactual_logits;

  friend bool operator==(const ClassificationRecord&, const ClassificationRecord&) = default;
};

struct DetectionRecord {
  std::string id;
  int protected_attr = 0;
  int image_w = 0;
  int image_h = 0;
  std::vector<BoundingBox> predictions;
  std::vector<BoundingBox> ground_truth;

  friend bool operator==(const DetectionRecord&, const DetectionRecord&) = default;
};

using Record = std::variant<ClassificationRecord, DetectionRecord>;

Task task_of(const Record& record) noexcept;
const std::string& id_of(const Record& record) noexcept;
int protected_of(const Record& record) noexcept;

enum class RegionAggregation { sum, max };

std::string_view to_string(RegionAggregation agg) noexcept;
std::optional<RegionAggregation> parse_aggregation(std::string_view text) noexcept;

struct HyperParams {
  double alpha = 0.1;
  double lambda = 0.7;
  double gamma = 0.95;
  double kappa = 0.8;
  double delta_max = 0.15;
  std::vector<double> eta_candidates{0.6, 0.8, 1.0, 1.2};
  double epsilon = 0.05;
  double delta = 0.1;
  int grid = 4;
  bool adaptive_enabled = false;
  RegionAggregation region_aggregation = RegionAggregation::max;

  // Search grids for the classification repair constants.
  std::vector<double> kappa_grid{0.2, 0.5, 0.8, 1.0};
  std::vector<double> delta_max_grid{0.05, 0.1, 0.15, 0.2};
  double iou_threshold = 0.5;
  std::size_t positive_class = 1;
  // eta candidates whose |gap| (then mean AP) differ by no more than this
  // count as tied.
  double eta_tie_tolerance = 0.01;

  friend bool operator==(const HyperParams&, const HyperParams&) = default;
};

// Per-group mean of the task's confidence statistic on the calibration set.
// A group with no records has no mean.
struct GroupStats {
  std::optional<double> mean_conf_g0;
  std::optional<double> mean_conf_g1;
  std::size_t count_g0 = 0;
  std::size_t count_g1 = 0;

  const std::optional<double>& mean_of(int group) const {
    return group == 0 ? mean_conf_g0 : mean_conf_g1;
  }

  friend bool operator==(const GroupStats&, const GroupStats&) = default;
};

struct RegionIndex {
  int row = 0;
  int col = 0;

  friend bool operator==(const RegionIndex&, const RegionIndex&) = default;
};

// Square G x G row-major matrix.
template <class T>
class Grid {
 public:
  Grid() = default;
  Grid(int size, T fill) : size_(size), cells_(static_cast<std::size_t>(size) * size, fill) {}

  int size() const { return size_; }
  using reference = typename std::vector<T>::reference;
  using const_reference = typename std::vector<T>::const_reference;

  reference at(int row, int col) { return cells_[index(row, col)]; }
  const_reference at(int row, int col) const { return cells_[index(row, col)]; }
  reference at(RegionIndex r) { return at(r.row, r.col); }
  const_reference at(RegionIndex r) const { return at(r.row, r.col); }
  const std::vector<T>& cells() const { return cells_; }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(size_) +
           static_cast<std::size_t>(col);
  }

  int size_ = 0;
  std::vector<T> cells_;
};

struct CalibrationArtifact {
  Task task = Task::classification;
  Threshold q_alpha;
  std::optional<Grid<Threshold>> region_q;  // detection only
  GroupStats stats;
  HyperParams params;  // with the selected repair constants written back
  std::size_t n = 0;
  double eta_selected = 1.0;

  friend bool operator==(const CalibrationArtifact&, const CalibrationArtifact&) = default;
};

}  // namespace fairsight
