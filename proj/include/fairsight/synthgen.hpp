#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "fairsight/types.hpp"

namespace fairsight {

// Portable draws on top of std::mt19937_64. The standard distributions are
// implementation-defined, so every transform here is spelled out:
//   uniform  (x >> 11) * 2^-53
//   normal   Box-Muller, cosine branch only, u1 taken as 1 - uniform
//   poisson  Knuth's product-of-uniforms
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  double uniform();                       // [0, 1)
  double uniform(double lo, double hi);   // [lo, hi)
  int uniform_int(int lo, int hi);        // inclusive
  double normal(double mean, double sd);
  int poisson(double mean);
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

struct BiasScenario {
  std::uint64_t seed = 0;
  std::size_t n_records = 1000;
  double group1_fraction = 0.5;
  double base_accuracy = 0.98;
  double confidence_suppression = 0.8;
  double label_noise = 0.0;
  Task task = Task::classification;

  // classification
  std::size_t classes = 2;
  double margin_mean = 1.0;
  double margin_sd = 0.5;
  double decision_bias = 0.5;  // constant logit offset on class 0

  // detection
  int boxes_min = 1;
  int boxes_max = 4;
  int image_size = 200;
  double box_min = 20.0;
  double box_max = 60.0;
  double detect_prob = 0.97;
  double position_jitter = 1.0;
  double size_jitter = 0.08;  // sd of the log-scale factor
  double tp_conf_mean = 0.75;
  double tp_conf_sd = 0.06;
  double fp_rate = 0.7;
  double fp_conf_mean = 0.55;
  double fp_conf_sd = 0.08;
  int num_box_classes = 1;
};

// Throws ConfigError on any out-of-range field.
void validate(const BiasScenario& scenario);

// Records in canonical (validated) form. Only the protected group's true
// detections are suppressed; false positives are drawn identically for both
// groups.
std::vector<Record> generate(const BiasScenario& scenario);

}  // namespace fairsight
