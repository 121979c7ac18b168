#pragma once

#include <array>
#include <vector>

#include "ovis/dense_frontend.hpp"

namespace ovis {

// 256-bit intensity-comparison patch signature.
struct Descriptor {
  std::array<uint64_t, 4> bits{};
};

int hamming_distance(const Descriptor& a, const Descriptor& b);

struct Feature {
  StereoKeypoint kp;  // ur/d only meaningful when has_depth
  bool has_depth = false;
  double score = 0;
  Descriptor desc;
};

struct FeatureConfig {
  int budget = 300;
  int grid = 8;             // grid x grid spatial buckets
  double min_score = 1e-4;  // Shi-Tomasi response threshold
  int nms_radius = 5;
};

// Corner detection (min-eigenvalue score, grid bucketing for spatial spread)
// plus binary patch descriptors. Deterministic for identical inputs.
std::vector<Feature> extract_features(const RgbdFrame& frame, const CameraModel& cam,
                                      const FeatureConfig& cfg);

}  // namespace ovis
