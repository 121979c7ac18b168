#pragma once

#include <optional>
#include <vector>

#include "ovis/imu.hpp"
#include "ovis/segmentation.hpp"

namespace ovis {

struct RgbdFrame {
  ImageF intensity;  // [0,1]
  ImageF depth;      // meters, 0 = invalid
  double timestamp = 0;
};

// Coarse-to-fine pyramid, finest level first. Intensity is 2x2 averaged,
// depth uses a validity-aware 2x2 median.
struct Pyramid {
  std::vector<RgbdFrame> levels;
  std::vector<CameraModel> cams;
};

Pyramid build_pyramid(const RgbdFrame& frame, const CameraModel& cam, int levels);

struct DenseConfig {
  double w_I = 1.0;
  double w_D = 1.0;
  double alpha_I = 0.0;  // 0 = per-frame median(|r_D|)/median(|r_I|), floored at 1e-3
  double cauchy_c = 0.05;
  int levels = 3;
  int max_iters = 10;
  double convergence_tol = 1e-6;
  int min_valid_pixels = 200;
  int max_halvings = 8;
  double lambda_gamma = 1.0;
  double lambda_r = 0.5;
  double lambda_p = 2.0;
  double sigma_bg = 1e-3;
  double sigma_ba = 1e-2;
  double imu_weight = 1.0;   // scales the IMU information in the frame solver
  bool update_scores = true;  // false pins all cluster scores at their input values
};

double cauchy(double r, double c);
inline double cauchy_weight(double r, double c) { return 1.0 / (1.0 + (r / c) * (r / c)); }

// W(u, T): back-project u at its current-frame depth, transform by T
// (previous-camera-from-current-camera), reproject.
Vec2 warp(const Vec2& u, const ImageF& depth_cur, const Pose& T, const CameraModel& cam);

struct DenseResidualMap {
  std::vector<float> r_I;
  std::vector<float> r_D;
  std::vector<uint8_t> valid;  // per pixel of the current frame
  int width = 0, height = 0;
};

DenseResidualMap dense_residuals(const RgbdFrame& prev, const RgbdFrame& cur,
                                 const Pose& delta_cam, const CameraModel& cam);

struct TrackDiagnostics {
  std::vector<int> iters_per_level;
  double energy_imu = 0;
  double energy_dense = 0;
  double energy_prior = 0;
  double energy_reg = 0;
  int valid_pixels = 0;
  bool low_confidence = false;
  double alpha_I = 0;
};

struct TrackResult {
  FrameState state;
  std::vector<double> scores;  // updated cluster scores for the current frame
  TrackDiagnostics diag;
};

// Frame-to-frame initialization: IMU-primed decoupled optimization of the
// full 15-dof current state and the cluster scores, coarse to fine.
// map_points (optional) feed the segmentation prior; empty means prior 1.
TrackResult track_frame(const Pyramid& prev, const FrameState& prev_state, const Pyramid& cur,
                        const PreintegratedImu& pre, const ClusterSegmentation& seg,
                        const DenseConfig& cfg, const Pose& body_from_cam,
                        const std::vector<ScoredPoint>& map_points = {},
                        const Vec3& gravity = kGravity);

}  // namespace ovis
