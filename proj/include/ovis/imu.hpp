#pragma once

#include <vector>

#include "ovis/geometry.hpp"

namespace ovis {

struct ImuSample {
  double timestamp = 0;  // seconds
  Vec3 gyro = Vec3::Zero();   // rad/s
  Vec3 accel = Vec3::Zero();  // specific force, m/s^2
};

struct ImuBias {
  Vec3 bg = Vec3::Zero();
  Vec3 ba = Vec3::Zero();
};

struct ImuNoise {
  double gyro_density = 1.7e-4;   // rad/s/sqrt(Hz)
  double accel_density = 2.0e-3;  // m/s^2/sqrt(Hz)
};

// Body state for one frame: world_from_body pose, world-frame velocity, biases.
struct FrameState {
  Pose pose;                  // T_WB
  Vec3 velocity = Vec3::Zero();
  ImuBias bias;
};

// Preintegrated IMU increments between two frames with covariance and
// first-order bias Jacobians, all expressed at the linearization bias.
// Error-state ordering everywhere: [theta, v, p].
struct PreintegratedImu {
  Mat3 dR = Mat3::Identity();
  Vec3 dV = Vec3::Zero();
  Vec3 dP = Vec3::Zero();
  double dt_total = 0;
  Mat9 covariance = Mat9::Zero();
  Mat3 J_dR_bg = Mat3::Zero();
  Mat3 J_dV_bg = Mat3::Zero();
  Mat3 J_dV_ba = Mat3::Zero();
  Mat3 J_dP_bg = Mat3::Zero();
  Mat3 J_dP_ba = Mat3::Zero();
  ImuBias lin_bias;

  // Increments corrected to first order for a bias different from lin_bias.
  Mat3 corrected_dR(const ImuBias& b) const;
  Vec3 corrected_dV(const ImuBias& b) const;
  Vec3 corrected_dP(const ImuBias& b) const;
};

// Midpoint preintegration over the sample stream. Samples are interval
// boundaries; N samples integrate N-1 intervals.
PreintegratedImu preintegrate(const std::vector<ImuSample>& samples, const ImuBias& lin_bias,
                              const ImuNoise& noise);

// Composition: result covers pre1 followed by pre2 (shared boundary sample).
PreintegratedImu compose(const PreintegratedImu& pre1, const PreintegratedImu& pre2);

struct ImuResidual {
  Vec9 r = Vec9::Zero();          // [r_R, r_v, r_p]
  Mat9 information = Mat9::Zero();
  // Jacobians w.r.t. 15-dof state perturbations [rho, theta, v, bg, ba];
  // pose perturbed on the left: T <- se3_exp(delta) * T.
  Eigen::Matrix<double, 9, 15> J_prev;
  Eigen::Matrix<double, 9, 15> J_cur;
};

ImuResidual imu_residual(const PreintegratedImu& pre, const FrameState& prev,
                         const FrameState& cur, const Vec3& gravity);

struct BiasWalkResidual {
  Vec6 r = Vec6::Zero();  // [dbg, dba]
  Mat6 information = Mat6::Zero();
};

// Brownian-motion bias prior between consecutive keyframes; information
// scales with 1/(sigma^2 * dt).
BiasWalkResidual bias_walk_residual(const ImuBias& prev, const ImuBias& cur, double sigma_bg,
                                    double sigma_ba, double dt);

inline const Vec3 kGravity(0, 0, -9.81);

// Predict the next frame state from a preintegration (bias-corrected).
FrameState predict_state(const FrameState& prev, const PreintegratedImu& pre,
                         const Vec3& gravity = kGravity);

}  // namespace ovis
