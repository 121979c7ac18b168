#pragma once

#include <string>

#include "ovis/map.hpp"

namespace ovis {

// Temporal optimization window. Keyframes are optimized; fixed_frames are
// frozen covisible keyframes whose observations still constrain points.
struct SlidingWindow {
  std::vector<int> keyframes;     // ascending keyframe ids, size <= M+1
  std::vector<int> fixed_frames;  // ascending, never modified by the solver
  std::vector<int> points;        // map points observed by >= 1 window keyframe
};

struct LmParams {
  double initial_damping = 1e-4;
  double up = 10.0;
  double down = 0.25;
  int max_iters = 10;
  double min_rel_decrease = 1e-8;  // convergence threshold on the objective
};

struct BaConfig {
  int M = 5;  // window holds M+1 keyframes
  double huber_delta = 2.7955;  // sqrt(7.815), 95% chi-square with 3 dof
  double c_hat = 7.815;         // escape cost, equals the robust cost at the gate
  double lambda_gamma = 1.0;
  double lambda_beta = 1.0;
  double lambda_p = 2.0;
  double lambda_r = 0.5;
  double sigma_bg = 1e-3;
  double sigma_ba = 1e-2;
  int max_outer_iters = 3;
  int score_sweep_iters = 5;
  bool update_scores = true;  // false: scores stay fixed, no dynamic-point removal
  // Leave the anchor keyframe's roll/pitch free. Gravity observes those two
  // angles, so releasing them lets an initial gravity misalignment drain out
  // of the window instead of being carried forever.
  bool gauge_tilt_free = false;
  // Anchor the first window keyframe's velocity as part of the gauge. The
  // IMU links determine velocity from the position sequence, so this is
  // redundant; it exists to pin the velocity when vision is too weak to fix
  // the position scale.
  bool gauge_fix_velocity = true;
  LmParams lm;
};

// Measurement covariance for stereo observations: 1 px^2 on u and v,
// (2 px)^2 on the disparity coordinate.
inline const Vec3 kObsSigma2(1.0, 1.0, 4.0);

inline double huber(double s, double delta) {
  return s <= delta ? s * s : delta * (2.0 * s - delta);
}
inline double huber_weight(double s, double delta) { return s <= delta ? 1.0 : delta / s; }

// r = z - pi_s(T_CW * x) with analytic Jacobians. J_pose is w.r.t. a left
// perturbation [rho, theta] of the keyframe's world_from_body pose, J_point
// w.r.t. the world point. Throws PointBehindCamera.
Vec3 reproj_residual(const Vec3& point_w, const Pose& world_from_body, const Pose& body_from_cam,
                     const CameraModel& cam, const StereoKeypoint& z,
                     Eigen::Matrix<double, 3, 6>* J_pose = nullptr, Mat3* J_point = nullptr);

struct ReprojTerm {
  Vec3 residual = Vec3::Zero();
  double whitened_norm = 0;
  double robust_weight = 0;  // Huber IRLS weight at the whitened norm
  double cost = 0;           // beta^2 g^2 rho_H + (1-beta)^2 (1-g)^2 c_hat
};

// Gated robust cost of one observation; gamma read from the keyframe's
// segmentation at the observed pixel. Throws PointBehindCamera.
ReprojTerm robust_reproj_cost(const MapPoint& point, const Keyframe& kf, const StereoKeypoint& obs,
                              const CameraModel& cam, const Pose& body_from_cam,
                              const BaConfig& cfg);

// Preintegration between two consecutive window keyframes.
struct ImuLink {
  int from_kf = -1;
  int to_kf = -1;
  PreintegratedImu pre;
};

struct BaDiagnostics {
  std::vector<std::pair<std::string, double>> energy_log;  // substep label, total energy
  int lm_iters = 0;
  int accepted_steps = 0;
  int dropped_observations = 0;  // behind-camera at linearization
  int points_removed = 0;
  std::vector<int> removed_point_ids;
  int sweep_violations = 0;  // score sweeps that increased the frozen-prior energy
  int lm_violations = 0;     // accepted steps that failed to decrease the objective
  double condition_estimate = 0;
  double final_energy = 0;
};

// Alternating solver over one window: (a) Levenberg-Marquardt on keyframe
// states and point positions with scores fixed (points Schur-eliminated,
// first window keyframe's pose held as gauge), then (b) prior recomputation
// and Jacobi closed-form sweeps of the cluster and point scores. Dynamic
// points (beta < 0.5) are removed at the end. Throws SolverDiverged after
// two consecutive outer iterations of increasing energy, restoring the
// pre-solve states first.
BaDiagnostics build_and_solve_window(SlidingWindow& window, Map& map,
                                     const std::vector<ImuLink>& imu_links, const BaConfig& cfg,
                                     const CameraModel& cam, const Pose& body_from_cam,
                                     const Vec3& gravity = kGravity);

// Move the oldest window keyframe to fixed_frames.
void marginalize_oldest(SlidingWindow& window);

// Rebuild window.points: all map points with >= 1 window-keyframe observation.
void populate_window_points(SlidingWindow& window, const Map& map);

}  // namespace ovis
