#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "ovis/common.hpp"

namespace ovis {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Vec9 = Eigen::Matrix<double, 9, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat9 = Eigen::Matrix<double, 9, 9>;

constexpr double kDepthEps = 1e-6;  // depth guard for all projections (meters)

Mat3 skew(const Vec3& w);

// SO(3) exponential/logarithm and Jacobians, Taylor-safe near zero.
Mat3 so3_exp(const Vec3& theta);
Vec3 so3_log(const Mat3& R);
Mat3 so3_right_jacobian(const Vec3& theta);
Mat3 so3_right_jacobian_inv(const Vec3& theta);
Mat3 so3_left_jacobian(const Vec3& theta);
Mat3 so3_left_jacobian_inv(const Vec3& theta);

// Rigid transform. Convention used throughout: a Pose named T_AB maps
// B-frame points into frame A, i.e. p_A = T_AB * p_B. Frame states store
// world_from_body. Rotation kept as a unit quaternion, renormalized after
// every composition.
struct Pose {
  Eigen::Quaterniond q = Eigen::Quaterniond::Identity();
  Vec3 t = Vec3::Zero();

  Pose() = default;
  Pose(const Eigen::Quaterniond& q_in, const Vec3& t_in) : q(q_in.normalized()), t(t_in) {}
  Pose(const Mat3& R, const Vec3& t_in) : q(R), t(t_in) { q.normalize(); }

  static Pose identity() { return Pose(); }

  Mat3 rotation() const { return q.toRotationMatrix(); }

  Pose operator*(const Pose& other) const {
    Pose out;
    out.q = (q * other.q).normalized();
    out.t = q * other.t + t;
    return out;
  }

  Vec3 operator*(const Vec3& p) const { return q * p + t; }

  Pose inverse() const {
    Pose out;
    out.q = q.conjugate();
    out.t = -(out.q * t);
    return out;
  }
};

// Twist convention: translation-first xi = [rho, theta], left perturbation
// T <- se3_exp(delta) * T.
Pose se3_exp(const Vec6& xi);
Vec6 se3_log(const Pose& T);  // throws LogNearPi if rotation angle ~= pi

struct CameraModel {
  double fx = 0, fy = 0, cx = 0, cy = 0;
  double baseline = 0;  // stereo baseline b (meters)
  int width = 0, height = 0;
};

struct StereoKeypoint {
  double u = 0, v = 0;
  double ur = 0;  // u - fx*b/d
  double d = 0;   // depth (meters)

  Vec3 uvs() const { return Vec3(u, v, ur); }
};

// Pinhole projection; p given in the camera frame, p.z() > kDepthEps.
Vec2 project(const CameraModel& cam, const Vec3& p);
Vec3 project_stereo(const CameraModel& cam, const Vec3& p);
Vec3 back_project(const CameraModel& cam, const Vec2& u, double depth);

// 2x3 Jacobian of project w.r.t. the camera-frame point.
Eigen::Matrix<double, 2, 3> project_jacobian(const CameraModel& cam, const Vec3& p);
// 3x3 Jacobian of project_stereo w.r.t. the camera-frame point.
Mat3 project_stereo_jacobian(const CameraModel& cam, const Vec3& p);

}  // namespace ovis
