#include "ovis/geometry.hpp"

#include <cmath>

namespace ovis {

Mat3 skew(const Vec3& w) {
  Mat3 S;
  S << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
  return S;
}

Mat3 so3_exp(const Vec3& theta) {
  double a = theta.norm();
  Mat3 S = skew(theta);
  if (a < 1e-8) {
    return Mat3::Identity() + S + 0.5 * S * S;
  }
  return Mat3::Identity() + std::sin(a) / a * S + (1.0 - std::cos(a)) / (a * a) * S * S;
}

Vec3 so3_log(const Mat3& R) {
  double tr = R.trace();
  double cos_a = std::clamp(0.5 * (tr - 1.0), -1.0, 1.0);
  double a = std::acos(cos_a);
  Vec3 w(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
  if (a < 1e-8) {
    return 0.5 * w;
  }
  if (a > M_PI - 1e-6) {
    fail("LogNearPi", "rotation angle within 1e-6 of pi");
  }
  return a / (2.0 * std::sin(a)) * w;
}

Mat3 so3_right_jacobian(const Vec3& theta) {
  double a = theta.norm();
  Mat3 S = skew(theta);
  if (a < 1e-8) {
    return Mat3::Identity() - 0.5 * S + (1.0 / 6.0) * S * S;
  }
  double a2 = a * a;
  return Mat3::Identity() - (1.0 - std::cos(a)) / a2 * S + (a - std::sin(a)) / (a2 * a) * S * S;
}

Mat3 so3_right_jacobian_inv(const Vec3& theta) {
  double a = theta.norm();
  Mat3 S = skew(theta);
  if (a < 1e-8) {
    return Mat3::Identity() + 0.5 * S + (1.0 / 12.0) * S * S;
  }
  double a2 = a * a;
  double c = 1.0 / a2 - (1.0 + std::cos(a)) / (2.0 * a * std::sin(a));
  return Mat3::Identity() + 0.5 * S + c * S * S;
}

Mat3 so3_left_jacobian(const Vec3& theta) { return so3_right_jacobian(-theta); }

Mat3 so3_left_jacobian_inv(const Vec3& theta) { return so3_right_jacobian_inv(-theta); }

Pose se3_exp(const Vec6& xi) {
  Vec3 rho = xi.head<3>();
  Vec3 theta = xi.tail<3>();
  Mat3 R = so3_exp(theta);
  Vec3 t = so3_left_jacobian(theta) * rho;
  return Pose(R, t);
}

Vec6 se3_log(const Pose& T) {
  Vec3 theta = so3_log(T.rotation());
  Vec3 rho = so3_left_jacobian_inv(theta) * T.t;
  Vec6 xi;
  xi << rho, theta;
  return xi;
}

Vec2 project(const CameraModel& cam, const Vec3& p) {
  if (p.z() <= kDepthEps) fail("NonPositiveDepth", "projection with z <= 1e-6");
  return Vec2(cam.fx * p.x() / p.z() + cam.cx, cam.fy * p.y() / p.z() + cam.cy);
}

Vec3 project_stereo(const CameraModel& cam, const Vec3& p) {
  Vec2 u = project(cam, p);
  return Vec3(u.x(), u.y(), u.x() - cam.fx * cam.baseline / p.z());
}

Vec3 back_project(const CameraModel& cam, const Vec2& u, double depth) {
  if (depth <= 0.0) fail("NonPositiveDepth", "back-projection with non-positive depth");
  if (u.x() < 0 || u.x() > cam.width - 1 || u.y() < 0 || u.y() > cam.height - 1) {
    fail("OutOfBounds", "pixel outside image bounds");
  }
  return Vec3((u.x() - cam.cx) / cam.fx * depth, (u.y() - cam.cy) / cam.fy * depth, depth);
}

Eigen::Matrix<double, 2, 3> project_jacobian(const CameraModel& cam, const Vec3& p) {
  double iz = 1.0 / p.z();
  double iz2 = iz * iz;
  Eigen::Matrix<double, 2, 3> J;
  J << cam.fx * iz, 0, -cam.fx * p.x() * iz2, 0, cam.fy * iz, -cam.fy * p.y() * iz2;
  return J;
}

Mat3 project_stereo_jacobian(const CameraModel& cam, const Vec3& p) {
  double iz = 1.0 / p.z();
  double iz2 = iz * iz;
  Mat3 J;
  J.topRows<2>() = project_jacobian(cam, p);
  J.row(2) = J.row(0);
  J(2, 2) += cam.fx * cam.baseline * iz2;
  return J;
}

}  // namespace ovis
