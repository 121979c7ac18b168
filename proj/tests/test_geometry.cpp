#include "doctest.h"

#include "ovis/geometry.hpp"

#include <random>

using namespace ovis;

namespace {

std::mt19937_64 rng(12345);

Vec3 rand_vec(double scale = 1.0) {
  std::normal_distribution<double> n01;
  return scale * Vec3(n01(rng), n01(rng), n01(rng));
}

Pose rand_pose() {
  Vec3 w = rand_vec(0.8);
  return Pose(so3_exp(w), rand_vec(2.0));
}

}  // namespace

TEST_CASE("so3 exp/log round trip") {
  for (int i = 0; i < 200; ++i) {
    Vec3 w = rand_vec(1.0);
    if (w.norm() >= M_PI) continue;
    CHECK((so3_log(so3_exp(w)) - w).norm() < 1e-10);
  }
  // small-angle branch
  Vec3 tiny(1e-12, -2e-12, 3e-13);
  CHECK((so3_log(so3_exp(tiny)) - tiny).norm() < 1e-15);
}

TEST_CASE("so3 jacobians consistent with exp") {
  // Exp(w + d) ~ Exp(w) Exp(Jr(w) d)
  for (int i = 0; i < 50; ++i) {
    Vec3 w = rand_vec(0.7);
    Vec3 d = rand_vec(1e-6);
    Mat3 lhs = so3_exp((w + d).eval());
    Mat3 rhs = so3_exp(w) * so3_exp((so3_right_jacobian(w) * d).eval());
    CHECK((lhs - rhs).norm() < 1e-10);
    CHECK((so3_right_jacobian_inv(w) * so3_right_jacobian(w) - Mat3::Identity()).norm() < 1e-9);
    CHECK((so3_left_jacobian(w) - so3_right_jacobian(Vec3(-w))).norm() < 1e-12);
  }
}

TEST_CASE("se3 exp/log round trip and left-perturbation convention") {
  for (int i = 0; i < 100; ++i) {
    Vec6 xi;
    xi << rand_vec(1.5), rand_vec(0.8);
    Pose T = se3_exp(xi);
    Vec6 back = se3_log(T);
    CHECK((back - xi).norm() < 1e-9);
  }
  // exp of zero is identity
  Pose I = se3_exp(Vec6::Zero());
  CHECK(I.t.norm() < 1e-15);
  CHECK(std::abs(I.q.w() - 1.0) < 1e-15);
}

TEST_CASE("pose compose/inverse") {
  for (int i = 0; i < 50; ++i) {
    Pose a = rand_pose(), b = rand_pose();
    Vec3 p = rand_vec(3.0);
    CHECK(((a * b) * p - a * (b * p)).norm() < 1e-12);
    Pose e = a * a.inverse();
    CHECK(e.t.norm() < 1e-12);
    CHECK(so3_log(e.rotation()).norm() < 1e-12);
  }
}

TEST_CASE("projection round trip") {
  CameraModel cam{160, 160, 159.5, 119.5, 0.05, 320, 240};
  for (int i = 0; i < 100; ++i) {
    std::uniform_real_distribution<double> ux(0, 319), uy(0, 239), ud(0.3, 8.0);
    Vec2 u(ux(rng), uy(rng));
    double d = ud(rng);
    Vec3 p = back_project(cam, u, d);
    CHECK((project(cam, p) - u).norm() < 1e-10);
    Vec3 s = project_stereo(cam, p);
    CHECK(std::abs(s(0) - u(0)) < 1e-10);
    CHECK(std::abs(s(2) - (u(0) - cam.fx * cam.baseline / d)) < 1e-10);
  }
}

TEST_CASE("projection rejects non-positive depth") {
  CameraModel cam{160, 160, 159.5, 119.5, 0.05, 320, 240};
  CHECK_THROWS_AS(project(cam, Vec3(0, 0, -1)), Error);
  CHECK_THROWS_AS(project(cam, Vec3(0, 0, 0)), Error);
  CHECK_THROWS_AS(back_project(cam, Vec2(10, 10), 0.0), Error);
}

TEST_CASE("projection jacobians match finite differences") {
  CameraModel cam{160, 160, 159.5, 119.5, 0.05, 320, 240};
  std::uniform_real_distribution<double> ux(10, 310), uy(10, 230), ud(0.4, 7.0);
  for (int i = 0; i < 200; ++i) {
    Vec3 p = back_project(cam, Vec2(ux(rng), uy(rng)), ud(rng));
    const double h = 1e-6;
    Eigen::Matrix<double, 2, 3> J = project_jacobian(cam, p);
    Mat3 Js = project_stereo_jacobian(cam, p);
    for (int k = 0; k < 3; ++k) {
      Vec3 dp = Vec3::Zero();
      dp(k) = h;
      Vec2 fd = (project(cam, (p + dp).eval()) - project(cam, (p - dp).eval())) / (2 * h);
      Vec3 fds =
          (project_stereo(cam, (p + dp).eval()) - project_stereo(cam, (p - dp).eval())) / (2 * h);
      CHECK((J.col(k) - fd).norm() / std::max(1.0, fd.norm()) < 1e-5);
      CHECK((Js.col(k) - fds).norm() / std::max(1.0, fds.norm()) < 1e-5);
    }
  }
}
