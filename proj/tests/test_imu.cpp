#include "doctest.h"

#include "ovis/imu.hpp"

#include <Eigen/Eigenvalues>

#include <random>

using namespace ovis;

namespace {

std::mt19937_64 rng(999);

Vec3 rand_vec(double s = 1.0) {
  std::normal_distribution<double> n01;
  return s * Vec3(n01(rng), n01(rng), n01(rng));
}

// Wobbly but smooth synthetic IMU stream at 200 Hz.
std::vector<ImuSample> make_stream(double t0, double t1, const ImuBias& true_bias) {
  std::vector<ImuSample> out;
  for (double t = t0; t <= t1 + 1e-12; t += 0.005) {
    ImuSample s;
    s.timestamp = t;
    s.gyro = Vec3(0.4 * std::sin(1.3 * t), -0.3 * std::cos(0.7 * t), 0.5) + true_bias.bg;
    s.accel = Vec3(0.8 * std::cos(t), 1.1 * std::sin(0.9 * t), 9.6) + true_bias.ba;
    out.push_back(s);
  }
  return out;
}

FrameState perturb(const FrameState& s, const Eigen::Matrix<double, 15, 1>& d) {
  FrameState out = s;
  out.pose = se3_exp(d.head<6>()) * s.pose;
  out.velocity += d.segment<3>(6);
  out.bias.bg += d.segment<3>(9);
  out.bias.ba += d.segment<3>(12);
  return out;
}

}  // namespace

TEST_CASE("preintegration input validation") {
  CHECK_THROWS_AS(preintegrate({}, ImuBias{}, ImuNoise{}), Error);
  std::vector<ImuSample> bad = make_stream(0, 0.1, ImuBias{});
  std::swap(bad[3].timestamp, bad[4].timestamp);
  CHECK_THROWS_AS(preintegrate(bad, ImuBias{}, ImuNoise{}), Error);
}

TEST_CASE("split/compose identity at a shared boundary sample") {
  std::vector<ImuSample> s = make_stream(0, 1.0, ImuBias{});
  ImuBias b;
  b.bg = Vec3(0.01, -0.02, 0.005);
  b.ba = Vec3(0.1, 0.05, -0.08);
  PreintegratedImu whole = preintegrate(s, b, ImuNoise{});
  for (size_t cut : {size_t(1), s.size() / 3, s.size() / 2, s.size() - 2}) {
    std::vector<ImuSample> s1(s.begin(), s.begin() + cut + 1);
    std::vector<ImuSample> s2(s.begin() + cut, s.end());
    PreintegratedImu c = compose(preintegrate(s1, b, ImuNoise{}), preintegrate(s2, b, ImuNoise{}));
    CHECK(so3_log(Mat3(whole.dR.transpose() * c.dR)).norm() < 1e-9);
    CHECK((whole.dV - c.dV).norm() < 1e-9);
    CHECK((whole.dP - c.dP).norm() < 1e-9);
    CHECK(std::abs(whole.dt_total - c.dt_total) < 1e-12);
    CHECK((whole.covariance - c.covariance).norm() < 1e-9 * (1 + whole.covariance.norm()));
    CHECK((whole.J_dR_bg - c.J_dR_bg).norm() < 1e-8);
    CHECK((whole.J_dV_bg - c.J_dV_bg).norm() < 1e-8);
    CHECK((whole.J_dV_ba - c.J_dV_ba).norm() < 1e-8);
    CHECK((whole.J_dP_bg - c.J_dP_bg).norm() < 1e-8);
    CHECK((whole.J_dP_ba - c.J_dP_ba).norm() < 1e-8);
  }
}

TEST_CASE("noiseless propagation matches closed-form trajectory") {
  // Constant body rate, sinusoidal world acceleration: closed-form state.
  Vec3 w(0.3, -0.2, 0.5);
  Vec3 A(0.7, -0.4, 0.3);
  double f = 1.1;
  Mat3 R0 = so3_exp(Vec3(0.2, 0.1, -0.3));
  Vec3 v0(0.4, -0.1, 0.2), p0(1, 2, 3);
  const Vec3 g = kGravity;

  auto R_t = [&](double t) { return Mat3(R0 * so3_exp((w * t).eval())); };
  auto a_t = [&](double t) { return Vec3(A * std::cos(f * t)); };  // total world accel
  auto v_t = [&](double t) { return Vec3(v0 + A * std::sin(f * t) / f); };
  auto p_t = [&](double t) {
    return Vec3(p0 + v0 * t + A * (1 - std::cos(f * t)) / (f * f));
  };

  std::vector<ImuSample> s;
  double T = 1.0, dt = 0.005;
  for (double t = 0; t <= T + 1e-12; t += dt) {
    ImuSample x;
    x.timestamp = t;
    x.gyro = w;
    x.accel = R_t(t).transpose() * (a_t(t) - g);
    s.push_back(x);
  }
  PreintegratedImu pre = preintegrate(s, ImuBias{}, ImuNoise{});

  FrameState s0;
  s0.pose = Pose(R0, p0);
  s0.velocity = v0;
  FrameState s1 = predict_state(s0, pre);
  CHECK(so3_log(Mat3(R_t(T).transpose() * s1.pose.rotation())).norm() < 1e-5);
  CHECK((s1.pose.t - p_t(T)).norm() < 1e-4);
  CHECK((s1.velocity - v_t(T)).norm() < 1e-4);
}

TEST_CASE("residual vanishes on the predicted state") {
  std::vector<ImuSample> s = make_stream(0, 0.25, ImuBias{});
  ImuBias b;
  b.bg = Vec3(0.004, -0.006, 0.002);
  b.ba = Vec3(0.03, -0.02, 0.05);
  PreintegratedImu pre = preintegrate(s, b, ImuNoise{});
  FrameState prev;
  prev.pose = Pose(so3_exp(Vec3(0.3, -0.1, 0.2)), Vec3(1, -2, 0.5));
  prev.velocity = Vec3(0.5, 0.1, -0.3);
  prev.bias = b;
  FrameState cur = predict_state(prev, pre);
  ImuResidual res = imu_residual(pre, prev, cur, kGravity);
  CHECK(res.r.norm() < 1e-10);
}

TEST_CASE("first-order bias correction tracks re-preintegration") {
  std::vector<ImuSample> s = make_stream(0, 0.5, ImuBias{});
  ImuBias b0;
  PreintegratedImu pre = preintegrate(s, b0, ImuNoise{});
  ImuBias b1;
  b1.bg = Vec3(2e-3, -1e-3, 1.5e-3);
  b1.ba = Vec3(0.01, -0.02, 0.015);
  PreintegratedImu re = preintegrate(s, b1, ImuNoise{});
  CHECK(so3_log(Mat3(re.dR.transpose() * pre.corrected_dR(b1))).norm() < 5e-6);
  CHECK((re.dV - pre.corrected_dV(b1)).norm() < 5e-5);
  CHECK((re.dP - pre.corrected_dP(b1)).norm() < 5e-5);
}

TEST_CASE("residual jacobians match central finite differences") {
  std::vector<ImuSample> s = make_stream(0, 0.3, ImuBias{});
  ImuBias b;
  b.bg = Vec3(0.01, -0.005, 0.002);
  b.ba = Vec3(0.05, 0.03, -0.04);
  PreintegratedImu pre = preintegrate(s, b, ImuNoise{});

  FrameState prev;
  prev.pose = Pose(so3_exp(Vec3(0.4, 0.2, -0.1)), Vec3(0.5, -1, 2));
  prev.velocity = Vec3(0.3, -0.2, 0.1);
  prev.bias.bg = b.bg + Vec3(1e-3, -2e-3, 5e-4);
  prev.bias.ba = b.ba + Vec3(0.01, 0.02, -0.01);
  FrameState cur = predict_state(prev, pre);
  // off-manifold so the residual is non-trivial
  Eigen::Matrix<double, 15, 1> off;
  off.setZero();
  off.head<6>() << 0.02, -0.01, 0.03, 0.01, -0.02, 0.015;
  off.segment<3>(6) << 0.05, -0.03, 0.02;
  cur = perturb(cur, off);
  cur.bias.bg += Vec3(-5e-4, 1e-3, 2e-4);
  cur.bias.ba += Vec3(0.005, -0.01, 0.008);

  ImuResidual base = imu_residual(pre, prev, cur, kGravity);
  const double h = 1e-6;
  for (int which = 0; which < 2; ++which) {
    const Eigen::Matrix<double, 9, 15>& J = which == 0 ? base.J_prev : base.J_cur;
    for (int k = 0; k < 15; ++k) {
      Eigen::Matrix<double, 15, 1> d = Eigen::Matrix<double, 15, 1>::Zero();
      d(k) = h;
      FrameState pp = which == 0 ? perturb(prev, d) : prev;
      FrameState cp = which == 1 ? perturb(cur, d) : cur;
      Vec9 rp = imu_residual(pre, pp, cp, kGravity).r;
      d(k) = -h;
      FrameState pm = which == 0 ? perturb(prev, d) : prev;
      FrameState cm = which == 1 ? perturb(cur, d) : cur;
      Vec9 rm = imu_residual(pre, pm, cm, kGravity).r;
      Vec9 fd = (rp - rm) / (2 * h);
      double rel = (J.col(k) - fd).norm() / std::max(1.0, fd.norm());
      INFO("state " << which << " column " << k);
      CHECK(rel < 1e-5);
    }
  }
}

TEST_CASE("covariance grows and stays symmetric positive definite") {
  std::vector<ImuSample> s = make_stream(0, 1.0, ImuBias{});
  double prev_trace = 0;
  for (size_t n : {size_t(20), size_t(100), s.size()}) {
    std::vector<ImuSample> sub(s.begin(), s.begin() + n);
    PreintegratedImu pre = preintegrate(sub, ImuBias{}, ImuNoise{});
    double tr = pre.covariance.trace();
    CHECK(tr > prev_trace);
    prev_trace = tr;
    CHECK((pre.covariance - pre.covariance.transpose()).norm() < 1e-15);
    Eigen::SelfAdjointEigenSolver<Mat9> es(pre.covariance);
    CHECK(es.eigenvalues().minCoeff() > 0);
  }
}

TEST_CASE("residual is invariant to a world yaw of both states") {
  std::vector<ImuSample> s = make_stream(0, 0.3, ImuBias{});
  PreintegratedImu pre = preintegrate(s, ImuBias{}, ImuNoise{});
  FrameState prev;
  prev.pose = Pose(so3_exp(Vec3(0.1, 0.2, 0.3)), Vec3(1, 2, 3));
  prev.velocity = Vec3(0.2, -0.4, 0.1);
  FrameState cur = predict_state(prev, pre);
  cur.pose.t += Vec3(0.01, -0.02, 0.03);
  ImuResidual r0 = imu_residual(pre, prev, cur, kGravity);

  Pose yaw(so3_exp(Vec3(0, 0, 1.2)), Vec3(5, -1, 2));
  FrameState prev2 = prev, cur2 = cur;
  prev2.pose = yaw * prev.pose;
  prev2.velocity = yaw.rotation() * prev.velocity;
  cur2.pose = yaw * cur.pose;
  cur2.velocity = yaw.rotation() * cur.velocity;
  ImuResidual r1 = imu_residual(pre, prev2, cur2, kGravity);
  CHECK((r0.r - r1.r).norm() < 1e-10);
}

TEST_CASE("bias walk residual scales with time and sigma") {
  ImuBias a, b;
  b.bg = Vec3(0.01, 0, 0);
  b.ba = Vec3(0, 0.1, 0);
  BiasWalkResidual r = bias_walk_residual(a, b, 1e-3, 1e-2, 2.0);
  CHECK(r.r.head<3>().isApprox(b.bg));
  CHECK(r.r.tail<3>().isApprox(b.ba));
  CHECK(r.information(0, 0) == doctest::Approx(1.0 / (1e-6 * 2.0)));
  CHECK(r.information(3, 3) == doctest::Approx(1.0 / (1e-4 * 2.0)));
  CHECK_THROWS_AS(bias_walk_residual(a, b, 0.0, 1e-2, 1.0), Error);
}
