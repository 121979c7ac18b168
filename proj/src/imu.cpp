#include "ovis/imu.hpp"

#include <Eigen/Cholesky>

namespace ovis {

Mat3 PreintegratedImu::corrected_dR(const ImuBias& b) const {
  return dR * so3_exp(J_dR_bg * (b.bg - lin_bias.bg));
}

Vec3 PreintegratedImu::corrected_dV(const ImuBias& b) const {
  return dV + J_dV_bg * (b.bg - lin_bias.bg) + J_dV_ba * (b.ba - lin_bias.ba);
}

Vec3 PreintegratedImu::corrected_dP(const ImuBias& b) const {
  return dP + J_dP_bg * (b.bg - lin_bias.bg) + J_dP_ba * (b.ba - lin_bias.ba);
}

PreintegratedImu preintegrate(const std::vector<ImuSample>& samples, const ImuBias& lin_bias,
                              const ImuNoise& noise) {
  if (samples.empty()) fail("EmptyStream", "no IMU samples");
  PreintegratedImu pre;
  pre.lin_bias = lin_bias;
  for (size_t k = 0; k + 1 < samples.size(); ++k) {
    double dt = samples[k + 1].timestamp - samples[k].timestamp;
    if (dt <= 0) fail("NonMonotonicTimestamps", "IMU timestamps not strictly increasing");
    Vec3 w = 0.5 * (samples[k].gyro + samples[k + 1].gyro) - lin_bias.bg;
    Vec3 a = 0.5 * (samples[k].accel + samples[k + 1].accel) - lin_bias.ba;

    Mat3 exp_w = so3_exp(w * dt);
    Mat3 R_mid = pre.dR * so3_exp(w * (0.5 * dt));
    Mat3 jr = so3_right_jacobian(w * dt);
    Mat3 a_hat = skew(a);

    // Error-state propagation, ordering [theta, v, p].
    Mat9 A = Mat9::Identity();
    A.block<3, 3>(0, 0) = exp_w.transpose();
    A.block<3, 3>(3, 0) = -R_mid * a_hat * dt;
    A.block<3, 3>(6, 0) = -0.5 * R_mid * a_hat * dt * dt;
    A.block<3, 3>(6, 3) = Mat3::Identity() * dt;
    Eigen::Matrix<double, 9, 6> B = Eigen::Matrix<double, 9, 6>::Zero();
    B.block<3, 3>(0, 0) = jr * dt;
    B.block<3, 3>(3, 3) = R_mid * dt;
    B.block<3, 3>(6, 3) = 0.5 * R_mid * dt * dt;
    Eigen::Matrix<double, 6, 6> Q = Eigen::Matrix<double, 6, 6>::Zero();
    Q.block<3, 3>(0, 0) = Mat3::Identity() * (noise.gyro_density * noise.gyro_density / dt);
    Q.block<3, 3>(3, 3) = Mat3::Identity() * (noise.accel_density * noise.accel_density / dt);
    pre.covariance = A * pre.covariance * A.transpose() + B * Q * B.transpose();

    // First-order bias Jacobians (old values on the right-hand sides). The
    // velocity/position updates go through the half-step rotation, whose own
    // bias sensitivity differs from that of dR by half an increment.
    Mat3 exp_half = so3_exp(w * (0.5 * dt));
    Mat3 jr_half = so3_right_jacobian(w * (0.5 * dt));
    Mat3 J_mid_bg = exp_half.transpose() * pre.J_dR_bg - jr_half * (0.5 * dt);
    pre.J_dP_ba += pre.J_dV_ba * dt - 0.5 * R_mid * dt * dt;
    pre.J_dP_bg += pre.J_dV_bg * dt - 0.5 * R_mid * a_hat * J_mid_bg * dt * dt;
    pre.J_dV_ba += -R_mid * dt;
    pre.J_dV_bg += -R_mid * a_hat * J_mid_bg * dt;
    pre.J_dR_bg = exp_w.transpose() * pre.J_dR_bg - jr * dt;

    pre.dP += pre.dV * dt + 0.5 * R_mid * a * dt * dt;
    pre.dV += R_mid * a * dt;
    pre.dR = pre.dR * exp_w;
    pre.dt_total += dt;
  }
  return pre;
}

PreintegratedImu compose(const PreintegratedImu& p1, const PreintegratedImu& p2) {
  PreintegratedImu c;
  c.lin_bias = p1.lin_bias;
  c.dt_total = p1.dt_total + p2.dt_total;
  c.dR = p1.dR * p2.dR;
  c.dV = p1.dV + p1.dR * p2.dV;
  c.dP = p1.dP + p1.dV * p2.dt_total + p1.dR * p2.dP;

  Mat9 A1 = Mat9::Identity();
  A1.block<3, 3>(0, 0) = p2.dR.transpose();
  A1.block<3, 3>(3, 0) = -p1.dR * skew(p2.dV);
  A1.block<3, 3>(6, 0) = -p1.dR * skew(p2.dP);
  A1.block<3, 3>(6, 3) = Mat3::Identity() * p2.dt_total;
  Mat9 A2 = Mat9::Zero();
  A2.block<3, 3>(0, 0) = Mat3::Identity();
  A2.block<3, 3>(3, 3) = p1.dR;
  A2.block<3, 3>(6, 6) = p1.dR;
  c.covariance = A1 * p1.covariance * A1.transpose() + A2 * p2.covariance * A2.transpose();

  c.J_dR_bg = p2.dR.transpose() * p1.J_dR_bg + p2.J_dR_bg;
  c.J_dV_bg = p1.J_dV_bg + p1.dR * p2.J_dV_bg - p1.dR * skew(p2.dV) * p1.J_dR_bg;
  c.J_dV_ba = p1.J_dV_ba + p1.dR * p2.J_dV_ba;
  c.J_dP_bg = p1.J_dP_bg + p1.J_dV_bg * p2.dt_total + p1.dR * p2.J_dP_bg -
              p1.dR * skew(p2.dP) * p1.J_dR_bg;
  c.J_dP_ba = p1.J_dP_ba + p1.J_dV_ba * p2.dt_total + p1.dR * p2.J_dP_ba;
  return c;
}

ImuResidual imu_residual(const PreintegratedImu& pre, const FrameState& prev,
                         const FrameState& cur, const Vec3& gravity) {
  ImuResidual out;
  double dt = pre.dt_total;
  Mat3 R1 = prev.pose.rotation();
  Mat3 R2 = cur.pose.rotation();
  Mat3 R1t = R1.transpose();
  const Vec3& p1 = prev.pose.t;
  const Vec3& p2 = cur.pose.t;

  Mat3 dR_c = pre.corrected_dR(prev.bias);
  Vec3 dV_c = pre.corrected_dV(prev.bias);
  Vec3 dP_c = pre.corrected_dP(prev.bias);

  Vec3 r_R = so3_log(dR_c.transpose() * R1t * R2);
  Vec3 w = cur.velocity - prev.velocity - gravity * dt;
  Vec3 r_v = R1t * w - dV_c;
  Vec3 s = p2 - p1 - prev.velocity * dt - 0.5 * gravity * dt * dt;
  Vec3 r_p = R1t * s - dP_c;
  out.r << r_R, r_v, r_p;

  Eigen::LDLT<Mat9> ldlt(pre.covariance);
  out.information = ldlt.solve(Mat9::Identity());

  Mat3 jr_inv = so3_right_jacobian_inv(r_R);
  out.J_prev.setZero();
  out.J_cur.setZero();
  // r_R rows.
  out.J_prev.block<3, 3>(0, 3) = -jr_inv * R2.transpose();
  // The bias correction enters through Exp(xi), xi = J_dR_bg * dbg, so its
  // derivative carries the right Jacobian at xi, not just at the residual.
  Vec3 xi = pre.J_dR_bg * (prev.bias.bg - pre.lin_bias.bg);
  out.J_prev.block<3, 3>(0, 9) = -jr_inv * so3_exp(-r_R) * so3_right_jacobian(xi) * pre.J_dR_bg;
  out.J_cur.block<3, 3>(0, 3) = jr_inv * R2.transpose();
  // r_v rows.
  out.J_prev.block<3, 3>(3, 3) = R1t * skew(w);
  out.J_prev.block<3, 3>(3, 6) = -R1t;
  out.J_prev.block<3, 3>(3, 9) = -pre.J_dV_bg;
  out.J_prev.block<3, 3>(3, 12) = -pre.J_dV_ba;
  out.J_cur.block<3, 3>(3, 6) = R1t;
  // r_p rows.
  out.J_prev.block<3, 3>(6, 0) = -R1t;
  out.J_prev.block<3, 3>(6, 3) = R1t * skew(s + p1);
  out.J_prev.block<3, 3>(6, 6) = -R1t * dt;
  out.J_prev.block<3, 3>(6, 9) = -pre.J_dP_bg;
  out.J_prev.block<3, 3>(6, 12) = -pre.J_dP_ba;
  out.J_cur.block<3, 3>(6, 0) = R1t;
  out.J_cur.block<3, 3>(6, 3) = -R1t * skew(p2);
  return out;
}

BiasWalkResidual bias_walk_residual(const ImuBias& prev, const ImuBias& cur, double sigma_bg,
                                    double sigma_ba, double dt) {
  if (sigma_bg <= 0 || sigma_ba <= 0) fail("NonPositiveSigma", "bias random-walk sigma <= 0");
  BiasWalkResidual out;
  out.r << cur.bg - prev.bg, cur.ba - prev.ba;
  double t = std::max(dt, 1e-6);
  out.information.setZero();
  out.information.block<3, 3>(0, 0) = Mat3::Identity() / (sigma_bg * sigma_bg * t);
  out.information.block<3, 3>(3, 3) = Mat3::Identity() / (sigma_ba * sigma_ba * t);
  return out;
}

FrameState predict_state(const FrameState& prev, const PreintegratedImu& pre,
                         const Vec3& gravity) {
  double dt = pre.dt_total;
  Mat3 R1 = prev.pose.rotation();
  FrameState next;
  next.pose = Pose(Mat3(R1 * pre.corrected_dR(prev.bias)),
                   prev.pose.t + prev.velocity * dt + 0.5 * gravity * dt * dt +
                       R1 * pre.corrected_dP(prev.bias));
  next.velocity = prev.velocity + gravity * dt + R1 * pre.corrected_dV(prev.bias);
  next.bias = prev.bias;
  return next;
}

}  // namespace ovis
