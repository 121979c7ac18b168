#include <cstdio>
#include <random>
#include "ovis/imu.hpp"
using namespace ovis;

int main() {
  std::mt19937 rng(7);
  std::normal_distribution<double> nd(0, 1);
  auto rnd3 = [&] { return Vec3(nd(rng), nd(rng), nd(rng)); };

  ImuBias lin_bias;
  lin_bias.bg = Vec3(0.01, -0.02, 0.015);
  lin_bias.ba = Vec3(0.1, -0.05, 0.2);
  std::vector<ImuSample> samples;
  double dt = 0.005;
  for (int i = 0; i <= 100; ++i) {
    ImuSample s;
    s.timestamp = i * dt;
    s.gyro = Vec3(0.3, -0.2, 0.5) + 0.1 * rnd3();
    s.accel = Vec3(0.5, 9.6, 1.0) + 0.2 * rnd3();
    samples.push_back(s);
  }
  PreintegratedImu pre = preintegrate(samples, lin_bias, ImuNoise{});

  // 1) first-order bias correction vs re-preintegration
  Vec3 dba(0.02, -0.01, 0.03), dbg(0.002, 0.001, -0.003);
  ImuBias nb;
  nb.bg = lin_bias.bg + dbg;
  nb.ba = lin_bias.ba + dba;
  PreintegratedImu pre2 = preintegrate(samples, nb, ImuNoise{});
  printf("dP corr vs repre: %.3e (|dP| %.3f)\n", (pre.corrected_dP(nb) - pre2.dP).norm(),
         pre2.dP.norm());
  printf("dV corr vs repre: %.3e (|dV| %.3f)\n", (pre.corrected_dV(nb) - pre2.dV).norm(),
         pre2.dV.norm());
  printf("dR corr vs repre: %.3e\n",
         so3_log((pre.corrected_dR(nb).transpose() * pre2.dR).eval()).norm());

  // 2) FD of imu_residual wrt prev-state bias columns (9..14)
  FrameState s1;
  s1.pose = Pose(so3_exp(Vec3(0.2, -0.1, 0.3)), Vec3(1, 2, 1.5));
  s1.velocity = Vec3(0.3, -0.2, 0.1);
  s1.bias = lin_bias;
  FrameState s2 = predict_state(s1, pre, kGravity);
  s2.pose.t += Vec3(0.01, -0.02, 0.005);
  s2.bias = s1.bias;
  ImuResidual rr = imu_residual(pre, s1, s2, kGravity);
  double eps = 1e-6;
  for (int j = 9; j < 15; ++j) {
    FrameState sp = s1;
    Eigen::Matrix<double, 6, 1> db = Eigen::Matrix<double, 6, 1>::Zero();
    db(j - 9) = eps;
    sp.bias.bg += db.head<3>();
    sp.bias.ba += db.tail<3>();
    ImuResidual rp = imu_residual(pre, sp, s2, kGravity);
    Vec9 fd = (rp.r - rr.r) / eps;
    Vec9 an = rr.J_prev.col(j);
    printf("prev col %2d: fd-an max %.3e  (|an| %.3e)\n", j,
           (fd - an).cwiseAbs().maxCoeff(), an.norm());
  }
  return 0;
}
