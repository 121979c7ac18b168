// Scratch: how non-stationary is the opening window, and what bias error
// does mean-based initialization pick up?
#include "ovis/simulator.hpp"
#include <cstdio>

using namespace ovis;

int main() {
  SceneSpec spec = make_stock_spec("static", 1);
  SceneSpec clean = spec;
  clean.imu_noise.gyro_density = 1e-12;
  clean.imu_noise.accel_density = 1e-12;
  ImuGroundTruth ref = generate_imu(clean);
  for (double T : {0.5, 1.0, 1.5, 2.0}) {
    Vec3 gm = Vec3::Zero(), am = Vec3::Zero();
    int n = 0;
    for (const ImuSample& s : ref.samples) {
      if (s.timestamp > T) break;
      gm += s.gyro; am += s.accel; ++n;
    }
    gm /= n; am /= n;
    Vec3 bg_err = gm - spec.imu_bias.bg;
    printf("T=%.1f bg_err=(%9.2e %9.2e %9.2e) |f_mean|=%.5f\n", T, bg_err.x(), bg_err.y(),
           bg_err.z(), am.norm());
  }
  for (double t : {0.5, 1.0, 1.5, 1.8, 1.95, 2.0}) {
    Vec3 v = spec.trajectory.pos.d1(t);
    Vec3 a = spec.trajectory.pos.d2(t);
    printf("t=%.2f |v|=%.4f |a|=%.4f yaw'=%.4f pitch'=%.4f\n", t, v.norm(), a.norm(),
           spec.trajectory.yaw.d1(t), spec.trajectory.pitch.d1(t));
  }
  return 0;
}
