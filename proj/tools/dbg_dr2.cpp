// Scratch: statistics of simulator IMU noise vs declared densities.
#include "ovis/simulator.hpp"
#include <cstdio>

using namespace ovis;

int main() {
  SceneSpec spec = make_stock_spec("static", 1);
  ImuGroundTruth imu = generate_imu(spec);
  SceneSpec clean = spec;
  clean.imu_noise.gyro_density = 1e-12;
  clean.imu_noise.accel_density = 1e-12;
  ImuGroundTruth ref = generate_imu(clean);

  Vec3 gm = Vec3::Zero(), am = Vec3::Zero();
  Vec3 g2 = Vec3::Zero(), a2 = Vec3::Zero();
  int n = 0;
  // lag-1 autocovariance to catch correlated noise
  Vec3 prev_a = Vec3::Zero();
  double ac1 = 0;
  for (size_t i = 0; i < imu.samples.size(); ++i) {
    Vec3 gn = imu.samples[i].gyro - ref.samples[i].gyro;
    Vec3 an = imu.samples[i].accel - ref.samples[i].accel;
    gm += gn; am += an;
    g2 += gn.cwiseProduct(gn); a2 += an.cwiseProduct(an);
    if (i > 0) ac1 += an.dot(prev_a);
    prev_a = an;
    ++n;
  }
  gm /= n; am /= n; g2 /= n; a2 /= n;
  double rate = spec.imu_rate;
  printf("declared per-sample sigma: gyro %.4e accel %.4e\n",
         spec.imu_noise.gyro_density * std::sqrt(rate),
         spec.imu_noise.accel_density * std::sqrt(rate));
  printf("gyro noise mean (%.2e %.2e %.2e) std (%.4e %.4e %.4e)\n", gm.x(), gm.y(), gm.z(),
         std::sqrt(g2.x() - gm.x() * gm.x()), std::sqrt(g2.y() - gm.y() * gm.y()),
         std::sqrt(g2.z() - gm.z() * gm.z()));
  printf("accel noise mean (%.2e %.2e %.2e) std (%.4e %.4e %.4e)\n", am.x(), am.y(), am.z(),
         std::sqrt(a2.x() - am.x() * am.x()), std::sqrt(a2.y() - am.y() * am.y()),
         std::sqrt(a2.z() - am.z() * am.z()));
  printf("accel lag-1 autocorr %.3f\n", ac1 / (n - 1) / ((a2.x()+a2.y()+a2.z())/3 ));
  return 0;
}
