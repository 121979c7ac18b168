// Scratch: dead-reckon simulator IMU against its own ground truth.
#include "ovis/simulator.hpp"
#include <cstdio>

using namespace ovis;

int main(int argc, char** argv) {
  std::string stock = argc > 1 ? argv[1] : "static";
  bool noisy = argc > 2 && std::string(argv[2]) == "noisy";
  SceneSpec spec = make_stock_spec(stock, 1);
  if (!noisy) {
    spec.imu_noise.gyro_density = 1e-12;
    spec.imu_noise.accel_density = 1e-12;
  }
  ImuGroundTruth imu = generate_imu(spec);

  FrameState st;
  st.pose = camera_pose(spec.trajectory, 0.0);
  st.velocity = spec.trajectory.pos.d1(0.0);
  st.bias = spec.imu_bias;

  std::vector<ImuSample> chunk;
  chunk.push_back(imu.samples[0]);
  double t_next = 0.5;
  for (size_t i = 1; i < imu.samples.size(); ++i) {
    chunk.push_back(imu.samples[i]);
    double t = imu.samples[i].timestamp;
    if (t + 1e-9 >= t_next) {
      PreintegratedImu pre = preintegrate(chunk, st.bias, spec.imu_noise);
      st = predict_state(st, pre, kGravity);
      Pose gtp = camera_pose(spec.trajectory, t);
      Vec3 gtv = spec.trajectory.pos.d1(t);
      Vec3 dp = st.pose.t - gtp.t;
      double dr = so3_log(Mat3(gtp.rotation().transpose() * st.pose.rotation())).norm();
      printf("t=%6.2f perr=%9.5f rerr=%9.6f verr=%9.5f\n", t, dp.norm(), dr,
             (st.velocity - gtv).norm());
      chunk.clear();
      chunk.push_back(imu.samples[i]);
      t_next += 0.5;
    }
  }
  return 0;
}
