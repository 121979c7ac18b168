// Scratch harness: frame-to-frame dense tracking against simulator ground
// truth with near-ideal IMU. Not installed; used for tuning.
#include "ovis/dense_frontend.hpp"
#include "ovis/simulator.hpp"

#include <cstdio>

using namespace ovis;

int main(int argc, char** argv) {
  std::string stock = argc > 1 ? argv[1] : "static";
  double t_begin = argc > 2 ? atof(argv[2]) : 2.0;
  double t_end = argc > 3 ? atof(argv[3]) : 6.0;
  bool realistic = argc > 4 && std::string(argv[4]) == "real";
  SceneSpec spec = make_stock_spec(stock, 1);
  if (!realistic) {
    spec.imu_noise.gyro_density = 1e-8;
    spec.imu_noise.accel_density = 1e-8;
    spec.imu_bias = ImuBias{};
  }
  ImuGroundTruth imu = generate_imu(spec);

  double dt_f = 1.0 / spec.frame_rate;
  auto interp = [&](double t) {
    const auto& v = imu.samples;
    size_t hi = 1;
    while (hi + 1 < v.size() && v[hi].timestamp < t) ++hi;
    const ImuSample &a = v[hi - 1], &b = v[hi];
    double w = (t - a.timestamp) / (b.timestamp - a.timestamp);
    ImuSample s;
    s.timestamp = t;
    s.gyro = (1 - w) * a.gyro + w * b.gyro;
    s.accel = (1 - w) * a.accel + w * b.accel;
    return s;
  };
  auto slice = [&](double t0, double t1) {
    std::vector<ImuSample> out;
    out.push_back(interp(t0));
    for (const ImuSample& s : imu.samples) {
      if (s.timestamp > t0 + 1e-9 && s.timestamp < t1 - 1e-9) out.push_back(s);
    }
    out.push_back(interp(t1));
    return out;
  };
  auto gt_state = [&](double t) {
    FrameState st;
    st.pose = camera_pose(spec.trajectory, t);  // T_BC = identity
    st.velocity = spec.trajectory.pos.d1(t);
    return st;
  };

  DenseConfig cfg;
  FrameState state = gt_state(t_begin);
  state.bias = spec.imu_bias;  // true bias; isolates tracking from init error
  RenderedFrame prev = render_frame(spec, t_begin);
  Pyramid prev_pyr = build_pyramid(prev.frame, spec.camera, cfg.levels);

  for (double t = t_begin + dt_f; t <= t_end + 1e-9; t += dt_f) {
    RenderedFrame cur = render_frame(spec, t);
    Pyramid pyr = build_pyramid(cur.frame, spec.camera, cfg.levels);
    // IMU timestamps are on the 200 Hz grid; frame times may fall between.
    std::vector<ImuSample> span = slice(t - dt_f, t);
    PreintegratedImu pre = preintegrate(span, state.bias, spec.imu_noise);
    ClusterSegmentation seg = cluster_depth(cur.frame.depth, 24, 42);
    TrackResult tr = track_frame(prev_pyr, state, pyr, pre, seg, cfg, Pose());
    state = tr.state;
    FrameState gt = gt_state(t);
    Vec3 dp = state.pose.t - gt.pose.t;
    double dr = so3_log(Mat3(gt.pose.rotation().transpose() * state.pose.rotation())).norm();
    printf("t=%6.3f perr=%8.5f rerr=%8.5f verr=%8.5f dbg=%8.5f dba=%8.5f valid=%d iters=%d/%d/%d\n",
           t, dp.norm(), dr, (state.velocity - gt.velocity).norm(),
           (state.bias.bg - spec.imu_bias.bg).norm(), (state.bias.ba - spec.imu_bias.ba).norm(),
           tr.diag.valid_pixels, tr.diag.iters_per_level[0], tr.diag.iters_per_level[1],
           tr.diag.iters_per_level[2]);
    prev_pyr = std::move(pyr);
  }
  return 0;
}
