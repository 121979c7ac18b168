// Scratch harness: windowed BA on a synthetic stationary rig with known
// ground truth. Not installed; used for tuning.
#include "ovis/backend.hpp"
#include "ovis/segmentation.hpp"

#include <cstdio>
#include <random>

using namespace ovis;

int main(int argc, char** argv) {
  bool perturb = argc > 1 && std::string(argv[1]) == "perturb";
  bool moving = argc > 1 && std::string(argv[1]) == "moving";
  CameraModel cam{160, 160, 159.5, 119.5, 0.05, 320, 240};
  Pose T_BC;  // identity

  // Body: camera z forward along world +y, camera y down (world -z).
  Mat3 R_WB;
  R_WB.col(0) = Vec3(1, 0, 0);   // cam x -> world x
  R_WB.col(1) = Vec3(0, 0, -1);  // cam y -> world -z
  R_WB.col(2) = Vec3(0, 1, 0);   // cam z -> world +y
  Pose gt_pose(R_WB, Vec3(0, 0, 1.5));

  ImuBias gt_bias;
  gt_bias.bg = Vec3(0.02, 0.02, 0.02);
  gt_bias.ba = Vec3(0.2, 0.2, 0.2);
  ImuNoise noise;
  noise.gyro_density = 0.00017;
  noise.accel_density = 0.002;

  std::mt19937_64 rng(7);
  std::normal_distribution<double> n01;

  // Points on a wall 4m ahead.
  std::vector<Vec3> pts_w;
  for (int i = 0; i < 200; ++i) {
    double u = 20 + (i % 20) * 14.0, v = 20 + (i / 20) * 20.0;
    double d = 3.5 + 0.8 * n01(rng);
    Vec3 pc = back_project(cam, Vec2(u, v), std::max(1.0, d));
    pts_w.push_back(gt_pose * pc);
  }

  const int n_kf = 6;
  const double kf_dt = 0.5;
  Map map;
  ClusterSegmentation seg;
  seg.K = 1;
  seg.labels = Image<uint16_t>(cam.width, cam.height, 0);
  seg.scores = {1.0, 1.0};
  ImageF depth(cam.width, cam.height, 4.0f);

  // Constant world acceleration along camera x when in moving mode.
  Vec3 acc_w = moving ? Vec3(0.3, 0, 0) : Vec3::Zero();
  auto gt_state_at = [&](double t) {
    FrameState st;
    st.pose = Pose(R_WB, gt_pose.t + 0.5 * acc_w * t * t);
    st.velocity = acc_w * t;
    st.bias = gt_bias;
    return st;
  };

  for (int i = 0; i < n_kf; ++i) {
    Keyframe kf;
    kf.timestamp = i * kf_dt;
    kf.state = gt_state_at(kf.timestamp);
    kf.seg = seg;
    kf.frame.depth = depth;
    map.add_keyframe(std::move(kf));
  }
  for (size_t p = 0; p < pts_w.size(); ++p) {
    MapPoint mp;
    mp.id = int(p);
    mp.position = pts_w[p];
    mp.created_kf = 0;
    mp.last_seen_kf = n_kf - 1;
    for (int i = 0; i < n_kf; ++i) {
      Vec3 pc = (gt_state_at(i * kf_dt).pose * T_BC).inverse() * pts_w[p];
      if (pc.z() < 0.5) continue;
      Vec3 uvs = project_stereo(cam, pc);
      if (uvs(0) < 2 || uvs(0) > cam.width - 3 || uvs(1) < 2 || uvs(1) > cam.height - 3) continue;
      StereoKeypoint z;
      z.u = uvs(0) + 0.3 * n01(rng);
      z.v = uvs(1) + 0.3 * n01(rng);
      z.ur = uvs(2) + 0.6 * n01(rng);
      mp.observations[i] = z;
    }
    if (mp.observations.empty()) continue;
    map.points()[mp.id] = mp;
  }

  // IMU consistent with the constant-acceleration trajectory.
  auto make_link = [&](int a, int b, const ImuBias& lin) {
    std::vector<ImuSample> ss;
    double rate = 200.0;
    for (double t = a * kf_dt; t <= b * kf_dt + 1e-9; t += 1.0 / rate) {
      ImuSample s;
      s.timestamp = t;
      s.gyro = gt_bias.bg + std::sqrt(rate) * noise.gyro_density * Vec3(n01(rng), n01(rng), n01(rng));
      s.accel = R_WB.transpose() * (acc_w + Vec3(0, 0, 9.81)) + gt_bias.ba +
                std::sqrt(rate) * noise.accel_density * Vec3(n01(rng), n01(rng), n01(rng));
      ss.push_back(s);
    }
    ImuLink l;
    l.from_kf = a;
    l.to_kf = b;
    l.pre = preintegrate(ss, lin, noise);
    return l;
  };

  if (perturb) {
    for (int i = 1; i < n_kf; ++i) {
      FrameState& st = map.keyframes().at(i).state;
      Vec6 d;
      d << 0.01 * n01(rng), 0.01 * n01(rng), 0.01 * n01(rng), 0.003 * n01(rng), 0.003 * n01(rng),
          0.003 * n01(rng);
      st.pose = se3_exp(d) * st.pose;
      st.velocity += 0.02 * Vec3(n01(rng), n01(rng), n01(rng));
    }
  }
  if (moving) {
    // Emulate a lagging front end: displacement and velocity 5% short.
    for (int i = 1; i < n_kf; ++i) {
      FrameState& st = map.keyframes().at(i).state;
      st.pose.t = gt_pose.t + 0.95 * (st.pose.t - gt_pose.t);
      st.velocity *= 0.95;
    }
  }

  std::vector<ImuLink> links;
  for (int i = 0; i + 1 < n_kf; ++i)
    links.push_back(make_link(i, i + 1, map.keyframes().at(i).state.bias));

  SlidingWindow window;
  for (int i = 0; i < n_kf; ++i) window.keyframes.push_back(i);
  populate_window_points(window, map);

  BaConfig cfg;
  if (argc > 2) cfg.sigma_ba = atof(argv[2]);
  if (argc > 3) cfg.sigma_bg = atof(argv[3]);
  auto total_energy = [&]() {
    double er = 0, ei = 0, eb = 0;
    for (const auto& [pid, pt] : map.points()) {
      for (const auto& [kf_id, z] : pt.observations) {
        ReprojTerm t = robust_reproj_cost(pt, map.keyframes().at(kf_id), z, cam, T_BC, cfg);
        er += t.cost;
      }
    }
    for (const ImuLink& l : links) {
      ImuResidual r = imu_residual(l.pre, map.keyframes().at(l.from_kf).state,
                                   map.keyframes().at(l.to_kf).state, kGravity);
      ei += r.r.dot(r.information * r.r);
      printf("    link %d-%d |rR|=%.2e |rV|=%.2e |rP|=%.2e info_diag(0,3,6)=%.2e %.2e %.2e\n",
             l.from_kf, l.to_kf, r.r.segment<3>(0).norm(), r.r.segment<3>(3).norm(),
             r.r.segment<3>(6).norm(), r.information(0, 0), r.information(3, 3),
             r.information(6, 6));
      double dt = kf_dt;
      BiasWalkResidual bw =
          bias_walk_residual(map.keyframes().at(l.from_kf).state.bias,
                             map.keyframes().at(l.to_kf).state.bias, cfg.sigma_bg, cfg.sigma_ba, dt);
      eb += bw.r.dot(bw.information * bw.r);
    }
    printf("  energy reproj=%.2f imu=%.2f bias=%.2f total=%.2f\n", er, ei, eb, er + ei + eb);
  };
  printf("at initial (lagged) state:\n");
  total_energy();
  {
    std::vector<FrameState> saved;
    for (int i = 0; i < n_kf; ++i) saved.push_back(map.keyframes().at(i).state);
    for (int i = 0; i < n_kf; ++i) map.keyframes().at(i).state = gt_state_at(i * kf_dt);
    printf("at ground-truth state:\n");
    total_energy();
    for (int i = 0; i < n_kf; ++i) map.keyframes().at(i).state = saved[i];
  }
  for (int round = 0; round < 8; ++round) {
    BaDiagnostics d = build_and_solve_window(window, map, links, cfg, cam, T_BC);
    const FrameState& s1 = map.keyframes().at(1).state;
    const FrameState& sN = map.keyframes().at(n_kf - 1).state;
    printf("round %d lm=%d acc=%d removed=%d E=%.3f\n", round, d.lm_iters, d.accepted_steps,
           d.points_removed, d.final_energy);
    for (int i : {1, n_kf - 1}) {
      const FrameState& s = map.keyframes().at(i).state;
      FrameState gts = gt_state_at(i * kf_dt);
      Vec3 dp = s.pose.t - gts.pose.t;
      double dr = so3_log(Mat3(gts.pose.rotation().transpose() * s.pose.rotation())).norm();
      printf("  kf%d perr=%.5f rerr=%.5f verr=%.5f dbg=(%.4f %.4f %.4f) dba=(%.3f %.3f %.3f)\n",
             i, dp.norm(), dr, (s.velocity - gts.velocity).norm(), s.bias.bg.x() - gt_bias.bg.x(),
             s.bias.bg.y() - gt_bias.bg.y(), s.bias.bg.z() - gt_bias.bg.z(),
             s.bias.ba.x() - gt_bias.ba.x(), s.bias.ba.y() - gt_bias.ba.y(),
             s.bias.ba.z() - gt_bias.ba.z());
    }
    (void)s1;
    (void)sN;
  }
  printf("after BA:\n");
  total_energy();
  {
    for (int i = 0; i < n_kf; ++i) map.keyframes().at(i).state = gt_state_at(i * kf_dt);
    printf("at ground-truth poses with BA point estimates:\n");
    total_energy();
  }
  return 0;
}
