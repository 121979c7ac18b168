// Scratch harness: frame-to-frame dense tracking over an on-disk dataset with
// the same initialization as the full pipeline, but no map and no windowed
// optimization. Compares displacement magnitude against ground truth, which is
// invariant to the free yaw of the initialized frame.
#include "ovis/backend.hpp"
#include "ovis/dense_frontend.hpp"
#include "ovis/io.hpp"
#include "ovis/segmentation.hpp"

#include <cstdio>
#include <set>

using namespace ovis;

int main(int argc, char** argv) {
  std::string root = argc > 1 ? argv[1] : "/tmp/ds_static";
  int n_frames = argc > 2 ? atoi(argv[2]) : 60;
  Dataset ds = open_dataset(root);
  const CameraModel& cam = ds.calib.cam;
  Pose T_BC = ds.calib.body_from_cam;

  std::vector<TrajectorySample> gt = read_trajectory(root + "/groundtruth.txt");

  auto interp = [&](double t) {
    const auto& v = ds.imu;
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
    for (const ImuSample& s : ds.imu)
      if (s.timestamp > t0 + 1e-9 && s.timestamp < t1 - 1e-9) out.push_back(s);
    out.push_back(interp(t1));
    return out;
  };

  // Same stationary initialization as the pipeline.
  double t0 = ds.frames.front().timestamp;
  std::vector<ImuSample> init_win = slice(t0, t0 + 1.0);
  Vec3 gyro_mean = Vec3::Zero(), accel_mean = Vec3::Zero();
  for (const ImuSample& s : init_win) {
    gyro_mean += s.gyro;
    accel_mean += s.accel;
  }
  gyro_mean /= double(init_win.size());
  accel_mean /= double(init_win.size());
  Vec3 up_body = accel_mean.normalized();
  Vec3 axis = up_body.cross(Vec3::UnitZ());
  double angle = std::atan2(axis.norm(), up_body.dot(Vec3::UnitZ()));
  Mat3 R0 = axis.norm() < 1e-12 ? Mat3::Identity() : so3_exp((axis.normalized() * angle).eval());

  FrameState state;
  state.pose = Pose(R0, Vec3::Zero());
  state.bias.bg = gyro_mean;
  state.bias.ba = (accel_mean.norm() - 9.81) * up_body;
  if (argc > 3 && std::string(argv[3]) == "truebias") {
    state.pose = gt.front().pose;
    state.bias.bg = Vec3(0.02, 0.02, 0.02);
    state.bias.ba = Vec3(0.2, 0.2, 0.2);
  }

  bool with_ba = argc > 4 && std::string(argv[4]) == "ba";
  bool kf_ref = argc > 4 && std::string(argv[4]) == "kfref";

  DenseConfig cfg;
  for (int ai = 5; ai < argc; ++ai) {
    std::string kv = argv[ai];
    auto eq = kv.find('=');
    std::string k = kv.substr(0, eq);
    double v = atof(kv.c_str() + eq + 1);
    if (k == "w_D") cfg.w_D = v;
    else if (k == "w_I") cfg.w_I = v;
    else if (k == "alpha_I") cfg.alpha_I = v;
    else if (k == "cauchy_c") cfg.cauchy_c = v;
    else if (k == "max_iters") cfg.max_iters = int(v);
    else if (k == "levels") cfg.levels = int(v);
    else if (k == "imu_weight") cfg.imu_weight = v;
    else if (k == "tol") cfg.convergence_tol = v;
    else printf("unknown key %s\n", k.c_str());
  }
  RgbdFrame prev = ds.load_frame(0);
  Pyramid prev_pyr = build_pyramid(prev, cam, cfg.levels);
  Vec3 gt0 = gt.front().pose.t;
  double prev_t = t0;

  Map map;
  SlidingWindow window;
  std::vector<ImuLink> links;
  FeatureConfig fcfg;
  MatchConfig mcfg;
  BaConfig bcfg;
  int last_kf_id = -1;
  double last_kf_time = t0;

  auto add_kf = [&](int fi, const RgbdFrame& frame, const ClusterSegmentation& seg, double t) {
    Keyframe kf;
    kf.timestamp = t;
    kf.state = state;
    kf.seg = seg;
    kf.features = extract_features(frame, cam, fcfg);
    kf.frame = frame;
    int kf_id = map.add_keyframe(std::move(kf));
    map.match_and_triangulate(kf_id, cam, T_BC, mcfg);
    if (last_kf_id >= 0) {
      ImuLink link;
      link.from_kf = last_kf_id;
      link.to_kf = kf_id;
      link.pre = preintegrate(slice(last_kf_time, t), map.keyframes().at(last_kf_id).state.bias,
                              ImuNoise{});
      links.push_back(link);
    }
    window.keyframes.push_back(kf_id);
    if (int(window.keyframes.size()) > bcfg.M + 1) {
      marginalize_oldest(window);
      std::set<int> in_win(window.keyframes.begin(), window.keyframes.end());
      links.erase(std::remove_if(links.begin(), links.end(),
                                 [&](const ImuLink& l) {
                                   return !in_win.count(l.from_kf) || !in_win.count(l.to_kf);
                                 }),
                  links.end());
    }
    populate_window_points(window, map);
    FrameState before = state;
    try {
      build_and_solve_window(window, map, links, bcfg, cam, T_BC);
    } catch (const Error& e) {
      printf("      BA diverged at kf %d: %s\n", kf_id, e.what());
    }
    state = map.keyframes().at(kf_id).state;
    printf("  kf %d f=%d ba_dpos=%.4f ba_drot=%.5f dbias_g=%.5f dbias_a=%.4f bg=(%.4f %.4f %.4f) "
           "ba=(%.3f %.3f %.3f)\n",
           kf_id, fi, (state.pose.t - before.pose.t).norm(),
           so3_log(Mat3(before.pose.rotation().transpose() * state.pose.rotation())).norm(),
           (state.bias.bg - before.bias.bg).norm(), (state.bias.ba - before.bias.ba).norm(),
           state.bias.bg.x(), state.bias.bg.y(), state.bias.bg.z(), state.bias.ba.x(),
           state.bias.ba.y(), state.bias.ba.z());
    last_kf_id = kf_id;
    last_kf_time = t;
  };

  {
    ClusterSegmentation seg0 = cluster_depth(prev.depth, 24, 42);
    if (with_ba) add_kf(0, prev, seg0, t0);
  }

  FrameState ref_state = state;
  double ref_t = t0;

  for (int fi = 1; fi < int(ds.frames.size()) && fi <= n_frames; ++fi) {
    RgbdFrame frame = ds.load_frame(fi);
    double t = frame.timestamp;
    Pyramid pyr = build_pyramid(frame, cam, cfg.levels);
    ClusterSegmentation seg = cluster_depth(frame.depth, 24, 42);
    TrackResult tr;
    if (kf_ref) {
      PreintegratedImu pre = preintegrate(slice(ref_t, t), ref_state.bias, ImuNoise{});
      tr = track_frame(prev_pyr, ref_state, pyr, pre, seg, cfg, T_BC);
    } else {
      PreintegratedImu pre = preintegrate(slice(prev_t, t), state.bias, ImuNoise{});
      FrameState pred = predict_state(state, pre, kGravity);
      tr = track_frame(prev_pyr, state, pyr, pre, seg, cfg, T_BC);
      printf("   dt=%.6f/%.6f pull=%.5f pull_v=%.5f\n", pre.dt_total, t - prev_t,
             (tr.state.pose.t - pred.pose.t).norm(), (tr.state.velocity - pred.velocity).norm());
    }
    state = tr.state;
    if (cfg.update_scores) seg.scores = tr.scores;

    size_t gi = 0;
    while (gi + 1 < gt.size() && std::abs(gt[gi + 1].timestamp - t) <
                                     std::abs(gt[gi].timestamp - t))
      ++gi;
    double d_gt = (gt[gi].pose.t - gt0).norm();
    double d_est = (state.pose.t - ((argc > 3 && std::string(argv[3]) == "truebias")
                                        ? gt0
                                        : Vec3(Vec3::Zero())))
                       .norm();
    double gmin = 1.0;
    for (double s : tr.scores) gmin = std::min(gmin, s);
    printf("f=%3d t=%6.3f |est|=%7.4f |gt|=%7.4f vnorm=%6.3f gmin=%.2f valid=%d iters=%d/%d/%d\n",
           fi, t, d_est, d_gt, state.velocity.norm(), gmin, tr.diag.valid_pixels,
           tr.diag.iters_per_level[0], tr.diag.iters_per_level[1], tr.diag.iters_per_level[2]);
    if (with_ba && fi % 8 == 0) add_kf(fi, frame, seg, t);
    if (kf_ref) {
      if (fi % 8 == 0) {
        prev_pyr = std::move(pyr);
        ref_state = state;
        ref_t = t;
      }
    } else {
      prev_pyr = std::move(pyr);
    }
    prev_t = t;
  }
  return 0;
}
