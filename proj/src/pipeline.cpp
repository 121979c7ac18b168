#include "ovis/pipeline.hpp"

#include "json.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

namespace ovis {

namespace fs = std::filesystem;
using nlohmann::json;

std::string run_config_to_json(const RunConfig& c) {
  json j;
  j["dense"] = {{"w_I", c.dense.w_I},
                {"w_D", c.dense.w_D},
                {"alpha_I", c.dense.alpha_I},
                {"cauchy_c", c.dense.cauchy_c},
                {"levels", c.dense.levels},
                {"max_iters", c.dense.max_iters},
                {"convergence_tol", c.dense.convergence_tol},
                {"min_valid_pixels", c.dense.min_valid_pixels},
                {"max_halvings", c.dense.max_halvings},
                {"lambda_gamma", c.dense.lambda_gamma},
                {"lambda_r", c.dense.lambda_r},
                {"lambda_p", c.dense.lambda_p},
                {"sigma_bg", c.dense.sigma_bg},
                {"sigma_ba", c.dense.sigma_ba},
                {"imu_weight", c.dense.imu_weight}};
  j["ba"] = {{"M", c.ba.M},
             {"huber_delta", c.ba.huber_delta},
             {"c_hat", c.ba.c_hat},
             {"lambda_gamma", c.ba.lambda_gamma},
             {"lambda_beta", c.ba.lambda_beta},
             {"lambda_p", c.ba.lambda_p},
             {"lambda_r", c.ba.lambda_r},
             {"sigma_bg", c.ba.sigma_bg},
             {"sigma_ba", c.ba.sigma_ba},
             {"max_outer_iters", c.ba.max_outer_iters},
             {"score_sweep_iters", c.ba.score_sweep_iters},
             {"lm_initial_damping", c.ba.lm.initial_damping},
             {"lm_up", c.ba.lm.up},
             {"lm_down", c.ba.lm.down},
             {"lm_max_iters", c.ba.lm.max_iters}};
  j["features"] = {{"budget", c.features.budget},
                   {"grid", c.features.grid},
                   {"min_score", c.features.min_score},
                   {"nms_radius", c.features.nms_radius}};
  j["matching"] = {{"search_radius", c.matching.search_radius},
                   {"max_hamming", c.matching.max_hamming},
                   {"gamma_gate", c.matching.gamma_gate}};
  j["clusters"] = c.clusters;
  j["stationary_init_secs"] = c.stationary_init_secs;
  j["keyframe_max_interval"] = c.keyframe_max_interval;
  j["keyframe_min_obs"] = c.keyframe_min_obs;
  j["keyframe_min_overlap"] = c.keyframe_min_overlap;
  j["segmentation_off"] = c.segmentation_off;
  j["imu_off"] = c.imu_off;
  j["deterministic"] = c.deterministic;
  j["seed"] = c.seed;
  return j.dump(2);
}

RunConfig run_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    fail("ConfigInvalid", std::string("config parse: ") + e.what());
  }
  RunConfig c;
  try {
    if (j.contains("dense")) {
      const json& d = j["dense"];
      c.dense.w_I = d.value("w_I", c.dense.w_I);
      c.dense.w_D = d.value("w_D", c.dense.w_D);
      c.dense.alpha_I = d.value("alpha_I", c.dense.alpha_I);
      c.dense.cauchy_c = d.value("cauchy_c", c.dense.cauchy_c);
      c.dense.levels = d.value("levels", c.dense.levels);
      c.dense.max_iters = d.value("max_iters", c.dense.max_iters);
      c.dense.convergence_tol = d.value("convergence_tol", c.dense.convergence_tol);
      c.dense.min_valid_pixels = d.value("min_valid_pixels", c.dense.min_valid_pixels);
      c.dense.max_halvings = d.value("max_halvings", c.dense.max_halvings);
      c.dense.lambda_gamma = d.value("lambda_gamma", c.dense.lambda_gamma);
      c.dense.lambda_r = d.value("lambda_r", c.dense.lambda_r);
      c.dense.lambda_p = d.value("lambda_p", c.dense.lambda_p);
      c.dense.sigma_bg = d.value("sigma_bg", c.dense.sigma_bg);
      c.dense.sigma_ba = d.value("sigma_ba", c.dense.sigma_ba);
      c.dense.imu_weight = d.value("imu_weight", c.dense.imu_weight);
    }
    if (j.contains("ba")) {
      const json& b = j["ba"];
      c.ba.M = b.value("M", c.ba.M);
      c.ba.huber_delta = b.value("huber_delta", c.ba.huber_delta);
      c.ba.c_hat = b.value("c_hat", c.ba.c_hat);
      c.ba.lambda_gamma = b.value("lambda_gamma", c.ba.lambda_gamma);
      c.ba.lambda_beta = b.value("lambda_beta", c.ba.lambda_beta);
      c.ba.lambda_p = b.value("lambda_p", c.ba.lambda_p);
      c.ba.lambda_r = b.value("lambda_r", c.ba.lambda_r);
      c.ba.sigma_bg = b.value("sigma_bg", c.ba.sigma_bg);
      c.ba.sigma_ba = b.value("sigma_ba", c.ba.sigma_ba);
      c.ba.max_outer_iters = b.value("max_outer_iters", c.ba.max_outer_iters);
      c.ba.score_sweep_iters = b.value("score_sweep_iters", c.ba.score_sweep_iters);
      c.ba.lm.initial_damping = b.value("lm_initial_damping", c.ba.lm.initial_damping);
      c.ba.lm.up = b.value("lm_up", c.ba.lm.up);
      c.ba.lm.down = b.value("lm_down", c.ba.lm.down);
      c.ba.lm.max_iters = b.value("lm_max_iters", c.ba.lm.max_iters);
    }
    if (j.contains("features")) {
      const json& f = j["features"];
      c.features.budget = f.value("budget", c.features.budget);
      c.features.grid = f.value("grid", c.features.grid);
      c.features.min_score = f.value("min_score", c.features.min_score);
      c.features.nms_radius = f.value("nms_radius", c.features.nms_radius);
    }
    if (j.contains("matching")) {
      const json& m = j["matching"];
      c.matching.search_radius = m.value("search_radius", c.matching.search_radius);
      c.matching.max_hamming = m.value("max_hamming", c.matching.max_hamming);
      c.matching.gamma_gate = m.value("gamma_gate", c.matching.gamma_gate);
    }
    c.clusters = j.value("clusters", c.clusters);
    c.stationary_init_secs = j.value("stationary_init_secs", c.stationary_init_secs);
    c.keyframe_max_interval = j.value("keyframe_max_interval", c.keyframe_max_interval);
    c.keyframe_min_obs = j.value("keyframe_min_obs", c.keyframe_min_obs);
    c.keyframe_min_overlap = j.value("keyframe_min_overlap", c.keyframe_min_overlap);
    c.segmentation_off = j.value("segmentation_off", c.segmentation_off);
    c.imu_off = j.value("imu_off", c.imu_off);
    c.deterministic = j.value("deterministic", c.deterministic);
    c.seed = j.value("seed", c.seed);
  } catch (const std::exception& e) {
    fail("ConfigInvalid", std::string("config field: ") + e.what());
  }
  if (c.clusters < 1 || c.ba.M < 1 || c.dense.levels < 1)
    fail("ConfigInvalid", "clusters, ba.M and dense.levels must be positive");
  return c;
}

namespace {

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

ImuSample lerp_sample(const ImuSample& a, const ImuSample& b, double t) {
  double span = b.timestamp - a.timestamp;
  double w = span > 0 ? (t - a.timestamp) / span : 0.0;
  ImuSample s;
  s.timestamp = t;
  s.gyro = (1 - w) * a.gyro + w * b.gyro;
  s.accel = (1 - w) * a.accel + w * b.accel;
  return s;
}

// Samples covering [t0, t1] with interpolated boundary samples.
std::vector<ImuSample> slice_imu(const std::vector<ImuSample>& imu, double t0, double t1) {
  std::vector<ImuSample> out;
  if (imu.empty() || t1 <= t0) return out;
  auto at = [&](double t) {
    if (t <= imu.front().timestamp) return ImuSample{t, imu.front().gyro, imu.front().accel};
    if (t >= imu.back().timestamp) return ImuSample{t, imu.back().gyro, imu.back().accel};
    size_t hi = std::upper_bound(imu.begin(), imu.end(), t,
                                 [](double v, const ImuSample& s) { return v < s.timestamp; }) -
                imu.begin();
    return lerp_sample(imu[hi - 1], imu[hi], t);
  };
  out.push_back(at(t0));
  for (const ImuSample& s : imu) {
    if (s.timestamp > t0 + 1e-9 && s.timestamp < t1 - 1e-9) out.push_back(s);
  }
  out.push_back(at(t1));
  return out;
}

ClusterSegmentation safe_cluster(const ImageF& depth, int K, uint64_t seed) {
  try {
    return cluster_depth(depth, K, seed);
  } catch (const Error&) {
    // Degenerate depth (all invalid or near-constant): one catch-all cluster.
    ClusterSegmentation seg;
    seg.K = 1;
    seg.labels = Image<uint16_t>(depth.width, depth.height, 0);
    for (int y = 0; y < depth.height; ++y)
      for (int x = 0; x < depth.width; ++x)
        if (depth.at(x, y) <= 0) seg.labels.at(x, y) = 1;
    seg.centroids.resize(1, Eigen::Vector3d::Zero());
    seg.scores = {1.0, 1.0};
    return seg;
  }
}

struct FrameAnchor {
  int kf_id = -1;
  Pose rel;  // anchor-keyframe-from-body at track time
  double timestamp = 0;
};

}  // namespace

PipelineResult run_pipeline(const RunConfig& cfg_in, const std::string& dataset_dir,
                            const std::string& out_dir) {
  auto t_start = std::chrono::steady_clock::now();
  if (cfg_in.imu_off)
    fail("AblationUnsupported", "imu_off: the method is visual-inertial by definition");

  RunConfig cfg = cfg_in;
  if (cfg.segmentation_off) {
    cfg.dense.update_scores = false;
    cfg.ba.update_scores = false;
  }

  Dataset ds = open_dataset(dataset_dir);
  if (ds.frames.empty()) fail("DatasetMalformed", "dataset has no frames");
  const CameraModel& cam = ds.calib.cam;
  const Pose& T_BC = ds.calib.body_from_cam;
  bool have_masks = fs::exists(fs::path(dataset_dir) / "mask_gt");

  PipelineResult res;

  // Gravity and bias initialization from the stationary opening window:
  // world z aligned with the mean specific-force direction, gyro bias from
  // the mean rate, accelerometer bias from the residual magnitude along
  // gravity (the tangential part is unobservable while stationary and is
  // recovered by the sliding-window solver once the heading changes).
  double t0 = ds.frames.front().timestamp;
  std::vector<ImuSample> init_win = slice_imu(ds.imu, t0, t0 + cfg.stationary_init_secs);
  if (init_win.size() < 10) fail("DatasetMalformed", "too few IMU samples for initialization");
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

  Map map;
  SlidingWindow window;
  std::vector<ImuLink> links;
  std::vector<FrameAnchor> anchors;

  Pyramid prev_pyr;
  double prev_t = t0;
  int last_kf_id = -1;
  double last_kf_time = t0;
  std::ofstream diag_out;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    fs::create_directories(fs::path(out_dir) / "masks");
    fs::create_directories(fs::path(out_dir) / "labels");
    diag_out.open((fs::path(out_dir) / "diagnostics.jsonl").string());
  }

  for (size_t fi = 0; fi < ds.frames.size(); ++fi) {
    RgbdFrame frame = ds.load_frame(fi);
    double t = frame.timestamp;
    Pyramid pyr = build_pyramid(frame, cam, cfg.dense.levels);
    uint64_t frame_seed = splitmix64(cfg.seed ^ (0xf00dull + fi));
    ClusterSegmentation seg = safe_cluster(frame.depth, cfg.clusters, frame_seed);

    bool is_kf = false;
    int dbg_tracked = -1;
    double dbg_overlap = 1.0;
    if (fi == 0) {
      is_kf = true;
    } else {
      std::vector<ImuSample> span = slice_imu(ds.imu, prev_t, t);
      PreintegratedImu pre = preintegrate(span, state.bias, ImuNoise{});
      std::vector<ScoredPoint> prior_pts =
          cfg.segmentation_off ? std::vector<ScoredPoint>{} : map.scored_points();
      TrackResult tr =
          track_frame(prev_pyr, state, pyr, pre, seg, cfg.dense, T_BC, prior_pts);
      state = tr.state;
      if (cfg.dense.update_scores) seg.scores = tr.scores;

      // Keyframe policy: starved static observations, stale interval, or
      // low warped-pixel overlap with the last keyframe.
      int tracked = 0;
      {
        Pose cw = (state.pose * T_BC).inverse();
        for (const auto& [pid, pt] : map.points()) {
          if (pt.beta < 0.5) continue;
          Vec3 pc = cw * pt.position;
          if (pc.z() < kDepthEps) continue;
          double u = cam.fx * pc.x() / pc.z() + cam.cx;
          double v = cam.fy * pc.y() / pc.z() + cam.cy;
          int xi = int(std::lround(u)), yi = int(std::lround(v));
          if (!frame.depth.inside(xi, yi)) continue;
          double d = frame.depth.at(xi, yi);
          if (d <= 0 || std::abs(d - pc.z()) > std::max(0.1, 0.1 * pc.z())) continue;
          if (seg.score_at(xi, yi) < 0.5) continue;
          ++tracked;
        }
      }
      double overlap = 1.0;
      if (last_kf_id >= 0) {
        const Keyframe& kf = map.keyframes().at(last_kf_id);
        Pose delta_cam = (kf.state.pose * T_BC).inverse() * (state.pose * T_BC);
        DenseResidualMap rm = dense_residuals(kf.frame, frame, delta_cam, cam);
        long n_depth = 0, n_valid = 0;
        for (int y = 0; y < frame.depth.height; ++y)
          for (int x = 0; x < frame.depth.width; ++x) {
            if (frame.depth.at(x, y) > 0) {
              ++n_depth;
              if (rm.valid[y * rm.width + x]) ++n_valid;
            }
          }
        overlap = n_depth ? double(n_valid) / double(n_depth) : 0.0;
      }
      is_kf = (tracked < cfg.keyframe_min_obs) || (t - last_kf_time > cfg.keyframe_max_interval) ||
              (overlap < cfg.keyframe_min_overlap);
      dbg_tracked = tracked;
      dbg_overlap = overlap;
    }

    if (is_kf) {
      Keyframe kf;
      kf.timestamp = t;
      kf.state = state;
      kf.seg = seg;
      kf.features = extract_features(frame, cam, cfg.features);
      kf.frame = frame;
      int kf_id = map.add_keyframe(std::move(kf));
      res.keyframe_frames[kf_id] = int(fi);
      MatchStats ms = map.match_and_triangulate(kf_id, cam, T_BC, cfg.matching);
      if (cfg.verbose) {
        std::vector<double> errs;
        Pose cw = (state.pose * T_BC).inverse();
        for (const auto& [pid, pt] : map.points()) {
          auto it = pt.observations.find(kf_id);
          if (it == pt.observations.end() || pt.created_kf == kf_id) continue;
          Vec3 pc = cw * pt.position;
          if (pc.z() < kDepthEps) continue;
          Vec3 uvs = project_stereo(cam, pc);
          errs.push_back(std::hypot(it->second.u - uvs(0), it->second.v - uvs(1)));
        }
        std::sort(errs.begin(), errs.end());
        if (!errs.empty()) {
          double med = errs[errs.size() / 2];
          double p90 = errs[size_t(errs.size() * 0.9)];
          int big = int(errs.end() - std::lower_bound(errs.begin(), errs.end(), 3.0));
          std::fprintf(stderr, "      match resid n=%zu med=%.2f p90=%.2f frac>3px=%.2f\n",
                       errs.size(), med, p90, double(big) / errs.size());
        }
      }

      if (have_masks) {
        char name[32];
        std::snprintf(name, sizeof(name), "%06d.png", int(fi));
        ImageU8 gt_mask = read_png8((fs::path(dataset_dir) / "mask_gt" / name).string());
        for (const auto& [pid, pt] : map.points()) {
          if (pt.created_kf != kf_id) continue;
          const StereoKeypoint& kp = pt.observations.at(kf_id);
          int xi = std::clamp(int(std::lround(kp.u)), 0, gt_mask.width - 1);
          int yi = std::clamp(int(std::lround(kp.v)), 0, gt_mask.height - 1);
          res.point_fates[pid] = {int(gt_mask.at(xi, yi)), res.ba_invocations, -1};
        }
      }

      if (last_kf_id >= 0) {
        ImuLink link;
        link.from_kf = last_kf_id;
        link.to_kf = kf_id;
        link.pre = preintegrate(slice_imu(ds.imu, last_kf_time, t),
                                map.keyframes().at(last_kf_id).state.bias, ImuNoise{});
        links.push_back(link);
      }
      window.keyframes.push_back(kf_id);
      if (int(window.keyframes.size()) > cfg.ba.M + 1) {
        marginalize_oldest(window);
        std::set<int> in_window(window.keyframes.begin(), window.keyframes.end());
        links.erase(std::remove_if(links.begin(), links.end(),
                                   [&](const ImuLink& l) {
                                     return !in_window.count(l.from_kf) ||
                                            !in_window.count(l.to_kf);
                                   }),
                    links.end());
      }
      populate_window_points(window, map);

      FrameState pre_ba_state = state;
      try {
        BaDiagnostics bd = build_and_solve_window(window, map, links, cfg.ba, cam, T_BC);
        ++res.ba_invocations;
        res.sweep_violations += bd.sweep_violations;
        res.lm_violations += bd.lm_violations;
        for (int pid : bd.removed_point_ids) {
          auto it = res.point_fates.find(pid);
          if (it != res.point_fates.end()) it->second.removed_ba = res.ba_invocations;
        }
        if (diag_out.is_open()) {
          json jd;
          jd["keyframe"] = kf_id;
          jd["window"] = window.keyframes;
          jd["lm_iters"] = bd.lm_iters;
          jd["points_removed"] = bd.points_removed;
          jd["sweep_violations"] = bd.sweep_violations;
          jd["condition"] = bd.condition_estimate;
          json je = json::array();
          for (const auto& [label, e] : bd.energy_log) je.push_back({{"step", label}, {"e", e}});
          jd["energy"] = je;
          diag_out << jd.dump() << "\n";
        }
      } catch (const Error& e) {
        if (std::string(e.code()) != "SolverDiverged") throw;
        ++res.ba_invocations;
        ++res.diverged_windows;
        if (diag_out.is_open()) {
          diag_out << json{{"keyframe", kf_id}, {"diverged", true}}.dump() << "\n";
        }
      }
      state = map.keyframes().at(kf_id).state;
      if (cfg.verbose) {
        std::fprintf(stderr,
                     "kf %3d f=%3d t=%6.2f tracked=%3d overlap=%.2f matched=%3d new=%3d "
                     "pts=%4zu pos=(%6.2f %6.2f %6.2f) bg=(%.4f %.4f %.4f) ba=(%.3f %.3f %.3f)\n",
                     kf_id, int(fi), t, dbg_tracked, dbg_overlap, ms.matched, ms.created,
                     map.points().size(), state.pose.t.x(), state.pose.t.y(), state.pose.t.z(),
                     state.bias.bg.x(), state.bias.bg.y(), state.bias.bg.z(), state.bias.ba.x(),
                     state.bias.ba.y(), state.bias.ba.z());
        Vec3 dpos = state.pose.t - pre_ba_state.pose.t;
        std::fprintf(stderr,
                     "      pre-ba bg=(%.4f %.4f %.4f) ba=(%.3f %.3f %.3f) ba_dpos=%.4f\n",
                     pre_ba_state.bias.bg.x(), pre_ba_state.bias.bg.y(), pre_ba_state.bias.bg.z(),
                     pre_ba_state.bias.ba.x(), pre_ba_state.bias.ba.y(), pre_ba_state.bias.ba.z(),
                     dpos.norm());
      }
      last_kf_id = kf_id;
      last_kf_time = t;
      anchors.push_back({kf_id, Pose(), t});
    } else {
      Pose kf_pose = map.keyframes().at(last_kf_id).state.pose;
      anchors.push_back({last_kf_id, kf_pose.inverse() * state.pose, t});
    }

    prev_pyr = std::move(pyr);
    prev_t = t;
  }

  for (const FrameAnchor& a : anchors) {
    Pose p = map.keyframes().at(a.kf_id).state.pose * a.rel;
    res.trajectory.push_back({a.timestamp, p});
  }
  for (const auto& [kf_id, kf] : map.keyframes()) {
    res.keyframe_states[kf_id] = kf.state;
    ImageF gamma(kf.seg.labels.width, kf.seg.labels.height, 1.f);
    for (int y = 0; y < gamma.height; ++y)
      for (int x = 0; x < gamma.width; ++x) gamma.at(x, y) = float(kf.seg.score_at(x, y));
    res.keyframe_gamma.emplace(kf_id, std::move(gamma));
  }

  if (!out_dir.empty()) {
    write_trajectory((fs::path(out_dir) / "trajectory.txt").string(), res.trajectory);
    for (const auto& [kf_id, gamma] : res.keyframe_gamma) {
      char name[32];
      std::snprintf(name, sizeof(name), "%06d.png", res.keyframe_frames.at(kf_id));
      ImageU8 m8(gamma.width, gamma.height, 0);
      for (int y = 0; y < gamma.height; ++y)
        for (int x = 0; x < gamma.width; ++x)
          m8.at(x, y) = uint8_t(std::lround(std::clamp(double(gamma.at(x, y)), 0.0, 1.0) * 255));
      write_png8((fs::path(out_dir) / "masks" / name).string(), m8);
      write_png16((fs::path(out_dir) / "labels" / name).string(),
                  map.keyframes().at(kf_id).seg.labels);
    }
    std::ofstream mout((fs::path(out_dir) / "map.txt").string());
    mout.precision(9);
    for (const auto& [pid, pt] : map.points()) {
      mout << pid << " " << pt.position.x() << " " << pt.position.y() << " " << pt.position.z()
           << " " << pt.beta << " " << pt.observations.size() << "\n";
    }
    for (const auto& [kf_id, kf] : map.keyframes()) {
      const Pose& p = kf.state.pose;
      mout << kf_id << " " << kf.timestamp << " " << p.t.x() << " " << p.t.y() << " " << p.t.z()
           << " " << p.q.x() << " " << p.q.y() << " " << p.q.z() << " " << p.q.w() << "\n";
    }
    std::ofstream cout_((fs::path(out_dir) / "config.json").string());
    cout_ << run_config_to_json(cfg_in) << "\n";
  }

  res.runtime_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return res;
}

}  // namespace ovis
