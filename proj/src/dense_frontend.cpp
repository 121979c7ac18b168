#include "ovis/dense_frontend.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>

namespace ovis {

namespace {

using Mat15 = Eigen::Matrix<double, 15, 15>;
using Vec15 = Eigen::Matrix<double, 15, 1>;

Mat6 adjoint(const Pose& T) {
  Mat3 R = T.rotation();
  Mat6 A = Mat6::Zero();
  A.block<3, 3>(0, 0) = R;
  A.block<3, 3>(0, 3) = skew(T.t) * R;
  A.block<3, 3>(3, 3) = R;
  return A;
}

struct DenseEval {
  Mat6 H = Mat6::Zero();
  Vec6 g = Vec6::Zero();
  double energy = 0;                 // sum of gamma^2 * (F_I + F_D)
  std::vector<double> cluster_cost;  // unweighted per-cluster F_I + F_D
  int valid = 0;
};

// Accumulates the dense photometric/geometric term at one pyramid level.
// Jacobians are taken w.r.t. a right perturbation of the camera-frame
// relative transform and mapped to the body twist by the caller.
DenseEval evaluate_dense(const RgbdFrame& prev, const RgbdFrame& cur, const CameraModel& cam,
                         const Pose& delta_cam, const Image<uint16_t>& labels,
                         const std::vector<double>& scores, int K, const DenseConfig& cfg,
                         double alpha_I, bool with_jac) {
  DenseEval ev;
  ev.cluster_cost.assign(K, 0.0);
  Mat3 Rd = delta_cam.rotation();
  double c = cfg.cauchy_c;
  for (int y = 0; y < cur.depth.height; ++y) {
    for (int x = 0; x < cur.depth.width; ++x) {
      double d = cur.depth.at(x, y);
      if (d <= 0.0) continue;
      Vec3 p((x - cam.cx) / cam.fx * d, (y - cam.cy) / cam.fy * d, d);
      Vec3 pw = delta_cam * p;
      if (pw.z() <= kDepthEps) continue;
      double wx = cam.fx * pw.x() / pw.z() + cam.cx;
      double wy = cam.fy * pw.y() / pw.z() + cam.cy;
      BilinearSample sI = sample_bilinear(prev.intensity, wx, wy);
      BilinearSample sD = sample_bilinear(prev.depth, wx, wy, true);
      if (!sI.valid || !sD.valid) continue;
      ++ev.valid;
      int k = labels.at(x, y);
      double gamma = scores[k];
      double rI = sI.value - cur.intensity.at(x, y);
      double rD = sD.value - pw.z();
      double pI = alpha_I * cfg.w_I * rI;
      double pD = cfg.w_D * rD;
      double cost = cauchy(pI, c) + cauchy(pD, c);
      if (k < K) ev.cluster_cost[k] += cost;
      ev.energy += gamma * gamma * cost;
      if (!with_jac || gamma <= 0.0) continue;

      Eigen::Matrix<double, 3, 6> dp;
      dp.leftCols<3>() = Rd;
      dp.rightCols<3>() = -Rd * skew(p);
      Eigen::Matrix<double, 2, 6> Jw = project_jacobian(cam, pw) * dp;
      Vec6 JI = alpha_I * cfg.w_I * (sI.dx * Jw.row(0) + sI.dy * Jw.row(1)).transpose();
      Vec6 JD = cfg.w_D * ((sD.dx * Jw.row(0) + sD.dy * Jw.row(1)).transpose() -
                           dp.row(2).transpose());
      double wIr = gamma * gamma * cauchy_weight(pI, c);
      double wDr = gamma * gamma * cauchy_weight(pD, c);
      ev.H += wIr * JI * JI.transpose() + wDr * JD * JD.transpose();
      ev.g += wIr * pI * JI + wDr * pD * JD;
    }
  }
  return ev;
}

}  // namespace

double cauchy(double r, double c) {
  if (c <= 0) fail("NonPositiveC", "Cauchy inflection point must be positive");
  double s = r / c;
  return 0.5 * c * c * std::log1p(s * s);
}

Pyramid build_pyramid(const RgbdFrame& frame, const CameraModel& cam, int levels) {
  Pyramid pyr;
  pyr.levels.push_back(frame);
  pyr.cams.push_back(cam);
  for (int l = 1; l < levels; ++l) {
    const RgbdFrame& src = pyr.levels.back();
    const CameraModel& scam = pyr.cams.back();
    int w = (src.intensity.width + 1) / 2;
    int h = (src.intensity.height + 1) / 2;
    RgbdFrame dst;
    dst.timestamp = frame.timestamp;
    dst.intensity = ImageF(w, h);
    dst.depth = ImageF(w, h);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double isum = 0;
        int icnt = 0;
        float dvals[4];
        int dcnt = 0;
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            int sx = 2 * x + dx, sy = 2 * y + dy;
            if (!src.intensity.inside(sx, sy)) continue;
            isum += src.intensity.at(sx, sy);
            ++icnt;
            float d = src.depth.at(sx, sy);
            if (d > 0) dvals[dcnt++] = d;
          }
        }
        dst.intensity.at(x, y) = float(isum / std::max(icnt, 1));
        if (dcnt > 0) {
          std::sort(dvals, dvals + dcnt);
          dst.depth.at(x, y) = dvals[(dcnt - 1) / 2];
        }
      }
    }
    CameraModel dcam = scam;
    dcam.width = w;
    dcam.height = h;
    dcam.fx = scam.fx / 2;
    dcam.fy = scam.fy / 2;
    dcam.cx = (scam.cx - 0.5) / 2;
    dcam.cy = (scam.cy - 0.5) / 2;
    pyr.levels.push_back(std::move(dst));
    pyr.cams.push_back(dcam);
  }
  return pyr;
}

Vec2 warp(const Vec2& u, const ImageF& depth_cur, const Pose& T, const CameraModel& cam) {
  int x = int(std::lround(u.x())), y = int(std::lround(u.y()));
  if (!depth_cur.inside(x, y) || depth_cur.at(x, y) <= 0.0f) {
    fail("InvalidDepth", "warp source pixel has no valid depth");
  }
  Vec3 p = back_project(cam, u, depth_cur.at(x, y));
  Vec3 pw = T * p;
  if (pw.z() <= kDepthEps) fail("BehindCamera", "warped point behind camera");
  return project(cam, pw);
}

DenseResidualMap dense_residuals(const RgbdFrame& prev, const RgbdFrame& cur,
                                 const Pose& delta_cam, const CameraModel& cam) {
  DenseResidualMap out;
  out.width = cur.depth.width;
  out.height = cur.depth.height;
  size_t n = size_t(out.width) * out.height;
  out.r_I.assign(n, 0.f);
  out.r_D.assign(n, 0.f);
  out.valid.assign(n, 0);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      double d = cur.depth.at(x, y);
      if (d <= 0.0) continue;
      Vec3 p((x - cam.cx) / cam.fx * d, (y - cam.cy) / cam.fy * d, d);
      Vec3 pw = delta_cam * p;
      if (pw.z() <= kDepthEps) continue;
      double wx = cam.fx * pw.x() / pw.z() + cam.cx;
      double wy = cam.fy * pw.y() / pw.z() + cam.cy;
      BilinearSample sI = sample_bilinear(prev.intensity, wx, wy);
      BilinearSample sD = sample_bilinear(prev.depth, wx, wy, true);
      if (!sI.valid || !sD.valid) continue;
      size_t i = size_t(y) * out.width + x;
      out.r_I[i] = float(sI.value - cur.intensity.at(x, y));
      out.r_D[i] = float(sD.value - pw.z());
      out.valid[i] = 1;
    }
  }
  return out;
}

TrackResult track_frame(const Pyramid& prev, const FrameState& prev_state, const Pyramid& cur,
                        const PreintegratedImu& pre, const ClusterSegmentation& seg,
                        const DenseConfig& cfg, const Pose& body_from_cam,
                        const std::vector<ScoredPoint>& map_points, const Vec3& gravity) {
  TrackResult res;
  res.state = predict_state(prev_state, pre, gravity);
  res.scores = seg.scores;
  const int K = seg.K;
  const int n_levels = int(cur.levels.size());
  double dt = pre.dt_total;

  // Per-frame intensity scale at the IMU-predicted pose (finest level).
  double alpha_I = cfg.alpha_I;
  {
    Pose delta_cam = (prev_state.pose * body_from_cam).inverse() * (res.state.pose * body_from_cam);
    DenseResidualMap rm = dense_residuals(prev.levels[0], cur.levels[0], delta_cam, cur.cams[0]);
    if (alpha_I <= 0.0) {
      std::vector<float> aI, aD;
      for (size_t i = 0; i < rm.valid.size(); ++i) {
        if (!rm.valid[i]) continue;
        aI.push_back(std::abs(rm.r_I[i]));
        aD.push_back(std::abs(rm.r_D[i]));
      }
      if (aI.empty()) {
        alpha_I = 1.0;
      } else {
        auto median = [](std::vector<float>& v) {
          std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
          return double(v[v.size() / 2]);
        };
        double mI = std::max(median(aI), 1e-6);
        alpha_I = std::max(median(aD) / mI, 1e-3);
      }
    }
  }
  res.diag.alpha_I = alpha_I;

  // Segmentation prior from the static sparse map (1 when no points given).
  std::vector<double> gamma_tilde(K + 1, 1.0);

  auto imu_energy = [&](const FrameState& s, ImuResidual* out_ir) {
    ImuResidual ir = imu_residual(pre, prev_state, s, gravity);
    BiasWalkResidual bw =
        bias_walk_residual(prev_state.bias, s.bias, cfg.sigma_bg, cfg.sigma_ba, dt);
    double e = ir.r.dot(ir.information * ir.r) + bw.r.dot(bw.information * bw.r);
    if (out_ir) *out_ir = ir;
    return e;
  };
  auto prior_energy = [&](const std::vector<double>& scores) {
    double g = 0;
    for (int k = 0; k < K; ++k) g += cfg.lambda_gamma * (scores[k] - gamma_tilde[k]) * (scores[k] - gamma_tilde[k]);
    double s = 0;
    for (const auto& [a, b] : seg.adjacency) s += (scores[a] - scores[b]) * (scores[a] - scores[b]);
    return g + cfg.lambda_r * s;
  };

  for (int l = n_levels - 1; l >= 0; --l) {
    const RgbdFrame& pl = prev.levels[l];
    const RgbdFrame& cl = cur.levels[l];
    const CameraModel& cam_l = cur.cams[l];
    Image<uint16_t> labels_l =
        l == 0 ? seg.labels : downsample_labels(seg.labels, cl.depth.width, cl.depth.height);

    if (!map_points.empty()) {
      gamma_tilde = gamma_prior(seg, (res.state.pose * body_from_cam).inverse(), cur.cams[0],
                                cur.levels[0].depth, map_points, cfg.lambda_p);
    }

    int iters = 0;
    for (int iter = 0; iter < cfg.max_iters; ++iter) {
      ++iters;
      Pose cam_pose = res.state.pose * body_from_cam;
      Pose delta_cam = (prev_state.pose * body_from_cam).inverse() * cam_pose;
      DenseEval ev = evaluate_dense(pl, cl, cam_l, delta_cam, labels_l, res.scores, K, cfg,
                                    alpha_I, true);
      if (l == n_levels - 1 && iter == 0) {
        res.diag.valid_pixels = ev.valid;
        if (ev.valid < cfg.min_valid_pixels) {
          res.diag.low_confidence = true;
          res.diag.iters_per_level.assign(n_levels, 0);
          ImuResidual ir;
          res.diag.energy_imu = imu_energy(res.state, &ir);
          return res;
        }
      }

      Mat6 adj = adjoint(cam_pose.inverse());
      Mat15 H = Mat15::Identity() * 1e-9;
      Vec15 g = Vec15::Zero();
      H.block<6, 6>(0, 0) += adj.transpose() * ev.H * adj;
      g.head<6>() += adj.transpose() * ev.g;

      ImuResidual ir;
      double e_imu = imu_energy(res.state, &ir);
      double imu_w = 2.0 * cfg.imu_weight;
      H += imu_w * ir.J_cur.transpose() * ir.information * ir.J_cur;
      g += imu_w * ir.J_cur.transpose() * ir.information * ir.r;
      BiasWalkResidual bw =
          bias_walk_residual(prev_state.bias, res.state.bias, cfg.sigma_bg, cfg.sigma_ba, dt);
      Eigen::Matrix<double, 6, 15> Jb = Eigen::Matrix<double, 6, 15>::Zero();
      Jb.block<6, 6>(0, 9).setIdentity();
      H += 2.0 * Jb.transpose() * bw.information * Jb;
      g += 2.0 * Jb.transpose() * bw.information * bw.r;

      Vec15 delta = H.ldlt().solve(-g);
      double e0 = cfg.imu_weight * e_imu + ev.energy + prior_energy(res.scores);

      FrameState trial = res.state;
      double step = 1.0;
      bool accepted = false;
      for (int half = 0; half <= cfg.max_halvings; ++half) {
        Vec15 d = step * delta;
        trial = res.state;
        trial.pose = se3_exp(d.head<6>()) * res.state.pose;
        trial.velocity += d.segment<3>(6);
        trial.bias.bg += d.segment<3>(9);
        trial.bias.ba += d.segment<3>(12);
        Pose tdelta = (prev_state.pose * body_from_cam).inverse() * (trial.pose * body_from_cam);
        DenseEval tev = evaluate_dense(pl, cl, cam_l, tdelta, labels_l, res.scores, K, cfg,
                                       alpha_I, false);
        double e1 = cfg.imu_weight * imu_energy(trial, nullptr) + tev.energy +
                    prior_energy(res.scores);
        if (e1 <= e0 + 1e-12) {
          res.state = trial;
          accepted = true;
          break;
        }
        step *= 0.5;
      }

      // Closed-form score update (Jacobi sweep over clusters).
      if (cfg.update_scores) {
        Pose delta2 = (prev_state.pose * body_from_cam).inverse() * (res.state.pose * body_from_cam);
        DenseEval ev2 = evaluate_dense(pl, cl, cam_l, delta2, labels_l, res.scores, K, cfg,
                                       alpha_I, false);
        std::vector<double> nb_sum(K, 0.0);
        std::vector<int> nb_cnt(K, 0);
        for (const auto& [a, b] : seg.adjacency) {
          nb_sum[a] += res.scores[b];
          nb_sum[b] += res.scores[a];
          ++nb_cnt[a];
          ++nb_cnt[b];
        }
        std::vector<double> next = res.scores;
        for (int k = 0; k < K; ++k) {
          next[k] = solve_gamma(ev2.cluster_cost[k], 0.0, gamma_tilde[k], nb_sum[k], nb_cnt[k],
                                cfg.lambda_gamma, cfg.lambda_r);
        }
        res.scores = next;
        res.diag.energy_dense = 0;
        for (int k = 0; k < K; ++k) res.diag.energy_dense += res.scores[k] * res.scores[k] * ev2.cluster_cost[k];
      }

      if (!accepted || delta.head<6>().norm() * step < cfg.convergence_tol) break;
    }
    res.diag.iters_per_level.push_back(iters);
  }

  ImuResidual ir_final;
  res.diag.energy_imu = imu_energy(res.state, &ir_final);
  res.diag.energy_prior = 0;
  for (int k = 0; k < K; ++k) {
    res.diag.energy_prior +=
        cfg.lambda_gamma * (res.scores[k] - gamma_tilde[k]) * (res.scores[k] - gamma_tilde[k]);
  }
  {
    double s = 0;
    for (const auto& [a, b] : seg.adjacency) s += (res.scores[a] - res.scores[b]) * (res.scores[a] - res.scores[b]);
    res.diag.energy_reg = cfg.lambda_r * s;
  }
  std::reverse(res.diag.iters_per_level.begin(), res.diag.iters_per_level.end());
  return res;
}

}  // namespace ovis
