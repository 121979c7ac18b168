#include "ovis/backend.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace ovis {

Vec3 reproj_residual(const Vec3& point_w, const Pose& world_from_body, const Pose& body_from_cam,
                     const CameraModel& cam, const StereoKeypoint& z,
                     Eigen::Matrix<double, 3, 6>* J_pose, Mat3* J_point) {
  Pose camera_from_world = (world_from_body * body_from_cam).inverse();
  Vec3 p_cam = camera_from_world * point_w;
  if (p_cam.z() < kDepthEps) fail("PointBehindCamera", "observed point behind camera");
  Vec3 r = z.uvs() - project_stereo(cam, p_cam);
  if (J_pose || J_point) {
    Mat3 P = project_stereo_jacobian(cam, p_cam);
    Mat3 R_cw = camera_from_world.rotation();
    if (J_point) *J_point = -P * R_cw;
    if (J_pose) {
      // Left perturbation of T_WB: p_cam = T_CB * T_BW * Exp(-delta) * x.
      Eigen::Matrix<double, 3, 6> D;
      D.block<3, 3>(0, 0) = -Mat3::Identity();
      D.block<3, 3>(0, 3) = skew(point_w);
      *J_pose = P * R_cw * D;
    }
  }
  return r;
}

namespace {

inline double whitened_norm(const Vec3& r) {
  return std::sqrt(r(0) * r(0) + r(1) * r(1) + r(2) * r(2) / kObsSigma2(2));
}

const Vec3 kObsWhiten(1.0, 1.0, 0.5);  // Sigma^{-1/2} diagonal

}  // namespace

ReprojTerm robust_reproj_cost(const MapPoint& point, const Keyframe& kf, const StereoKeypoint& obs,
                              const CameraModel& cam, const Pose& body_from_cam,
                              const BaConfig& cfg) {
  ReprojTerm out;
  out.residual = reproj_residual(point.position, kf.state.pose, body_from_cam, cam, obs);
  out.whitened_norm = whitened_norm(out.residual);
  out.robust_weight = huber_weight(out.whitened_norm, cfg.huber_delta);
  int u = std::clamp(int(std::lround(obs.u)), 0, cam.width - 1);
  int v = std::clamp(int(std::lround(obs.v)), 0, cam.height - 1);
  double g = kf.seg.scores[kf.seg.label_at(u, v)];
  double b = point.beta;
  out.cost = b * b * g * g * huber(out.whitened_norm, cfg.huber_delta) +
             (1 - b) * (1 - b) * (1 - g) * (1 - g) * cfg.c_hat;
  return out;
}

void marginalize_oldest(SlidingWindow& window) {
  if (window.keyframes.empty()) fail("EmptyWindow", "nothing to marginalize");
  window.fixed_frames.push_back(window.keyframes.front());
  window.keyframes.erase(window.keyframes.begin());
}

void populate_window_points(SlidingWindow& window, const Map& map) {
  std::set<int> in_window(window.keyframes.begin(), window.keyframes.end());
  window.points.clear();
  for (const auto& [pid, pt] : map.points()) {
    for (const auto& [kf_id, kp] : pt.observations) {
      if (in_window.count(kf_id)) {
        window.points.push_back(pid);
        break;
      }
    }
  }
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Obs {
  int pid = -1;
  int kf_id = -1;
  StereoKeypoint z;
  bool in_window = false;
  int label = 0;      // cluster label at the observed pixel
  bool dropped = false;
  double rho = 0;     // cached Huber value for score sweeps
};

// Working copy of everything the solver mutates, written back on success.
struct Working {
  std::map<int, FrameState> states;          // window keyframes
  std::map<int, Vec3> pts;                   // window point positions
  std::map<int, std::vector<double>> gammas; // window keyframe cluster scores
  std::map<int, double> betas;               // window point scores
};

class WindowProblem {
 public:
  WindowProblem(SlidingWindow& window, Map& map, const std::vector<ImuLink>& links,
                const BaConfig& cfg, const CameraModel& cam, const Pose& body_from_cam,
                const Vec3& gravity)
      : window_(window), map_(map), links_(links), cfg_(cfg), cam_(cam),
        body_from_cam_(body_from_cam), gravity_(gravity) {
    for (int kf_id : window.keyframes) {
      const Keyframe& kf = map.keyframes().at(kf_id);
      work_.states[kf_id] = kf.state;
      work_.gammas[kf_id] = kf.seg.scores;
      kf_index_[kf_id] = int(kf_index_.size());
    }
    std::set<int> fixed(window.fixed_frames.begin(), window.fixed_frames.end());
    int pidx = 0;
    for (int pid : window.points) {
      const MapPoint& pt = map.points().at(pid);
      work_.pts[pid] = pt.position;
      work_.betas[pid] = pt.beta;
      point_index_[pid] = pidx++;
      for (const auto& [kf_id, kp] : pt.observations) {
        bool in_win = kf_index_.count(kf_id) > 0;
        if (!in_win && !fixed.count(kf_id)) continue;
        Obs o;
        o.pid = pid;
        o.kf_id = kf_id;
        o.z = kp;
        o.in_window = in_win;
        const Keyframe& kf = map.keyframes().at(kf_id);
        int u = std::clamp(int(std::lround(kp.u)), 0, kf.seg.labels.width - 1);
        int v = std::clamp(int(std::lround(kp.v)), 0, kf.seg.labels.height - 1);
        o.label = kf.seg.label_at(u, v);
        obs_.push_back(o);
      }
    }
    n_states_ = int(kf_index_.size()) * 15;
  }

  Working& work() { return work_; }
  std::vector<Obs>& observations() { return obs_; }
  int dropped() const {
    int n = 0;
    for (const Obs& o : obs_) n += o.dropped;
    return n;
  }

  const FrameState& state_of(int kf_id, const Working& w) const {
    auto it = w.states.find(kf_id);
    if (it != w.states.end()) return it->second;
    return map_.keyframes().at(kf_id).state;
  }

  double gamma_of(const Obs& o, const Working& w) const {
    if (o.in_window) return w.gammas.at(o.kf_id)[o.label];
    return map_.keyframes().at(o.kf_id).seg.scores[o.label];
  }

  // Step-(a) objective: gated robust reprojection + IMU + bias random walk.
  // Scores enter as fixed weights. Infinite if a kept observation goes
  // behind its camera.
  double state_objective(const Working& w) const {
    double e = reproj_energy(w);
    if (!std::isfinite(e)) return kInf;
    return e + imu_energy(w) + bias_energy(w);
  }

  double reproj_energy(const Working& w) const {
    double e = 0;
    for (const Obs& o : obs_) {
      if (o.dropped) continue;
      double g = gamma_of(o, w);
      double b = w.betas.at(o.pid);
      Vec3 r;
      try {
        r = reproj_residual(w.pts.at(o.pid), state_of(o.kf_id, w).pose, body_from_cam_, cam_,
                            o.z);
      } catch (const Error&) {
        return kInf;
      }
      double s = whitened_norm(r);
      e += b * b * g * g * huber(s, cfg_.huber_delta) +
           (1 - b) * (1 - b) * (1 - g) * (1 - g) * cfg_.c_hat;
    }
    return e;
  }

  double imu_energy(const Working& w) const {
    double e = 0;
    for (const ImuLink& l : links_) {
      ImuResidual res = imu_residual(l.pre, state_of(l.from_kf, w), state_of(l.to_kf, w),
                                     gravity_);
      e += res.r.dot(res.information * res.r);
    }
    return e;
  }

  double bias_energy(const Working& w) const {
    double e = 0;
    for (const ImuLink& l : links_) {
      double dt = map_.keyframes().at(l.to_kf).timestamp -
                  map_.keyframes().at(l.from_kf).timestamp;
      BiasWalkResidual res = bias_walk_residual(state_of(l.from_kf, w).bias,
                                                state_of(l.to_kf, w).bias, cfg_.sigma_bg,
                                                cfg_.sigma_ba, dt);
      e += res.r.dot(res.information * res.r);
    }
    return e;
  }

  // Score part of the full energy with frozen priors: R + G + H-smoothness.
  double score_energy(const Working& w, const std::map<int, std::vector<double>>& gamma_tilde,
                      const std::map<int, double>& beta_tilde) const {
    double e = reproj_energy_cached(w);
    for (int kf_id : window_.keyframes) {
      const ClusterSegmentation& seg = map_.keyframes().at(kf_id).seg;
      const std::vector<double>& g = w.gammas.at(kf_id);
      const std::vector<double>& gt = gamma_tilde.at(kf_id);
      for (int k = 0; k < seg.K; ++k) e += cfg_.lambda_gamma * (g[k] - gt[k]) * (g[k] - gt[k]);
      for (const auto& [a, b] : seg.adjacency) e += cfg_.lambda_r * (g[a] - g[b]) * (g[a] - g[b]);
    }
    for (const auto& [pid, b] : w.betas) {
      double bt = beta_tilde.at(pid);
      e += cfg_.lambda_beta * (b - bt) * (b - bt);
    }
    return e;
  }

  // Reprojection energy from cached per-observation Huber values (states and
  // points fixed during score sweeps).
  double reproj_energy_cached(const Working& w) const {
    double e = 0;
    for (const Obs& o : obs_) {
      if (o.dropped) continue;
      double g = gamma_of(o, w);
      double b = w.betas.at(o.pid);
      e += b * b * g * g * o.rho + (1 - b) * (1 - b) * (1 - g) * (1 - g) * cfg_.c_hat;
    }
    return e;
  }

  void cache_huber_values() {
    for (Obs& o : obs_) {
      if (o.dropped) continue;
      try {
        Vec3 r = reproj_residual(work_.pts.at(o.pid), state_of(o.kf_id, work_).pose,
                                 body_from_cam_, cam_, o.z);
        o.rho = huber(whitened_norm(r), cfg_.huber_delta);
      } catch (const Error&) {
        o.dropped = true;
      }
    }
  }

  // One Levenberg-Marquardt pass over states and points with scores fixed.
  void run_lm(BaDiagnostics& diag) {
    for (Obs& o : obs_) {
      if (o.dropped) continue;
      try {
        reproj_residual(work_.pts.at(o.pid), state_of(o.kf_id, work_).pose, body_from_cam_,
                        cam_, o.z);
      } catch (const Error&) {
        o.dropped = true;
      }
    }

    double obj = state_objective(work_);
    double lambda = cfg_.lm.initial_damping;
    bool logged_condition = false;

    for (int iter = 0; iter < cfg_.lm.max_iters; ++iter) {
      Linearization lin = linearize();
      bool improved = false;
      for (int attempt = 0; attempt < 10; ++attempt) {
        Working cand = work_;
        if (!solve_damped(lin, lambda, cand, logged_condition ? nullptr : &diag)) {
          lambda *= cfg_.lm.up;
          continue;
        }
        logged_condition = true;
        double cand_obj = state_objective(cand);
        ++diag.lm_iters;
        if (cand_obj < obj - 1e-12) {
          double decrease = obj - cand_obj;
          work_ = std::move(cand);
          obj = cand_obj;
          lambda = std::max(lambda * cfg_.lm.down, 1e-12);
          improved = true;
          ++diag.accepted_steps;
          if (decrease < cfg_.lm.min_rel_decrease * std::max(obj, 1.0)) iter = cfg_.lm.max_iters;
          break;
        }
        lambda *= cfg_.lm.up;
      }
      if (!improved) break;
    }
  }

 private:
  struct Linearization {
    Eigen::MatrixXd H_ss;
    Eigen::VectorXd g_s;
    std::vector<Mat3> H_pp;
    std::vector<Vec3> g_p;
    std::vector<Eigen::MatrixXd> W;  // n_states x 3 per point
  };

  Linearization linearize() {
    Linearization lin;
    int np = int(point_index_.size());
    lin.H_ss = Eigen::MatrixXd::Zero(n_states_, n_states_);
    lin.g_s = Eigen::VectorXd::Zero(n_states_);
    lin.H_pp.assign(np, Mat3::Zero());
    lin.g_p.assign(np, Vec3::Zero());
    lin.W.assign(np, Eigen::MatrixXd::Zero(n_states_, 3));

    for (const Obs& o : obs_) {
      if (o.dropped) continue;
      double g = gamma_of(o, work_);
      double b = work_.betas.at(o.pid);
      double scale = b * b * g * g;
      if (scale < 1e-12) continue;
      Eigen::Matrix<double, 3, 6> J_pose;
      Mat3 J_point;
      Vec3 r = reproj_residual(work_.pts.at(o.pid), state_of(o.kf_id, work_).pose,
                               body_from_cam_, cam_, o.z, &J_pose, &J_point);
      Vec3 rw = kObsWhiten.asDiagonal() * r;
      double s = rw.norm();
      double w = scale * huber_weight(s, cfg_.huber_delta);
      Mat3 Jp = kObsWhiten.asDiagonal() * J_point;
      int pi = point_index_.at(o.pid);
      lin.H_pp[pi] += w * Jp.transpose() * Jp;
      lin.g_p[pi] += w * Jp.transpose() * rw;
      if (o.in_window) {
        Eigen::Matrix<double, 3, 6> Js = kObsWhiten.asDiagonal() * J_pose;
        int c = kf_index_.at(o.kf_id) * 15;
        lin.H_ss.block<6, 6>(c, c) += w * Js.transpose() * Js;
        lin.g_s.segment<6>(c) += w * Js.transpose() * rw;
        lin.W[pi].block<6, 3>(c, 0) += w * Js.transpose() * Jp;
      }
    }

    for (const ImuLink& l : links_) {
      ImuResidual res = imu_residual(l.pre, state_of(l.from_kf, work_), state_of(l.to_kf, work_),
                                     gravity_);
      accumulate_pair(lin, l.from_kf, l.to_kf, res.J_prev, res.J_cur, res.information, res.r);

      double dt = map_.keyframes().at(l.to_kf).timestamp -
                  map_.keyframes().at(l.from_kf).timestamp;
      BiasWalkResidual bw = bias_walk_residual(state_of(l.from_kf, work_).bias,
                                               state_of(l.to_kf, work_).bias, cfg_.sigma_bg,
                                               cfg_.sigma_ba, dt);
      Eigen::Matrix<double, 6, 15> Jb_prev = Eigen::Matrix<double, 6, 15>::Zero();
      Eigen::Matrix<double, 6, 15> Jb_cur = Eigen::Matrix<double, 6, 15>::Zero();
      Jb_prev.block<6, 6>(0, 9) = -Mat6::Identity();
      Jb_cur.block<6, 6>(0, 9) = Mat6::Identity();
      accumulate_pair(lin, l.from_kf, l.to_kf, Jb_prev, Jb_cur, bw.information, bw.r);
    }

    // Gauge: the first window keyframe's position, yaw, velocity and gyro
    // bias are held fixed. Fixing only the pose leaves a gravity-tilt mode
    // open: a constant gyro bias shift costs nothing in the walk terms and
    // tilts the window against gravity, which soaks up scale errors along
    // the acceleration direction. The accelerometer bias stays free
    // everywhere because the initially unobservable tangential part has to
    // keep migrating while the heading changes. With gauge_tilt_free the
    // anchor's roll and pitch are also released (4-dof gauge): gravity pins
    // them, so a misaligned initial gravity estimate can relax instead of
    // being locked in for the rest of the run.
    int c0 = kf_index_.at(window_.keyframes.front()) * 15;
    for (int i = 0; i < 12; ++i) {
      if (cfg_.gauge_tilt_free && (i == 3 || i == 4)) continue;
      if (!cfg_.gauge_fix_velocity && i >= 6 && i < 9) continue;
      lin.H_ss.row(c0 + i).setZero();
      lin.H_ss.col(c0 + i).setZero();
      lin.H_ss(c0 + i, c0 + i) = 1.0;
      lin.g_s(c0 + i) = 0;
    }
    for (auto& W : lin.W) {
      if (cfg_.gauge_tilt_free) {
        W.middleRows(c0, 3).setZero();
        W.row(c0 + 5).setZero();
      } else {
        W.middleRows(c0, 6).setZero();
      }
    }
    return lin;
  }

  template <typename JPrev, typename JCur, typename Info, typename Res>
  void accumulate_pair(Linearization& lin, int kf_prev, int kf_cur, const JPrev& Jp,
                       const JCur& Jc, const Info& L, const Res& r) {
    int cp = kf_index_.at(kf_prev) * 15;
    int cc = kf_index_.at(kf_cur) * 15;
    lin.H_ss.block(cp, cp, 15, 15) += Jp.transpose() * L * Jp;
    lin.H_ss.block(cc, cc, 15, 15) += Jc.transpose() * L * Jc;
    lin.H_ss.block(cp, cc, 15, 15) += Jp.transpose() * L * Jc;
    lin.H_ss.block(cc, cp, 15, 15) += Jc.transpose() * L * Jp;
    lin.g_s.segment(cp, 15) += Jp.transpose() * L * r;
    lin.g_s.segment(cc, 15) += Jc.transpose() * L * r;
  }

  bool solve_damped(const Linearization& lin, double lambda, Working& cand,
                    BaDiagnostics* diag) {
    int np = int(point_index_.size());
    Eigen::MatrixXd H_red = lin.H_ss;
    Eigen::VectorXd g_red = lin.g_s;
    for (int i = 0; i < n_states_; ++i) H_red(i, i) = H_red(i, i) * (1 + lambda) + 1e-9;

    std::vector<Mat3> A_inv(np);
    for (const auto& [pid, pi] : point_index_) {
      Mat3 A = lin.H_pp[pi];
      for (int i = 0; i < 3; ++i) A(i, i) = A(i, i) * (1 + lambda) + 1e-9;
      A_inv[pi] = A.inverse();
      H_red -= lin.W[pi] * A_inv[pi] * lin.W[pi].transpose();
      g_red -= lin.W[pi] * (A_inv[pi] * lin.g_p[pi]);
    }

    Eigen::LDLT<Eigen::MatrixXd> ldlt(H_red);
    if (ldlt.info() != Eigen::Success) return false;
    Eigen::VectorXd delta_s = ldlt.solve(-g_red);
    if (!delta_s.allFinite()) return false;

    if (diag) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H_red, Eigen::EigenvaluesOnly);
      double mn = es.eigenvalues().minCoeff(), mx = es.eigenvalues().maxCoeff();
      diag->condition_estimate = (mn > 0) ? mx / mn : kInf;
      if (mn <= 0) return false;
    }

    for (const auto& [kf_id, ki] : kf_index_) {
      Eigen::VectorXd d = delta_s.segment(ki * 15, 15);
      FrameState& st = cand.states.at(kf_id);
      st.pose = se3_exp(d.head<6>()) * st.pose;
      st.velocity += d.segment<3>(6);
      st.bias.bg += d.segment<3>(9);
      st.bias.ba += d.segment<3>(12);
    }
    for (const auto& [pid, pi] : point_index_) {
      Vec3 dp = -A_inv[pi] * (lin.g_p[pi] + lin.W[pi].transpose() * delta_s);
      cand.pts.at(pid) += dp;
    }
    return true;
  }

  SlidingWindow& window_;
  Map& map_;
  const std::vector<ImuLink>& links_;
  const BaConfig& cfg_;
  const CameraModel& cam_;
  const Pose& body_from_cam_;
  const Vec3& gravity_;
  Working work_;
  std::vector<Obs> obs_;
  std::map<int, int> kf_index_;
  std::map<int, int> point_index_;
  int n_states_ = 0;
};

}  // namespace

BaDiagnostics build_and_solve_window(SlidingWindow& window, Map& map,
                                     const std::vector<ImuLink>& imu_links, const BaConfig& cfg,
                                     const CameraModel& cam, const Pose& body_from_cam,
                                     const Vec3& gravity) {
  if (window.keyframes.empty()) fail("EmptyWindow", "no keyframes in window");
  if (int(window.keyframes.size()) > cfg.M + 1)
    fail("WindowOverflow", "window exceeds M+1 keyframes");

  BaDiagnostics diag;
  WindowProblem prob(window, map, imu_links, cfg, cam, body_from_cam, gravity);
  Working& w = prob.work();

  double prev_outer_energy = kInf;
  int consecutive_increases = 0;

  for (int outer = 0; outer < cfg.max_outer_iters; ++outer) {
    prob.run_lm(diag);
    prob.cache_huber_values();
    double e_const = prob.imu_energy(w) + prob.bias_energy(w);

    if (!cfg.update_scores) {
      double outer_energy = e_const + prob.reproj_energy_cached(w);
      diag.energy_log.emplace_back("outer" + std::to_string(outer) + "_states", outer_energy);
      diag.final_energy = outer_energy;
      break;  // with scores fixed the LM pass already converged
    }

    // Recompute the segmentation and point-score priors at the new states.
    std::map<int, std::vector<double>> gamma_tilde;
    std::vector<ScoredPoint> prior_points;
    for (const auto& [pid, pos] : w.pts) prior_points.push_back({pos, w.betas.at(pid)});
    for (int kf_id : window.keyframes) {
      const Keyframe& kf = map.keyframes().at(kf_id);
      Pose camera_from_world = (w.states.at(kf_id).pose * body_from_cam).inverse();
      gamma_tilde[kf_id] =
          gamma_prior(kf.seg, camera_from_world, cam, kf.frame.depth, prior_points, cfg.lambda_p);
    }
    std::map<int, double> beta_tilde;
    std::map<int, std::vector<double>> obs_gammas;
    for (const Obs& o : prob.observations()) {
      if (o.dropped) continue;
      obs_gammas[o.pid].push_back(prob.gamma_of(o, w));
    }
    for (const auto& [pid, b] : w.betas) {
      auto it = obs_gammas.find(pid);
      beta_tilde[pid] = (it == obs_gammas.end()) ? b : beta_prior(it->second, 0.5);
    }

    double e_scores = prob.score_energy(w, gamma_tilde, beta_tilde);
    diag.energy_log.emplace_back("outer" + std::to_string(outer) + "_states",
                                 e_const + e_scores);

    for (int sweep = 0; sweep < cfg.score_sweep_iters; ++sweep) {
      double before = prob.score_energy(w, gamma_tilde, beta_tilde);

      // Jacobi sweep over all window clusters.
      for (int kf_id : window.keyframes) {
        const ClusterSegmentation& seg = map.keyframes().at(kf_id).seg;
        std::vector<double> a(seg.K, 0), bsum(seg.K, 0);
        for (const Obs& o : prob.observations()) {
          if (o.dropped || o.kf_id != kf_id || o.label >= seg.K) continue;
          double beta = w.betas.at(o.pid);
          a[o.label] += beta * beta * o.rho;
          bsum[o.label] += (1 - beta) * (1 - beta) * cfg.c_hat;
        }
        std::vector<double> sum_nb(seg.K, 0);
        std::vector<int> n_nb(seg.K, 0);
        const std::vector<double>& cur = w.gammas.at(kf_id);
        for (const auto& [j, k] : seg.adjacency) {
          sum_nb[j] += cur[k];
          sum_nb[k] += cur[j];
          ++n_nb[j];
          ++n_nb[k];
        }
        std::vector<double> next = cur;
        for (int k = 0; k < seg.K; ++k) {
          next[k] = solve_gamma(a[k], bsum[k], gamma_tilde.at(kf_id)[k], sum_nb[k], n_nb[k],
                                cfg.lambda_gamma, cfg.lambda_r);
        }
        w.gammas.at(kf_id) = next;
      }

      // Exact coordinate update for every point score.
      std::map<int, std::pair<double, double>> point_ab;
      for (const Obs& o : prob.observations()) {
        if (o.dropped) continue;
        double g = prob.gamma_of(o, w);
        point_ab[o.pid].first += g * g * o.rho;
        point_ab[o.pid].second += (1 - g) * (1 - g) * cfg.c_hat;
      }
      for (auto& [pid, b] : w.betas) {
        auto it = point_ab.find(pid);
        if (it == point_ab.end()) continue;
        b = solve_beta(it->second.first, it->second.second, beta_tilde.at(pid), cfg.lambda_beta);
      }

      double after = prob.score_energy(w, gamma_tilde, beta_tilde);
      if (after > before + 1e-9 * (1 + std::abs(before))) ++diag.sweep_violations;
      diag.energy_log.emplace_back(
          "outer" + std::to_string(outer) + "_sweep" + std::to_string(sweep), e_const + after);
    }

    double outer_energy = e_const + prob.score_energy(w, gamma_tilde, beta_tilde);
    if (outer_energy > prev_outer_energy + 1e-9 * (1 + std::abs(prev_outer_energy))) {
      if (++consecutive_increases >= 2) fail("SolverDiverged", "energy increased twice");
    } else {
      consecutive_increases = 0;
    }
    prev_outer_energy = outer_energy;
    diag.final_energy = outer_energy;
  }

  diag.dropped_observations = prob.dropped();

  // Commit the working solution. Nothing touched the map before this point,
  // so a SolverDiverged throw above leaves the pre-solve states intact.
  for (const auto& [kf_id, st] : w.states) map.keyframes().at(kf_id).state = st;
  for (const auto& [kf_id, g] : w.gammas) map.keyframes().at(kf_id).seg.scores = g;
  for (const auto& [pid, pos] : w.pts) map.points().at(pid).position = pos;
  for (const auto& [pid, b] : w.betas) map.points().at(pid).beta = b;

  std::vector<int> removed;
  if (cfg.update_scores) removed = map.remove_dynamic_points(0.5);
  diag.points_removed = int(removed.size());
  diag.removed_point_ids = removed;
  if (!removed.empty()) {
    std::set<int> gone(removed.begin(), removed.end());
    window.points.erase(
        std::remove_if(window.points.begin(), window.points.end(),
                       [&](int pid) { return gone.count(pid) > 0; }),
        window.points.end());
  }
  return diag;
}

}  // namespace ovis
