#include "ovis/eval.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace ovis {

namespace {

constexpr double kAssocWindow = 0.02;  // seconds

struct MatchedPair {
  double t = 0;
  Pose est;
  Pose gt;
};

// Nearest-neighbour association of est samples to gt samples within the
// 20 ms window. Both inputs assumed time-sorted.
std::vector<MatchedPair> associate(const std::vector<TrajectorySample>& est,
                                   const std::vector<TrajectorySample>& gt) {
  std::vector<MatchedPair> pairs;
  size_t j = 0;
  for (const TrajectorySample& e : est) {
    while (j + 1 < gt.size() && std::abs(gt[j + 1].timestamp - e.timestamp) <=
                                    std::abs(gt[j].timestamp - e.timestamp)) {
      ++j;
    }
    if (j < gt.size() && std::abs(gt[j].timestamp - e.timestamp) <= kAssocWindow) {
      pairs.push_back({e.timestamp, e.pose, gt[j].pose});
    }
  }
  return pairs;
}

}  // namespace

double ate_rmse(const std::vector<TrajectorySample>& est,
                const std::vector<TrajectorySample>& gt) {
  std::vector<MatchedPair> pairs = associate(est, gt);
  size_t n = pairs.size();
  if (n < 3) fail("InsufficientOverlap", "fewer than 3 matched trajectory samples");

  Vec3 mu_e = Vec3::Zero(), mu_g = Vec3::Zero();
  for (const MatchedPair& p : pairs) {
    mu_e += p.est.t;
    mu_g += p.gt.t;
  }
  mu_e /= double(n);
  mu_g /= double(n);

  Mat3 W = Mat3::Zero();
  for (const MatchedPair& p : pairs) W += (p.gt.t - mu_g) * (p.est.t - mu_e).transpose();
  Eigen::JacobiSVD<Mat3> svd(W, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 S = Mat3::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0) S(2, 2) = -1;
  Mat3 R = svd.matrixU() * S * svd.matrixV().transpose();
  Vec3 t = mu_g - R * mu_e;

  double sq = 0;
  for (const MatchedPair& p : pairs) sq += (p.gt.t - (R * p.est.t + t)).squaredNorm();
  return std::sqrt(sq / double(n));
}

double rpe_rmse(const std::vector<TrajectorySample>& est,
                const std::vector<TrajectorySample>& gt, double delta) {
  if (delta <= 0) fail("InvalidDelta", "rpe delta must be positive");
  std::vector<MatchedPair> pairs = associate(est, gt);
  double sq = 0;
  size_t n = 0;
  size_t j = 0;
  for (size_t i = 0; i < pairs.size(); ++i) {
    double target = pairs[i].t + delta;
    if (j < i + 1) j = i + 1;
    while (j + 1 < pairs.size() &&
           std::abs(pairs[j + 1].t - target) <= std::abs(pairs[j].t - target)) {
      ++j;
    }
    if (j >= pairs.size() || std::abs(pairs[j].t - target) > kAssocWindow) continue;
    Pose rel_gt = pairs[i].gt.inverse() * pairs[j].gt;
    Pose rel_est = pairs[i].est.inverse() * pairs[j].est;
    Pose err = rel_gt.inverse() * rel_est;
    double dt = pairs[j].t - pairs[i].t;
    sq += err.t.squaredNorm() / (dt * dt);
    ++n;
  }
  if (n == 0) fail("InsufficientOverlap", "no matched pairs spanning delta");
  return std::sqrt(sq / double(n));
}

SegFrameMetrics seg_metrics(const ImageF& gamma, const Image<uint16_t>& gt_mask) {
  if (gamma.width != gt_mask.width || gamma.height != gt_mask.height)
    fail("DimensionMismatch", "gamma and mask dimensions differ");
  SegFrameMetrics m;
  long inter = 0, uni = 0;
  double sum_s = 0, sum_d = 0;
  long n_s = 0, n_d = 0;
  for (int y = 0; y < gamma.height; ++y) {
    for (int x = 0; x < gamma.width; ++x) {
      bool pred_dyn = gamma.at(x, y) < 0.5f;
      bool gt_dyn = gt_mask.at(x, y) != 0;
      if (pred_dyn && gt_dyn) ++inter;
      if (pred_dyn || gt_dyn) ++uni;
      if (gt_dyn) {
        sum_d += gamma.at(x, y);
        ++n_d;
      } else {
        sum_s += gamma.at(x, y);
        ++n_s;
      }
    }
  }
  m.iou = uni == 0 ? 1.0 : double(inter) / double(uni);
  m.mean_gamma_static = n_s ? sum_s / double(n_s) : std::nan("");
  m.mean_gamma_dynamic = n_d ? sum_d / double(n_d) : std::nan("");
  m.gt_dynamic_pixels = int(n_d);
  return m;
}

}  // namespace ovis
