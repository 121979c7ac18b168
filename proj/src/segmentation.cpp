#include "ovis/segmentation.hpp"

#include <cmath>
#include <random>

namespace ovis {

namespace {

inline double sq(double x) { return x * x; }

}  // namespace

ClusterSegmentation cluster_depth(const ImageF& depth, int K, uint64_t seed,
                                  double depth_scale) {
  if (K < 2) fail("DegenerateInput", "K must be >= 2");
  if (depth.empty()) fail("DegenerateInput", "empty depth image");
  const int w = depth.width, h = depth.height;

  std::vector<int> valid;  // flat indices of valid-depth pixels
  valid.reserve(size_t(w) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (depth.at(x, y) > 0.0f) valid.push_back(y * w + x);
  if (int(valid.size()) < K) fail("DegenerateInput", "fewer valid-depth pixels than K");

  std::vector<Eigen::Vector3d> feat(valid.size());
  for (size_t i = 0; i < valid.size(); ++i) {
    int x = valid[i] % w, y = valid[i] / w;
    feat[i] = Eigen::Vector3d(double(x) / w, double(y) / h, depth.at(x, y) / depth_scale);
  }

  // k-means++ seeding.
  std::mt19937_64 rng(seed);
  std::vector<Eigen::Vector3d> centers;
  centers.reserve(K);
  {
    std::uniform_int_distribution<size_t> pick(0, valid.size() - 1);
    centers.push_back(feat[pick(rng)]);
    std::vector<double> d2(valid.size());
    for (int c = 1; c < K; ++c) {
      double total = 0;
      for (size_t i = 0; i < feat.size(); ++i) {
        double best = std::numeric_limits<double>::max();
        for (const auto& ctr : centers) best = std::min(best, (feat[i] - ctr).squaredNorm());
        d2[i] = best;
        total += best;
      }
      std::uniform_real_distribution<double> u(0.0, total);
      double r = u(rng), acc = 0;
      size_t chosen = feat.size() - 1;
      for (size_t i = 0; i < feat.size(); ++i) {
        acc += d2[i];
        if (acc >= r) { chosen = i; break; }
      }
      centers.push_back(feat[chosen]);
    }
  }

  std::vector<int> assign(feat.size(), 0);
  for (int iter = 0; iter < 25; ++iter) {
    bool changed = false;
    for (size_t i = 0; i < feat.size(); ++i) {
      double best = std::numeric_limits<double>::max();
      int bk = 0;
      for (int k = 0; k < K; ++k) {
        double d = (feat[i] - centers[k]).squaredNorm();
        if (d < best - 1e-15) { best = d; bk = k; }
      }
      if (assign[i] != bk) { assign[i] = bk; changed = true; }
    }
    std::vector<Eigen::Vector3d> sum(K, Eigen::Vector3d::Zero());
    std::vector<int> cnt(K, 0);
    for (size_t i = 0; i < feat.size(); ++i) {
      sum[assign[i]] += feat[i];
      ++cnt[assign[i]];
    }
    for (int k = 0; k < K; ++k)
      if (cnt[k] > 0) centers[k] = sum[k] / cnt[k];
    if (!changed && iter > 0) break;
  }

  ClusterSegmentation seg;
  seg.K = K;
  seg.centroids = centers;
  seg.labels = Image<uint16_t>(w, h, uint16_t(K));
  for (size_t i = 0; i < valid.size(); ++i) seg.labels.data[valid[i]] = uint16_t(assign[i]);
  seg.scores.assign(K + 1, 1.0);

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int a = seg.labels.at(x, y);
      if (a == K) continue;
      if (x + 1 < w) {
        int b = seg.labels.at(x + 1, y);
        if (b != K && b != a) seg.adjacency.insert({std::min(a, b), std::max(a, b)});
      }
      if (y + 1 < h) {
        int b = seg.labels.at(x, y + 1);
        if (b != K && b != a) seg.adjacency.insert({std::min(a, b), std::max(a, b)});
      }
    }
  }
  return seg;
}

std::vector<double> gamma_prior(const ClusterSegmentation& seg, const Pose& camera_from_world,
                                const CameraModel& cam, const ImageF& depth,
                                const std::vector<ScoredPoint>& points, double lambda_p) {
  std::vector<double> sum(seg.K, 0.0);
  std::vector<int> n(seg.K, 0);
  for (const auto& pt : points) {
    Vec3 pc = camera_from_world * pt.position;
    if (pc.z() <= kDepthEps) continue;
    Vec2 u = project(cam, pc);
    int px = int(std::lround(u.x())), py = int(std::lround(u.y()));
    if (!depth.inside(px, py)) continue;
    double d = depth.at(px, py);
    if (d <= 0.0) continue;
    int k = seg.labels.at(px, py);
    if (k >= seg.K) continue;
    sum[k] += std::abs(pt.beta * (d - pc.z()));
    ++n[k];
  }
  std::vector<double> prior(seg.K + 1, 1.0);
  for (int k = 0; k < seg.K; ++k) {
    if (n[k] > 0) prior[k] = std::clamp(1.0 - lambda_p * sum[k] / n[k], 0.0, 1.0);
  }
  return prior;
}

double beta_prior(const std::vector<double>& obs_scores, double lambda_phi) {
  if (obs_scores.empty()) fail("EmptyObservations", "beta prior needs >= 1 observation score");
  double mean = 0;
  for (double s : obs_scores) mean += s;
  mean /= double(obs_scores.size());
  return std::max(0.0, (mean - lambda_phi) / (1.0 - lambda_phi));
}

double solve_gamma(double sum_a, double sum_b, double prior, double sum_nb, int n_nb,
                   double lambda_gamma, double lambda_r) {
  double num = sum_b + lambda_gamma * prior + lambda_r * sum_nb;
  double den = sum_a + sum_b + lambda_gamma + lambda_r * n_nb;
  return std::clamp(num / den, 0.0, 1.0);
}

double solve_beta(double sum_a, double sum_b, double prior, double lambda_beta) {
  double num = sum_b + lambda_beta * prior;
  double den = sum_a + sum_b + lambda_beta;
  return std::clamp(num / den, 0.0, 1.0);
}

double smoothness_energy(const ClusterSegmentation& seg) {
  double e = 0;
  for (const auto& [a, b] : seg.adjacency) e += sq(seg.scores[a] - seg.scores[b]);
  return e;
}

Image<uint16_t> downsample_labels(const Image<uint16_t>& labels, int w, int h) {
  Image<uint16_t> out(w, h);
  for (int y = 0; y < h; ++y) {
    int sy = std::min(y * labels.height / h, labels.height - 1);
    for (int x = 0; x < w; ++x) {
      int sx = std::min(x * labels.width / w, labels.width - 1);
      out.at(x, y) = labels.at(sx, sy);
    }
  }
  return out;
}

}  // namespace ovis
