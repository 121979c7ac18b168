#pragma once

#include <cstdint>
#include <set>
#include <utility>
#include <vector>

#include "ovis/geometry.hpp"
#include "ovis/image.hpp"

namespace ovis {

// Cluster-wise segmentation of one depth image. Label K is the invalid-depth
// cluster; its score is pinned to 1.
struct ClusterSegmentation {
  Image<uint16_t> labels;
  std::vector<Eigen::Vector3d> centroids;  // (u/width, v/height, d/depth_scale)
  std::vector<double> scores;              // size K+1, scores[K] == 1
  std::set<std::pair<int, int>> adjacency;  // unordered pairs (a < b), both < K
  int K = 0;

  int label_at(int x, int y) const { return labels.at(x, y); }
  double score_at(int x, int y) const { return scores[labels.at(x, y)]; }
  bool is_dynamic(int k) const { return scores[k] < 0.5; }
};

// K-means over (u/width, v/height, d/depth_scale) features of valid-depth
// pixels, k-means++ seeded, run to convergence or 25 iterations. Equal
// distances break toward the lowest cluster index.
ClusterSegmentation cluster_depth(const ImageF& depth, int K, uint64_t seed,
                                  double depth_scale = 3.0);

struct ScoredPoint {
  Vec3 position = Vec3::Zero();  // world frame
  double beta = 1.0;
};

// Per-cluster segmentation prior from depth agreement between projected map
// points and the frame's depth image. Clusters without projected points get 1.
std::vector<double> gamma_prior(const ClusterSegmentation& seg, const Pose& camera_from_world,
                                const CameraModel& cam, const ImageF& depth,
                                const std::vector<ScoredPoint>& points, double lambda_p);

double beta_prior(const std::vector<double>& obs_scores, double lambda_phi);

// Closed-form minimizer of
//   g^2*sum_a + (1-g)^2*sum_b + lambda_gamma*(g-prior)^2 + lambda_r*sum_nb(g-g_nb)^2
// clamped to [0,1]. sum_nb is the sum of neighbour scores over n_nb neighbours.
double solve_gamma(double sum_a, double sum_b, double prior, double sum_nb, int n_nb,
                   double lambda_gamma, double lambda_r);

// Same form for a map-point score; no smoothness neighbours.
double solve_beta(double sum_a, double sum_b, double prior, double lambda_beta);

double smoothness_energy(const ClusterSegmentation& seg);

// Nearest-neighbour downsampled label map for a coarser pyramid level.
Image<uint16_t> downsample_labels(const Image<uint16_t>& labels, int w, int h);

}  // namespace ovis
