#pragma once

#include <map>
#include <vector>

#include "ovis/feature.hpp"

namespace ovis {

struct MapPoint {
  int id = -1;
  Vec3 position = Vec3::Zero();  // world frame
  double beta = 1.0;
  Descriptor desc;                          // descriptor from the creating view
  std::map<int, StereoKeypoint> observations;  // keyframe id -> measurement
  int created_kf = -1;
  int last_seen_kf = -1;
};

struct Keyframe {
  int id = -1;
  double timestamp = 0;
  FrameState state;
  ClusterSegmentation seg;
  std::vector<Feature> features;
  RgbdFrame frame;  // finest level, kept for segmentation priors
};

struct MatchConfig {
  double search_radius = 15.0;  // px
  int max_hamming = 60;
  double gamma_gate = 0.5;  // new points only in clusters at or above this
};

struct MatchStats {
  int matched = 0;
  int created = 0;
};

// Sparse map shared by the tracking front end and the windowed optimizer.
// Keyframes and points are stored by id; all cross references are by id and
// must stay consistent (see audit()).
class Map {
 public:
  int add_keyframe(Keyframe kf);  // assigns and returns the keyframe id

  // Project existing points into the newest keyframe and match by descriptor
  // within a pixel radius, then create new points from unmatched features
  // with valid depth that fall in confidently-static clusters.
  MatchStats match_and_triangulate(int kf_id, const CameraModel& cam, const Pose& body_from_cam,
                                   const MatchConfig& cfg);

  // Drop points whose score fell below the threshold. Returns removed ids.
  std::vector<int> remove_dynamic_points(double threshold = 0.5);

  // Maintenance culling, separate from dynamic-point removal: points with
  // fewer than min_obs observations that have not been seen for stale_kfs
  // keyframes. Returns the number removed.
  int cull_weak_points(int min_obs = 3, int stale_kfs = 30);

  void remove_keyframe(int kf_id);  // drops the keyframe and its observations

  std::vector<ScoredPoint> scored_points() const;

  // Referential integrity: every observation names an existing keyframe,
  // every point has at least one observation. Throws MapCorrupt otherwise.
  void audit() const;

  std::map<int, Keyframe>& keyframes() { return keyframes_; }
  const std::map<int, Keyframe>& keyframes() const { return keyframes_; }
  std::map<int, MapPoint>& points() { return points_; }
  const std::map<int, MapPoint>& points() const { return points_; }

 private:
  std::map<int, Keyframe> keyframes_;
  std::map<int, MapPoint> points_;
  int next_kf_id_ = 0;
  int next_point_id_ = 0;
};

}  // namespace ovis
