#include "ovis/map.hpp"

#include <algorithm>

namespace ovis {

int Map::add_keyframe(Keyframe kf) {
  kf.id = next_kf_id_++;
  int id = kf.id;
  keyframes_.emplace(id, std::move(kf));
  return id;
}

MatchStats Map::match_and_triangulate(int kf_id, const CameraModel& cam,
                                      const Pose& body_from_cam, const MatchConfig& cfg) {
  auto it = keyframes_.find(kf_id);
  if (it == keyframes_.end()) fail("UnknownKeyframe", "no keyframe " + std::to_string(kf_id));
  Keyframe& kf = it->second;
  Pose camera_from_world = (kf.state.pose * body_from_cam).inverse();

  MatchStats stats;
  std::vector<char> feat_used(kf.features.size(), 0);

  for (auto& [pid, pt] : points_) {
    Vec3 p_cam = camera_from_world * pt.position;
    if (p_cam.z() < kDepthEps) continue;
    Vec2 u = project(cam, p_cam);
    if (u.x() < 0 || u.y() < 0 || u.x() > cam.width - 1 || u.y() > cam.height - 1) continue;

    int best = -1, best_dist = cfg.max_hamming;
    for (size_t i = 0; i < kf.features.size(); ++i) {
      if (feat_used[i]) continue;
      const Feature& f = kf.features[i];
      double du = f.kp.u - u.x(), dv = f.kp.v - u.y();
      if (du * du + dv * dv > cfg.search_radius * cfg.search_radius) continue;
      int dist = hamming_distance(pt.desc, f.desc);
      if (dist < best_dist) {
        best_dist = dist;
        best = int(i);
      }
    }
    if (best < 0) continue;
    const Feature& f = kf.features[best];
    if (!f.has_depth) continue;
    feat_used[best] = 1;
    pt.observations[kf_id] = f.kp;
    pt.last_seen_kf = kf_id;
    ++stats.matched;
  }

  for (size_t i = 0; i < kf.features.size(); ++i) {
    if (feat_used[i]) continue;
    const Feature& f = kf.features[i];
    if (!f.has_depth) continue;
    int label = kf.seg.label_at(int(f.kp.u), int(f.kp.v));
    if (kf.seg.scores[label] < cfg.gamma_gate) continue;
    MapPoint pt;
    pt.id = next_point_id_++;
    Vec3 p_cam = back_project(cam, Vec2(f.kp.u, f.kp.v), f.kp.d);
    pt.position = kf.state.pose * body_from_cam * p_cam;
    pt.desc = f.desc;
    pt.observations[kf_id] = f.kp;
    pt.created_kf = kf_id;
    pt.last_seen_kf = kf_id;
    points_.emplace(pt.id, std::move(pt));
    ++stats.created;
  }
  return stats;
}

std::vector<int> Map::remove_dynamic_points(double threshold) {
  std::vector<int> removed;
  for (auto it = points_.begin(); it != points_.end();) {
    if (it->second.beta < threshold) {
      removed.push_back(it->first);
      it = points_.erase(it);
    } else {
      ++it;
    }
  }
  return removed;
}

int Map::cull_weak_points(int min_obs, int stale_kfs) {
  int latest = keyframes_.empty() ? 0 : keyframes_.rbegin()->first;
  int removed = 0;
  for (auto it = points_.begin(); it != points_.end();) {
    const MapPoint& pt = it->second;
    if (int(pt.observations.size()) < min_obs && latest - pt.last_seen_kf >= stale_kfs) {
      it = points_.erase(it);
      ++removed;
    } else {
      ++it;
    }
  }
  return removed;
}

void Map::remove_keyframe(int kf_id) {
  keyframes_.erase(kf_id);
  for (auto it = points_.begin(); it != points_.end();) {
    it->second.observations.erase(kf_id);
    if (it->second.observations.empty()) {
      it = points_.erase(it);
    } else {
      ++it;
    }
  }
}

std::vector<ScoredPoint> Map::scored_points() const {
  std::vector<ScoredPoint> out;
  out.reserve(points_.size());
  for (const auto& [pid, pt] : points_) out.push_back({pt.position, pt.beta});
  return out;
}

void Map::audit() const {
  for (const auto& [pid, pt] : points_) {
    if (pt.observations.empty())
      fail("MapCorrupt", "point " + std::to_string(pid) + " has no observations");
    for (const auto& [kf_id, kp] : pt.observations) {
      if (!keyframes_.count(kf_id))
        fail("MapCorrupt", "point " + std::to_string(pid) + " observes missing keyframe " +
                               std::to_string(kf_id));
    }
  }
}

}  // namespace ovis
