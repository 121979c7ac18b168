#pragma once

#include <map>
#include <string>

#include "ovis/backend.hpp"
#include "ovis/eval.hpp"

namespace ovis {

struct RunConfig {
  DenseConfig dense;
  BaConfig ba;
  FeatureConfig features;
  MatchConfig matching;
  int clusters = 24;                   // depth k-means cluster count
  double stationary_init_secs = 1.0;   // gravity/bias initialization window
  double keyframe_max_interval = 0.5;  // seconds
  int keyframe_min_obs = 60;           // tracked static observations
  double keyframe_min_overlap = 0.7;   // warped-pixel validity vs last keyframe
  bool segmentation_off = false;       // ablation: all scores pinned at 1
  bool imu_off = false;                // rejected: the method is visual-inertial
  bool deterministic = false;
  bool verbose = false;  // per-keyframe progress on stderr
  uint64_t seed = 1;
};

std::string run_config_to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const std::string& text);

// Where each map point was spawned (ground-truth mover id at the seeding
// pixel, 0 = static) and when it was removed, counted in BA invocations.
struct PointFate {
  int gt_label = 0;
  int spawn_ba = -1;    // BA invocations completed when the point was created
  int removed_ba = -1;  // BA invocation (1-based) that removed it, -1 = alive
};

struct PipelineResult {
  std::vector<TrajectorySample> trajectory;  // per input frame, world_from_body
  std::map<int, int> keyframe_frames;        // keyframe id -> frame index
  std::map<int, FrameState> keyframe_states;
  std::map<int, ImageF> keyframe_gamma;  // final per-pixel cluster scores
  std::map<int, PointFate> point_fates;  // only when mask_gt/ exists
  int ba_invocations = 0;
  int diverged_windows = 0;
  int sweep_violations = 0;
  int lm_violations = 0;
  double runtime_sec = 0;
};

// Full run over a dataset directory (frames.txt, imu.csv, calib.txt). If
// out_dir is non-empty, writes trajectory.txt, masks/, labels/, map.txt,
// diagnostics.jsonl and config.json there.
PipelineResult run_pipeline(const RunConfig& cfg, const std::string& dataset_dir,
                            const std::string& out_dir = "");

}  // namespace ovis
