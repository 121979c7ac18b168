#pragma once

#include <string>
#include <vector>

#include "ovis/dense_frontend.hpp"
#include "ovis/imu.hpp"
#include "ovis/io.hpp"

namespace ovis {

// C2 interpolating spline through (t, y) knots with analytic derivatives.
// Quintic Hermite per segment with finite-difference knot derivatives, so
// the support is local and runs of equal knot values evaluate exactly
// constant (a globally coupled natural spline rings over such runs, which
// would put spurious motion into nominally stationary trajectory phases).
class KnotSpline {
 public:
  KnotSpline() = default;
  KnotSpline(std::vector<double> ts, std::vector<double> ys);
  double eval(double t) const;
  double d1(double t) const;
  double d2(double t) const;
  const std::vector<double>& knots_t() const { return ts_; }
  const std::vector<double>& knots_y() const { return ys_; }

 private:
  int segment(double t) const;
  std::vector<double> ts_, ys_;
  std::vector<double> m_, s_;  // first/second derivatives at knots
};

struct Spline3 {
  KnotSpline x, y, z;
  Vec3 eval(double t) const { return Vec3(x.eval(t), y.eval(t), z.eval(t)); }
  Vec3 d1(double t) const { return Vec3(x.d1(t), y.d1(t), z.d1(t)); }
  Vec3 d2(double t) const { return Vec3(x.d2(t), y.d2(t), z.d2(t)); }
};

// Textured rectangle: local frame spans x in [-ex/2,ex/2], y in [-ey/2,ey/2]
// at z=0; +z is the outward normal.
struct RectSurface {
  Pose world_from_rect;
  double ex = 1, ey = 1;
  uint64_t tex_seed = 0;
};

// Rigid textured box moving along a position spline with a yaw spline,
// visible only within [t_start, t_end].
struct Mover {
  Vec3 extents = Vec3(1, 1, 0.2);
  Spline3 center;
  KnotSpline yaw;
  double t_start = 0, t_end = 0;
  uint64_t tex_seed = 0;
};

struct CameraPath {
  Spline3 pos;
  KnotSpline yaw, pitch;
};

struct SceneSpec {
  std::vector<RectSurface> static_surfaces;
  std::vector<Mover> movers;
  CameraPath trajectory;
  CameraModel camera;
  double duration = 25;
  double frame_rate = 15;
  double imu_rate = 200;
  ImuNoise imu_noise;
  ImuBias imu_bias;
  double depth_sigma = 0.0;  // optional Gaussian depth noise, off by default
  uint64_t seed = 1;
};

// World-from-camera pose on the trajectory. Base orientation: camera z
// (forward) along world +x, camera y (down) along world -z; yaw about world
// z, then pitch.
Pose camera_pose(const CameraPath& path, double t);
Vec3 camera_angular_velocity_body(const CameraPath& path, double t);

struct RenderedFrame {
  RgbdFrame frame;
  ImageU8 mask;  // 0 = static, k = mover k (1-based)
};

RenderedFrame render_frame(const SceneSpec& spec, double t);

struct ImuGroundTruth {
  std::vector<ImuSample> samples;         // biased + noisy, as the sensor reports
  std::vector<ImuSample> ideal_samples;   // noiseless, unbiased
};

ImuGroundTruth generate_imu(const SceneSpec& spec);

struct DatasetStats {
  int frames = 0;
  double occluded_frame_fraction = 0;  // frames with >= 50% mover pixels
  double path_length = 0;
};

// Writes rgb/, depth/, mask_gt/, frames.txt, imu.csv, calib.txt,
// groundtruth.txt and spec.json under out_dir.
DatasetStats emit_dataset(const SceneSpec& spec, const std::string& out_dir);

// Stock scene specs: "static", "stlo", "ltlo".
SceneSpec make_stock_spec(const std::string& name, uint64_t seed = 1);

void write_scene_spec(const std::string& path, const SceneSpec& spec);
SceneSpec read_scene_spec(const std::string& path);

// Procedural surface texture in [0,1]; deterministic in (seed, s, t).
double procedural_texture(uint64_t seed, double s, double t);

}  // namespace ovis
