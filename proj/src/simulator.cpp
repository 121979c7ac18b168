#include "ovis/simulator.hpp"

#include "json.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

namespace ovis {

namespace fs = std::filesystem;
using nlohmann::json;

KnotSpline::KnotSpline(std::vector<double> ts, std::vector<double> ys)
    : ts_(std::move(ts)), ys_(std::move(ys)) {
  size_t n = ts_.size();
  if (n != ys_.size() || n < 2) fail("DegenerateInput", "spline needs >= 2 knots");
  m_.assign(n, 0.0);
  s_.assign(n, 0.0);
  auto slope = [&](size_t i) { return (ys_[i + 1] - ys_[i]) / (ts_[i + 1] - ts_[i]); };
  for (size_t i = 0; i < n; ++i) {
    if (i == 0) {
      m_[i] = slope(0);
    } else if (i + 1 == n) {
      m_[i] = slope(n - 2);
    } else {
      double h0 = ts_[i] - ts_[i - 1];
      double h1 = ts_[i + 1] - ts_[i];
      // Weighted so that quadratics are differentiated exactly.
      m_[i] = (h1 * slope(i - 1) + h0 * slope(i)) / (h0 + h1);
      s_[i] = 2.0 * (slope(i) - slope(i - 1)) / (h0 + h1);
    }
  }
}

int KnotSpline::segment(double t) const {
  int lo = 0, hi = int(ts_.size()) - 2;
  if (t <= ts_.front()) return 0;
  if (t >= ts_.back()) return hi;
  while (lo < hi) {
    int mid = (lo + hi + 1) / 2;
    if (ts_[mid] <= t)
      lo = mid;
    else
      hi = mid - 1;
  }
  return lo;
}

double KnotSpline::eval(double t) const {
  int i = segment(t);
  double h = ts_[i + 1] - ts_[i];
  double u = (t - ts_[i]) / h;
  double u2 = u * u, u3 = u2 * u, u4 = u3 * u, u5 = u4 * u;
  double h00 = 1 - 10 * u3 + 15 * u4 - 6 * u5;
  double h10 = u - 6 * u3 + 8 * u4 - 3 * u5;
  double h20 = 0.5 * u2 - 1.5 * u3 + 1.5 * u4 - 0.5 * u5;
  double h01 = 10 * u3 - 15 * u4 + 6 * u5;
  double h11 = -4 * u3 + 7 * u4 - 3 * u5;
  double h21 = 0.5 * u3 - u4 + 0.5 * u5;
  return ys_[i] * h00 + h * m_[i] * h10 + h * h * s_[i] * h20 + ys_[i + 1] * h01 +
         h * m_[i + 1] * h11 + h * h * s_[i + 1] * h21;
}

double KnotSpline::d1(double t) const {
  int i = segment(t);
  double h = ts_[i + 1] - ts_[i];
  double u = (t - ts_[i]) / h;
  double u2 = u * u, u3 = u2 * u, u4 = u3 * u;
  double g00 = -30 * u2 + 60 * u3 - 30 * u4;
  double g10 = 1 - 18 * u2 + 32 * u3 - 15 * u4;
  double g20 = u - 4.5 * u2 + 6 * u3 - 2.5 * u4;
  double g01 = 30 * u2 - 60 * u3 + 30 * u4;
  double g11 = -12 * u2 + 28 * u3 - 15 * u4;
  double g21 = 1.5 * u2 - 4 * u3 + 2.5 * u4;
  return (ys_[i] * g00 + h * m_[i] * g10 + h * h * s_[i] * g20 + ys_[i + 1] * g01 +
          h * m_[i + 1] * g11 + h * h * s_[i + 1] * g21) /
         h;
}

double KnotSpline::d2(double t) const {
  int i = segment(t);
  double h = ts_[i + 1] - ts_[i];
  double u = (t - ts_[i]) / h;
  double u2 = u * u, u3 = u2 * u;
  double k00 = -60 * u + 180 * u2 - 120 * u3;
  double k10 = -36 * u + 96 * u2 - 60 * u3;
  double k20 = 1 - 9 * u + 18 * u2 - 10 * u3;
  double k01 = 60 * u - 180 * u2 + 120 * u3;
  double k11 = -24 * u + 84 * u2 - 60 * u3;
  double k21 = 3 * u - 12 * u2 + 10 * u3;
  return (ys_[i] * k00 + h * m_[i] * k10 + h * h * s_[i] * k20 + ys_[i + 1] * k01 +
          h * m_[i + 1] * k11 + h * h * s_[i + 1] * k21) /
         (h * h);
}

namespace {

uint64_t splitmix(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

double hash01(uint64_t seed, int64_t ix, int64_t iy) {
  uint64_t h = splitmix(seed ^ splitmix(uint64_t(ix) * 0x9e3779b97f4a7c15ull) ^
                        splitmix(uint64_t(iy) + 0x632be59bd9b4e019ull));
  return double(h >> 11) * (1.0 / 9007199254740992.0);
}

Mat3 camera_base_rotation() {
  Mat3 R;
  R.col(0) = Vec3(0, -1, 0);  // camera x (right)
  R.col(1) = Vec3(0, 0, -1);  // camera y (down)
  R.col(2) = Vec3(1, 0, 0);   // camera z (forward)
  return R;
}

Mat3 rot_z(double a) { return Eigen::AngleAxisd(a, Vec3::UnitZ()).toRotationMatrix(); }
Mat3 rot_y(double a) { return Eigen::AngleAxisd(a, Vec3::UnitY()).toRotationMatrix(); }
Mat3 rot_x(double a) { return Eigen::AngleAxisd(a, Vec3::UnitX()).toRotationMatrix(); }

// Six textured faces of a box, local +z of each face pointing outward.
std::vector<RectSurface> box_faces(const Pose& world_from_box, const Vec3& e, uint64_t seed) {
  std::vector<RectSurface> faces;
  struct F {
    Mat3 R;
    Vec3 off;
    double ex, ey;
  };
  double hx = e.x() / 2, hy = e.y() / 2, hz = e.z() / 2;
  std::vector<F> defs = {
      {rot_y(M_PI / 2), Vec3(hx, 0, 0), e.z(), e.y()},    // +x
      {rot_y(-M_PI / 2), Vec3(-hx, 0, 0), e.z(), e.y()},  // -x
      {rot_x(-M_PI / 2), Vec3(0, hy, 0), e.x(), e.z()},   // +y
      {rot_x(M_PI / 2), Vec3(0, -hy, 0), e.x(), e.z()},   // -y
      {Mat3::Identity(), Vec3(0, 0, hz), e.x(), e.y()},   // +z
      {rot_x(M_PI), Vec3(0, 0, -hz), e.x(), e.y()},       // -z
  };
  int idx = 0;
  for (const auto& f : defs) {
    RectSurface r;
    r.world_from_rect = world_from_box * Pose(f.R, f.off);
    r.ex = f.ex;
    r.ey = f.ey;
    r.tex_seed = seed + idx++;
    faces.push_back(r);
  }
  return faces;
}

json spline_to_json(const KnotSpline& s) {
  return json{{"t", s.knots_t()}, {"y", s.knots_y()}};
}

KnotSpline spline_from_json(const json& j) {
  return KnotSpline(j.at("t").get<std::vector<double>>(), j.at("y").get<std::vector<double>>());
}

json vec3_to_json(const Vec3& v) { return json{v.x(), v.y(), v.z()}; }

Vec3 vec3_from_json(const json& j) { return Vec3(j.at(0), j.at(1), j.at(2)); }

json pose_to_json(const Pose& p) {
  return json{{"t", vec3_to_json(p.t)}, {"q", {p.q.x(), p.q.y(), p.q.z(), p.q.w()}}};
}

Pose pose_from_json(const json& j) {
  auto q = j.at("q");
  return Pose(Eigen::Quaterniond(q.at(3), q.at(0), q.at(1), q.at(2)), vec3_from_json(j.at("t")));
}

}  // namespace

double procedural_texture(uint64_t seed, double s, double t) {
  double phase = double(seed % 1000) / 1000.0;
  double wave = 0.18 * std::sin(2 * M_PI * (s / 0.23 + 0.37 * phase)) *
                std::sin(2 * M_PI * (t / 0.19 + 0.61 * phase));
  double cell = hash01(seed, int64_t(std::floor(s / 0.08)), int64_t(std::floor(t / 0.08)));
  double v = 0.5 + wave + 0.28 * (cell - 0.5);
  return std::clamp(v, 0.02, 0.98);
}

Pose camera_pose(const CameraPath& path, double t) {
  Mat3 R = rot_z(path.yaw.eval(t)) * rot_y(path.pitch.eval(t)) * camera_base_rotation();
  return Pose(R, path.pos.eval(t));
}

Vec3 camera_angular_velocity_body(const CameraPath& path, double t) {
  double theta = path.pitch.eval(t);
  Vec3 w_mid = path.yaw.d1(t) * (rot_y(theta).transpose() * Vec3::UnitZ()) +
               path.pitch.d1(t) * Vec3::UnitY();
  return camera_base_rotation().transpose() * w_mid;
}

RenderedFrame render_frame(const SceneSpec& spec, double t) {
  if (t < 0 || t > spec.duration) fail("TimeOutOfRange", "render time outside [0, duration]");
  struct Owned {
    RectSurface rect;
    uint8_t owner;
  };
  std::vector<Owned> surfaces;
  for (const auto& r : spec.static_surfaces) surfaces.push_back({r, 0});
  for (size_t m = 0; m < spec.movers.size(); ++m) {
    const Mover& mv = spec.movers[m];
    if (t < mv.t_start || t > mv.t_end) continue;
    Pose pose(rot_z(mv.yaw.eval(t)), mv.center.eval(t));
    for (const auto& f : box_faces(pose, mv.extents, mv.tex_seed)) {
      surfaces.push_back({f, uint8_t(m + 1)});
    }
  }
  // Precompute rect-frame ray origins.
  Pose cam = camera_pose(spec.trajectory, t);
  Mat3 Rwc = cam.rotation();
  struct RectCache {
    Mat3 Rt;
    Vec3 o;       // ray origin in rect frame
    Mat3 RtRwc;   // camera ray direction to rect frame
    double hx, hy;
    uint64_t seed;
    uint8_t owner;
  };
  std::vector<RectCache> cache;
  cache.reserve(surfaces.size());
  for (const auto& s : surfaces) {
    RectCache c;
    c.Rt = s.rect.world_from_rect.rotation().transpose();
    c.o = c.Rt * (cam.t - s.rect.world_from_rect.t);
    c.RtRwc = c.Rt * Rwc;
    c.hx = s.rect.ex / 2;
    c.hy = s.rect.ey / 2;
    c.seed = s.rect.tex_seed;
    c.owner = s.owner;
    cache.push_back(c);
  }

  const CameraModel& K = spec.camera;
  RenderedFrame out;
  out.frame.timestamp = t;
  out.frame.intensity = ImageF(K.width, K.height, 0.f);
  out.frame.depth = ImageF(K.width, K.height, 0.f);
  out.mask = ImageU8(K.width, K.height, 0);

  std::mt19937_64 noise_rng(splitmix(spec.seed ^ splitmix(uint64_t(std::llround(t * 1e6)))));
  std::normal_distribution<double> gauss(0.0, 1.0);

  for (int y = 0; y < K.height; ++y) {
    for (int x = 0; x < K.width; ++x) {
      Vec3 dir_cam((x - K.cx) / K.fx, (y - K.cy) / K.fy, 1.0);
      double best = std::numeric_limits<double>::max();
      double intensity = 0;
      uint8_t owner = 0;
      bool hit = false;
      for (const auto& c : cache) {
        Vec3 d = c.RtRwc * dir_cam;
        if (std::abs(d.z()) < 1e-12) continue;
        double th = -c.o.z() / d.z();
        if (th <= 1e-6 || th >= best) continue;
        double qx = c.o.x() + th * d.x();
        double qy = c.o.y() + th * d.y();
        if (std::abs(qx) > c.hx || std::abs(qy) > c.hy) continue;
        best = th;
        intensity = procedural_texture(c.seed, qx, qy);
        owner = c.owner;
        hit = true;
      }
      if (!hit) continue;
      double depth = best;  // camera-frame z (dir_cam.z == 1)
      if (spec.depth_sigma > 0) depth += spec.depth_sigma * gauss(noise_rng);
      out.mask.at(x, y) = owner;
      out.frame.intensity.at(x, y) = float(intensity);
      if (depth < 0.3 || depth > 8.0) continue;
      out.frame.depth.at(x, y) = float(std::round(depth * 1000.0) / 1000.0);
    }
  }
  return out;
}

ImuGroundTruth generate_imu(const SceneSpec& spec) {
  ImuGroundTruth out;
  std::mt19937_64 rng(splitmix(spec.seed ^ 0xabcdef1234567ull));
  std::normal_distribution<double> gauss(0.0, 1.0);
  double dt = 1.0 / spec.imu_rate;
  double sg = spec.imu_noise.gyro_density * std::sqrt(spec.imu_rate);
  double sa = spec.imu_noise.accel_density * std::sqrt(spec.imu_rate);
  int n = int(std::floor(spec.duration * spec.imu_rate)) + 1;
  for (int k = 0; k < n; ++k) {
    double t = k * dt;
    Pose cam = camera_pose(spec.trajectory, t);
    Vec3 w = camera_angular_velocity_body(spec.trajectory, t);
    Vec3 a = cam.rotation().transpose() * (spec.trajectory.pos.d2(t) - kGravity);
    ImuSample ideal;
    ideal.timestamp = t;
    ideal.gyro = w;
    ideal.accel = a;
    out.ideal_samples.push_back(ideal);
    ImuSample s = ideal;
    s.gyro += spec.imu_bias.bg + sg * Vec3(gauss(rng), gauss(rng), gauss(rng));
    s.accel += spec.imu_bias.ba + sa * Vec3(gauss(rng), gauss(rng), gauss(rng));
    out.samples.push_back(s);
  }
  return out;
}

DatasetStats emit_dataset(const SceneSpec& spec, const std::string& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir + "/rgb", ec);
  fs::create_directories(out_dir + "/depth", ec);
  fs::create_directories(out_dir + "/mask_gt", ec);
  if (ec) fail("IoError", "cannot create dataset directories under " + out_dir);

  DatasetStats stats;
  int n = int(std::llround(spec.duration * spec.frame_rate));
  std::vector<FrameEntry> entries;
  std::vector<TrajectorySample> gt;
  int occluded = 0;
  for (int k = 0; k < n; ++k) {
    double t = k / spec.frame_rate;
    RenderedFrame rf = render_frame(spec, t);
    char name[32];
    std::snprintf(name, sizeof(name), "%06d.png", k);
    write_png8(out_dir + "/rgb/" + name, to_u8(rf.frame.intensity));
    write_png16(out_dir + "/depth/" + name, depth_to_u16(rf.frame.depth));
    write_png8(out_dir + "/mask_gt/" + name, rf.mask);
    entries.push_back({t, std::string("rgb/") + name, std::string("depth/") + name});
    gt.push_back({t, camera_pose(spec.trajectory, t)});  // T_BC = identity: body == camera
    size_t mover_px = 0;
    for (uint8_t m : rf.mask.data) mover_px += (m > 0);
    if (mover_px * 2 >= rf.mask.data.size()) ++occluded;
  }
  write_frames_index(out_dir + "/frames.txt", entries);
  write_trajectory(out_dir + "/groundtruth.txt", gt);
  write_imu_csv(out_dir + "/imu.csv", generate_imu(spec).samples);
  Calibration calib;
  calib.cam = spec.camera;
  calib.body_from_cam = Pose::identity();
  write_calib(out_dir + "/calib.txt", calib);
  write_scene_spec(out_dir + "/spec.json", spec);

  stats.frames = n;
  stats.occluded_frame_fraction = n > 0 ? double(occluded) / n : 0;
  double len = 0;
  for (int k = 1; k < 2000; ++k) {
    double t0 = (k - 1) * spec.duration / 1999.0, t1 = k * spec.duration / 1999.0;
    len += (spec.trajectory.pos.eval(t1) - spec.trajectory.pos.eval(t0)).norm();
  }
  stats.path_length = len;

  std::ofstream f(out_dir + "/stats.json");
  f << json{{"frames", stats.frames},
            {"occluded_frame_fraction", stats.occluded_frame_fraction},
            {"path_length", stats.path_length}}
           .dump(2)
    << "\n";
  return stats;
}

SceneSpec make_stock_spec(const std::string& name, uint64_t seed) {
  bool is_static = name == "static";
  bool is_stlo = name == "stlo";
  bool is_ltlo = name == "ltlo";
  if (!is_static && !is_stlo && !is_ltlo) fail("ConfigInvalid", "unknown stock spec: " + name);

  SceneSpec spec;
  spec.seed = seed;
  spec.duration = is_ltlo ? 28.0 : 25.0;
  spec.frame_rate = 15.0;
  spec.camera = CameraModel{160, 160, 159.5, 119.5, 0.05, 320, 240};
  spec.imu_bias.bg = Vec3(0.02, 0.02, 0.02);
  spec.imu_bias.ba = Vec3(0.2, 0.2, 0.2);

  // Room: floor, ceiling, four walls, two pillar boxes.
  auto add_rect = [&](const Mat3& R, const Vec3& t, double ex, double ey, uint64_t s) {
    spec.static_surfaces.push_back({Pose(R, t), ex, ey, s});
  };
  add_rect(Mat3::Identity(), Vec3(0, 0, 0), 8, 8, 11);           // floor
  add_rect(rot_x(M_PI), Vec3(0, 0, 3), 8, 8, 12);                // ceiling
  add_rect(rot_y(M_PI / 2), Vec3(-4, 0, 1.5), 3, 8, 13);         // wall x=-4
  add_rect(rot_y(-M_PI / 2), Vec3(4, 0, 1.5), 3, 8, 14);         // wall x=+4
  add_rect(rot_x(-M_PI / 2), Vec3(0, -4, 1.5), 8, 3, 15);        // wall y=-4
  add_rect(rot_x(M_PI / 2), Vec3(0, 4, 1.5), 8, 3, 16);          // wall y=+4
  for (const auto& f : box_faces(Pose(rot_z(0.3), Vec3(2.9, 2.9, 0.75)), Vec3(0.8, 0.8, 1.5), 20))
    spec.static_surfaces.push_back(f);
  for (const auto& f :
       box_faces(Pose(rot_z(-0.5), Vec3(-2.9, -2.6, 0.6)), Vec3(0.7, 1.0, 1.2), 30))
    spec.static_surfaces.push_back(f);

  // Camera loop: 2 s stationary, then ~1.5 laps of a radius-2.2 circle.
  double t_move = 2.0;
  double phi_total = 9.4;
  double r = 2.2;
  std::vector<double> kt, px, py, pz, yaw, pitch;
  for (double t = 0; t <= spec.duration + 1e-9; t += 0.5) {
    double u = std::max(0.0, t - t_move);
    double span = spec.duration - t_move;
    double phi = phi_total * u / span;
    kt.push_back(t);
    px.push_back(r * std::cos(phi));
    py.push_back(r * std::sin(phi));
    pz.push_back(1.4 + (u > 0 ? 0.08 * std::sin(1.1 * u) : 0.0));
    yaw.push_back(phi);
    pitch.push_back(u > 0 ? 0.08 * std::sin(0.7 * u) : 0.0);
  }
  spec.trajectory.pos = {KnotSpline(kt, px), KnotSpline(kt, py), KnotSpline(kt, pz)};
  spec.trajectory.yaw = KnotSpline(kt, yaw);
  spec.trajectory.pitch = KnotSpline(kt, pitch);

  if (!is_static) {
    Mover mv;
    mv.extents = Vec3(0.12, 1.5, 1.1);
    mv.tex_seed = 100 + seed;
    if (is_ltlo) {
      mv.t_start = 4.0;
      mv.t_end = 24.4;
    } else {
      mv.t_start = 9.0;
      mv.t_end = 13.5;
    }
    std::vector<double> mx, my, mz, myaw;
    for (size_t i = 0; i < kt.size(); ++i) {
      double t = kt[i];
      double u = std::max(0.0, t - t_move);
      double span = spec.duration - t_move;
      double phi = phi_total * u / span;
      Vec3 campos(r * std::cos(phi), r * std::sin(phi),
                  1.4 + (u > 0 ? 0.08 * std::sin(1.1 * u) : 0.0));
      Vec3 outward(std::cos(phi), std::sin(phi), 0);
      Vec3 tangent(-std::sin(phi), std::cos(phi), 0);
      double s = t - mv.t_start;
      Vec3 c = campos + 0.97 * outward + 0.26 * std::sin(1.3 * s) * tangent +
               Vec3(0, 0, 0.06 * std::sin(0.9 * s));
      mx.push_back(c.x());
      my.push_back(c.y());
      mz.push_back(c.z());
      myaw.push_back(phi + M_PI);
    }
    mv.center = {KnotSpline(kt, mx), KnotSpline(kt, my), KnotSpline(kt, mz)};
    mv.yaw = KnotSpline(kt, myaw);
    spec.movers.push_back(std::move(mv));
  }
  return spec;
}

void write_scene_spec(const std::string& path, const SceneSpec& spec) {
  json j;
  j["duration"] = spec.duration;
  j["frame_rate"] = spec.frame_rate;
  j["imu_rate"] = spec.imu_rate;
  j["seed"] = spec.seed;
  j["depth_sigma"] = spec.depth_sigma;
  j["imu_noise"] = {{"gyro_density", spec.imu_noise.gyro_density},
                    {"accel_density", spec.imu_noise.accel_density}};
  j["imu_bias"] = {{"bg", vec3_to_json(spec.imu_bias.bg)}, {"ba", vec3_to_json(spec.imu_bias.ba)}};
  j["camera"] = {{"fx", spec.camera.fx},   {"fy", spec.camera.fy},
                 {"cx", spec.camera.cx},   {"cy", spec.camera.cy},
                 {"baseline", spec.camera.baseline},
                 {"width", spec.camera.width}, {"height", spec.camera.height}};
  j["trajectory"] = {{"pos_x", spline_to_json(spec.trajectory.pos.x)},
                     {"pos_y", spline_to_json(spec.trajectory.pos.y)},
                     {"pos_z", spline_to_json(spec.trajectory.pos.z)},
                     {"yaw", spline_to_json(spec.trajectory.yaw)},
                     {"pitch", spline_to_json(spec.trajectory.pitch)}};
  j["static_surfaces"] = json::array();
  for (const auto& s : spec.static_surfaces) {
    j["static_surfaces"].push_back({{"pose", pose_to_json(s.world_from_rect)},
                                    {"ex", s.ex},
                                    {"ey", s.ey},
                                    {"tex_seed", s.tex_seed}});
  }
  j["movers"] = json::array();
  for (const auto& m : spec.movers) {
    j["movers"].push_back({{"extents", vec3_to_json(m.extents)},
                           {"center_x", spline_to_json(m.center.x)},
                           {"center_y", spline_to_json(m.center.y)},
                           {"center_z", spline_to_json(m.center.z)},
                           {"yaw", spline_to_json(m.yaw)},
                           {"t_start", m.t_start},
                           {"t_end", m.t_end},
                           {"tex_seed", m.tex_seed}});
  }
  std::ofstream f(path);
  if (!f) fail("IoError", "cannot open for writing: " + path);
  f << j.dump(2) << "\n";
}

SceneSpec read_scene_spec(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail("IoError", "cannot open for reading: " + path);
  json j;
  f >> j;
  SceneSpec spec;
  spec.duration = j.at("duration");
  spec.frame_rate = j.at("frame_rate");
  spec.imu_rate = j.at("imu_rate");
  spec.seed = j.at("seed");
  spec.depth_sigma = j.value("depth_sigma", 0.0);
  spec.imu_noise.gyro_density = j.at("imu_noise").at("gyro_density");
  spec.imu_noise.accel_density = j.at("imu_noise").at("accel_density");
  spec.imu_bias.bg = vec3_from_json(j.at("imu_bias").at("bg"));
  spec.imu_bias.ba = vec3_from_json(j.at("imu_bias").at("ba"));
  const auto& c = j.at("camera");
  spec.camera = CameraModel{c.at("fx"), c.at("fy"), c.at("cx"), c.at("cy"),
                            c.at("baseline"), c.at("width"), c.at("height")};
  const auto& tr = j.at("trajectory");
  spec.trajectory.pos = {spline_from_json(tr.at("pos_x")), spline_from_json(tr.at("pos_y")),
                         spline_from_json(tr.at("pos_z"))};
  spec.trajectory.yaw = spline_from_json(tr.at("yaw"));
  spec.trajectory.pitch = spline_from_json(tr.at("pitch"));
  for (const auto& s : j.at("static_surfaces")) {
    spec.static_surfaces.push_back(
        {pose_from_json(s.at("pose")), s.at("ex"), s.at("ey"), s.at("tex_seed")});
  }
  for (const auto& m : j.at("movers")) {
    Mover mv;
    mv.extents = vec3_from_json(m.at("extents"));
    mv.center = {spline_from_json(m.at("center_x")), spline_from_json(m.at("center_y")),
                 spline_from_json(m.at("center_z"))};
    mv.yaw = spline_from_json(m.at("yaw"));
    mv.t_start = m.at("t_start");
    mv.t_end = m.at("t_end");
    mv.tex_seed = m.at("tex_seed");
    spec.movers.push_back(std::move(mv));
  }
  return spec;
}

}  // namespace ovis
