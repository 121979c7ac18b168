#include "ovis/io.hpp"

#include <png.h>

#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

namespace ovis {

namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

void write_png_gray(const std::string& path, int width, int height, int bit_depth,
                    const void* rows_data, size_t row_bytes) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) fail("IoError", "cannot open for writing: " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail("IoError", "libpng write failure: " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, width, height, bit_depth, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const uint8_t* base = static_cast<const uint8_t*>(rows_data);
  for (int y = 0; y < height; ++y) {
    png_write_row(png, const_cast<png_bytep>(base + size_t(y) * row_bytes));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void read_png_gray(const std::string& path, int expect_depth, int& width, int& height,
                   std::vector<uint8_t>& out) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) fail("IoError", "cannot open for reading: " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail("IoError", "libpng read failure: " + path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  width = png_get_image_width(png, info);
  height = png_get_image_height(png, info);
  int depth = png_get_bit_depth(png, info);
  int color = png_get_color_type(png, info);
  if (color != PNG_COLOR_TYPE_GRAY || depth != expect_depth) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail("IoError", "expected " + std::to_string(expect_depth) + "-bit gray PNG: " + path);
  }
  size_t row_bytes = png_get_rowbytes(png, info);
  out.resize(row_bytes * height);
  for (int y = 0; y < height; ++y) {
    png_read_row(png, out.data() + size_t(y) * row_bytes, nullptr);
  }
  png_destroy_read_struct(&png, &info, nullptr);
}

}  // namespace

void write_png8(const std::string& path, const ImageU8& img) {
  write_png_gray(path, img.width, img.height, 8, img.data.data(), img.width);
}

void write_png16(const std::string& path, const ImageU16& img) {
  std::vector<uint8_t> rows(size_t(img.width) * img.height * 2);
  for (size_t i = 0; i < img.data.size(); ++i) {
    rows[2 * i] = uint8_t(img.data[i] >> 8);
    rows[2 * i + 1] = uint8_t(img.data[i] & 0xff);
  }
  write_png_gray(path, img.width, img.height, 16, rows.data(), size_t(img.width) * 2);
}

ImageU8 read_png8(const std::string& path) {
  int w, h;
  std::vector<uint8_t> raw;
  read_png_gray(path, 8, w, h, raw);
  ImageU8 img(w, h);
  std::copy(raw.begin(), raw.end(), img.data.begin());
  return img;
}

ImageU16 read_png16(const std::string& path) {
  int w, h;
  std::vector<uint8_t> raw;
  read_png_gray(path, 16, w, h, raw);
  ImageU16 img(w, h);
  for (size_t i = 0; i < img.data.size(); ++i) {
    img.data[i] = uint16_t((raw[2 * i] << 8) | raw[2 * i + 1]);
  }
  return img;
}

void write_trajectory(const std::string& path, const std::vector<TrajectorySample>& traj) {
  std::ofstream f(path);
  if (!f) fail("IoError", "cannot open for writing: " + path);
  f << "# timestamp tx ty tz qx qy qz qw\n";
  f.precision(12);
  for (const auto& s : traj) {
    f << s.timestamp << ' ' << s.pose.t.x() << ' ' << s.pose.t.y() << ' ' << s.pose.t.z() << ' '
      << s.pose.q.x() << ' ' << s.pose.q.y() << ' ' << s.pose.q.z() << ' ' << s.pose.q.w()
      << '\n';
  }
}

std::vector<TrajectorySample> read_trajectory(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail("IoError", "cannot open for reading: " + path);
  std::vector<TrajectorySample> out;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    TrajectorySample s;
    double qx, qy, qz, qw;
    if (!(ss >> s.timestamp >> s.pose.t.x() >> s.pose.t.y() >> s.pose.t.z() >> qx >> qy >> qz >>
          qw)) {
      fail("IoError", "malformed trajectory line in " + path + ": " + line);
    }
    s.pose.q = Eigen::Quaterniond(qw, qx, qy, qz).normalized();
    out.push_back(s);
  }
  return out;
}

void write_imu_csv(const std::string& path, const std::vector<ImuSample>& samples) {
  std::ofstream f(path);
  if (!f) fail("IoError", "cannot open for writing: " + path);
  f << "timestamp_s,gx,gy,gz,ax,ay,az\n";
  f.precision(12);
  for (const auto& s : samples) {
    f << s.timestamp << ',' << s.gyro.x() << ',' << s.gyro.y() << ',' << s.gyro.z() << ','
      << s.accel.x() << ',' << s.accel.y() << ',' << s.accel.z() << '\n';
  }
}

std::vector<ImuSample> read_imu_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail("IoError", "cannot open for reading: " + path);
  std::vector<ImuSample> out;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    if (line.find_first_not_of("0123456789.+-eE, \t\r") != std::string::npos) continue;  // header
    for (char& c : line)
      if (c == ',') c = ' ';
    std::istringstream ss(line);
    ImuSample s;
    if (!(ss >> s.timestamp >> s.gyro.x() >> s.gyro.y() >> s.gyro.z() >> s.accel.x() >>
          s.accel.y() >> s.accel.z())) {
      fail("IoError", "malformed IMU line in " + path + ": " + line);
    }
    out.push_back(s);
  }
  return out;
}

void write_calib(const std::string& path, const Calibration& calib) {
  std::ofstream f(path);
  if (!f) fail("IoError", "cannot open for writing: " + path);
  f.precision(12);
  f << "# fx fy cx cy baseline width height\n";
  f << calib.cam.fx << ' ' << calib.cam.fy << ' ' << calib.cam.cx << ' ' << calib.cam.cy << ' '
    << calib.cam.baseline << ' ' << calib.cam.width << ' ' << calib.cam.height << '\n';
  f << "# T_BC: tx ty tz qx qy qz qw\n";
  const Pose& T = calib.body_from_cam;
  f << T.t.x() << ' ' << T.t.y() << ' ' << T.t.z() << ' ' << T.q.x() << ' ' << T.q.y() << ' '
    << T.q.z() << ' ' << T.q.w() << '\n';
}

Calibration read_calib(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail("IoError", "cannot open for reading: " + path);
  Calibration calib;
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    lines.push_back(line);
  }
  if (lines.size() < 2) fail("DatasetMalformed", "calib file incomplete: " + path);
  {
    std::istringstream ss(lines[0]);
    if (!(ss >> calib.cam.fx >> calib.cam.fy >> calib.cam.cx >> calib.cam.cy >>
          calib.cam.baseline >> calib.cam.width >> calib.cam.height)) {
      fail("DatasetMalformed", "bad intrinsics line in " + path);
    }
  }
  {
    std::istringstream ss(lines[1]);
    double qx, qy, qz, qw;
    if (!(ss >> calib.body_from_cam.t.x() >> calib.body_from_cam.t.y() >>
          calib.body_from_cam.t.z() >> qx >> qy >> qz >> qw)) {
      fail("DatasetMalformed", "bad T_BC line in " + path);
    }
    calib.body_from_cam.q = Eigen::Quaterniond(qw, qx, qy, qz).normalized();
  }
  return calib;
}

void write_frames_index(const std::string& path, const std::vector<FrameEntry>& entries) {
  std::ofstream f(path);
  if (!f) fail("IoError", "cannot open for writing: " + path);
  f << "# timestamp rgb depth\n";
  f.precision(12);
  for (const auto& e : entries) f << e.timestamp << ' ' << e.rgb << ' ' << e.depth << '\n';
}

std::vector<FrameEntry> read_frames_index(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail("IoError", "cannot open for reading: " + path);
  std::vector<FrameEntry> out;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    FrameEntry e;
    if (!(ss >> e.timestamp >> e.rgb >> e.depth)) {
      fail("DatasetMalformed", "malformed frames line in " + path + ": " + line);
    }
    out.push_back(e);
  }
  return out;
}

RgbdFrame Dataset::load_frame(size_t idx) const {
  const FrameEntry& e = frames.at(idx);
  RgbdFrame frame;
  frame.timestamp = e.timestamp;
  frame.intensity = intensity_from_u8(read_png8(root + "/" + e.rgb));
  frame.depth = depth_from_u16(read_png16(root + "/" + e.depth));
  if (frame.intensity.width != frame.depth.width || frame.intensity.height != frame.depth.height) {
    fail("DatasetMalformed", "rgb/depth size mismatch at frame " + std::to_string(idx));
  }
  return frame;
}

Dataset open_dataset(const std::string& root) {
  Dataset ds;
  ds.root = root;
  try {
    ds.calib = read_calib(root + "/calib.txt");
    ds.frames = read_frames_index(root + "/frames.txt");
    ds.imu = read_imu_csv(root + "/imu.csv");
  } catch (const Error& e) {
    fail("DatasetMalformed", std::string(e.what()) + " (dataset " + root + ")");
  }
  if (ds.frames.empty()) fail("DatasetMalformed", "no frames listed in " + root + "/frames.txt");
  if (ds.imu.empty()) fail("DatasetMalformed", "no IMU samples in " + root + "/imu.csv");
  return ds;
}

ImageU8 to_u8(const ImageF& img, double scale) {
  ImageU8 out(img.width, img.height);
  for (size_t i = 0; i < img.data.size(); ++i) {
    out.data[i] = uint8_t(std::clamp(std::lround(img.data[i] * scale), 0l, 255l));
  }
  return out;
}

ImageF intensity_from_u8(const ImageU8& img) {
  ImageF out(img.width, img.height);
  for (size_t i = 0; i < img.data.size(); ++i) out.data[i] = float(img.data[i]) / 255.0f;
  return out;
}

ImageF depth_from_u16(const ImageU16& img) {
  ImageF out(img.width, img.height);
  for (size_t i = 0; i < img.data.size(); ++i) out.data[i] = float(img.data[i]) * 0.001f;
  return out;
}

ImageU16 depth_to_u16(const ImageF& depth) {
  ImageU16 out(depth.width, depth.height);
  for (size_t i = 0; i < depth.data.size(); ++i) {
    out.data[i] = uint16_t(std::clamp(std::lround(depth.data[i] * 1000.0), 0l, 65535l));
  }
  return out;
}

}  // namespace ovis
