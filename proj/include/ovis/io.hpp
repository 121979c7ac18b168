#pragma once

#include <string>
#include <vector>

#include "ovis/dense_frontend.hpp"
#include "ovis/imu.hpp"

namespace ovis {

// Grayscale PNG, 8 or 16 bit. 16-bit values are stored big-endian per PNG.
void write_png8(const std::string& path, const ImageU8& img);
void write_png16(const std::string& path, const ImageU16& img);
ImageU8 read_png8(const std::string& path);
ImageU16 read_png16(const std::string& path);

// Trajectory text format: `timestamp tx ty tz qx qy qz qw`, '#' comments.
struct TrajectorySample {
  double timestamp = 0;
  Pose pose;
};

void write_trajectory(const std::string& path, const std::vector<TrajectorySample>& traj);
std::vector<TrajectorySample> read_trajectory(const std::string& path);

// IMU CSV: `timestamp_s,gx,gy,gz,ax,ay,az`, optional header line.
void write_imu_csv(const std::string& path, const std::vector<ImuSample>& samples);
std::vector<ImuSample> read_imu_csv(const std::string& path);

struct Calibration {
  CameraModel cam;
  Pose body_from_cam;  // T_BC
};

void write_calib(const std::string& path, const Calibration& calib);
Calibration read_calib(const std::string& path);

struct FrameEntry {
  double timestamp = 0;
  std::string rgb;    // relative path, 8-bit gray PNG
  std::string depth;  // relative path, 16-bit PNG in millimeters
};

void write_frames_index(const std::string& path, const std::vector<FrameEntry>& entries);
std::vector<FrameEntry> read_frames_index(const std::string& path);

// Dataset access: rgb/, depth/, frames.txt, imu.csv, calib.txt under one dir.
struct Dataset {
  std::string root;
  Calibration calib;
  std::vector<FrameEntry> frames;
  std::vector<ImuSample> imu;

  RgbdFrame load_frame(size_t idx) const;
};

Dataset open_dataset(const std::string& root);

ImageU8 to_u8(const ImageF& img, double scale = 255.0);
ImageF intensity_from_u8(const ImageU8& img);
ImageF depth_from_u16(const ImageU16& img);  // millimeters -> meters
ImageU16 depth_to_u16(const ImageF& depth);

}  // namespace ovis
