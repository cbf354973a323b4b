#pragma once

#include <filesystem>
#include <map>

#include "wasr/tensor.hpp"

namespace wasr {

/// IMU attitude. roll: about the optical axis, positive = clockwise image
/// rotation. pitch: positive moves the horizon toward the bottom of the
/// image. Both in radians, each of magnitude below pi/2.
struct ImuSample {
  double roll = 0.0;
  double pitch = 0.0;
  friend bool operator==(const ImuSample&, const ImuSample&) = default;
};

struct CameraIntrinsics {
  double focal_px = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;
  friend bool operator==(const CameraIntrinsics&, const CameraIntrinsics&) = default;

  void validate() const;

  /// Principal point at the pixel-grid center ((w-1)/2, (h-1)/2).
  static CameraIntrinsics centered(int width, int height, double focal_px);
};

/// Image-plane horizon: row(c) = slope * (c - cx) + intercept_row.
struct HorizonLine {
  double slope = 0.0;
  double intercept_row = 0.0;
  double cx = 0.0;

  double row_at(double col) const { return slope * (col - cx) + intercept_row; }
};

/// Pinhole model: slope = tan(roll), intercept = cy + f * tan(pitch).
HorizonLine horizon_line(const ImuSample& imu, const CameraIntrinsics& cam);

/// [1,height,width] mask, 1 strictly below the horizon line.
Tensor render_imu_mask(const HorizonLine& line, int width, int height);

/// Bilinear downsample of a [1,H,W] mask; fractional values are kept.
Tensor resize_mask(const Tensor& mask, int target_h, int target_w);

/// Inverse of horizon_line for a line expressed about a new attitude.
ImuSample imu_from_horizon(const HorizonLine& line, const CameraIntrinsics& cam);

/// Intrinsics text file: key=value lines (focal_px, cx, cy, width, height).
CameraIntrinsics read_intrinsics(const std::filesystem::path& path);
void write_intrinsics(const std::filesystem::path& path, const CameraIntrinsics& cam);

/// IMU CSV with header `frame,roll_rad,pitch_rad`.
std::map<int, ImuSample> read_imu_csv(const std::filesystem::path& path);
void write_imu_csv(const std::filesystem::path& path, const std::map<int, ImuSample>& samples);

}  // namespace wasr
