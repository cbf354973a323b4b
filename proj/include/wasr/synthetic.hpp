#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wasr/horizon.hpp"
#include "wasr/types.hpp"

namespace wasr {

struct SceneSample {
  int frame = 0;
  std::string sequence;
  Image image;
  SegLabelMap labels;
  ImuSample imu;
  CameraIntrinsics cam;
  std::vector<Box> gt_boxes;
  Polyline gt_edge;

  friend bool operator==(const SceneSample&, const SceneSample&) = default;
};

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

struct SceneParams {
  int height = 96;
  int width = 128;
  double focal_px = 128.0;
  Range roll{-0.15, 0.15};   // radians
  Range pitch{-0.12, 0.12};  // radians
  double imu_noise = 0.01;   // std of roll/pitch read-out noise, radians
  double water_texture = 0.05;
  double glitter_prob = 0.002;  // streaks per water pixel
  double reflection = 0.3;
  int obstacles_min = 1;
  int obstacles_max = 4;
  int obstacle_size_min = 8;
  int obstacle_size_max = 22;
  double protruding_fraction = 0.5;
  double haze = 0.3;
  int sequence_length = 25;

  void validate() const;
};

/// Renders one scene. Labels come from the rendering geometry; the recorded
/// IMU sample is the true attitude plus read-out noise.
SceneSample generate_scene(const SceneParams& params, std::uint64_t seed, int frame = 0);

/// Scenes for frames [first, first + count) with per-frame seeds derived from `seed`.
std::vector<SceneSample> generate_scenes(const SceneParams& params, std::uint64_t seed, int count, int first = 0);

/// Marks a 1-px unknown band along label boundaries: obstacle pixels that
/// touch another label and water pixels that touch sky.
void add_unknown_band(SegLabelMap& labels);

/// Topmost water row per column of an unbanded label map, as a polyline
/// with one vertex per column that has water.
Polyline label_water_edge(const SegLabelMap& labels);

}  // namespace wasr
