#pragma once

#include <cstdint>
#include <vector>

#include "wasr/types.hpp"

namespace wasr {

struct Component {
  std::vector<std::int64_t> pixels;  // raster-ordered linear indices
  Box bbox;
  std::int64_t size() const { return static_cast<std::int64_t>(pixels.size()); }
};

/// Labels set pixels of `mask` into connected components (4- or 8-connected),
/// sorted by size descending, ties broken by the raster position of the
/// first pixel.
std::vector<Component> connected_components(const BinaryGrid& mask, int connectivity = 4);

/// Replaces unknown pixels by the label of a 4-neighbour, preferring
/// obstacle, then water, then sky; repeats until none remain. Predictions
/// contain no unknown pixels and pass through unchanged.
SegLabelMap resolve_unknown(const SegLabelMap& seg);

/// Largest connected component of the water-labeled pixels.
BinaryGrid water_region(const SegLabelMap& seg, int connectivity = 4);

inline constexpr int kNoWater = -1;

/// Per column, the topmost row of the region, or kNoWater.
using WaterEdge = std::vector<int>;
WaterEdge water_edge(const BinaryGrid& region);

struct Detection {
  Box bbox;
  std::int64_t area = 0;  // component pixel count
  friend bool operator==(const Detection&, const Detection&) = default;
};

/// Minimum obstacle area scaled from 25 px at 384x512 to the given resolution.
int scaled_min_area(int height, int width);

/// Obstacle components that touch the water region: some pixel is
/// 4-adjacent to a region pixel or lies inside the region's vertical span in
/// its column, and the component's row extent meets the region's. Components
/// smaller than `min_area` are dropped. Sorted by area descending.
std::vector<Detection> extract_obstacles(const SegLabelMap& seg, const BinaryGrid& region, int min_area,
                                         int connectivity = 4);

struct PostprocessResult {
  BinaryGrid region;
  WaterEdge edge;
  std::vector<Detection> detections;
};

/// resolve_unknown -> water_region -> water_edge -> extract_obstacles.
PostprocessResult postprocess(const SegLabelMap& seg, int min_area, int connectivity = 4);

}  // namespace wasr
