#include "wasr/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace wasr {

std::vector<Component> connected_components(const BinaryGrid& mask, int connectivity) {
  if (connectivity != 4 && connectivity != 8) throw ContractError("connectivity must be 4 or 8");
  const int h = mask.height, w = mask.width;
  std::vector<int> comp_of(mask.size(), -1);
  std::vector<Component> comps;
  std::vector<std::int64_t> queue;
  static constexpr int kDr[8] = {-1, 1, 0, 0, -1, -1, 1, 1};
  static constexpr int kDc[8] = {0, 0, -1, 1, -1, 1, -1, 1};

  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const std::int64_t start = static_cast<std::int64_t>(r) * w + c;
      if (!mask.cells[static_cast<std::size_t>(start)] || comp_of[static_cast<std::size_t>(start)] >= 0) continue;
      const int id = static_cast<int>(comps.size());
      Component comp;
      comp.bbox = {c, r, c, r};
      queue.assign(1, start);
      comp_of[static_cast<std::size_t>(start)] = id;
      for (std::size_t q = 0; q < queue.size(); ++q) {
        const std::int64_t p = queue[q];
        const int pr = static_cast<int>(p / w), pc = static_cast<int>(p % w);
        comp.pixels.push_back(p);
        comp.bbox.x1 = std::min(comp.bbox.x1, pc);
        comp.bbox.x2 = std::max(comp.bbox.x2, pc);
        comp.bbox.y1 = std::min(comp.bbox.y1, pr);
        comp.bbox.y2 = std::max(comp.bbox.y2, pr);
        for (int k = 0; k < connectivity; ++k) {
          const int nr = pr + kDr[k], nc = pc + kDc[k];
          if (!mask.in_bounds(nr, nc)) continue;
          const std::int64_t n = static_cast<std::int64_t>(nr) * w + nc;
          if (mask.cells[static_cast<std::size_t>(n)] && comp_of[static_cast<std::size_t>(n)] < 0) {
            comp_of[static_cast<std::size_t>(n)] = id;
            queue.push_back(n);
          }
        }
      }
      std::sort(comp.pixels.begin(), comp.pixels.end());
      comps.push_back(std::move(comp));
    }
  }
  // Discovery order is raster order of each component's first pixel, so a
  // stable sort by size leaves ties in top-left order.
  std::stable_sort(comps.begin(), comps.end(), [](const Component& a, const Component& b) { return a.size() > b.size(); });
  return comps;
}

SegLabelMap resolve_unknown(const SegLabelMap& seg) {
  SegLabelMap out = seg;
  const int h = seg.height, w = seg.width;
  bool any_unknown = std::any_of(out.cells.begin(), out.cells.end(), [](Label l) { return l == Label::unknown; });
  while (any_unknown) {
    SegLabelMap next = out;
    bool changed = false;
    any_unknown = false;
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        if (out(r, c) != Label::unknown) continue;
        bool has_obstacle = false, has_water = false, has_sky = false;
        const int nbr[4][2] = {{r - 1, c}, {r + 1, c}, {r, c - 1}, {r, c + 1}};
        for (const auto& n : nbr) {
          if (!out.in_bounds(n[0], n[1])) continue;
          const Label l = out(n[0], n[1]);
          has_obstacle |= l == Label::obstacle;
          has_water |= l == Label::water;
          has_sky |= l == Label::sky;
        }
        if (has_obstacle || has_water || has_sky) {
          next(r, c) = has_obstacle ? Label::obstacle : has_water ? Label::water : Label::sky;
          changed = true;
        } else {
          any_unknown = true;
        }
      }
    }
    out = std::move(next);
    if (!changed) {
      // Entirely unknown map.
      std::replace(out.cells.begin(), out.cells.end(), Label::unknown, Label::sky);
      break;
    }
  }
  return out;
}

BinaryGrid water_region(const SegLabelMap& seg, int connectivity) {
  BinaryGrid water(seg.height, seg.width, 0);
  for (std::size_t i = 0; i < seg.cells.size(); ++i) water.cells[i] = seg.cells[i] == Label::water ? 1 : 0;
  const auto comps = connected_components(water, connectivity);
  BinaryGrid region(seg.height, seg.width, 0);
  if (!comps.empty()) {
    for (auto p : comps.front().pixels) region.cells[static_cast<std::size_t>(p)] = 1;
  }
  return region;
}

WaterEdge water_edge(const BinaryGrid& region) {
  WaterEdge edge(static_cast<std::size_t>(region.width), kNoWater);
  for (int c = 0; c < region.width; ++c) {
    for (int r = 0; r < region.height; ++r) {
      if (region(r, c)) {
        edge[static_cast<std::size_t>(c)] = r;
        break;
      }
    }
  }
  return edge;
}

int scaled_min_area(int height, int width) {
  const double scaled = 25.0 * static_cast<double>(height) * width / (384.0 * 512.0);
  return std::max(1, static_cast<int>(std::lround(scaled)));
}

std::vector<Detection> extract_obstacles(const SegLabelMap& seg, const BinaryGrid& region, int min_area,
                                         int connectivity) {
  const int h = seg.height, w = seg.width;
  std::vector<int> top(static_cast<std::size_t>(w), std::numeric_limits<int>::max());
  std::vector<int> bottom(static_cast<std::size_t>(w), -1);
  int region_top = std::numeric_limits<int>::max(), region_bottom = -1;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (!region(r, c)) continue;
      top[static_cast<std::size_t>(c)] = std::min(top[static_cast<std::size_t>(c)], r);
      bottom[static_cast<std::size_t>(c)] = std::max(bottom[static_cast<std::size_t>(c)], r);
      region_top = std::min(region_top, r);
      region_bottom = std::max(region_bottom, r);
    }
  }
  if (region_bottom < 0) return {};

  BinaryGrid obstacles(h, w, 0);
  for (std::size_t i = 0; i < seg.cells.size(); ++i) obstacles.cells[i] = seg.cells[i] == Label::obstacle ? 1 : 0;

  auto touches_region = [&](const Component& comp) {
    if (comp.bbox.y2 < region_top || comp.bbox.y1 > region_bottom) return false;
    for (auto p : comp.pixels) {
      const int r = static_cast<int>(p / w), c = static_cast<int>(p % w);
      const auto uc = static_cast<std::size_t>(c);
      if (bottom[uc] >= 0 && r >= top[uc] && r <= bottom[uc]) return true;
      const int nbr[4][2] = {{r - 1, c}, {r + 1, c}, {r, c - 1}, {r, c + 1}};
      for (const auto& n : nbr) {
        if (region.in_bounds(n[0], n[1]) && region(n[0], n[1])) return true;
      }
    }
    return false;
  };

  std::vector<Detection> out;
  for (const auto& comp : connected_components(obstacles, connectivity)) {
    if (comp.size() < min_area) break;  // sorted by size
    if (touches_region(comp)) out.push_back({comp.bbox, comp.size()});
  }
  return out;
}

PostprocessResult postprocess(const SegLabelMap& seg, int min_area, int connectivity) {
  const SegLabelMap resolved = resolve_unknown(seg);
  PostprocessResult res;
  res.region = water_region(resolved, connectivity);
  res.edge = water_edge(res.region);
  res.detections = extract_obstacles(resolved, res.region, min_area, connectivity);
  return res;
}

}  // namespace wasr
