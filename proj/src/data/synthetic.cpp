#include "wasr/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "wasr/error.hpp"
#include "wasr/postprocess.hpp"
#include "wasr/rng.hpp"

namespace wasr {

void SceneParams::validate() const {
  if (height < 16 || width < 16) throw ContractError("scene size must be at least 16x16");
  if (focal_px <= 0.0) throw ContractError("focal_px must be positive");
  if (roll.lo > roll.hi || pitch.lo > pitch.hi) throw ContractError("roll/pitch ranges must have lo <= hi");
  if (std::max(std::abs(roll.lo), std::abs(roll.hi)) >= 0.5 || std::max(std::abs(pitch.lo), std::abs(pitch.hi)) >= 0.5) {
    throw ContractError("roll/pitch ranges must stay within 0.5 rad");
  }
  if (obstacles_min < 0 || obstacles_max < obstacles_min) throw ContractError("bad obstacle count range");
  if (obstacle_size_min < 6 || obstacle_size_max < obstacle_size_min) {
    throw ContractError("obstacle sizes must satisfy 6 <= min <= max");
  }
  if (obstacle_size_max > width / 2) throw ContractError("obstacle_size_max must be at most half the width");
  if (sequence_length < 1) throw ContractError("sequence_length must be >= 1");
  // The horizon must leave sky room above and water below in every column.
  const double cy = (height - 1) / 2.0, half_w = (width - 1) / 2.0;
  const double reach = focal_px * std::tan(std::max(std::abs(pitch.lo), std::abs(pitch.hi))) +
                       half_w * std::tan(std::max(std::abs(roll.lo), std::abs(roll.hi))) + 3.0 * imu_noise * focal_px;
  if (cy - reach < 2.0 || cy + reach > height - 12.0) {
    throw ContractError("roll/pitch ranges push the horizon out of frame");
  }
}

namespace {

using Rgb = std::array<double, 3>;

Rgb mix(const Rgb& a, const Rgb& b, double t) {
  return {a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, a[2] + (b[2] - a[2]) * t};
}

Rgb jitter(Rng& rng, Rgb c, double amount) {
  for (double& v : c) v = std::clamp(v + rng.uniform(-amount, amount), 0.0, 1.0);
  return c;
}

constexpr std::array<Rgb, 7> kPalette{{{0.85, 0.20, 0.15},
                                       {0.95, 0.60, 0.10},
                                       {0.90, 0.85, 0.20},
                                       {0.93, 0.93, 0.90},
                                       {0.12, 0.12, 0.14},
                                       {0.20, 0.55, 0.25},
                                       {0.55, 0.35, 0.25}}};

enum class ObstacleShape { ellipse, boat, pylon };

bool inside(ObstacleShape s, double u, double v) {
  switch (s) {
    case ObstacleShape::ellipse:
      return (u - 0.5) * (u - 0.5) + (v - 0.5) * (v - 0.5) <= 0.25;
    case ObstacleShape::boat:
      if (v >= 0.55) return std::abs(u - 0.5) <= 0.5 - 0.2 * (v - 0.55) / 0.45;
      return std::abs(u - 0.4) <= 0.2;
    case ObstacleShape::pylon:
      return std::abs(u - 0.5) <= 0.18 + 0.32 * v;
  }
  return false;
}

struct Obstacle {
  ObstacleShape shape;
  int x1, top, w, h;
  Rgb color;
  Box bbox;
  std::vector<std::pair<int, int>> pixels;  // (row, col)
};

// Thin water slivers between the horizon and an obstacle vanish under the
// unknown band; placements that move the recoverable water edge by more
// than a pixel are rejected.
bool edge_survives_band(const SegLabelMap& clean) {
  SegLabelMap banded = clean;
  add_unknown_band(banded);
  const WaterEdge got = water_edge(water_region(resolve_unknown(banded)));
  const Polyline want = label_water_edge(clean);
  if (want.size() != got.size()) return false;
  for (const auto& p : want) {
    const int g = got[static_cast<std::size_t>(p.x)];
    if (g == kNoWater || std::abs(g - p.y) > 1.0) return false;
  }
  return true;
}

}  // namespace

void add_unknown_band(SegLabelMap& labels) {
  const SegLabelMap src = labels;
  for (int r = 0; r < src.height; ++r) {
    for (int c = 0; c < src.width; ++c) {
      const Label l = src(r, c);
      if (l != Label::obstacle && l != Label::water) continue;
      const int nbr[4][2] = {{r - 1, c}, {r + 1, c}, {r, c - 1}, {r, c + 1}};
      for (const auto& n : nbr) {
        if (!src.in_bounds(n[0], n[1])) continue;
        const Label o = src(n[0], n[1]);
        if (o == Label::unknown) continue;
        if ((l == Label::obstacle && o != l) || (l == Label::water && o == Label::sky)) {
          labels(r, c) = Label::unknown;
          break;
        }
      }
    }
  }
}

Polyline label_water_edge(const SegLabelMap& labels) {
  Polyline edge;
  for (int c = 0; c < labels.width; ++c) {
    for (int r = 0; r < labels.height; ++r) {
      if (labels(r, c) == Label::water) {
        edge.push_back({static_cast<double>(c), static_cast<double>(r)});
        break;
      }
    }
  }
  return edge;
}

SceneSample generate_scene(const SceneParams& p, std::uint64_t seed, int frame) {
  p.validate();
  Rng rng(mix_seed({seed, static_cast<std::uint64_t>(frame), 0x5CE7EULL}));
  const int h = p.height, w = p.width;

  SceneSample s;
  s.frame = frame;
  s.sequence = "seq" + std::to_string(frame / p.sequence_length);
  s.cam = CameraIntrinsics::centered(w, h, p.focal_px);
  const ImuSample truth{rng.uniform(p.roll.lo, p.roll.hi), rng.uniform(p.pitch.lo, p.pitch.hi)};
  const HorizonLine line = horizon_line(truth, s.cam);
  s.imu = {truth.roll + p.imu_noise * rng.normal(), truth.pitch + p.imu_noise * rng.normal()};

  // Base labels from the horizon mask.
  const Tensor mask = render_imu_mask(line, w, h);
  const auto m = mask.data();
  s.labels = SegLabelMap(h, w, Label::sky);
  for (std::size_t i = 0; i < m.size(); ++i) s.labels.cells[i] = m[i] > 0.5 ? Label::water : Label::sky;
  std::vector<int> horizon_row(static_cast<std::size_t>(w));
  for (int c = 0; c < w; ++c) {
    int r = 0;
    while (r < h && s.labels(r, c) != Label::water) ++r;
    horizon_row[static_cast<std::size_t>(c)] = r;  // first water row
  }

  // Background.
  s.image = Image(h, w);
  const Rgb sky_top = jitter(rng, {0.35, 0.55, 0.85}, 0.08);
  const Rgb sky_low = jitter(rng, {0.78, 0.84, 0.90}, 0.05);
  const Rgb water_far = jitter(rng, {0.25, 0.40, 0.48}, 0.06);
  const Rgb water_near = jitter(rng, {0.05, 0.22, 0.30}, 0.04);
  const Rgb haze_color{0.80, 0.83, 0.86};
  const double wave_kx = rng.uniform(0.05, 0.12), wave_ky = rng.uniform(0.25, 0.6), phase = rng.uniform(0.0, 6.3);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double hr = horizon_row[static_cast<std::size_t>(c)];
      Rgb col;
      if (s.labels(r, c) == Label::sky) {
        col = mix(sky_top, sky_low, std::clamp(r / std::max(hr, 1.0), 0.0, 1.0));
        for (double& v : col) v += 0.01 * rng.normal();
      } else {
        const double d = r - hr;
        const double t = std::clamp(d / std::max(h - hr, 1.0), 0.0, 1.0);
        col = mix(water_far, water_near, std::sqrt(t));
        col = mix(col, haze_color, p.haze * std::exp(-d / 4.0));
        const double wave = std::sin(2.0 * std::numbers::pi * (c * wave_kx * (0.3 + t)) + d * wave_ky + phase);
        const double tex = p.water_texture * (wave * (0.3 + 0.7 * t) + 0.5 * rng.normal());
        for (double& v : col) v += tex;
      }
      for (int ch = 0; ch < 3; ++ch) s.image.at(ch, r, c) = col[static_cast<std::size_t>(ch)];
    }
  }

  // Obstacles, kept at least 4 px apart.
  std::vector<Obstacle> obstacles;
  const int count = rng.uniform_int(p.obstacles_min, p.obstacles_max);
  for (int k = 0; k < count; ++k) {
    for (int attempt = 0; attempt < 40; ++attempt) {
      Obstacle o;
      o.shape = static_cast<ObstacleShape>(rng.uniform_int(0, 2));
      o.w = rng.uniform_int(p.obstacle_size_min, p.obstacle_size_max);
      o.h = rng.uniform_int(std::max(6, p.obstacle_size_min * 3 / 4), p.obstacle_size_max);
      o.x1 = rng.uniform_int(1, w - o.w - 1);
      int hmin = h, hmax = 0;
      for (int c = o.x1; c < o.x1 + o.w; ++c) {
        hmin = std::min(hmin, horizon_row[static_cast<std::size_t>(c)]);
        hmax = std::max(hmax, horizon_row[static_cast<std::size_t>(c)]);
      }
      int bottom;
      if (rng.bernoulli(p.protruding_fraction)) {
        bottom = hmax + rng.uniform_int(3, std::max(3, o.h / 2));
        o.top = std::min(bottom - o.h + 1, hmin - 3);
      } else {
        o.top = hmax + rng.uniform_int(4, std::max(4, (h - hmax) / 2));
        bottom = o.top + o.h - 1;
      }
      o.h = bottom - o.top + 1;
      if (o.top < 1 || bottom > h - 7) continue;

      o.bbox = {w, h, -1, -1};
      for (int r = o.top; r <= bottom; ++r) {
        for (int c = o.x1; c < o.x1 + o.w; ++c) {
          const double u = (c - o.x1 + 0.5) / o.w, v = (r - o.top + 0.5) / o.h;
          if (!inside(o.shape, u, v)) continue;
          o.pixels.emplace_back(r, c);
          o.bbox.x1 = std::min(o.bbox.x1, c);
          o.bbox.y1 = std::min(o.bbox.y1, r);
          o.bbox.x2 = std::max(o.bbox.x2, c);
          o.bbox.y2 = std::max(o.bbox.y2, r);
        }
      }
      if (o.pixels.size() < 25) continue;
      bool clear = true;
      for (const auto& q : obstacles) {
        if (o.bbox.x1 <= q.bbox.x2 + 4 && q.bbox.x1 <= o.bbox.x2 + 4 && o.bbox.y1 <= q.bbox.y2 + 4 &&
            q.bbox.y1 <= o.bbox.y2 + 4) {
          clear = false;
          break;
        }
      }
      if (!clear) continue;
      SegLabelMap trial = s.labels;
      for (auto [r, c] : o.pixels) trial(r, c) = Label::obstacle;
      if (!edge_survives_band(trial)) continue;
      s.labels = std::move(trial);
      o.color = jitter(rng, kPalette[static_cast<std::size_t>(rng.uniform_int(0, kPalette.size() - 1))], 0.05);
      obstacles.push_back(std::move(o));
      break;
    }
  }

  for (const auto& o : obstacles) {
    for (auto [r, c] : o.pixels) {
      const double v = (r - o.top + 0.5) / o.h;
      const double shade = 0.8 + 0.3 * (1.0 - v);
      for (int ch = 0; ch < 3; ++ch) {
        s.image.at(ch, r, c) = o.color[static_cast<std::size_t>(ch)] * shade + 0.02 * rng.normal();
      }
    }
    s.gt_boxes.push_back(o.bbox);
  }

  // Reflections below each obstacle, labeled water.
  for (const auto& o : obstacles) {
    const int reach = std::max(2, o.h / 2);
    for (int c = o.bbox.x1; c <= o.bbox.x2; ++c) {
      int bc = -1;
      for (auto [r, cc] : o.pixels) {
        if (cc == c) bc = std::max(bc, r);
      }
      if (bc < 0) continue;
      for (int k = 1; k <= reach; ++k) {
        const int r = bc + k, src = bc - k + 1;
        if (r >= h || src < o.top || s.labels(r, c) != Label::water || s.labels(src, c) != Label::obstacle) continue;
        const double a = p.reflection * (1.0 - static_cast<double>(k) / (reach + 1));
        for (int ch = 0; ch < 3; ++ch) {
          double& dst = s.image.at(ch, r, c);
          dst += a * (s.image.at(ch, src, c) - dst);
        }
      }
    }
  }

  // Glitter streaks on water.
  std::int64_t water_px = 0;
  for (Label l : s.labels.cells) water_px += l == Label::water;
  const int streaks = static_cast<int>(std::lround(p.glitter_prob * static_cast<double>(water_px)));
  for (int k = 0; k < streaks; ++k) {
    const int r = rng.uniform_int(0, h - 1), c0 = rng.uniform_int(0, w - 1), len = rng.uniform_int(2, 5);
    const double a = rng.uniform(0.5, 0.9);
    for (int c = c0; c < std::min(w, c0 + len); ++c) {
      if (s.labels(r, c) != Label::water) continue;
      const Rgb spark{0.97, 0.96, 0.90};
      for (int ch = 0; ch < 3; ++ch) {
        double& dst = s.image.at(ch, r, c);
        dst += a * (spark[static_cast<std::size_t>(ch)] - dst);
      }
    }
  }

  s.gt_edge = label_water_edge(s.labels);
  add_unknown_band(s.labels);
  for (double& v : s.image.data) v = std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
  return s;
}

std::vector<SceneSample> generate_scenes(const SceneParams& params, std::uint64_t seed, int count, int first) {
  if (count < 0) throw ContractError("scene count must be non-negative");
  std::vector<SceneSample> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) out.push_back(generate_scene(params, seed, first + i));
  return out;
}

}  // namespace wasr
