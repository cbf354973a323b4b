#include "wasr/augmentation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "wasr/error.hpp"

namespace wasr {

void AugSpec::validate() const {
  for (double d : rotations_deg) {
    if (std::abs(d) > 45.0) throw ContractError("rotations must lie within +-45 degrees");
  }
  if (elastic_step < 1) throw ContractError("elastic_step must be positive");
  if (elastic_disp < 0.0 || elastic_disp >= elastic_step) {
    throw ContractError("elastic_disp must satisfy 0 <= disp < elastic_step");
  }
  if (color_refs < 0) throw ContractError("color_refs must be non-negative");
}

SceneSample mirror_sample(const SceneSample& s) {
  SceneSample out = s;
  const int h = s.image.height, w = s.image.width;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      for (int ch = 0; ch < 3; ++ch) out.image.at(ch, r, c) = s.image.at(ch, r, w - 1 - c);
      out.labels(r, c) = s.labels(r, w - 1 - c);
    }
  }
  for (auto& b : out.gt_boxes) b = {w - 1 - b.x2, b.y1, w - 1 - b.x1, b.y2};
  out.gt_edge.clear();
  for (auto it = s.gt_edge.rbegin(); it != s.gt_edge.rend(); ++it) out.gt_edge.push_back({(w - 1) - it->x, it->y});
  out.imu.roll = -s.imu.roll;
  return out;
}

namespace {

double sample_bilinear(const Image& img, int ch, double y, double x) {
  const int h = img.height, w = img.width;
  const int y0 = static_cast<int>(std::floor(y)), x0 = static_cast<int>(std::floor(x));
  const double fy = y - y0, fx = x - x0;
  auto px = [&](int r, int c) { return (r < 0 || r >= h || c < 0 || c >= w) ? 0.0 : img.at(ch, r, c); };
  return (1 - fy) * ((1 - fx) * px(y0, x0) + fx * px(y0, x0 + 1)) + fy * ((1 - fx) * px(y0 + 1, x0) + fx * px(y0 + 1, x0 + 1));
}

double sample_bilinear_clamped(const Image& img, int ch, double y, double x) {
  y = std::clamp(y, 0.0, img.height - 1.0);
  x = std::clamp(x, 0.0, img.width - 1.0);
  const int y0 = std::min(static_cast<int>(y), img.height - 1), x0 = std::min(static_cast<int>(x), img.width - 1);
  const int y1 = std::min(y0 + 1, img.height - 1), x1 = std::min(x0 + 1, img.width - 1);
  const double fy = y - y0, fx = x - x0;
  return (1 - fy) * ((1 - fx) * img.at(ch, y0, x0) + fx * img.at(ch, y0, x1)) +
         fy * ((1 - fx) * img.at(ch, y1, x0) + fx * img.at(ch, y1, x1));
}

}  // namespace

SceneSample rotate_sample(const SceneSample& s, double deg) {
  if (std::abs(deg) > 45.0) throw ContractError("rotation must lie within +-45 degrees");
  SceneSample out = s;
  if (deg == 0.0) return out;
  const int h = s.image.height, w = s.image.width;
  const double th = deg * std::numbers::pi / 180.0;
  const double ct = std::cos(th), st = std::sin(th);
  const double xc = (w - 1) / 2.0, yc = (h - 1) / 2.0;
  auto forward = [&](double x, double y) {
    const double dx = x - xc, dy = y - yc;
    return Point{xc + dx * ct - dy * st, yc + dx * st + dy * ct};
  };

  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      // Inverse map of the output pixel.
      const double dx = c - xc, dy = r - yc;
      const double sx = xc + dx * ct + dy * st, sy = yc - dx * st + dy * ct;
      for (int ch = 0; ch < 3; ++ch) out.image.at(ch, r, c) = sample_bilinear(s.image, ch, sy, sx);
      const int nr = static_cast<int>(std::lround(sy)), nc = static_cast<int>(std::lround(sx));
      out.labels(r, c) = s.labels.in_bounds(nr, nc) ? s.labels(nr, nc) : Label::unknown;
    }
  }

  out.gt_boxes.clear();
  for (const auto& b : s.gt_boxes) {
    double x1 = 1e300, y1 = 1e300, x2 = -1e300, y2 = -1e300;
    for (const Point& corner : {Point{double(b.x1), double(b.y1)}, Point{double(b.x2), double(b.y1)},
                                Point{double(b.x1), double(b.y2)}, Point{double(b.x2), double(b.y2)}}) {
      const Point q = forward(corner.x, corner.y);
      x1 = std::min(x1, q.x);
      y1 = std::min(y1, q.y);
      x2 = std::max(x2, q.x);
      y2 = std::max(y2, q.y);
    }
    Box nb{std::max(0, static_cast<int>(std::floor(x1))), std::max(0, static_cast<int>(std::floor(y1))),
           std::min(w - 1, static_cast<int>(std::ceil(x2))), std::min(h - 1, static_cast<int>(std::ceil(y2)))};
    if (nb.x1 <= nb.x2 && nb.y1 <= nb.y2) out.gt_boxes.push_back(nb);
  }

  // Keep the in-frame, x-increasing part of the rotated polyline.
  out.gt_edge.clear();
  for (const auto& p : s.gt_edge) {
    const Point q = forward(p.x, p.y);
    if (q.x < 0 || q.x > w - 1 || q.y < 0 || q.y > h - 1) continue;
    if (!out.gt_edge.empty() && !(q.x > out.gt_edge.back().x)) continue;
    out.gt_edge.push_back(q);
  }

  // Rotate the IMU horizon through the point it passes at the principal column.
  const HorizonLine line = horizon_line(s.imu, s.cam);
  const double new_roll = s.imu.roll + th;
  if (std::abs(new_roll) < std::numbers::pi / 2) {
    const Point anchor = forward(line.cx, line.row_at(line.cx));
    const double intercept = anchor.y + std::tan(new_roll) * (s.cam.cx - anchor.x);
    out.imu.roll = new_roll;
    out.imu.pitch = std::atan((intercept - s.cam.cy) / s.cam.focal_px);
  }
  return out;
}

SceneSample elastic_water_deform(const SceneSample& s, const AugSpec& spec, Rng& rng) {
  spec.validate();
  SceneSample out = s;
  if (spec.elastic_disp == 0.0) return out;
  const int h = s.image.height, w = s.image.width, step = spec.elastic_step;
  const int gh = (h - 1) / step + 2, gw = (w - 1) / step + 2;
  std::vector<double> gx(static_cast<std::size_t>(gh) * gw), gy(gx.size());
  for (std::size_t i = 0; i < gx.size(); ++i) {
    gx[i] = rng.uniform(-spec.elastic_disp, spec.elastic_disp);
    gy[i] = rng.uniform(-spec.elastic_disp, spec.elastic_disp);
  }
  auto field = [&](const std::vector<double>& g, int r, int c) {
    const double fy = static_cast<double>(r) / step, fx = static_cast<double>(c) / step;
    const int y0 = static_cast<int>(fy), x0 = static_cast<int>(fx);
    const double ty = fy - y0, tx = fx - x0;
    auto at = [&](int y, int x) { return g[static_cast<std::size_t>(y) * gw + x]; };
    return (1 - ty) * ((1 - tx) * at(y0, x0) + tx * at(y0, x0 + 1)) + ty * ((1 - tx) * at(y0 + 1, x0) + tx * at(y0 + 1, x0 + 1));
  };
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (s.labels(r, c) != Label::water) continue;
      const double sy = r + field(gy, r, c), sx = c + field(gx, r, c);
      for (int ch = 0; ch < 3; ++ch) out.image.at(ch, r, c) = sample_bilinear_clamped(s.image, ch, sy, sx);
    }
  }
  return out;
}

SceneSample color_transfer(const SceneSample& s, const SceneSample& reference) {
  SceneSample out = s;
  auto moments = [](const Image& img, int ch) {
    const std::size_t plane = static_cast<std::size_t>(img.height) * img.width;
    const double* p = img.data.data() + ch * plane;
    double mu = 0.0;
    for (std::size_t i = 0; i < plane; ++i) mu += p[i];
    mu /= static_cast<double>(plane);
    double var = 0.0;
    for (std::size_t i = 0; i < plane; ++i) var += (p[i] - mu) * (p[i] - mu);
    return std::pair{mu, std::sqrt(var / static_cast<double>(plane))};
  };
  const std::size_t plane = static_cast<std::size_t>(s.image.height) * s.image.width;
  for (int ch = 0; ch < 3; ++ch) {
    const auto [mu_in, sd_in] = moments(s.image, ch);
    const auto [mu_ref, sd_ref] = moments(reference.image, ch);
    // Round-off in the mean leaves a constant channel with a tiny nonzero spread.
    const double k = sd_in > 1e-12 ? sd_ref / sd_in : 1.0;
    double* p = out.image.data.data() + ch * plane;
    for (std::size_t i = 0; i < plane; ++i) p[i] = std::clamp((p[i] - mu_in) * k + mu_ref, 0.0, 1.0);
  }
  return out;
}

AugmentedStream::AugmentedStream(const std::vector<SceneSample>& sources, AugSpec spec)
    : sources_(&sources), spec_(std::move(spec)) {
  spec_.validate();
  rotations_.push_back(0.0);
  for (double d : spec_.rotations_deg) {
    if (d != 0.0) rotations_.push_back(d);
  }
}

std::size_t AugmentedStream::variants_per_source() const {
  return (spec_.mirror ? 2u : 1u) * rotations_.size() * (spec_.elastic ? 2u : 1u) *
         static_cast<std::size_t>(std::max(1, spec_.color_refs));
}

SceneSample AugmentedStream::at(std::size_t index) const {
  if (index >= size()) throw ContractError("augmented stream index out of range");
  const std::size_t per = variants_per_source();
  const std::size_t src = index / per;
  std::size_t v = index % per;
  const std::size_t n_color = static_cast<std::size_t>(std::max(1, spec_.color_refs));
  const std::size_t color = v % n_color;
  v /= n_color;
  const bool elastic = spec_.elastic && (v % 2 == 1);
  if (spec_.elastic) v /= 2;
  const double rot = rotations_[v % rotations_.size()];
  v /= rotations_.size();
  const bool mirror = spec_.mirror && v == 1;

  Rng rng(mix_seed({spec_.seed, static_cast<std::uint64_t>(src), static_cast<std::uint64_t>(index % per)}));
  const auto& sources = *sources_;
  SceneSample s = sources[src];
  if (color > 0) {
    const std::size_t ref = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(sources.size()) - 1));
    s = color_transfer(s, sources[ref]);
  }
  if (elastic) s = elastic_water_deform(s, spec_, rng);
  if (mirror) s = mirror_sample(s);
  if (rot != 0.0) s = rotate_sample(s, rot);
  return s;
}

}  // namespace wasr
