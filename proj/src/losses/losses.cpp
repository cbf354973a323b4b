#include "wasr/losses.hpp"

#include <algorithm>
#include <cmath>

#include "wasr/error.hpp"
#include "wasr/ops.hpp"

namespace wasr {

SegLabelMap downsample_labels(const SegLabelMap& labels, int target_h, int target_w) {
  if (target_h < 1 || target_w < 1 || labels.height % target_h != 0 || labels.width % target_w != 0) {
    throw ContractError("label map " + std::to_string(labels.height) + "x" + std::to_string(labels.width) +
                        " does not divide into " + std::to_string(target_h) + "x" + std::to_string(target_w));
  }
  if (target_h == labels.height && target_w == labels.width) return labels;
  const int sy = labels.height / target_h, sx = labels.width / target_w;
  SegLabelMap out(target_h, target_w, Label::unknown);
  for (int r = 0; r < target_h; ++r) {
    for (int c = 0; c < target_w; ++c) out(r, c) = labels(r * sy + sy / 2, c * sx + sx / 2);
  }
  return out;
}

RegionIndex build_region_index(const SegLabelMap& labels, int feature_h, int feature_w) {
  const SegLabelMap small = downsample_labels(labels, feature_h, feature_w);
  RegionIndex idx;
  idx.height = feature_h;
  idx.width = feature_w;
  for (std::size_t i = 0; i < small.cells.size(); ++i) {
    if (small.cells[i] == Label::water) idx.water_pixels.push_back(static_cast<std::int64_t>(i));
    if (small.cells[i] == Label::obstacle) idx.obstacle_pixels.push_back(static_cast<std::int64_t>(i));
  }
  return idx;
}

namespace {

void require_feature_match(const Tensor& features, const RegionIndex& regions) {
  if (features.rank() != 3 || features.dim(1) != regions.height || features.dim(2) != regions.width) {
    throw ContractError("separation loss: features " + shape_str(features.shape()) + " do not match region grid " +
                        std::to_string(regions.height) + "x" + std::to_string(regions.width));
  }
}

}  // namespace

WaterStats water_stats(const Tensor& features, const RegionIndex& regions) {
  require_feature_match(features, regions);
  const int nc = features.dim(0);
  const std::size_t plane = static_cast<std::size_t>(regions.height) * regions.width;
  const auto x = features.data();
  WaterStats s;
  s.mu.assign(static_cast<std::size_t>(nc), 0.0);
  s.sigma2.assign(static_cast<std::size_t>(nc), 0.0);
  if (regions.water_pixels.empty()) return s;
  const double nw = static_cast<double>(regions.water_pixels.size());
  for (int c = 0; c < nc; ++c) {
    const double* ch = x.data() + c * plane;
    double mu = 0.0;
    for (auto i : regions.water_pixels) mu += ch[i];
    mu /= nw;
    double var = 0.0;
    for (auto i : regions.water_pixels) var += (ch[i] - mu) * (ch[i] - mu);
    s.mu[static_cast<std::size_t>(c)] = mu;
    s.sigma2[static_cast<std::size_t>(c)] = var / nw;
  }
  return s;
}

Tensor water_separation_loss(const Tensor& features, const RegionIndex& regions, const SeparationOptions& opt) {
  require_feature_match(features, regions);
  if (regions.water_pixels.empty() || regions.obstacle_pixels.empty()) return Tensor::scalar(0.0);

  const int nc = features.dim(0);
  const std::size_t plane = static_cast<std::size_t>(regions.height) * regions.width;
  const double nw = static_cast<double>(regions.water_pixels.size());
  const double no = static_cast<double>(regions.obstacle_pixels.size());
  const double k = no / (nc * nw);
  const auto x = features.data();

  struct ChannelTerms {
    double mu, a, b, obstacle_dev_sum;
    bool floored;
  };
  auto terms = std::make_shared<std::vector<ChannelTerms>>(static_cast<std::size_t>(nc));
  double loss = 0.0;
  for (int c = 0; c < nc; ++c) {
    const double* ch = x.data() + c * plane;
    double mu = 0.0;
    for (auto i : regions.water_pixels) mu += ch[i];
    mu /= nw;
    double a = 0.0, b = 0.0, dev = 0.0;
    for (auto i : regions.water_pixels) a += (ch[i] - mu) * (ch[i] - mu);
    for (auto j : regions.obstacle_pixels) {
      b += (ch[j] - mu) * (ch[j] - mu);
      dev += ch[j] - mu;
    }
    const bool floored = b < opt.epsilon;
    const double denom = floored ? opt.epsilon : b;
    (*terms)[static_cast<std::size_t>(c)] = {mu, a, denom, dev, floored};
    loss += a / denom;
  }
  loss *= k;

  auto xn = features.node();
  auto region_copy = std::make_shared<RegionIndex>(regions);
  return Tensor::make_result({}, {loss}, {features}, [=](const detail::Node& self) {
    auto& dx = xn->ensure_grad();
    const double g = self.grad[0] * k;
    for (int c = 0; c < nc; ++c) {
      const auto& t = (*terms)[static_cast<std::size_t>(c)];
      const double* ch = xn->data.data() + c * plane;
      double* dch = dx.data() + c * plane;
      // d(A/B)/d(mu): dA/dmu = -2 sum_W (x - mu) = 0 exactly in real arithmetic.
      double dratio_dmu = 0.0;
      if (!opt.stop_grad_mu && !t.floored) dratio_dmu = t.a / (t.b * t.b) * 2.0 * t.obstacle_dev_sum;
      for (auto i : region_copy->water_pixels) dch[i] += g * (2.0 * (ch[i] - t.mu) / t.b + dratio_dmu / nw);
      if (!t.floored) {
        const double coef = -t.a / (t.b * t.b) * 2.0;
        for (auto j : region_copy->obstacle_pixels) dch[j] += g * coef * (ch[j] - t.mu);
      }
    }
  });
}

Tensor focal_loss(const Tensor& probs, const SegLabelMap& labels, double gamma) {
  if (probs.rank() != 3) throw ContractError("focal_loss: expected [C,H,W] probabilities, got " + shape_str(probs.shape()));
  if (gamma < 0.0) throw ContractError("focal_loss: gamma must be non-negative");
  const int nc = probs.dim(0), h = probs.dim(1), w = probs.dim(2);
  const SegLabelMap lab = (labels.height == h && labels.width == w) ? labels : downsample_labels(labels, h, w);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  constexpr double kFloor = 1e-12;

  auto picks = std::make_shared<std::vector<std::size_t>>();  // flat index into probs
  picks->reserve(plane);
  for (std::size_t p = 0; p < plane; ++p) {
    const Label l = lab.cells[p];
    if (l == Label::unknown) continue;
    const auto cls = static_cast<std::size_t>(l);
    if (cls >= static_cast<std::size_t>(nc)) throw ContractError("focal_loss: label outside class range");
    picks->push_back(cls * plane + p);
  }
  if (picks->empty()) return Tensor::scalar(0.0);

  const auto pr = probs.data();
  const double inv_n = 1.0 / static_cast<double>(picks->size());
  double loss = 0.0;
  for (std::size_t i : *picks) {
    const double pt = pr[i];
    loss += -std::pow(1.0 - pt, gamma) * std::log(std::max(pt, kFloor));
  }
  loss *= inv_n;

  auto pn = probs.node();
  return Tensor::make_result({}, {loss}, {probs}, [=](const detail::Node& self) {
    auto& dp = pn->ensure_grad();
    const double g = self.grad[0] * inv_n;
    for (std::size_t i : *picks) {
      const double pt = pn->data[i];
      const double q = 1.0 - pt;
      const double logp = std::log(std::max(pt, kFloor));
      double d = 0.0;
      if (gamma != 0.0 && q > 0.0) d += gamma * std::pow(q, gamma - 1.0) * logp;
      if (pt >= kFloor) d -= std::pow(q, gamma) / pt;
      dp[i] += g * d;
    }
  });
}

Tensor l2_reg(const ParamStore& params) {
  Tensor total;
  for (const auto& name : params.names()) {
    if (!name.ends_with(".weight")) continue;
    Tensor term = sum_squares(params.at(name));
    total = total.defined() ? add(total, term) : term;
  }
  if (!total.defined()) return Tensor::scalar(0.0);
  return scale(total, 0.5);
}

LossBreakdown total_loss(const Tensor& focal, const Tensor& ws, const Tensor& l2, const LossWeights& weights) {
  LossBreakdown out;
  out.focal = focal.item();
  out.separation = ws.defined() ? ws.item() : 0.0;
  out.l2 = l2.defined() ? l2.item() : 0.0;
  Tensor total = focal;
  if (ws.defined() && weights.lambda1 != 0.0) total = add(total, scale(ws, weights.lambda1));
  if (l2.defined() && weights.lambda2 != 0.0) total = add(total, scale(l2, weights.lambda2));
  out.total = total;
  return out;
}

}  // namespace wasr
