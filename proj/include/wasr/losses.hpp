#pragma once

#include <cstdint>
#include <vector>

#include "wasr/param_store.hpp"
#include "wasr/tensor.hpp"
#include "wasr/types.hpp"

namespace wasr {

/// Water and obstacle pixel indices at feature resolution. Sky and unknown
/// pixels belong to neither set.
struct RegionIndex {
  int height = 0;
  int width = 0;
  std::vector<std::int64_t> water_pixels;
  std::vector<std::int64_t> obstacle_pixels;

  std::int64_t water_count() const { return static_cast<std::int64_t>(water_pixels.size()); }
  std::int64_t obstacle_count() const { return static_cast<std::int64_t>(obstacle_pixels.size()); }
};

/// Per-channel Gaussian fit of the water features (diagnostics).
struct WaterStats {
  std::vector<double> mu;
  std::vector<double> sigma2;
  int channel_count() const { return static_cast<int>(mu.size()); }
};

struct LossWeights {
  double lambda1 = 0.01;  // separation
  double lambda2 = 1e-6;  // L2
  double gamma = 2.0;     // focal exponent
};

struct SeparationOptions {
  double epsilon = 1e-8;       // per-channel denominator floor
  bool stop_grad_mu = false;   // treat the water means as constants
};

/// Nearest-neighbour label resampling, sampling each target pixel at the
/// source pixel containing its center. Source dims must be multiples of the target's.
SegLabelMap downsample_labels(const SegLabelMap& labels, int target_h, int target_w);

RegionIndex build_region_index(const SegLabelMap& labels, int feature_h, int feature_w);

WaterStats water_stats(const Tensor& features, const RegionIndex& regions);

/// (N_O / (N_C N_W)) * sum_c [ sum_W (x - mu_c)^2 / max(sum_O (x - mu_c)^2, eps) ].
/// Zero, with no gradient, when either region is empty.
Tensor water_separation_loss(const Tensor& features, const RegionIndex& regions, const SeparationOptions& opt = {});

/// Mean over non-unknown pixels of -(1 - p_t)^gamma * ln(max(p_t, 1e-12)).
/// Labels are resampled to the probability map's resolution when they differ.
Tensor focal_loss(const Tensor& probs, const SegLabelMap& labels, double gamma);

/// 0.5 * sum of squared conv weights (entries named "*.weight").
Tensor l2_reg(const ParamStore& params);

struct LossBreakdown {
  Tensor total;
  double focal = 0.0;
  double separation = 0.0;
  double l2 = 0.0;
};

/// focal + lambda1 * separation + lambda2 * l2. Undefined `ws` counts as zero.
LossBreakdown total_loss(const Tensor& focal, const Tensor& ws, const Tensor& l2, const LossWeights& weights);

}  // namespace wasr
