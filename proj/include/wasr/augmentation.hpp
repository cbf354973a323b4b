#pragma once

#include <cstdint>
#include <vector>

#include "wasr/rng.hpp"
#include "wasr/synthetic.hpp"

namespace wasr {

struct AugSpec {
  bool mirror = true;
  std::vector<double> rotations_deg{-15.0, -5.0, 5.0, 15.0};
  bool elastic = true;
  int elastic_step = 16;          // px between displacement nodes
  double elastic_disp = 3.0;      // px, max per-node offset
  int color_refs = 2;             // color variants per sample, the first being the original colors
  std::uint64_t seed = 1;

  void validate() const;
};

/// Left-right flip; roll negated.
SceneSample mirror_sample(const SceneSample& s);

/// Rotation about the image center, clockwise for positive degrees. Image
/// bilinear (zero outside), labels nearest (unknown outside). Roll gains the
/// angle; pitch is re-derived so the IMU horizon follows the rotated one.
SceneSample rotate_sample(const SceneSample& s, double deg);

/// Smooth random warp applied to water-labeled pixels only.
SceneSample elastic_water_deform(const SceneSample& s, const AugSpec& spec, Rng& rng);

/// Per-channel moment matching to `reference`, clamped to [0,1].
SceneSample color_transfer(const SceneSample& s, const SceneSample& reference);

/// Deterministic enumeration of {identity, mirror} x {0, rotations} x
/// {elastic off, on} x {color variants} for every source.
class AugmentedStream {
 public:
  AugmentedStream(const std::vector<SceneSample>& sources, AugSpec spec);

  std::size_t size() const { return sources_->size() * variants_per_source(); }
  std::size_t variants_per_source() const;
  SceneSample at(std::size_t index) const;

 private:
  const std::vector<SceneSample>* sources_;
  AugSpec spec_;
  std::vector<double> rotations_;  // including 0
};

}  // namespace wasr
