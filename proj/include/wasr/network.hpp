#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "wasr/ops.hpp"
#include "wasr/param_store.hpp"
#include "wasr/rng.hpp"

namespace wasr {

struct NetConfig {
  int input_h = 96;
  int input_w = 128;
  int class_count = 3;  // water, sky, obstacle
  std::array<int, 4> encoder_channels{16, 32, 48, 64};  // res2..res5
  int encoder_units = 1;  // residual units per stage
  std::vector<int> aspp_rates{1, 2, 4, 6};
  bool use_imu = true;
  std::uint64_t seed = 1;

  void validate() const;
  int ffm_channels() const { return (encoder_channels[1] + encoder_channels[0] + 1 + 1) / 2; }
};

/// Trainable parameters plus non-trainable buffers (batch-norm running stats).
struct Network {
  NetConfig cfg;
  ParamStore params{true};
  ParamStore buffers{false};
};

/// Deterministic Xavier-uniform initialization of every conv weight; zero
/// biases and shifts, unit scales.
Network build_network(const NetConfig& cfg);

/// State threaded through a forward pass.
struct ForwardContext {
  const ParamStore& params;
  ParamStore& buffers;
  BatchNormMode mode = BatchNormMode::train;
  bool update_running = true;

  const Tensor& p(const std::string& name) const { return params.at(name); }
};

struct EncoderFeatures {
  Tensor res2;  // [c2, h/4, w/4]
  Tensor res3;  // [c3, h/8, w/8]
  Tensor res4;  // [c4, h/8, w/8]
  Tensor res5;  // [c5, h/8, w/8]
};

struct SegOutput {
  Tensor probs;           // [classes, h, w]
  Tensor internal_probs;  // [classes, h/4, w/4]
};

struct WasrOutput {
  SegOutput seg;
  EncoderFeatures features;
};

EncoderFeatures encoder_forward(const Tensor& image, const ForwardContext& ctx, const NetConfig& cfg);

/// concat(features, imu), re-weighted channel-wise by
/// sigmoid(bn(conv1x1(global_avg_pool(.)))). `prefix` names the block's params.
Tensor arm1(const Tensor& features, const Tensor& imu, const ForwardContext& ctx, const std::string& prefix);

/// conv1x1(arm1(deep, imu)) + res3.
Tensor arm2(const Tensor& deep, const Tensor& res3, const Tensor& imu, const ForwardContext& ctx,
            const std::string& prefix);

/// x = relu(bn(conv3x3(concat(deep, res2, imu)))); x + x * att(x).
Tensor ffm(const Tensor& deep, const Tensor& res2, const Tensor& imu, const ForwardContext& ctx,
           const std::string& prefix);

/// Sum of dilated 3x3 branches mapping features to class logits.
Tensor aspp(const Tensor& features, const std::vector<int>& rates, const ForwardContext& ctx,
            const std::string& prefix);

/// Full encoder-decoder pass. With cfg.use_imu false the IMU channel is a
/// constant 0.5 at every fusion site.
WasrOutput wasr_forward(const Tensor& image, const Tensor& imu_mask, const ForwardContext& ctx, const NetConfig& cfg);

/// Parameter-shape helpers used by the builder and by block-level tests.
void add_conv(ParamStore& params, Rng& rng, const std::string& name, int out_ch, int in_ch, int k);
void add_bn(ParamStore& params, ParamStore& buffers, const std::string& name, int ch);
void add_arm(ParamStore& params, ParamStore& buffers, Rng& rng, const std::string& prefix, int channels);
void add_ffm(ParamStore& params, ParamStore& buffers, Rng& rng, const std::string& prefix, int in_ch, int out_ch);
void add_aspp(ParamStore& params, Rng& rng, const std::string& prefix, int in_ch, int classes,
              const std::vector<int>& rates);

}  // namespace wasr
