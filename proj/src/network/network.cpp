#include "wasr/network.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "wasr/error.hpp"

namespace wasr {

void NetConfig::validate() const {
  if (input_h < 8 || input_w < 8 || input_h % 8 != 0 || input_w % 8 != 0) {
    throw ContractError("input size must be positive multiples of 8, got " + std::to_string(input_h) + "x" +
                        std::to_string(input_w));
  }
  if (class_count < 2) throw ContractError("class_count must be >= 2");
  for (int c : encoder_channels) {
    if (c < 1) throw ContractError("encoder channel widths must be positive");
  }
  if (encoder_units < 1) throw ContractError("encoder_units must be >= 1");
  if (aspp_rates.empty()) throw ContractError("aspp_rates must be non-empty");
  std::set<int> seen;
  for (int r : aspp_rates) {
    if (r < 1 || !seen.insert(r).second) throw ContractError("aspp_rates must be positive and distinct");
  }
}

// ---------------------------------------------------------------------------
// Parameter construction

void add_conv(ParamStore& params, Rng& rng, const std::string& name, int out_ch, int in_ch, int k) {
  const double fan_in = static_cast<double>(in_ch) * k * k;
  const double fan_out = static_cast<double>(out_ch) * k * k;
  const double bound = std::sqrt(6.0 / (fan_in + fan_out));
  std::vector<double> w(static_cast<std::size_t>(out_ch) * in_ch * k * k);
  for (double& v : w) v = rng.uniform(-bound, bound);
  params.add(name + ".weight", Tensor({out_ch, in_ch, k, k}, std::move(w)));
  params.add(name + ".bias", Tensor::zeros({out_ch}));
}

void add_bn(ParamStore& params, ParamStore& buffers, const std::string& name, int ch) {
  params.add(name + ".gamma", Tensor::full({ch}, 1.0));
  params.add(name + ".beta", Tensor::zeros({ch}));
  buffers.add(name + ".running_mean", Tensor::zeros({ch}));
  buffers.add(name + ".running_var", Tensor::full({ch}, 1.0));
}

void add_arm(ParamStore& params, ParamStore& buffers, Rng& rng, const std::string& prefix, int channels) {
  add_conv(params, rng, prefix + ".att", channels, channels, 1);
  add_bn(params, buffers, prefix + ".att_bn", channels);
}

void add_ffm(ParamStore& params, ParamStore& buffers, Rng& rng, const std::string& prefix, int in_ch, int out_ch) {
  add_conv(params, rng, prefix + ".conv", out_ch, in_ch, 3);
  add_bn(params, buffers, prefix + ".bn", out_ch);
  add_conv(params, rng, prefix + ".att1", out_ch, out_ch, 1);
  add_conv(params, rng, prefix + ".att2", out_ch, out_ch, 1);
}

void add_aspp(ParamStore& params, Rng& rng, const std::string& prefix, int in_ch, int classes,
              const std::vector<int>& rates) {
  for (int r : rates) add_conv(params, rng, prefix + ".rate" + std::to_string(r), classes, in_ch, 3);
}

namespace {

struct StageSpec {
  const char* name;
  int stride;
  int dilation;
};

constexpr std::array<StageSpec, 4> kStages{{{"res2", 1, 1}, {"res3", 2, 1}, {"res4", 1, 2}, {"res5", 1, 4}}};

bool needs_projection(int in_ch, int out_ch, int stride) { return in_ch != out_ch || stride != 1; }

}  // namespace

Network build_network(const NetConfig& cfg) {
  cfg.validate();
  Network net;
  net.cfg = cfg;
  Rng rng(mix_seed({cfg.seed, 0x57A5ULL}));
  auto& P = net.params;
  auto& B = net.buffers;
  const auto& ch = cfg.encoder_channels;

  add_conv(P, rng, "stem.conv", ch[0], 3, 3);
  add_bn(P, B, "stem.bn", ch[0]);

  int in_ch = ch[0];
  for (std::size_t s = 0; s < kStages.size(); ++s) {
    const int out_ch = ch[s];
    for (int u = 0; u < cfg.encoder_units; ++u) {
      const std::string unit = std::string(kStages[s].name) + "." + std::to_string(u);
      const int stride = u == 0 ? kStages[s].stride : 1;
      add_conv(P, rng, unit + ".conv1", out_ch, in_ch, 3);
      add_bn(P, B, unit + ".bn1", out_ch);
      add_conv(P, rng, unit + ".conv2", out_ch, out_ch, 3);
      add_bn(P, B, unit + ".bn2", out_ch);
      if (needs_projection(in_ch, out_ch, stride)) {
        add_conv(P, rng, unit + ".proj", out_ch, in_ch, 1);
        add_bn(P, B, unit + ".proj_bn", out_ch);
      }
      in_ch = out_ch;
    }
  }

  // Decoder.
  add_arm(P, B, rng, "arm1", ch[3] + 1);
  add_arm(P, B, rng, "arm2.arm", ch[3] + 2);
  add_conv(P, rng, "arm2.proj", ch[1], ch[3] + 2, 1);
  add_ffm(P, B, rng, "ffm", ch[1] + ch[0] + 1, cfg.ffm_channels());
  add_aspp(P, rng, "aspp", cfg.ffm_channels(), cfg.class_count, cfg.aspp_rates);
  return net;
}

// ---------------------------------------------------------------------------
// Forward blocks

namespace {

Tensor conv(const ForwardContext& ctx, const std::string& name, const Tensor& x, int stride = 1, int dilation = 1) {
  const Tensor& w = ctx.p(name + ".weight");
  const int k = w.dim(2);
  const int pad = k == 1 ? 0 : same_padding(k, dilation);
  return conv2d(x, w, ctx.p(name + ".bias"), {stride, dilation, pad, pad});
}

Tensor bn(const ForwardContext& ctx, const std::string& name, const Tensor& x) {
  BatchNormOptions opt;
  opt.mode = ctx.mode;
  opt.update_running = ctx.update_running;
  return batch_norm(x, ctx.p(name + ".gamma"), ctx.p(name + ".beta"), ctx.buffers.at(name + ".running_mean"),
                    ctx.buffers.at(name + ".running_var"), opt);
}

// A [C,1,1] attention vector has no spatial extent to normalize over with a
// batch of one, so attention normalization always runs on running statistics.
Tensor attention_bn(const ForwardContext& ctx, const std::string& name, const Tensor& v) {
  BatchNormOptions opt;
  opt.mode = BatchNormMode::eval;
  opt.update_running = false;
  return batch_norm(v, ctx.p(name + ".gamma"), ctx.p(name + ".beta"), ctx.buffers.at(name + ".running_mean"),
                    ctx.buffers.at(name + ".running_var"), opt);
}

Tensor residual_unit(const ForwardContext& ctx, const std::string& unit, const Tensor& x, int stride, int dilation) {
  Tensor y = relu(bn(ctx, unit + ".bn1", conv(ctx, unit + ".conv1", x, stride, dilation)));
  y = bn(ctx, unit + ".bn2", conv(ctx, unit + ".conv2", y, 1, dilation));
  Tensor shortcut = x;
  if (ctx.params.contains(unit + ".proj.weight")) {
    shortcut = bn(ctx, unit + ".proj_bn", conv(ctx, unit + ".proj", x, stride, 1));
  }
  return relu(add(y, shortcut));
}

void require_spatial(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rank() != 3 || b.rank() != 3 || a.dim(1) != b.dim(1) || a.dim(2) != b.dim(2)) {
    throw ContractError(std::string(op) + ": spatial mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

}  // namespace

EncoderFeatures encoder_forward(const Tensor& image, const ForwardContext& ctx, const NetConfig& cfg) {
  if (image.rank() != 3 || image.dim(0) != 3) throw ContractError("encoder: expected [3,H,W] image, got " + shape_str(image.shape()));
  if (image.dim(1) % 8 != 0 || image.dim(2) % 8 != 0) {
    throw ContractError("encoder: input dims must be divisible by 8, got " + shape_str(image.shape()));
  }
  Tensor x = relu(bn(ctx, "stem.bn", conv(ctx, "stem.conv", image, 2)));
  x = max_pool2d(x, 2, 2);

  EncoderFeatures f;
  for (std::size_t s = 0; s < kStages.size(); ++s) {
    for (int u = 0; u < cfg.encoder_units; ++u) {
      const std::string unit = std::string(kStages[s].name) + "." + std::to_string(u);
      x = residual_unit(ctx, unit, x, u == 0 ? kStages[s].stride : 1, kStages[s].dilation);
    }
    (s == 0 ? f.res2 : s == 1 ? f.res3 : s == 2 ? f.res4 : f.res5) = x;
  }
  return f;
}

Tensor arm1(const Tensor& features, const Tensor& imu, const ForwardContext& ctx, const std::string& prefix) {
  require_spatial(features, imu, "arm1");
  Tensor x = concat_channels({features, imu});
  Tensor w = sigmoid(attention_bn(ctx, prefix + ".att_bn", conv(ctx, prefix + ".att", global_avg_pool(x))));
  return mul_channels(x, w);
}

Tensor arm2(const Tensor& deep, const Tensor& res3, const Tensor& imu, const ForwardContext& ctx,
            const std::string& prefix) {
  require_spatial(deep, res3, "arm2");
  Tensor projected = conv(ctx, prefix + ".proj", arm1(deep, imu, ctx, prefix + ".arm"));
  if (projected.shape() != res3.shape()) {
    throw ContractError("arm2: projected " + shape_str(projected.shape()) + " does not match res3 " +
                        shape_str(res3.shape()));
  }
  return add(projected, res3);
}

Tensor ffm(const Tensor& deep, const Tensor& res2, const Tensor& imu, const ForwardContext& ctx,
           const std::string& prefix) {
  require_spatial(deep, res2, "ffm");
  require_spatial(deep, imu, "ffm");
  Tensor x = relu(bn(ctx, prefix + ".bn", conv(ctx, prefix + ".conv", concat_channels({deep, res2, imu}))));
  Tensor w = sigmoid(conv(ctx, prefix + ".att2", relu(conv(ctx, prefix + ".att1", global_avg_pool(x)))));
  return add(x, mul_channels(x, w));
}

Tensor aspp(const Tensor& features, const std::vector<int>& rates, const ForwardContext& ctx,
            const std::string& prefix) {
  Tensor out;
  for (int r : rates) {
    Tensor branch = conv(ctx, prefix + ".rate" + std::to_string(r), features, 1, r);
    out = out.defined() ? add(out, branch) : branch;
  }
  return out;
}

WasrOutput wasr_forward(const Tensor& image, const Tensor& imu_mask, const ForwardContext& ctx, const NetConfig& cfg) {
  const int h = image.dim(1), w = image.dim(2);
  Tensor mask = cfg.use_imu ? imu_mask : Tensor::full({1, h, w}, 0.5);
  if (mask.rank() != 3 || mask.dim(0) != 1 || mask.dim(1) != h || mask.dim(2) != w) {
    throw ContractError("wasr_forward: IMU mask " + shape_str(mask.shape()) + " does not match image " +
                        shape_str(image.shape()));
  }
  WasrOutput out;
  out.features = encoder_forward(image, ctx, cfg);
  const auto& f = out.features;

  const Tensor imu8 = resize_bilinear(mask, f.res5.dim(1), f.res5.dim(2));
  const Tensor imu4 = resize_bilinear(mask, f.res2.dim(1), f.res2.dim(2));

  Tensor d = arm1(f.res5, imu8, ctx, "arm1");
  d = arm2(d, f.res3, imu8, ctx, "arm2");
  d = upsample_bilinear(d, 2);
  d = ffm(d, f.res2, imu4, ctx, "ffm");
  Tensor logits = aspp(d, cfg.aspp_rates, ctx, "aspp");
  out.seg.internal_probs = softmax_channels(logits);
  out.seg.probs = upsample_bilinear(out.seg.internal_probs, 4);
  return out;
}

}  // namespace wasr
