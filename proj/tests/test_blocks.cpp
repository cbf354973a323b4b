#include <doctest.h>

#include <cmath>

#include "test_util.hpp"
#include "wasr/network.hpp"

using namespace wasr;

namespace {

struct Harness {
  ParamStore params{true};
  ParamStore buffers{false};
  Rng rng{5};
  ForwardContext ctx() { return {params, buffers, BatchNormMode::eval, false}; }
};

void zero(ParamStore& ps, const std::string& name) {
  for (double& v : ps.at(name).mutable_data()) v = 0.0;
}

}  // namespace

TEST_SUITE("blocks") {

TEST_CASE("encoder shapes at 96x128") {
  NetConfig cfg;
  const Network net = build_network(cfg);
  ParamStore buffers = net.buffers;
  const ForwardContext ctx{net.params, buffers, BatchNormMode::eval, false};
  const EncoderFeatures f = encoder_forward(test::random_tensor({3, 96, 128}, 1, 0, 1), ctx, cfg);
  CHECK(f.res2.shape() == Shape{16, 24, 32});
  CHECK(f.res3.shape() == Shape{32, 12, 16});
  CHECK(f.res4.shape() == Shape{48, 12, 16});
  CHECK(f.res5.shape() == Shape{64, 12, 16});
}

TEST_CASE("arm1 with zero attention weights halves its input") {
  Harness h;
  add_arm(h.params, h.buffers, h.rng, "a", 5);
  zero(h.params, "a.att.weight");
  const Tensor feat = test::random_tensor({4, 6, 7}, 2);
  const Tensor imu = test::random_tensor({1, 6, 7}, 3, 0, 1);
  const Tensor out = arm1(feat, imu, h.ctx(), "a");
  REQUIRE(out.shape() == Shape{5, 6, 7});
  const Tensor x = concat_channels({feat, imu});
  for (std::size_t i = 0; i < out.data().size(); ++i) CHECK(out.data()[i] == doctest::Approx(0.5 * x.data()[i]));
}

TEST_CASE("arm1 rejects mismatched spatial size") {
  Harness h;
  add_arm(h.params, h.buffers, h.rng, "a", 5);
  CHECK_THROWS_AS(arm1(test::random_tensor({4, 6, 7}, 2), test::random_tensor({1, 6, 6}, 3), h.ctx(), "a"),
                  ContractError);
}

TEST_CASE("ffm output channels and range") {
  Harness h;
  add_ffm(h.params, h.buffers, h.rng, "f", 48 + 16 + 1, 33);
  const Tensor deep = test::random_tensor({48, 8, 10}, 4);
  const Tensor res2 = test::random_tensor({16, 8, 10}, 5);
  const Tensor imu = test::random_tensor({1, 8, 10}, 6, 0, 1);
  const Tensor out = ffm(deep, res2, imu, h.ctx(), "f");
  CHECK(out.shape() == Shape{33, 8, 10});

  // out = x + x * w with x >= 0 and w in (0, 1), so x <= out <= 2x.
  const ForwardContext ctx = h.ctx();
  const Tensor pre = conv2d(concat_channels({deep, res2, imu}), ctx.p("f.conv.weight"), ctx.p("f.conv.bias"),
                            {1, 1, same_padding(3, 1), same_padding(3, 1)});
  for (std::size_t i = 0; i < out.data().size(); ++i) {
    const double x = std::max(0.0, pre.data()[i] / std::sqrt(1.0 + 1e-5));
    CHECK(out.data()[i] >= x * (1.0 - 1e-9) - 1e-12);
    CHECK(out.data()[i] <= 2.0 * x + 1e-9);
  }
}

TEST_CASE("aspp is linear in its input apart from the bias") {
  Harness h;
  add_aspp(h.params, h.rng, "s", 4, 3, {1, 2, 4});
  for (int r : {1, 2, 4}) {
    auto b = h.params.at("s.rate" + std::to_string(r) + ".bias").mutable_data();
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = 0.1 * static_cast<double>(i + 1) * r;
  }
  const Tensor a = test::random_tensor({4, 9, 11}, 7);
  const Tensor b = test::random_tensor({4, 9, 11}, 8);
  const Tensor z = Tensor::zeros({4, 9, 11});
  const ForwardContext ctx = h.ctx();
  const Tensor fa = aspp(a, {1, 2, 4}, ctx, "s");
  const Tensor fb = aspp(b, {1, 2, 4}, ctx, "s");
  const Tensor fab = aspp(add(a, scale(b, 2.0)), {1, 2, 4}, ctx, "s");
  const Tensor f0 = aspp(z, {1, 2, 4}, ctx, "s");
  REQUIRE(fa.shape() == Shape{3, 9, 11});
  const std::size_t plane = 9 * 11;
  for (std::size_t i = 0; i < fa.data().size(); ++i) {
    const double bias = f0.data()[i];
    CHECK(bias == doctest::Approx(0.1 * static_cast<double>(i / plane + 1) * 7.0));
    CHECK(fab.data()[i] - bias == doctest::Approx((fa.data()[i] - bias) + 2.0 * (fb.data()[i] - bias)));
  }
}

TEST_CASE("build_network is deterministic and Xavier scaled") {
  NetConfig cfg;
  cfg.seed = 9;
  const Network a = build_network(cfg);
  const Network b = build_network(cfg);
  CHECK(a.params.bit_equal(b.params));
  cfg.seed = 10;
  CHECK_FALSE(a.params.bit_equal(build_network(cfg).params));

  int checked = 0;
  for (const auto& name : a.params.names()) {
    const Tensor& w = a.params.at(name);
    if (w.rank() != 4 || w.numel() < 500) continue;
    const double fan_in = static_cast<double>(w.dim(1)) * w.dim(2) * w.dim(3);
    const double fan_out = static_cast<double>(w.dim(0)) * w.dim(2) * w.dim(3);
    const double expected = 2.0 / (fan_in + fan_out);
    double m = 0.0, s2 = 0.0;
    for (double v : w.data()) m += v;
    m /= static_cast<double>(w.numel());
    for (double v : w.data()) s2 += (v - m) * (v - m);
    const double var = s2 / static_cast<double>(w.numel());
    CHECK_MESSAGE(std::abs(var / expected - 1.0) < 0.2, name);
    ++checked;
  }
  CHECK(checked > 5);
}

TEST_CASE("full forward: probabilities, upsampling, IMU sensitivity") {
  NetConfig cfg;
  cfg.input_h = 32;
  cfg.input_w = 48;
  const Network net = build_network(cfg);
  ParamStore buffers = net.buffers;
  const ForwardContext ctx{net.params, buffers, BatchNormMode::eval, false};
  const Tensor image = test::random_tensor({3, 32, 48}, 11, 0, 1);
  const Tensor imu_a = Tensor::zeros({1, 32, 48});
  const Tensor imu_b = Tensor::full({1, 32, 48}, 1.0);

  const WasrOutput out = wasr_forward(image, imu_a, ctx, cfg);
  REQUIRE(out.seg.probs.shape() == Shape{3, 32, 48});
  REQUIRE(out.seg.internal_probs.shape() == Shape{3, 8, 12});
  const std::size_t plane = 32 * 48;
  for (std::size_t i = 0; i < plane; ++i) {
    const double s = out.seg.probs.data()[i] + out.seg.probs.data()[plane + i] + out.seg.probs.data()[2 * plane + i];
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
  const Tensor up = upsample_bilinear(out.seg.internal_probs, 4);
  CHECK(test::max_abs_diff(up.data(), out.seg.probs.data()) == 0.0);

  const WasrOutput again = wasr_forward(image, imu_a, ctx, cfg);
  CHECK(test::max_abs_diff(again.seg.probs.data(), out.seg.probs.data()) == 0.0);

  const WasrOutput other = wasr_forward(image, imu_b, ctx, cfg);
  CHECK(test::max_abs_diff(other.seg.probs.data(), out.seg.probs.data()) > 1e-9);

  NetConfig blind = cfg;
  blind.use_imu = false;
  const WasrOutput ba = wasr_forward(image, imu_a, ctx, blind);
  const WasrOutput bb = wasr_forward(image, imu_b, ctx, blind);
  CHECK(test::max_abs_diff(ba.seg.probs.data(), bb.seg.probs.data()) == 0.0);

  CHECK_THROWS_AS(wasr_forward(image, Tensor::zeros({1, 16, 48}), ctx, cfg), ContractError);
}

}  // TEST_SUITE("blocks")
