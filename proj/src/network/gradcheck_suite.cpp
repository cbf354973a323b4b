#include "wasr/gradcheck_suite.hpp"

#include <algorithm>
#include <numeric>

#include "wasr/losses.hpp"
#include "wasr/network.hpp"
#include "wasr/ops.hpp"
#include "wasr/rng.hpp"

namespace wasr {

namespace {

Tensor random_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(static_cast<std::size_t>(shape_numel(shape)));
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor(std::move(shape), std::move(v));
}

// Values at least `gap` away from zero.
Tensor away_from_zero(Rng& rng, Shape shape, double gap) {
  Tensor t = random_tensor(rng, std::move(shape));
  for (double& x : t.mutable_data()) x = x < 0 ? x - gap : x + gap;
  return t;
}

// Distinct values spaced by at least `gap`, for pooling.
Tensor distinct_values(Rng& rng, Shape shape, double gap) {
  const auto n = static_cast<std::size_t>(shape_numel(shape));
  std::vector<double> v(n);
  std::iota(v.begin(), v.end(), 0.0);
  rng.shuffle(v.begin(), v.end());
  for (double& x : v) x = x * gap + rng.uniform(0.0, gap / 4);
  return Tensor(std::move(shape), std::move(v));
}

// Scalar probe of a non-scalar output: sum(y * r) with fixed random r.
Tensor probe(const Tensor& y, std::uint64_t seed) {
  Rng rng(seed);
  return sum(mul(y, random_tensor(rng, y.shape())));
}

GradCheckCase op_case(std::string name, std::function<GradCheckReport(const GradCheckOptions&)> run) {
  return {std::move(name), false, std::move(run)};
}

GradCheckCase conv_case(std::string name, int stride, int dilation, int k, int h, int w) {
  return op_case(name, [=](const GradCheckOptions& opt) {
    Rng rng(mix_seed({11, static_cast<std::uint64_t>(stride), static_cast<std::uint64_t>(dilation),
                      static_cast<std::uint64_t>(k)}));
    Tensor x = random_tensor(rng, {2, h, w});
    Tensor wt = random_tensor(rng, {3, 2, k, k});
    Tensor b = random_tensor(rng, {3});
    const int pad = k == 1 ? 0 : same_padding(k, dilation);
    return gradcheck(name, [=] { return probe(conv2d(x, wt, b, {stride, dilation, pad, pad}), 1); }, {x, wt, b}, opt);
  });
}

struct BlockFixture {
  ParamStore params{true};
  ParamStore buffers{false};
  Rng rng{mix_seed({0xB10C})};
};

// Labels for a 16x16 scene: a sky band on top, an obstacle in the
// bottom-right quadrant, water elsewhere. Nearest sampling down to 2x2 keeps
// three water cells and one obstacle cell.
SegLabelMap probe_labels(int h, int w) {
  SegLabelMap labels(h, w, Label::water);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (r < 3) labels(r, c) = Label::sky;
      if (r >= h / 2 && c >= w / 2) labels(r, c) = Label::obstacle;
    }
  }
  labels(h / 2, 1) = Label::unknown;
  return labels;
}

std::vector<Tensor> all_params(ParamStore& p) {
  std::vector<Tensor> out;
  for (const auto& n : p.names()) out.push_back(p.at(n));
  return out;
}

}  // namespace

std::vector<GradCheckCase> gradcheck_registry() {
  std::vector<GradCheckCase> cases;

  cases.push_back(conv_case("conv2d", 1, 1, 3, 6, 7));
  cases.push_back(conv_case("conv2d.dilated", 1, 2, 3, 7, 8));
  cases.push_back(conv_case("conv2d.strided", 2, 1, 3, 7, 8));
  cases.push_back(conv_case("conv2d.1x1", 1, 1, 1, 5, 5));

  cases.push_back(op_case("max_pool2d", [](const GradCheckOptions& opt) {
    Rng rng(21);
    Tensor x = distinct_values(rng, {2, 6, 6}, 0.05);
    return gradcheck("max_pool2d", [=] { return probe(max_pool2d(x, 2, 2), 2); }, {x}, opt);
  }));
  cases.push_back(op_case("resize_bilinear", [](const GradCheckOptions& opt) {
    Rng rng(22);
    Tensor x = random_tensor(rng, {2, 5, 7});
    return gradcheck("resize_bilinear",
                     [=] { return add(probe(resize_bilinear(x, 3, 4), 3), probe(resize_bilinear(x, 9, 11), 4)); }, {x},
                     opt);
  }));
  cases.push_back(op_case("upsample_bilinear", [](const GradCheckOptions& opt) {
    Rng rng(23);
    Tensor x = random_tensor(rng, {2, 3, 4});
    return gradcheck("upsample_bilinear",
                     [=] { return add(probe(upsample_bilinear(x, 2), 5), probe(upsample_bilinear(x, 4), 6)); }, {x},
                     opt);
  }));
  cases.push_back(op_case("relu", [](const GradCheckOptions& opt) {
    Rng rng(24);
    Tensor x = away_from_zero(rng, {2, 4, 4}, 0.05);
    return gradcheck("relu", [=] { return probe(relu(x), 7); }, {x}, opt);
  }));
  cases.push_back(op_case("sigmoid", [](const GradCheckOptions& opt) {
    Rng rng(25);
    Tensor x = random_tensor(rng, {2, 4, 4}, -4.0, 4.0);
    return gradcheck("sigmoid", [=] { return probe(sigmoid(x), 8); }, {x}, opt);
  }));
  cases.push_back(op_case("softmax_channels", [](const GradCheckOptions& opt) {
    Rng rng(26);
    Tensor x = random_tensor(rng, {3, 4, 5}, -3.0, 3.0);
    return gradcheck("softmax_channels", [=] { return probe(softmax_channels(x), 9); }, {x}, opt);
  }));
  cases.push_back(op_case("concat_channels", [](const GradCheckOptions& opt) {
    Rng rng(27);
    Tensor a = random_tensor(rng, {1, 3, 4}), b = random_tensor(rng, {2, 3, 4}), c = random_tensor(rng, {1, 3, 4});
    return gradcheck("concat_channels", [=] { return probe(concat_channels({a, b, c}), 10); }, {a, b, c}, opt);
  }));
  cases.push_back(op_case("slice_channels", [](const GradCheckOptions& opt) {
    Rng rng(28);
    Tensor x = random_tensor(rng, {4, 3, 3});
    return gradcheck("slice_channels", [=] { return probe(slice_channels(x, 1, 2), 11); }, {x}, opt);
  }));
  cases.push_back(op_case("global_avg_pool", [](const GradCheckOptions& opt) {
    Rng rng(29);
    Tensor x = random_tensor(rng, {3, 4, 5});
    return gradcheck("global_avg_pool", [=] { return probe(global_avg_pool(x), 12); }, {x}, opt);
  }));
  cases.push_back(op_case("batch_norm.train", [](const GradCheckOptions& opt) {
    Rng rng(30);
    Tensor x = random_tensor(rng, {3, 4, 4}), g = random_tensor(rng, {3}, 0.5, 1.5), b = random_tensor(rng, {3});
    Tensor rm = Tensor::zeros({3}), rv = Tensor::full({3}, 1.0);
    return gradcheck("batch_norm.train",
                     [=]() mutable {
                       return probe(batch_norm(x, g, b, rm, rv, {BatchNormMode::train, 1e-5, 0.9, false}), 13);
                     },
                     {x, g, b}, opt);
  }));
  cases.push_back(op_case("batch_norm.eval", [](const GradCheckOptions& opt) {
    Rng rng(31);
    Tensor x = random_tensor(rng, {3, 4, 4}), g = random_tensor(rng, {3}, 0.5, 1.5), b = random_tensor(rng, {3});
    Tensor rm = random_tensor(rng, {3}), rv = random_tensor(rng, {3}, 0.5, 2.0);
    return gradcheck("batch_norm.eval",
                     [=]() mutable {
                       return probe(batch_norm(x, g, b, rm, rv, {BatchNormMode::eval, 1e-5, 0.9, false}), 14);
                     },
                     {x, g, b}, opt);
  }));
  cases.push_back(op_case("add", [](const GradCheckOptions& opt) {
    Rng rng(32);
    Tensor a = random_tensor(rng, {2, 3, 3}), b = random_tensor(rng, {2, 3, 3});
    return gradcheck("add", [=] { return probe(add(a, b), 15); }, {a, b}, opt);
  }));
  cases.push_back(op_case("sub", [](const GradCheckOptions& opt) {
    Rng rng(33);
    Tensor a = random_tensor(rng, {2, 3, 3}), b = random_tensor(rng, {2, 3, 3});
    return gradcheck("sub", [=] { return probe(sub(a, b), 16); }, {a, b}, opt);
  }));
  cases.push_back(op_case("mul", [](const GradCheckOptions& opt) {
    Rng rng(34);
    Tensor a = random_tensor(rng, {2, 3, 3}), b = random_tensor(rng, {2, 3, 3});
    return gradcheck("mul", [=] { return probe(mul(a, b), 17); }, {a, b}, opt);
  }));
  cases.push_back(op_case("scale", [](const GradCheckOptions& opt) {
    Rng rng(35);
    Tensor a = random_tensor(rng, {2, 3, 3});
    return gradcheck("scale", [=] { return probe(scale(a, -1.7), 18); }, {a}, opt);
  }));
  cases.push_back(op_case("mul_channels", [](const GradCheckOptions& opt) {
    Rng rng(36);
    Tensor x = random_tensor(rng, {3, 3, 4}), w = random_tensor(rng, {3, 1, 1});
    return gradcheck("mul_channels", [=] { return probe(mul_channels(x, w), 19); }, {x, w}, opt);
  }));
  cases.push_back(op_case("sum", [](const GradCheckOptions& opt) {
    Rng rng(37);
    Tensor x = random_tensor(rng, {2, 3, 3});
    return gradcheck("sum", [=] { return sum(mul(x, x)); }, {x}, opt);
  }));
  cases.push_back(op_case("mean", [](const GradCheckOptions& opt) {
    Rng rng(38);
    Tensor x = random_tensor(rng, {2, 3, 3});
    return gradcheck("mean", [=] { return mean(mul(x, x)); }, {x}, opt);
  }));
  cases.push_back(op_case("sum_squares", [](const GradCheckOptions& opt) {
    Rng rng(39);
    Tensor x = random_tensor(rng, {2, 3, 3});
    return gradcheck("sum_squares", [=] { return sum_squares(x); }, {x}, opt);
  }));

  cases.push_back(op_case("water_separation_loss", [](const GradCheckOptions& opt) {
    Rng rng(40);
    Tensor f = random_tensor(rng, {4, 8, 8});
    SegLabelMap labels(8, 8, Label::water);
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 8; ++c) labels(r, c) = Label::sky;
    }
    for (int r = 4; r < 7; ++r) {
      for (int c = 2; c < 5; ++c) labels(r, c) = Label::obstacle;
    }
    labels(7, 7) = Label::unknown;
    const RegionIndex idx = build_region_index(labels, 8, 8);
    return gradcheck("water_separation_loss", [=] { return water_separation_loss(f, idx); }, {f}, opt);
  }));
  cases.push_back(op_case("focal_loss", [](const GradCheckOptions& opt) {
    Rng rng(41);
    Tensor p = random_tensor(rng, {3, 4, 4}, 0.05, 0.95);
    SegLabelMap labels(4, 4);
    for (int i = 0; i < 16; ++i) labels.cells[static_cast<std::size_t>(i)] = static_cast<Label>(i % 3);
    labels.cells[5] = Label::unknown;
    return gradcheck("focal_loss", [=] { return focal_loss(p, labels, 2.0); }, {p}, opt);
  }));
  cases.push_back(op_case("l2_reg", [](const GradCheckOptions& opt) {
    auto store = std::make_shared<ParamStore>(true);
    Rng rng(42);
    add_conv(*store, rng, "a", 2, 2, 3);
    add_conv(*store, rng, "b", 3, 2, 1);
    return gradcheck("l2_reg", [store] { return l2_reg(*store); }, all_params(*store), opt);
  }));
  cases.push_back(op_case("total_loss", [](const GradCheckOptions& opt) {
    Rng rng(43);
    Tensor a = random_tensor(rng, {3}), b = random_tensor(rng, {3}), c = random_tensor(rng, {3});
    const LossWeights w{0.5, 0.1, 2.0};
    return gradcheck("total_loss", [=] { return total_loss(sum_squares(a), sum_squares(b), sum_squares(c), w).total; },
                     {a, b, c}, opt);
  }));

  // Network blocks.
  cases.push_back(op_case("block.arm1", [](const GradCheckOptions& opt) {
    auto fx = std::make_shared<BlockFixture>();
    add_arm(fx->params, fx->buffers, fx->rng, "arm", 4);
    Tensor feat = random_tensor(fx->rng, {3, 4, 4}), imu = random_tensor(fx->rng, {1, 4, 4}, 0.0, 1.0);
    auto leaves = all_params(fx->params);
    leaves.push_back(feat);
    return gradcheck("block.arm1",
                     [=] {
                       ForwardContext ctx{fx->params, fx->buffers, BatchNormMode::train, false};
                       return probe(arm1(feat, imu, ctx, "arm"), 20);
                     },
                     leaves, opt);
  }));
  cases.push_back(op_case("block.arm2", [](const GradCheckOptions& opt) {
    auto fx = std::make_shared<BlockFixture>();
    add_arm(fx->params, fx->buffers, fx->rng, "a2.arm", 5);
    add_conv(fx->params, fx->rng, "a2.proj", 2, 5, 1);
    Tensor deep = random_tensor(fx->rng, {4, 3, 3}), res3 = random_tensor(fx->rng, {2, 3, 3});
    Tensor imu = random_tensor(fx->rng, {1, 3, 3}, 0.0, 1.0);
    auto leaves = all_params(fx->params);
    leaves.push_back(deep);
    leaves.push_back(res3);
    return gradcheck("block.arm2",
                     [=] {
                       ForwardContext ctx{fx->params, fx->buffers, BatchNormMode::train, false};
                       return probe(arm2(deep, res3, imu, ctx, "a2"), 21);
                     },
                     leaves, opt);
  }));
  cases.push_back(op_case("block.ffm", [](const GradCheckOptions& opt) {
    auto fx = std::make_shared<BlockFixture>();
    add_ffm(fx->params, fx->buffers, fx->rng, "ffm", 2 + 2 + 1, 3);
    Tensor deep = random_tensor(fx->rng, {2, 4, 4}), res2 = random_tensor(fx->rng, {2, 4, 4});
    Tensor imu = random_tensor(fx->rng, {1, 4, 4}, 0.0, 1.0);
    auto leaves = all_params(fx->params);
    leaves.push_back(deep);
    return gradcheck("block.ffm",
                     [=] {
                       ForwardContext ctx{fx->params, fx->buffers, BatchNormMode::train, false};
                       return probe(ffm(deep, res2, imu, ctx, "ffm"), 22);
                     },
                     leaves, opt);
  }));
  cases.push_back(op_case("block.aspp", [](const GradCheckOptions& opt) {
    auto fx = std::make_shared<BlockFixture>();
    const std::vector<int> rates{1, 2, 3};
    add_aspp(fx->params, fx->rng, "aspp", 2, 3, rates);
    Tensor x = random_tensor(fx->rng, {2, 5, 5});
    auto leaves = all_params(fx->params);
    leaves.push_back(x);
    return gradcheck("block.aspp",
                     [=] {
                       ForwardContext ctx{fx->params, fx->buffers, BatchNormMode::train, false};
                       return probe(aspp(x, rates, ctx, "aspp"), 23);
                     },
                     leaves, opt);
  }));

  cases.push_back({"wasr.end_to_end", true, [](const GradCheckOptions& opt) {
                     NetConfig cfg;
                     cfg.input_h = 16;
                     cfg.input_w = 16;
                     cfg.encoder_channels = {2, 4, 6, 8};
                     cfg.seed = 5;
                     auto net = std::make_shared<Network>(build_network(cfg));
                     Rng rng(44);
                     Tensor image = random_tensor(rng, {3, 16, 16}, 0.0, 1.0);
                     Tensor imu = Tensor::zeros({1, 16, 16});
                     for (std::size_t i = 0; i < 16 * 16; ++i) {
                       if (i / 16 >= 7) imu.mutable_data()[i] = 1.0;
                     }
                     const SegLabelMap labels = probe_labels(16, 16);
                     const LossWeights weights;
                     auto leaves = all_params(net->params);
                     leaves.push_back(image);
                     return gradcheck("wasr.end_to_end",
                                      [=] {
                                        ForwardContext ctx{net->params, net->buffers, BatchNormMode::train, false};
                                        const WasrOutput out = wasr_forward(image, imu, ctx, net->cfg);
                                        const Tensor& f = out.features.res5;
                                        const Tensor ws = water_separation_loss(
                                            f, build_region_index(labels, f.dim(1), f.dim(2)));
                                        return total_loss(focal_loss(out.seg.probs, labels, weights.gamma), ws,
                                                          l2_reg(net->params), weights)
                                            .total;
                                      },
                                      leaves, opt);
                   }});
  return cases;
}

std::vector<GradCheckReport> run_gradcheck_suite(const std::string& inject_fault) {
  std::vector<GradCheckReport> out;
  for (const auto& c : gradcheck_registry()) {
    GradCheckOptions opt;
    opt.tolerance = c.end_to_end ? kEndToEndTolerance : kOpTolerance;
    opt.negate_analytic = c.name == inject_fault;
    out.push_back(c.run(opt));
  }
  return out;
}

}  // namespace wasr
