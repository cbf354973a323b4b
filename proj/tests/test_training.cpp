#include <doctest.h>

#include <cmath>

#include "test_util.hpp"
#include "wasr/training.hpp"

using namespace wasr;

namespace {

SceneParams toy_scene_params() {
  SceneParams p;
  p.height = 48;
  p.width = 64;
  p.focal_px = 48.0;
  p.roll = {-0.05, 0.05};
  p.pitch = {-0.05, 0.05};
  p.obstacle_size_min = 6;
  p.obstacle_size_max = 10;
  return p;
}

TrainConfig toy_config() {
  TrainConfig cfg;
  cfg.net.input_h = 48;
  cfg.net.input_w = 64;
  cfg.net.encoder_channels = {4, 4, 4, 4};
  cfg.net.aspp_rates = {1, 2};
  cfg.net.seed = 3;
  cfg.optim.lr0 = 1e-3;
  cfg.epochs = 1;
  cfg.seed = 4;
  return cfg;
}

}  // namespace

TEST_SUITE("training") {

TEST_CASE("poly learning rate") {
  CHECK(poly_lr(0, 100, 1e-4, 0.9) == 1e-4);
  CHECK(poly_lr(100, 100, 1e-4, 0.9) == 0.0);
  CHECK(poly_lr(50, 100, 1e-4, 0.9) == doctest::Approx(5.359e-5).epsilon(1e-3));
  CHECK_THROWS(poly_lr(0, 0, 1e-4, 0.9));
  double prev = 1.0;
  for (int s = 0; s <= 37; ++s) {
    const double lr = poly_lr(s, 37, 1e-4, 0.9);
    CHECK(lr <= prev);
    prev = lr;
  }
}

TEST_CASE("rmsprop hand iteration") {
  ParamStore ps;
  Tensor& p = ps.add("w", Tensor::scalar(2.0, true));
  OptimHyper hyper;
  OptimState st = OptimState::init(ps, hyper, 100);
  p.mutable_grad()[0] = 1.0;
  rmsprop_step(ps, st);
  CHECK(st.square_avg.at("w").item() == doctest::Approx(0.1).epsilon(1e-14));
  const double m = 1.0 / std::sqrt(0.1 + 1e-8);
  CHECK(m == doctest::Approx(3.1623).epsilon(1e-4));
  CHECK(st.momentum.at("w").item() == doctest::Approx(m).epsilon(1e-14));
  CHECK(p.item() == doctest::Approx(2.0 - 1e-4 * m).epsilon(1e-14));
  CHECK(st.step == 1);
  CHECK((!p.has_grad() || p.grad()[0] == 0.0));

  // Zero gradient: momentum decays, parameter moves by the decayed momentum only.
  const double before = p.item();
  rmsprop_step(ps, st);
  CHECK(st.momentum.at("w").item() == doctest::Approx(0.9 * m).epsilon(1e-14));
  CHECK(p.item() == doctest::Approx(before - poly_lr(1, 100, 1e-4, 0.9) * 0.9 * m).epsilon(1e-14));
}

TEST_CASE("zero gradients from zero state are a fixed point") {
  ParamStore ps;
  ps.add("a", test::random_tensor({3, 4}, 1, -1, 1, true));
  ps.add("b", test::random_tensor({5}, 2, -1, 1, true));
  const ParamStore snapshot = ps.clone();
  OptimState st = OptimState::init(ps, OptimHyper{}, 10);
  for (int i = 0; i < 5; ++i) rmsprop_step(ps, st);
  CHECK(ps.bit_equal(snapshot));
}

TEST_CASE("training is deterministic, checkpoints round trip, resume is exact") {
  const auto scenes = generate_scenes(toy_scene_params(), 21, 8);
  const SampleSource data = SampleSource::of(scenes);
  const auto dir = test::scratch_dir("training_ckpt");

  TrainConfig cfg = toy_config();
  cfg.epochs = 2;
  cfg.checkpoint_dir = dir / "run";
  const TrainResult a = train(data, cfg);
  TrainConfig cfg_b = cfg;
  cfg_b.checkpoint_dir.clear();
  const TrainResult b = train(data, cfg_b);
  CHECK(a.net.params.bit_equal(b.net.params));
  CHECK(a.net.buffers.bit_equal(b.net.buffers));
  REQUIRE(a.log.size() == 16);
  for (std::size_t i = 0; i < a.log.size(); ++i) CHECK(a.log[i].total == b.log[i].total);
  for (std::size_t i = 1; i < a.log.size(); ++i) CHECK(a.log[i].lr <= a.log[i - 1].lr);

  // Saved checkpoint reproduces forward outputs.
  const Checkpoint ck = load_checkpoint(dir / "run" / "epoch_002", cfg.optim);
  CHECK(ck.epoch == 2);
  CHECK(ck.params.bit_equal(a.net.params));
  Network restored{cfg.net, ck.params, ck.buffers};
  CHECK(predict_labels(restored, scenes[0]) == predict_labels(a.net, scenes[0]));

  // Resume from epoch 1 and finish epoch 2.
  TrainConfig cfg_r = cfg;
  cfg_r.checkpoint_dir = dir / "resumed";
  cfg_r.resume_from = dir / "run" / "epoch_001";
  const TrainResult r = train(data, cfg_r);
  CHECK(r.net.params.bit_equal(a.net.params));
  REQUIRE_FALSE(r.log.empty());
  CHECK(std::abs(r.log.back().total - a.log.back().total) <= 1e-12);
}

TEST_CASE("lambda1 zero logs no separation") {
  const auto scenes = generate_scenes(toy_scene_params(), 22, 4);
  TrainConfig cfg = toy_config();
  cfg.weights.lambda1 = 0.0;
  const TrainResult res = train(SampleSource::of(scenes), cfg);
  for (const auto& s : res.log) CHECK(s.separation == 0.0);
}

TEST_CASE("toy network loss decreases") {
  const auto scenes = generate_scenes(toy_scene_params(), 23, 8);
  TrainConfig cfg = toy_config();
  cfg.epochs = 7;  // 56 steps
  const TrainResult res = train(SampleSource::of(scenes), cfg);
  REQUIRE(res.log.size() >= 50);
  auto window = [&](std::size_t first) {
    double s = 0.0;
    for (std::size_t i = first; i < first + 10; ++i) s += res.log[i].total;
    return s / 10.0;
  };
  CHECK(window(40) < window(0));
  for (const auto& s : res.log) CHECK(std::isfinite(s.total));
}

TEST_CASE("empty data is rejected") {
  const std::vector<SceneSample> none;
  CHECK_THROWS(train(SampleSource::of(none), toy_config()));
}

}  // TEST_SUITE("training")
