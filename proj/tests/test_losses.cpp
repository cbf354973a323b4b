#include <doctest.h>

#include <cmath>

#include "test_util.hpp"
#include "wasr/gradcheck.hpp"
#include "wasr/losses.hpp"
#include "wasr/ops.hpp"

using namespace wasr;

namespace {

// Direct transcription of the separation loss on plain arrays.
double separation_oracle(const Tensor& f, const RegionIndex& idx, double eps = 1e-8) {
  const int nc = f.dim(0);
  const std::int64_t plane = static_cast<std::int64_t>(f.dim(1)) * f.dim(2);
  const auto x = f.data();
  double total = 0.0;
  for (int c = 0; c < nc; ++c) {
    double mu = 0.0;
    for (auto i : idx.water_pixels) mu += x[static_cast<std::size_t>(c * plane + i)];
    mu /= static_cast<double>(idx.water_pixels.size());
    double num = 0.0, den = 0.0;
    for (auto i : idx.water_pixels) num += std::pow(x[static_cast<std::size_t>(c * plane + i)] - mu, 2);
    for (auto j : idx.obstacle_pixels) den += std::pow(x[static_cast<std::size_t>(c * plane + j)] - mu, 2);
    total += num / std::max(den, eps);
  }
  return static_cast<double>(idx.obstacle_count()) / (nc * static_cast<double>(idx.water_count())) * total;
}

RegionIndex random_regions(int h, int w, std::uint64_t seed) {
  Rng rng(seed);
  SegLabelMap labels(h, w);
  for (auto& l : labels.cells) {
    const double u = rng.uniform(0, 1);
    l = u < 0.5 ? Label::water : u < 0.7 ? Label::sky : u < 0.9 ? Label::obstacle : Label::unknown;
  }
  labels(0, 0) = Label::water;
  labels(0, 1) = Label::water;
  labels(1, 0) = Label::obstacle;
  return build_region_index(labels, h, w);
}

Tensor map_channels(const Tensor& f, const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> v(f.data().begin(), f.data().end());
  const std::size_t plane = static_cast<std::size_t>(f.dim(1)) * f.dim(2);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a[i / plane] * v[i] + b[i / plane];
  return Tensor(f.shape(), std::move(v));
}

}  // namespace

TEST_SUITE("losses") {

TEST_CASE("region index examples") {
  const auto water = build_region_index(SegLabelMap(8, 8, Label::water), 4, 4);
  CHECK(water.obstacle_count() == 0);
  CHECK(water.water_count() == 16);

  const auto halves = build_region_index(test::labels_from({"wwoo", "wwoo"}), 2, 4);
  CHECK(halves.water_count() == 4);
  CHECK(halves.obstacle_count() == 4);

  const auto patch = build_region_index(test::labels_from({"wwww", "wwww", "wwoo", "wwoo"}), 2, 2);
  CHECK(patch.obstacle_count() == 1);
  CHECK(patch.water_count() == 3);

  const auto mixed = build_region_index(test::labels_from({"sw?o"}), 1, 4);
  CHECK(mixed.water_pixels == std::vector<std::int64_t>{1});
  CHECK(mixed.obstacle_pixels == std::vector<std::int64_t>{3});

  CHECK_THROWS(build_region_index(SegLabelMap(5, 5, Label::water), 2, 2));
}

TEST_CASE("separation hand case and scale invariance") {
  const RegionIndex idx = build_region_index(test::labels_from({"wwoo"}), 1, 4);
  const Tensor f({1, 1, 4}, {0.0, 2.0, 3.0, -1.0});
  CHECK(water_separation_loss(f, idx).item() == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(separation_oracle(f, idx) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(water_separation_loss(scale(f, 10.0), idx).item() == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("separation matches the oracle on random inputs") {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const RegionIndex idx = random_regions(6, 7, s);
    const Tensor f = test::random_tensor({4, 6, 7}, 100 + s, -2, 2);
    CHECK(water_separation_loss(f, idx).item() == doctest::Approx(separation_oracle(f, idx)).epsilon(1e-12));
  }
}

TEST_CASE("separation degenerate regions") {
  const Tensor f = test::random_tensor({2, 2, 2}, 1, -1, 1, true);
  const auto no_obstacle = build_region_index(SegLabelMap(2, 2, Label::water), 2, 2);
  const Tensor z = water_separation_loss(f, no_obstacle);
  CHECK(z.item() == 0.0);
  const auto no_water = build_region_index(SegLabelMap(2, 2, Label::obstacle), 2, 2);
  CHECK(water_separation_loss(f, no_water).item() == 0.0);

  // Identical water features per channel give zero numerator.
  const RegionIndex idx = build_region_index(test::labels_from({"wwwo"}), 1, 4);
  const Tensor flat({2, 1, 4}, {1.5, 1.5, 1.5, 4.0, -2.0, -2.0, -2.0, 7.0});
  CHECK(water_separation_loss(flat, idx).item() == 0.0);
}

TEST_CASE("separation is invariant under per-channel affine maps") {
  Rng rng(77);
  for (std::uint64_t s = 0; s < 50; ++s) {
    const RegionIndex idx = random_regions(8, 8, 200 + s);
    const Tensor f = test::random_tensor({4, 8, 8}, 300 + s, -1, 1);
    std::vector<double> a(4), b(4);
    for (int c = 0; c < 4; ++c) {
      a[c] = rng.uniform(0.2, 5.0) * (rng.uniform(0, 1) < 0.5 ? -1.0 : 1.0);
      b[c] = rng.uniform(-10, 10);
    }
    const double base = water_separation_loss(f, idx).item();
    const double mapped = water_separation_loss(map_channels(f, a, b), idx).item();
    CHECK(std::abs(base - mapped) <= 1e-9 * std::max(1.0, std::abs(base)));
    CHECK(base >= 0.0);
  }
}

TEST_CASE("pushing obstacles away from the water mean lowers the loss") {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const RegionIndex idx = random_regions(6, 6, 400 + s);
    const Tensor f = test::random_tensor({3, 6, 6}, 500 + s, -1, 1);
    const WaterStats st = water_stats(f, idx);
    std::vector<double> v(f.data().begin(), f.data().end());
    for (int c = 0; c < 3; ++c) {
      for (auto j : idx.obstacle_pixels) {
        double& x = v[static_cast<std::size_t>(c * 36 + j)];
        x = st.mu[static_cast<std::size_t>(c)] + 2.0 * (x - st.mu[static_cast<std::size_t>(c)]);
      }
    }
    CHECK(water_separation_loss(Tensor(f.shape(), v), idx).item() < water_separation_loss(f, idx).item());
  }
}

TEST_CASE("separation gradient matches finite differences, with and without mu flow") {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const RegionIndex idx = random_regions(8, 8, 600 + s);
    Tensor f = test::random_tensor({4, 8, 8}, 700 + s, -1, 1, true);
    const Tensor loss = water_separation_loss(f, idx);
    loss.backward();
    const std::vector<double> analytic(f.grad().begin(), f.grad().end());
    const Tensor numeric =
        finite_diff_grad([&](const Tensor& x) { return separation_oracle(x, idx); }, f.detach(), 1e-6);
    CHECK(max_relative_error(analytic, numeric.data()) <= 1e-6);

    // Holding mu fixed changes the gradient on water pixels.
    Tensor g = test::random_tensor({4, 8, 8}, 700 + s, -1, 1, true);
    water_separation_loss(g, idx, {1e-8, true}).backward();
    CHECK(test::max_abs_diff(g.grad(), f.grad()) > 1e-9);
  }
}

TEST_CASE("water_stats") {
  const RegionIndex idx = build_region_index(test::labels_from({"wwoo"}), 1, 4);
  const WaterStats st = water_stats(Tensor({1, 1, 4}, {0.0, 2.0, 3.0, -1.0}), idx);
  CHECK(st.mu[0] == 1.0);
  CHECK(st.sigma2[0] == 1.0);
}

TEST_CASE("focal loss examples") {
  const SegLabelMap one = test::labels_from({"w"});
  const Tensor half({3, 1, 1}, {0.5, 0.25, 0.25});
  CHECK(focal_loss(half, one, 2.0).item() == doctest::Approx(0.25 * std::log(2.0)).epsilon(1e-12));
  CHECK(focal_loss(half, one, 0.0).item() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(focal_loss(Tensor({3, 1, 1}, {1.0, 0.0, 0.0}), one, 2.0).item() == 0.0);
  CHECK(focal_loss(half, test::labels_from({"?"}), 2.0).item() == 0.0);

  // Unknown pixels are excluded from the mean.
  const Tensor two({3, 1, 2}, {0.5, 0.9, 0.25, 0.05, 0.25, 0.05});
  CHECK(focal_loss(two, test::labels_from({"w?"}), 2.0).item() == doctest::Approx(0.25 * std::log(2.0)));

  // gamma = 0 is the mean cross entropy.
  const Tensor probs = softmax_channels(test::random_tensor({3, 4, 4}, 9, -2, 2));
  const SegLabelMap labels = test::labels_from({"wwso", "wsoo", "?wws", "ooww"});
  double ce = 0.0;
  int n = 0;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) {
      if (labels(r, c) == Label::unknown) continue;
      ce -= std::log(probs.data()[static_cast<std::size_t>(static_cast<int>(labels(r, c)) * 16 + r * 4 + c)]);
      ++n;
    }
  CHECK(focal_loss(probs, labels, 0.0).item() == doctest::Approx(ce / n).epsilon(1e-12));
}

TEST_CASE("focal loss is monotone in p_t and permutation invariant") {
  const SegLabelMap one = test::labels_from({"o"});
  double prev = 1e300;
  for (int k = 1; k <= 99; ++k) {
    const double p = k / 100.0;
    const double v = focal_loss(Tensor({3, 1, 1}, {(1 - p) / 2, (1 - p) / 2, p}), one, 2.0).item();
    CHECK(v < prev);
    prev = v;
  }
  const Tensor a({3, 1, 3}, {0.2, 0.5, 0.1, 0.3, 0.2, 0.6, 0.5, 0.3, 0.3});
  const Tensor b({3, 1, 3}, {0.1, 0.2, 0.5, 0.6, 0.3, 0.2, 0.3, 0.5, 0.3});
  CHECK(focal_loss(a, test::labels_from({"wso"}), 2.0).item() ==
        doctest::Approx(focal_loss(b, test::labels_from({"ows"}), 2.0).item()).epsilon(1e-14));
}

TEST_CASE("l2 regularizer") {
  ParamStore ps;
  ps.add("c.weight", Tensor({1, 1, 1, 1}, {3.0}, true));
  ps.add("c.bias", Tensor({1}, {5.0}, true));
  ps.add("bn.gamma", Tensor({1}, {7.0}, true));
  const Tensor l2 = l2_reg(ps);
  CHECK(l2.item() == 4.5);
  l2.backward();
  CHECK(ps.at("c.weight").grad()[0] == 3.0);
  CHECK_FALSE(ps.at("c.bias").has_grad());

  ParamStore zero;
  zero.add("c.weight", Tensor::zeros({2, 2, 1, 1}, true));
  CHECK(l2_reg(zero).item() == 0.0);
}

TEST_CASE("total loss") {
  const LossBreakdown t = total_loss(Tensor::scalar(1.0), Tensor::scalar(2.0), Tensor::scalar(3.0), {0.5, 0.1, 2.0});
  CHECK(t.total.item() == doctest::Approx(2.3).epsilon(1e-14));
  CHECK(t.focal == 1.0);
  CHECK(t.separation == 2.0);
  CHECK(t.l2 == 3.0);
  CHECK(total_loss(Tensor::scalar(1.0), Tensor::scalar(2.0), Tensor::scalar(3.0), {0.0, 0.0, 2.0}).total.item() ==
        1.0);
  CHECK(total_loss(Tensor::scalar(1.0), Tensor(), Tensor::scalar(3.0), {0.5, 0.1, 2.0}).total.item() ==
        doctest::Approx(1.3));

  Tensor f = Tensor::scalar(1.0, true), w = Tensor::scalar(2.0, true), l = Tensor::scalar(3.0, true);
  total_loss(f, w, l, {0.5, 0.1, 2.0}).total.backward();
  CHECK(f.grad()[0] == 1.0);
  CHECK(w.grad()[0] == 0.5);
  CHECK(l.grad()[0] == doctest::Approx(0.1));
}

}  // TEST_SUITE("losses")
