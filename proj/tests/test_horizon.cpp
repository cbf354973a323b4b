#include <doctest.h>

#include <cmath>

#include "test_util.hpp"
#include "wasr/horizon.hpp"

using namespace wasr;

namespace {

double mask_sum(const Tensor& m) {
  double s = 0.0;
  for (double v : m.data()) s += v;
  return s;
}

}  // namespace

TEST_SUITE("horizon") {

TEST_CASE("horizon_line examples") {
  CameraIntrinsics cam = CameraIntrinsics::centered(128, 100, 100.0);
  cam.cy = 50.0;
  const HorizonLine level = horizon_line({0.0, 0.0}, cam);
  CHECK(level.slope == 0.0);
  CHECK(level.intercept_row == 50.0);
  const HorizonLine pitched = horizon_line({0.0, 0.1}, cam);
  CHECK(pitched.intercept_row == doctest::Approx(60.033).epsilon(1e-4));
  const HorizonLine rolled = horizon_line({0.05, 0.1}, cam);
  CHECK(rolled.slope == doctest::Approx(0.05004).epsilon(1e-4));
  CHECK(rolled.intercept_row == pitched.intercept_row);
}

TEST_CASE("render_imu_mask examples") {
  const Tensor half = render_imu_mask({0.0, 3.5, 0.0}, 6, 8);
  REQUIRE(half.shape() == Shape{1, 8, 6});
  for (int r = 0; r < 8; ++r)
    for (int c = 0; c < 6; ++c) CHECK(half.data()[static_cast<std::size_t>(r * 6 + c)] == (r >= 4 ? 1.0 : 0.0));

  const Tensor above = render_imu_mask({0.0, -10.0, 0.0}, 5, 4);
  for (double v : above.data()) CHECK(v == 1.0);
  const Tensor below = render_imu_mask({0.0, 40.0, 0.0}, 5, 4);
  for (double v : below.data()) CHECK(v == 0.0);

  const Tensor diag = render_imu_mask({1.0, 0.0, 0.0}, 4, 4);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) CHECK(diag.data()[static_cast<std::size_t>(r * 4 + c)] == (r > c ? 1.0 : 0.0));
}

TEST_CASE("resize_mask examples") {
  const Tensor ones = resize_mask(Tensor::full({1, 8, 8}, 1.0), 4, 4);
  for (double v : ones.data()) CHECK(v == doctest::Approx(1.0));

  const Tensor half = render_imu_mask({0.0, 7.5, 0.0}, 8, 16);  // bottom 8 rows
  const Tensor small = resize_mask(half, 8, 4);
  int fractional_rows = 0;
  for (int r = 0; r < 8; ++r) {
    const double v = small.data()[static_cast<std::size_t>(r * 4)];
    if (v > 0.0 && v < 1.0) ++fractional_rows;
    if (r < 3) CHECK(v == 0.0);
    if (r > 4) CHECK(v == 1.0);
  }
  CHECK(fractional_rows <= 1);

  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    const HorizonLine l{rng.uniform(-1, 1), rng.uniform(-5, 40), rng.uniform(0, 31)};
    const Tensor r = resize_mask(render_imu_mask(l, 32, 24), 6, 8);
    for (double v : r.data()) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("column monotonicity over random attitudes") {
  const CameraIntrinsics cam = CameraIntrinsics::centered(64, 48, 60.0);
  Rng rng(11);
  for (int t = 0; t < 1000; ++t) {
    const ImuSample imu{rng.uniform(-1.2, 1.2), rng.uniform(-1.2, 1.2)};
    const Tensor m = render_imu_mask(horizon_line(imu, cam), cam.width, cam.height);
    for (int c = 0; c < cam.width; ++c) {
      bool seen = false;
      for (int r = 0; r < cam.height; ++r) {
        const double v = m.data()[static_cast<std::size_t>(r * cam.width + c)];
        if (seen) REQUIRE(v == 1.0);
        seen = seen || v == 1.0;
      }
    }
  }
}

TEST_CASE("mask area is monotone in pitch") {
  // Larger pitch moves the horizon down, so the area below it cannot grow.
  const CameraIntrinsics cam = CameraIntrinsics::centered(64, 48, 60.0);
  Rng rng(12);
  for (int t = 0; t < 1000; ++t) {
    const double roll = rng.uniform(-1.2, 1.2);
    const double p1 = rng.uniform(-1.2, 1.2), p2 = rng.uniform(-1.2, 1.2);
    const double lo = std::min(p1, p2), hi = std::max(p1, p2);
    const double a_lo = mask_sum(render_imu_mask(horizon_line({roll, lo}, cam), cam.width, cam.height));
    const double a_hi = mask_sum(render_imu_mask(horizon_line({roll, hi}, cam), cam.width, cam.height));
    REQUIRE(a_hi <= a_lo);
  }
}

TEST_CASE("negating roll mirrors the mask about cx") {
  const CameraIntrinsics cam = CameraIntrinsics::centered(64, 48, 60.0);
  Rng rng(13);
  for (int t = 0; t < 1000; ++t) {
    const ImuSample imu{rng.uniform(-1.2, 1.2), rng.uniform(-0.6, 0.6)};
    const Tensor a = render_imu_mask(horizon_line(imu, cam), cam.width, cam.height);
    const Tensor b = render_imu_mask(horizon_line({-imu.roll, imu.pitch}, cam), cam.width, cam.height);
    for (int r = 0; r < cam.height; ++r)
      for (int c = 0; c < cam.width; ++c)
        REQUIRE(a.data()[static_cast<std::size_t>(r * cam.width + c)] ==
                b.data()[static_cast<std::size_t>(r * cam.width + (cam.width - 1 - c))]);
  }
}

TEST_CASE("imu_from_horizon inverts horizon_line") {
  const CameraIntrinsics cam = CameraIntrinsics::centered(128, 96, 128.0);
  Rng rng(14);
  for (int t = 0; t < 100; ++t) {
    const ImuSample imu{rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)};
    const ImuSample back = imu_from_horizon(horizon_line(imu, cam), cam);
    CHECK(back.roll == doctest::Approx(imu.roll).epsilon(1e-12));
    CHECK(back.pitch == doctest::Approx(imu.pitch).epsilon(1e-12));
  }
}

TEST_CASE("intrinsics and IMU files round trip") {
  const auto dir = test::scratch_dir("horizon_io");
  const CameraIntrinsics cam = CameraIntrinsics::centered(128, 96, 128.0);
  write_intrinsics(dir / "intrinsics.txt", cam);
  CHECK(read_intrinsics(dir / "intrinsics.txt") == cam);
  const std::map<int, ImuSample> imu{{0, {0.1, -0.05}}, {7, {-0.123456789012345, 0.2}}};
  write_imu_csv(dir / "imu.csv", imu);
  CHECK(read_imu_csv(dir / "imu.csv") == imu);
  CameraIntrinsics bad = cam;
  bad.focal_px = 0.0;
  CHECK_THROWS(bad.validate());
}

}  // TEST_SUITE("horizon")
