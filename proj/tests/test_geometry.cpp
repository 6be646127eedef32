#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "mvdet/geometry.hpp"
#include "support/geometry_oracles.hpp"

using namespace mvdet;

namespace {

CameraCalibration canonical() {
  CameraCalibration c;
  c.P = {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0};
  c.width = 100;
  c.height = 100;
  return c;
}

}  // namespace

TEST(GeometryProjection, CanonicalCameraExamples) {
  const auto cam = canonical();
  const Vec2 a = world_to_image(cam, {0, 0, 1});
  EXPECT_DOUBLE_EQ(a.x, 0);
  EXPECT_DOUBLE_EQ(a.y, 0);
  const Vec2 b = world_to_image(cam, {2, 3, 2});
  EXPECT_DOUBLE_EQ(b.x, 1);
  EXPECT_DOUBLE_EQ(b.y, 1.5);
}

TEST(GeometryProjection, BehindCameraThrows) {
  const auto cam = canonical();
  EXPECT_THROW(world_to_image(cam, {0, 0, -1}), PointBehindCamera);
  EXPECT_THROW(world_to_image(cam, {1, 1, 0}), PointBehindCamera);
}

TEST(GeometryProjection, MatchesMatrixOracleOnRandomCalibrations) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-5, 5);
  int checked = 0;
  for (int t = 0; t < 1000; ++t) {
    const auto cam = oracle::random_calibration(rng);
    const Vec3 X{u(rng), u(rng), std::abs(u(rng))};
    const auto ref = oracle::project_homogeneous(cam, X);
    if (ref[2] <= 1e-6) {
      EXPECT_THROW(world_to_image(cam, X), PointBehindCamera);
      continue;
    }
    const Vec2 uv = world_to_image(cam, X);
    EXPECT_NEAR(uv.x, ref[0] / ref[2], 1e-9 * (1 + std::abs(uv.x)));
    EXPECT_NEAR(uv.y, ref[1] / ref[2], 1e-9 * (1 + std::abs(uv.y)));
    ++checked;
  }
  EXPECT_GT(checked, 500);
}

TEST(GeometryCalibration, Validation) {
  auto cam = canonical();
  EXPECT_NO_THROW(cam.validate());
  cam.P[5] = 0;
  EXPECT_THROW(cam.validate(), ValidationError);
  cam = canonical();
  cam.P[3] = std::nan("");
  EXPECT_THROW(cam.validate(), ValidationError);
  cam = canonical();
  cam.width = 0;
  EXPECT_THROW(cam.validate(), ValidationError);
}

TEST(GeometryCalibration, LookAtCameraCenterAndAxis) {
  const Vec3 pos{1, -6, 3}, target{2, 2, 0};
  const auto cam = look_at_camera(0, pos, target, 120, 160, 120);
  cam.validate();
  const Vec2 c = world_to_image(cam, target);
  EXPECT_NEAR(c.x, 80, 1e-9);
  EXPECT_NEAR(c.y, 60, 1e-9);
  // upward in the world is upward in the image
  const Vec2 above = world_to_image(cam, {2, 2, 1});
  EXPECT_LT(above.y, c.y);
  const Vec3 center = RayCaster(cam).center();
  EXPECT_NEAR(center.x, pos.x, 1e-9);
  EXPECT_NEAR(center.y, pos.y, 1e-9);
  EXPECT_NEAR(center.z, pos.z, 1e-9);
}

TEST(GeometryCalibration, RayCasterInvertsProjection) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 100; ++t) {
    const auto cam = oracle::random_calibration(rng);
    const RayCaster rc(cam);
    const Ray r = rc.ray(37.5, 81.25);
    const Vec2 uv = world_to_image(cam, r.origin + 2.0 * r.dir);
    EXPECT_NEAR(uv.x, 37.5, 1e-6);
    EXPECT_NEAR(uv.y, 81.25, 1e-6);
  }
}

TEST(GeometryGrid, CellCenterExamples) {
  const GroundGrid g{{0, 0}, 1.0, 10, 10};
  EXPECT_EQ(g.cell_center(0), (Vec3{0.5, 0.5, 0}));
  EXPECT_EQ(g.cell_center(99), (Vec3{9.5, 9.5, 0}));
  EXPECT_THROW(g.cell_center(100), IndexOutOfRange);
  EXPECT_THROW(g.cell_center(-1), IndexOutOfRange);
}

TEST(GeometryGrid, FullScaleGridSizes) {
  const GroundGrid a{{0, 0}, 0.25, 45, 55};
  const GroundGrid b{{0, 0}, 0.1, 140, 140};
  EXPECT_NO_THROW(a.validate());
  EXPECT_NO_THROW(b.validate());
  EXPECT_EQ(a.size(), 2475);
  EXPECT_EQ(b.size(), 19600);
  EXPECT_NO_THROW(b.cell_center(19599));
}

TEST(GeometryGrid, RowColumnLayout) {
  const GroundGrid g{{-1, 2}, 0.5, 3, 4};
  const Vec3 c = g.cell_center(6);  // row 1, col 2
  EXPECT_DOUBLE_EQ(c.x, -1 + 2.5 * 0.5);
  EXPECT_DOUBLE_EQ(c.y, 2 + 1.5 * 0.5);
}

TEST(GeometryGrid, IndexCenterBijectionRandomGrids) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> dim(1, 60);
  std::uniform_real_distribution<double> o(-20, 20), cs(0.05, 2.0);
  for (int t = 0; t < 1000; ++t) {
    const GroundGrid g{{o(rng), o(rng)}, cs(rng), dim(rng), dim(rng)};
    std::uniform_int_distribution<int> cell(0, g.size() - 1);
    for (int k = 0; k < 5; ++k) {
      const int p = cell(rng);
      const Vec3 c = g.cell_center(p);
      EXPECT_EQ(c.z, 0);
      ASSERT_EQ(g.locate(c.x, c.y), p);
    }
  }
}

TEST(GeometryCylinder, DegenerateRadiusInvisible) {
  // camera looking horizontally along +y at a vertical segment on its axis
  const auto cam = look_at_camera(0, {0, -5, 1}, {0, 0, 1}, 100, 100, 100);
  const CropRect r = project_cylinder(cam, {{0, 0, 0}, 0.0, 1.75});
  EXPECT_FALSE(r.visible);
}

TEST(GeometryCylinder, BehindCameraInvisible) {
  const auto cam = look_at_camera(0, {0, -5, 1}, {0, 0, 1}, 100, 100, 100);
  EXPECT_FALSE(project_cylinder(cam, {{0, -10, 0}, 0.3, 1.75}).visible);
}

TEST(GeometryCylinder, OutsideImageInvisible) {
  const auto cam = look_at_camera(0, {0, -5, 1}, {0, 0, 1}, 100, 100, 100);
  EXPECT_FALSE(project_cylinder(cam, {{40, 0, 0}, 0.3, 1.75}).visible);
  EXPECT_TRUE(project_cylinder(cam, {{0, 0, 0}, 0.3, 1.75}).visible);
}

TEST(GeometryCylinder, ContainmentRandomInstances) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-4, 4), rad(0.05, 0.6), hgt(0.5, 2.2);
  int visible = 0;
  for (int t = 0; t < 1000; ++t) {
    const auto cam = oracle::random_calibration(rng);
    const Cylinder cyl{{u(rng), u(rng), 0}, rad(rng), hgt(rng)};
    const CropRect r = project_cylinder(cam, cyl);
    const auto pts = oracle::cylinder_points(cyl, 8);
    if (!r.visible) continue;
    ++visible;
    EXPECT_LT(r.x0, r.x1);
    EXPECT_LT(r.y0, r.y1);
    EXPECT_GE(r.x0, 0);
    EXPECT_GE(r.y0, 0);
    EXPECT_LE(r.x1, cam.width);
    EXPECT_LE(r.y1, cam.height);
    EXPECT_GE(r.area(), 4.0);
    for (const Vec3& X : pts) {
      const auto h = oracle::project_homogeneous(cam, X);
      ASSERT_GT(h[2], 0);
      const double px = std::clamp(h[0] / h[2], 0.0, double(cam.width));
      const double py = std::clamp(h[1] / h[2], 0.0, double(cam.height));
      EXPECT_GE(px, r.x0 - 1e-9);
      EXPECT_LE(px, r.x1 + 1e-9);
      EXPECT_GE(py, r.y0 - 1e-9);
      EXPECT_LE(py, r.y1 + 1e-9);
    }
  }
  EXPECT_GT(visible, 200);
}

TEST(GeometryCrop, InvisibleRectGivesZeros) {
  Image img(8, 8, 200);
  const Tensor p = crop_region(img, CropRect{0, 0, 8, 8, false}, 5, 7);
  EXPECT_EQ(p.shape(), (Shape{3, 5, 7}));
  for (double v : p.values()) EXPECT_EQ(v, 0);
}

TEST(GeometryCrop, FullRectIsIdentityCopy) {
  std::mt19937_64 rng(1);
  Image img(9, 6);
  for (auto& v : img.rgb) v = static_cast<std::uint8_t>(rng() & 0xff);
  const Tensor p = crop_region(img, CropRect{0, 0, 9, 6, true}, 6, 9);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 6; ++y)
      for (int x = 0; x < 9; ++x)
        ASSERT_NEAR(p[static_cast<std::size_t>((c * 6 + y) * 9 + x)], img.at(x, y, c) / 255.0, 1e-12);
}

TEST(GeometryCrop, CheckerboardMatchesBilinearOracle) {
  Image img(4, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x)
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = ((x + y) % 2) ? 255 : 0;
  const CropRect full{0, 0, 4, 4, true};
  const Tensor p = crop_region(img, full, 2, 2);
  const Tensor ref = oracle::bilinear_crop(img, full, 2, 2);
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(p[i], ref[i], 1e-6);
  // each 2x2 output pixel sits between two black and two white pixels
  for (double v : p.values()) EXPECT_NEAR(v, 0.5, 1e-12);
}

TEST(GeometryCrop, RandomRectsMatchBilinearOracle) {
  std::mt19937_64 rng(23);
  Image img(20, 15);
  for (auto& v : img.rgb) v = static_cast<std::uint8_t>(rng() & 0xff);
  std::uniform_real_distribution<double> u(-5, 25);
  std::uniform_int_distribution<std::size_t> sz(1, 12);
  for (int t = 0; t < 1000; ++t) {
    double x0 = u(rng), x1 = u(rng), y0 = u(rng), y1 = u(rng);
    if (x0 > x1) std::swap(x0, x1);
    if (y0 > y1) std::swap(y0, y1);
    if (x1 - x0 < 0.5 || y1 - y0 < 0.5) continue;
    const CropRect r{x0, y0, x1, y1, true};
    const std::size_t oh = sz(rng), ow = sz(rng);
    const Tensor p = crop_region(img, r, oh, ow);
    const Tensor ref = oracle::bilinear_crop(img, r, oh, ow);
    for (std::size_t i = 0; i < p.size(); ++i) ASSERT_NEAR(p[i], ref[i], 1e-6);
  }
}

TEST(GeometryCrop, SquareModeExpandsShorterSide) {
  Image img(40, 40);
  for (int y = 0; y < 40; ++y)
    for (int x = 0; x < 40; ++x)
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = static_cast<std::uint8_t>(x * 5);
  const CropRect tall{15, 5, 25, 35, true};
  const Tensor sq = crop_region(img, tall, 6, 6, CropMode::square);
  const Tensor ref = oracle::bilinear_crop(img, CropRect{5, 5, 35, 35, true}, 6, 6);
  for (std::size_t i = 0; i < sq.size(); ++i) EXPECT_NEAR(sq[i], ref[i], 1e-12);
}

TEST(GeometryCrop, TrimShrinksWidth) {
  std::mt19937_64 rng(2);
  Image img(32, 32);
  for (auto& v : img.rgb) v = static_cast<std::uint8_t>(rng() & 0xff);
  const CropRect r{4, 2, 28, 30, true};
  // 2 output px of 8 is a quarter of the source width per side
  const Tensor trimmed = crop_region(img, r, 8, 8, CropMode::warp, 2);
  const Tensor ref = oracle::bilinear_crop(img, CropRect{10, 2, 22, 30, true}, 8, 8);
  for (std::size_t i = 0; i < trimmed.size(); ++i) EXPECT_NEAR(trimmed[i], ref[i], 1e-12);
  EXPECT_THROW(crop_region(img, r, 8, 8, CropMode::warp, 4), EmptyAfterTrim);
  EXPECT_THROW(crop_region(img, r, 8, 8, CropMode::warp, 5), EmptyAfterTrim);
}

TEST(GeometryCrop, OutsideSamplesAreZero) {
  Image img(4, 4, 255);
  const Tensor p = crop_region(img, CropRect{-4, 0, 4, 4, true}, 4, 8);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 4; ++y) {
      for (int x = 0; x < 3; ++x) EXPECT_EQ(p[static_cast<std::size_t>((c * 4 + y) * 8 + x)], 0);
      for (int x = 4; x < 8; ++x) EXPECT_EQ(p[static_cast<std::size_t>((c * 4 + y) * 8 + x)], 1);
    }
}

TEST(GeometryCrop, IntegerShiftTranslatesSamples) {
  Image img(40, 30);
  for (int y = 0; y < 30; ++y)
    for (int x = 0; x < 40; ++x) {
      img.at(x, y, 0) = static_cast<std::uint8_t>(3 * x + 2 * y);
      img.at(x, y, 1) = static_cast<std::uint8_t>(5 * x);
      img.at(x, y, 2) = static_cast<std::uint8_t>(7 * y);
    }
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(2, 12);
  std::uniform_int_distribution<int> shift(-2, 2);
  for (int t = 0; t < 200; ++t) {
    const CropRect r{u(rng), u(rng), u(rng) + 14, u(rng) + 12, true};
    const int dx = shift(rng), dy = shift(rng);
    const Tensor a = crop_region(img, r, 5, 5);
    const Tensor b = crop_region(img, r.shifted(dx, dy), 5, 5);
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 5; ++x) {
          const std::size_t i = static_cast<std::size_t>((c * 5 + y) * 5 + x);
          // a linear image shifts its values by the gradient times the offset
          const double gx = c == 0 ? 3 : c == 1 ? 5 : 0, gy = c == 0 ? 2 : c == 2 ? 7 : 0;
          ASSERT_NEAR(b[i] - a[i], (gx * dx + gy * dy) / 255.0, 1e-9);
        }
  }
}

TEST(GeometryCrop, ZeroPadTotality) {
  std::mt19937_64 rng(31);
  const GroundGrid g{{0, 0}, 0.5, 12, 12};
  const std::vector<CameraCalibration> cams{look_at_camera(0, {-4, 3, 2.5}, {3, 3, 0}, 90, 64, 48),
                                            look_at_camera(1, {3, -5, 2.5}, {3, 3, 0}, 90, 64, 48)};
  Image img(64, 48, 128);
  for (int p = 0; p < g.size(); ++p)
    for (const CropRect& r : cell_rects(cams, g, p)) {
      const Tensor t = crop_region(img, r, 32, 32);
      ASSERT_EQ(t.shape(), (Shape{3, 32, 32}));
    }
}

TEST(GeometryImage, PngRoundTrip) {
  std::mt19937_64 rng(4);
  Image img(13, 7);
  for (auto& v : img.rgb) v = static_cast<std::uint8_t>(rng() & 0xff);
  const auto path = std::filesystem::temp_directory_path() / "mvdet_geometry_roundtrip.png";
  write_png(path.string(), img);
  EXPECT_EQ(read_png(path.string()), img);
  std::filesystem::remove(path);
  EXPECT_THROW(read_png(path.string()), ValidationError);
}
