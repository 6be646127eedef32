#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "mvdet/errors.hpp"
#include "mvdet/image.hpp"
#include "mvdet/tensor.hpp"

namespace mvdet {

struct Vec2 {
  double x = 0, y = 0;
  bool operator==(const Vec2&) const = default;
};

struct Vec3 {
  double x = 0, y = 0, z = 0;
  bool operator==(const Vec3&) const = default;
  friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
};

inline double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(Vec3 a, Vec3 b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline Vec3 normalized(Vec3 a) { return (1.0 / std::sqrt(dot(a, a))) * a; }

/// 3x4 projection matrix, row-major, plus image size.
struct CameraCalibration {
  int camera_id = 0;
  std::array<double, 12> P{};
  int width = 0;
  int height = 0;

  double p(int r, int c) const { return P[static_cast<std::size_t>(r * 4 + c)]; }

  /// Determinant of the left 3x3 block.
  double left_det() const {
    return p(0, 0) * (p(1, 1) * p(2, 2) - p(1, 2) * p(2, 1)) -
           p(0, 1) * (p(1, 0) * p(2, 2) - p(1, 2) * p(2, 0)) +
           p(0, 2) * (p(1, 0) * p(2, 1) - p(1, 1) * p(2, 0));
  }

  void validate() const {
    for (double v : P)
      if (!std::isfinite(v)) throw ValidationError("camera " + std::to_string(camera_id) + ": non-finite P entry");
    double scale = 0;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) scale = std::max(scale, std::abs(p(r, c)));
    if (scale == 0 || std::abs(left_det()) <= 1e-12 * scale * scale * scale)
      throw ValidationError("camera " + std::to_string(camera_id) + ": left 3x3 block of P is singular");
    if (width <= 0 || height <= 0)
      throw ValidationError("camera " + std::to_string(camera_id) + ": image size must be positive");
  }

  bool operator==(const CameraCalibration&) const = default;
};

/// P = K [R | -R c] for a camera at `pos` looking at `target`, with the
/// world z axis pointing up in the image. Principal point at the image center.
inline CameraCalibration look_at_camera(int camera_id, Vec3 pos, Vec3 target, double focal, int width,
                                        int height) {
  const Vec3 f = normalized(target - pos);
  const Vec3 right = normalized(cross(f, {0, 0, 1}));
  const Vec3 down = cross(f, right);
  const std::array<Vec3, 3> R{right, down, f};
  const double cx = 0.5 * width, cy = 0.5 * height;
  const std::array<std::array<double, 3>, 3> K{{{focal, 0, cx}, {0, focal, cy}, {0, 0, 1}}};
  CameraCalibration cam;
  cam.camera_id = camera_id;
  cam.width = width;
  cam.height = height;
  for (int r = 0; r < 3; ++r) {
    double rt[4] = {0, 0, 0, 0};
    for (int k = 0; k < 3; ++k) {
      const Vec3& row = R[static_cast<std::size_t>(k)];
      const double kk = K[static_cast<std::size_t>(r)][static_cast<std::size_t>(k)];
      rt[0] += kk * row.x;
      rt[1] += kk * row.y;
      rt[2] += kk * row.z;
      rt[3] -= kk * dot(row, pos);
    }
    for (int c = 0; c < 4; ++c) cam.P[static_cast<std::size_t>(r * 4 + c)] = rt[c];
  }
  return cam;
}

inline constexpr double kBehindCameraEps = 1e-9;

/// Pinhole projection of a world point (meters) to pixel coordinates.
inline Vec2 world_to_image(const CameraCalibration& cam, Vec3 X) {
  const double u = cam.p(0, 0) * X.x + cam.p(0, 1) * X.y + cam.p(0, 2) * X.z + cam.p(0, 3);
  const double v = cam.p(1, 0) * X.x + cam.p(1, 1) * X.y + cam.p(1, 2) * X.z + cam.p(1, 3);
  const double w = cam.p(2, 0) * X.x + cam.p(2, 1) * X.y + cam.p(2, 2) * X.z + cam.p(2, 3);
  if (!(w > kBehindCameraEps)) throw PointBehindCamera("depth " + std::to_string(w));
  return {u / w, v / w};
}

/// Inverse of the left 3x3 block of P.
inline std::array<double, 9> left_inverse(const CameraCalibration& cam) {
  const double det = cam.left_det();
  auto m = [&](int r, int c) { return cam.p(r, c); };
  return {(m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) / det, (m(0, 2) * m(2, 1) - m(0, 1) * m(2, 2)) / det,
          (m(0, 1) * m(1, 2) - m(0, 2) * m(1, 1)) / det, (m(1, 2) * m(2, 0) - m(1, 0) * m(2, 2)) / det,
          (m(0, 0) * m(2, 2) - m(0, 2) * m(2, 0)) / det, (m(0, 2) * m(1, 0) - m(0, 0) * m(1, 2)) / det,
          (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0)) / det, (m(0, 1) * m(2, 0) - m(0, 0) * m(2, 1)) / det,
          (m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0)) / det};
}

/// Back-projection of a pixel into a world ray; `dir` points into the scene.
struct Ray {
  Vec3 origin;
  Vec3 dir;
};

class RayCaster {
 public:
  explicit RayCaster(const CameraCalibration& cam) : inv_(left_inverse(cam)) {
    const Vec3 p4{cam.p(0, 3), cam.p(1, 3), cam.p(2, 3)};
    center_ = -1.0 * apply(p4);
  }
  Vec3 center() const { return center_; }
  Ray ray(double u, double v) const { return {center_, apply({u, v, 1.0})}; }

 private:
  Vec3 apply(Vec3 a) const {
    return {inv_[0] * a.x + inv_[1] * a.y + inv_[2] * a.z, inv_[3] * a.x + inv_[4] * a.y + inv_[5] * a.z,
            inv_[6] * a.x + inv_[7] * a.y + inv_[8] * a.z};
  }
  std::array<double, 9> inv_;
  Vec3 center_;
};

/// Regular discretization of the ground plane. Cell p sits at
/// (row, col) = (p / cols, p % cols).
struct GroundGrid {
  Vec2 origin;
  double cell_size = 1.0;
  int rows = 1;
  int cols = 1;

  int size() const { return rows * cols; }

  void validate() const {
    if (!(cell_size > 0) || !std::isfinite(cell_size)) throw ValidationError("grid cell_size must be positive");
    if (rows <= 0 || cols <= 0) throw ValidationError("grid rows and cols must be positive");
  }

  Vec3 cell_center(int p) const {
    if (p < 0 || p >= size())
      throw IndexOutOfRange("cell " + std::to_string(p) + " outside grid of " + std::to_string(size()));
    const int row = p / cols, col = p % cols;
    return {origin.x + (col + 0.5) * cell_size, origin.y + (row + 0.5) * cell_size, 0.0};
  }

  /// Cell containing ground point (x, y), if any.
  std::optional<int> locate(double x, double y) const {
    const double fc = std::floor((x - origin.x) / cell_size);
    const double fr = std::floor((y - origin.y) / cell_size);
    if (fc < 0 || fr < 0 || fc >= cols || fr >= rows) return std::nullopt;
    return static_cast<int>(fr) * cols + static_cast<int>(fc);
  }

  double cell_distance(int a, int b) const {
    const Vec3 pa = cell_center(a), pb = cell_center(b);
    return std::hypot(pa.x - pb.x, pa.y - pb.y);
  }

  /// Chebyshev distance in cells.
  int chebyshev(int a, int b) const {
    return std::max(std::abs(a / cols - b / cols), std::abs(a % cols - b % cols));
  }

  Vec3 center() const { return {origin.x + 0.5 * cols * cell_size, origin.y + 0.5 * rows * cell_size, 0.0}; }

  bool operator==(const GroundGrid&) const = default;
};

/// Upright cylinder standing on the ground plane: the person-sized volume
/// whose projection defines a cell's crop.
struct Cylinder {
  Vec3 base_center;
  double radius = 0.3;
  double height = 1.75;
};

inline constexpr double kDefaultCylinderRadius = 0.3;
inline constexpr double kDefaultCylinderHeight = 1.75;

inline Cylinder cylinder_at(Vec3 base, double radius = kDefaultCylinderRadius,
                            double height = kDefaultCylinderHeight) {
  return {base, radius, height};
}

struct CropRect {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  bool visible = false;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double area() const { return std::max(0.0, width()) * std::max(0.0, height()); }
  CropRect shifted(double dx, double dy) const { return {x0 + dx, y0 + dy, x1 + dx, y1 + dy, visible}; }
  bool operator==(const CropRect&) const = default;
};

/// Intersection over union of two rectangles; 0 when either is invisible.
inline double rect_iou(const CropRect& a, const CropRect& b) {
  if (!a.visible || !b.visible) return 0.0;
  const double iw = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
  const double ih = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
  if (iw <= 0 || ih <= 0) return 0.0;
  const double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

struct ProjectionOptions {
  int samples_per_circle = 8;
  double min_area_px = 4.0;
};

/// Sample points on the base and top circles of a cylinder.
inline std::vector<Vec3> cylinder_samples(const Cylinder& cyl, int per_circle = 8) {
  std::vector<Vec3> pts;
  pts.reserve(static_cast<std::size_t>(2 * per_circle));
  for (double z : {0.0, cyl.height})
    for (int k = 0; k < per_circle; ++k) {
      const double a = 2.0 * std::numbers::pi * k / per_circle;
      pts.push_back({cyl.base_center.x + cyl.radius * std::cos(a), cyl.base_center.y + cyl.radius * std::sin(a),
                     cyl.base_center.z + z});
    }
  return pts;
}

/// Axis-aligned box around the projected cylinder samples, clipped to the
/// image. Invisible when a sample is behind the camera or the clipped box is
/// smaller than `min_area_px`; the unclipped coordinates are kept in that
/// case where available.
inline CropRect project_cylinder(const CameraCalibration& cam, const Cylinder& cyl,
                                 const ProjectionOptions& opt = {}) {
  CropRect r{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
             -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(), false};
  for (const Vec3& X : cylinder_samples(cyl, opt.samples_per_circle)) {
    Vec2 uv;
    try {
      uv = world_to_image(cam, X);
    } catch (const PointBehindCamera&) {
      return CropRect{};
    }
    r.x0 = std::min(r.x0, uv.x);
    r.y0 = std::min(r.y0, uv.y);
    r.x1 = std::max(r.x1, uv.x);
    r.y1 = std::max(r.y1, uv.y);
  }
  r.x0 = std::max(r.x0, 0.0);
  r.y0 = std::max(r.y0, 0.0);
  r.x1 = std::min(r.x1, static_cast<double>(cam.width));
  r.y1 = std::min(r.y1, static_cast<double>(cam.height));
  r.visible = r.x1 > r.x0 && r.y1 > r.y0 && r.area() >= opt.min_area_px;
  return r;
}

enum class CropMode { warp, square };

inline std::string to_string(CropMode m) { return m == CropMode::warp ? "warp" : "square"; }
inline CropMode crop_mode_from_string(const std::string& s) {
  if (s == "warp") return CropMode::warp;
  if (s == "square") return CropMode::square;
  throw ValidationError("crop mode must be 'warp' or 'square', got '" + s + "'");
}

/// Bilinear sample of channel `c` at continuous pixel-index position (fx, fy);
/// pixel (i, j) has its center at index position (j, i). Out-of-image
/// neighbours contribute zero.
inline double bilinear_sample(const Image& img, int c, double fx, double fy) {
  const double x0f = std::floor(fx), y0f = std::floor(fy);
  const double wx = fx - x0f, wy = fy - y0f;
  const int x0 = static_cast<int>(x0f), y0 = static_cast<int>(y0f);
  auto px = [&](int x, int y) -> double {
    if (x < 0 || y < 0 || x >= img.width || y >= img.height) return 0.0;
    return img.at(x, y, c);
  };
  return (1 - wy) * ((1 - wx) * px(x0, y0) + wx * px(x0 + 1, y0)) +
         wy * ((1 - wx) * px(x0, y0 + 1) + wx * px(x0 + 1, y0 + 1));
}

/// Resamples `rect` to a 3 x out_h x out_w patch with values in [0, 1].
/// square mode grows the shorter side about the center first. trim_px is
/// measured in output-patch pixels and removed from both sides horizontally
/// (scaled to source pixels). Invisible rects give an all-zero patch.
inline Tensor crop_region(const Image& img, const CropRect& rect, std::size_t out_h, std::size_t out_w,
                          CropMode mode = CropMode::warp, std::size_t trim_px = 0) {
  if (out_h == 0 || out_w == 0) throw ValidationError("crop output size must be positive");
  if (2 * trim_px >= out_w)
    throw EmptyAfterTrim("trimming " + std::to_string(trim_px) + " px per side from width " + std::to_string(out_w));
  Tensor patch({3, out_h, out_w});
  if (!rect.visible) return patch;

  CropRect r = rect;
  if (mode == CropMode::square) {
    const double w = r.width(), h = r.height();
    if (w < h) {
      const double cx = 0.5 * (r.x0 + r.x1);
      r.x0 = cx - 0.5 * h;
      r.x1 = cx + 0.5 * h;
    } else {
      const double cy = 0.5 * (r.y0 + r.y1);
      r.y0 = cy - 0.5 * w;
      r.y1 = cy + 0.5 * w;
    }
  }
  if (trim_px > 0) {
    const double t = static_cast<double>(trim_px) * r.width() / static_cast<double>(out_w);
    r.x0 += t;
    r.x1 -= t;
  }
  const double sx = r.width() / static_cast<double>(out_w), sy = r.height() / static_cast<double>(out_h);
  for (std::size_t i = 0; i < out_h; ++i) {
    const double fy = r.y0 + (static_cast<double>(i) + 0.5) * sy - 0.5;
    for (std::size_t j = 0; j < out_w; ++j) {
      const double fx = r.x0 + (static_cast<double>(j) + 0.5) * sx - 0.5;
      for (int c = 0; c < 3; ++c)
        patch[(static_cast<std::size_t>(c) * out_h + i) * out_w + j] = bilinear_sample(img, c, fx, fy) / 255.0;
    }
  }
  return patch;
}

/// Per-view crop rectangles of cell `p`, one entry per camera.
inline std::vector<CropRect> cell_rects(const std::vector<CameraCalibration>& cams, const GroundGrid& grid, int p,
                                        double radius = kDefaultCylinderRadius,
                                        double height = kDefaultCylinderHeight,
                                        const ProjectionOptions& opt = {}) {
  std::vector<CropRect> out;
  out.reserve(cams.size());
  const Cylinder cyl = cylinder_at(grid.cell_center(p), radius, height);
  for (const auto& cam : cams) out.push_back(project_cylinder(cam, cyl, opt));
  return out;
}

}  // namespace mvdet
