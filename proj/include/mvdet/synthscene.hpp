#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <set>
#include <vector>

#include <json.hpp>

#include "mvdet/dataset.hpp"
#include "mvdet/geometry.hpp"
#include "mvdet/image.hpp"
#include "mvdet/rng.hpp"

namespace mvdet {

using RGB = std::array<std::uint8_t, 3>;

struct PersonTrack {
  int person_id = 0;
  std::vector<int> trajectory;  // ground cell per frame, -1 when absent
  RGB color{200, 40, 40};
  double radius = kDefaultCylinderRadius;
  double height = kDefaultCylinderHeight;
};

struct Background {
  std::uint64_t texture_seed = 1;
  double noise_sigma = 4.0;
};

/// Cameras evenly spread on a circle around the grid center, looking at it.
struct CameraRig {
  int n = 3;
  double height_m = 5.0;
  double radius_m = 7.0;
  int image_width = 160;
  int image_height = 160;
};

struct ScenarioSpec {
  GroundGrid grid{{0, 0}, 0.5, 12, 12};
  CameraRig rig;
  std::vector<CameraCalibration> cameras;
  std::vector<PersonTrack> persons;
  std::vector<Cylinder> occluders;  // static, drawn in a flat gray
  int n_frames = 0;
  int n_train_frames = 0;
  Background background;
  std::uint64_t seed = 0;

  void validate() const {
    grid.validate();
    if (n_frames < 0 || n_train_frames < 0 || n_train_frames > n_frames)
      throw ValidationError("scenario frame counts are inconsistent");
    if (cameras.empty()) throw ValidationError("scenario has no cameras");
    for (const auto& c : cameras) c.validate();
    for (const auto& p : persons) {
      if (!(p.radius > 0 && p.height > 0)) throw ValidationError("person cylinder must be positive-sized");
      if (static_cast<int>(p.trajectory.size()) != n_frames)
        throw ValidationError("person " + std::to_string(p.person_id) + " trajectory length differs from n_frames");
      for (int cell : p.trajectory)
        if (cell < -1 || cell >= grid.size())
          throw ValidationError("person " + std::to_string(p.person_id) + " leaves the grid");
    }
    for (const auto& o : occluders)
      if (!(o.radius > 0 && o.height > 0)) throw ValidationError("occluder cylinder must be positive-sized");
  }

  std::vector<int> train_frames() const {
    std::vector<int> f(static_cast<std::size_t>(n_train_frames));
    for (int t = 0; t < n_train_frames; ++t) f[static_cast<std::size_t>(t)] = t;
    return f;
  }
  std::vector<int> test_frames() const {
    std::vector<int> f;
    for (int t = n_train_frames; t < n_frames; ++t) f.push_back(t);
    return f;
  }
};

/// Places n cameras at yaw 360 i / n. The focal length makes the projected
/// grid span about 85% of the image width while keeping every cell center
/// inside the image.
inline std::vector<CameraCalibration> make_cameras(int n, const GroundGrid& grid, double height_m, double radius_m,
                                                   int width = 160, int height = 160) {
  if (n < 1) throw ValidationError("need at least one camera");
  std::vector<CameraCalibration> cams;
  const Vec3 target = grid.center();
  const double cx = 0.5 * width, cy = 0.5 * height;
  for (int i = 0; i < n; ++i) {
    const double yaw = 2.0 * std::numbers::pi * i / n;
    const Vec3 pos{target.x + radius_m * std::cos(yaw), target.y + radius_m * std::sin(yaw), height_m};
    const auto unit = look_at_camera(i, pos, target, 1.0, width, height);
    const double gx1 = grid.origin.x + grid.cols * grid.cell_size, gy1 = grid.origin.y + grid.rows * grid.cell_size;
    double lo = 1e300, hi = -1e300;
    for (Vec3 corner : {Vec3{grid.origin.x, grid.origin.y, 0}, Vec3{gx1, grid.origin.y, 0},
                        Vec3{grid.origin.x, gy1, 0}, Vec3{gx1, gy1, 0}}) {
      const double u = world_to_image(unit, corner).x - cx;
      lo = std::min(lo, u);
      hi = std::max(hi, u);
    }
    double f = 0.85 * width / (hi - lo);
    for (int p = 0; p < grid.size(); ++p) {
      const Vec2 uv = world_to_image(unit, grid.cell_center(p));
      if (std::abs(uv.x - cx) > 0) f = std::min(f, (cx - 1) / std::abs(uv.x - cx));
      if (std::abs(uv.y - cy) > 0) f = std::min(f, (cy - 1) / std::abs(uv.y - cy));
    }
    cams.push_back(look_at_camera(i, pos, target, f, width, height));
  }
  return cams;
}

inline std::vector<CameraCalibration> make_cameras(const CameraRig& rig, const GroundGrid& grid) {
  return make_cameras(rig.n, grid, rig.height_m, rig.radius_m, rig.image_width, rig.image_height);
}

/// Knobs of the generated default scenario.
struct ScenarioOptions {
  int rows = 12, cols = 12;
  double cell_size = 0.5;
  CameraRig rig;
  int n_frames = 300;
  int n_train_frames = 250;
  int min_persons = 2, max_persons = 4;
  int segment_frames = 25;
  /// Chebyshev cell distance every two persons keep; 1 only forbids sharing
  /// a cell, 2 keeps 0.3 m bodies on 0.5 m cells from touching.
  int min_separation = 2;
  /// Chance that a present person leaves at a segment boundary.
  double turnover = 0.5;
  double noise_sigma = 4.0;
  /// Static pillars at random cells at least 3 cells apart; persons keep
  /// out of the 3x3 block around each.
  int n_pillars = 0;
  double pillar_radius = 0.3;
  double pillar_height = 6.0;
};

inline RGB hsv_color(double h, double s, double v) {
  const double c = v * s, hp = h * 6.0, x = c * (1 - std::abs(std::fmod(hp, 2.0) - 1)), m = v - c;
  double r = 0, g = 0, b = 0;
  if (hp < 1) r = c, g = x;
  else if (hp < 2) r = x, g = c;
  else if (hp < 3) g = c, b = x;
  else if (hp < 4) g = x, b = c;
  else if (hp < 5) r = x, b = c;
  else r = c, b = x;
  auto q = [&](double t) { return static_cast<std::uint8_t>(std::lround(255 * (t + m))); };
  return {q(r), q(g), q(b)};
}

/// Random-waypoint walks, one cell per frame, with persons kept
/// `min_separation` cells apart. Every `segment_frames` frames some persons
/// leave and the head count is redrawn; newcomers get fresh ids and hues
/// stepped by the golden ratio.
inline ScenarioSpec default_scenario(std::uint64_t seed, const ScenarioOptions& opt = {}) {
  ScenarioSpec s;
  s.grid = GroundGrid{{0, 0}, opt.cell_size, opt.rows, opt.cols};
  s.rig = opt.rig;
  s.cameras = make_cameras(opt.rig, s.grid);
  s.n_frames = opt.n_frames;
  s.n_train_frames = opt.n_train_frames;
  s.background = {derive_seed(seed, {1}), opt.noise_sigma};
  s.seed = seed;
  if (opt.max_persons > s.grid.size() || opt.min_persons < 0 || opt.min_persons > opt.max_persons)
    throw ValidationError("person count range does not fit the grid");
  if (opt.min_separation < 1) throw ValidationError("min_separation must be at least 1");

  std::vector<int> pillar_cells;
  if (opt.n_pillars > 0) {
    std::mt19937_64 prng(derive_seed(seed, {5}));
    std::vector<int> cand;
    for (int c = 0; c < s.grid.size(); ++c) cand.push_back(c);
    std::shuffle(cand.begin(), cand.end(), prng);
    for (int c : cand) {
      if (static_cast<int>(pillar_cells.size()) == opt.n_pillars) break;
      if (std::all_of(pillar_cells.begin(), pillar_cells.end(), [&](int q) { return s.grid.chebyshev(c, q) >= 3; }))
        pillar_cells.push_back(c);
    }
    if (static_cast<int>(pillar_cells.size()) < opt.n_pillars) throw ValidationError("pillars do not fit the grid");
    for (int c : pillar_cells) s.occluders.push_back(cylinder_at(s.grid.cell_center(c), opt.pillar_radius, opt.pillar_height));
  }

  std::mt19937_64 rng(derive_seed(seed, {2}));
  std::uniform_real_distribution<double> u01(0, 1);
  double hue = u01(rng);
  struct Walker {
    std::size_t track;
    int cell, target;
  };
  std::vector<Walker> active;
  auto crowded = [&](int cell, const Walker* self) {
    for (int q : pillar_cells)
      if (s.grid.chebyshev(cell, q) <= 1) return true;
    for (const auto& w : active)
      if (&w != self && s.grid.chebyshev(cell, w.cell) < opt.min_separation) return true;
    return false;
  };
  auto random_cell = [&] { return std::uniform_int_distribution<int>(0, s.grid.size() - 1)(rng); };

  for (int t = 0; t < s.n_frames; ++t) {
    if (t % std::max(1, opt.segment_frames) == 0) {
      std::bernoulli_distribution leave(t == 0 ? 0.0 : opt.turnover);
      std::vector<Walker> stay;
      for (const auto& w : active)
        if (!leave(rng)) stay.push_back(w);
      active = std::move(stay);
      const int want = std::uniform_int_distribution<int>(opt.min_persons, opt.max_persons)(rng);
      while (static_cast<int>(active.size()) > want)
        active.erase(active.begin() + static_cast<std::ptrdiff_t>(
                                          std::uniform_int_distribution<std::size_t>(0, active.size() - 1)(rng)));
      std::vector<int> free;
      while (static_cast<int>(active.size()) < want) {
        free.clear();
        for (int c = 0; c < s.grid.size(); ++c)
          if (!crowded(c, nullptr)) free.push_back(c);
        if (free.empty()) break;
        PersonTrack p;
        p.person_id = static_cast<int>(s.persons.size());
        p.trajectory.assign(static_cast<std::size_t>(s.n_frames), -1);
        hue = std::fmod(hue + 0.6180339887498949, 1.0);
        p.color = hsv_color(hue, 0.6 + 0.4 * u01(rng), 0.6 + 0.4 * u01(rng));
        s.persons.push_back(p);
        const int c = free[std::uniform_int_distribution<std::size_t>(0, free.size() - 1)(rng)];
        active.push_back({s.persons.size() - 1, c, random_cell()});
      }
    } else {
      std::vector<std::size_t> order(active.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t i : order) {
        Walker& w = active[i];
        if (w.cell == w.target) w.target = random_cell();
        const int r = w.cell / s.grid.cols, c = w.cell % s.grid.cols;
        const int tr = w.target / s.grid.cols, tc = w.target % s.grid.cols;
        const int nr = r + (tr > r) - (tr < r), nc = c + (tc > c) - (tc < c);
        bool moved = false;
        // prefer the diagonal step, then the two axis steps
        for (auto [rr, cc] : {std::pair{nr, nc}, std::pair{nr, c}, std::pair{r, nc}}) {
          const int next = rr * s.grid.cols + cc;
          if (next == w.cell || crowded(next, &w)) continue;
          w.cell = next;
          moved = true;
          break;
        }
        if (!moved && w.cell != w.target) w.target = random_cell();
      }
    }
    for (const Walker& w : active) s.persons[w.track].trajectory[static_cast<std::size_t>(t)] = w.cell;
  }
  s.validate();
  return s;
}

/// Ground truth of frame t, ordered by person.
inline std::vector<Annotation> frame_truth(const ScenarioSpec& s, int t) {
  std::vector<Annotation> out;
  for (const auto& p : s.persons) {
    const int c = p.trajectory.at(static_cast<std::size_t>(t));
    if (c >= 0) out.push_back({t, c, p.person_id});
  }
  return out;
}

inline std::vector<Annotation> scenario_annotations(const ScenarioSpec& s) {
  std::vector<Annotation> out;
  for (int t = 0; t < s.n_frames; ++t)
    for (const auto& a : frame_truth(s, t)) out.push_back(a);
  return out;
}

struct RenderedFrame {
  std::vector<Image> images;
  std::vector<std::vector<int>> id_maps;  // per camera, person index or -1, row-major
  std::vector<Annotation> truth;
};

/// Ray-cast renderer. Static backgrounds are computed once per camera.
class SceneRenderer {
 public:
  explicit SceneRenderer(const ScenarioSpec& spec) : spec_(spec) {
    for (const auto& cam : spec_.cameras) {
      casters_.emplace_back(cam);
      backgrounds_.push_back(render_background(cam, casters_.back()));
    }
  }

  RenderedFrame render(int t) const {
    if (t < 0 || t >= spec_.n_frames) throw IndexOutOfRange("frame " + std::to_string(t));
    RenderedFrame out;
    out.truth = frame_truth(spec_, t);
    for (std::size_t c = 0; c < spec_.cameras.size(); ++c) {
      const auto& cam = spec_.cameras[c];
      std::vector<float> buf = backgrounds_[c];
      std::vector<int> ids(static_cast<std::size_t>(cam.width * cam.height), -1);
      draw_persons(c, t, buf, ids);
      std::mt19937_64 rng(derive_seed(spec_.seed, {3, static_cast<std::uint64_t>(t), c}));
      std::normal_distribution<double> noise(0.0, spec_.background.noise_sigma);
      Image img(cam.width, cam.height);
      for (std::size_t i = 0; i < buf.size(); ++i) {
        const double v = buf[i] + (spec_.background.noise_sigma > 0 ? noise(rng) : 0.0);
        img.rgb[i] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
      out.images.push_back(std::move(img));
      out.id_maps.push_back(std::move(ids));
    }
    return out;
  }

  const ScenarioSpec& spec() const { return spec_; }

 private:
  static double lattice(std::uint64_t seed, long i, long j) {
    const std::uint64_t h = derive_seed(seed, {static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(j)});
    return static_cast<double>(h >> 11) * 0x1.0p-53;
  }

  /// Smooth value noise on a 0.25 m lattice.
  double ground_texture(double x, double y) const {
    const double s = 4.0;
    const double fx = x * s, fy = y * s;
    const long i = static_cast<long>(std::floor(fx)), j = static_cast<long>(std::floor(fy));
    const double ax = fx - i, ay = fy - j;
    const std::uint64_t seed = spec_.background.texture_seed;
    return (1 - ay) * ((1 - ax) * lattice(seed, i, j) + ax * lattice(seed, i + 1, j)) +
           ay * ((1 - ax) * lattice(seed, i, j + 1) + ax * lattice(seed, i + 1, j + 1));
  }

  std::vector<float> render_background(const CameraCalibration& cam, const RayCaster& rc) const {
    std::vector<float> buf(static_cast<std::size_t>(cam.width * cam.height * 3));
    const Vec3 gc = spec_.grid.center();
    for (int y = 0; y < cam.height; ++y)
      for (int x = 0; x < cam.width; ++x) {
        const Ray r = rc.ray(x + 0.5, y + 0.5);
        std::array<double, 3> col;
        const double t = r.dir.z < 0 ? -r.origin.z / r.dir.z : -1;
        const Vec3 hit = r.origin + t * r.dir;
        if (t > 0 && std::hypot(hit.x - gc.x, hit.y - gc.y) < 14.0) {
          const double n = ground_texture(hit.x, hit.y) - 0.5;
          col = {118 + 50 * n, 124 + 50 * n, 108 + 44 * n};
        } else {
          const double e = std::clamp(0.5 + 0.5 * r.dir.z / std::sqrt(dot(r.dir, r.dir)), 0.0, 1.0);
          col = {150 + 60 * e, 160 + 60 * e, 175 + 60 * e};
        }
        for (int k = 0; k < 3; ++k)
          buf[static_cast<std::size_t>((y * cam.width + x) * 3 + k)] = static_cast<float>(col[static_cast<std::size_t>(k)]);
      }
    return buf;
  }

  void draw_persons(std::size_t c, int t, std::vector<float>& buf, std::vector<int>& ids) const {
    const auto& cam = spec_.cameras[c];
    const RayCaster& rc = casters_[c];
    const Vec3 eye = rc.center();
    struct Item {
      double dist;
      std::size_t idx;  // persons first, then occluders
      Cylinder cyl;
    };
    std::vector<Item> items;
    const std::size_t n_persons = spec_.persons.size();
    for (std::size_t k = 0; k < spec_.occluders.size(); ++k) {
      const Cylinder& cyl = spec_.occluders[k];
      items.push_back({std::hypot(cyl.base_center.x - eye.x, cyl.base_center.y - eye.y), n_persons + k, cyl});
    }
    for (std::size_t k = 0; k < spec_.persons.size(); ++k) {
      const auto& p = spec_.persons[k];
      const int cell = p.trajectory[static_cast<std::size_t>(t)];
      if (cell < 0) continue;
      const Cylinder cyl = cylinder_at(spec_.grid.cell_center(cell), p.radius, p.height);
      items.push_back({std::hypot(cyl.base_center.x - eye.x, cyl.base_center.y - eye.y), k, cyl});
    }
    std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
      return a.dist != b.dist ? a.dist > b.dist : a.idx < b.idx;
    });
    const Vec3 light = normalized({0.4, 0.3, 0.85});
    const RGB skin{224, 172, 140};
    for (const Item& it : items) {
      const CropRect box = project_cylinder(cam, it.cyl, {16, 0.0});
      if (!(box.x1 > box.x0 && box.y1 > box.y0)) continue;
      const int x0 = std::max(0, static_cast<int>(std::floor(box.x0)) - 2);
      const int y0 = std::max(0, static_cast<int>(std::floor(box.y0)) - 2);
      const int x1 = std::min(cam.width, static_cast<int>(std::ceil(box.x1)) + 2);
      const int y1 = std::min(cam.height, static_cast<int>(std::ceil(box.y1)) + 2);
      const bool occluder = it.idx >= n_persons;
      const RGB color = occluder ? RGB{96, 96, 100} : spec_.persons[it.idx].color;
      for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) {
          const Ray r = rc.ray(x + 0.5, y + 0.5);
          double z = 0;
          Vec3 normal;
          if (!intersect(r, it.cyl, z, normal)) continue;
          const double frac = z / it.cyl.height;
          const double shade = 0.88 + 0.12 * std::max(0.0, dot(normal, light));
          std::array<double, 3> col;
          for (std::size_t k = 0; k < 3; ++k) {
            if (occluder || (frac >= 0.2 && frac < 0.88)) col[k] = color[k] * shade;
            else if (frac < 0.2) col[k] = 0.5 * color[k] * shade;
            else col[k] = skin[k] * shade;
          }
          const std::size_t pix = static_cast<std::size_t>(y * cam.width + x);
          for (std::size_t k = 0; k < 3; ++k) buf[pix * 3 + k] = static_cast<float>(col[k]);
          ids[pix] = occluder ? -1 : static_cast<int>(it.idx);
        }
    }
  }

  /// Nearest hit of a ray with the side or top cap of a cylinder.
  static bool intersect(const Ray& r, const Cylinder& cyl, double& z, Vec3& normal) {
    const double ox = r.origin.x - cyl.base_center.x, oy = r.origin.y - cyl.base_center.y;
    const double a = r.dir.x * r.dir.x + r.dir.y * r.dir.y;
    const double b = 2 * (ox * r.dir.x + oy * r.dir.y);
    const double cc = ox * ox + oy * oy - cyl.radius * cyl.radius;
    double best = std::numeric_limits<double>::infinity();
    if (a > 0) {
      const double disc = b * b - 4 * a * cc;
      if (disc >= 0) {
        const double t = (-b - std::sqrt(disc)) / (2 * a);
        const double hz = r.origin.z + t * r.dir.z;
        if (t > 0 && hz >= 0 && hz <= cyl.height) {
          best = t;
          z = hz;
          normal = {(ox + t * r.dir.x) / cyl.radius, (oy + t * r.dir.y) / cyl.radius, 0};
        }
      }
    }
    if (r.dir.z != 0) {
      const double t = (cyl.height - r.origin.z) / r.dir.z;
      const double hx = ox + t * r.dir.x, hy = oy + t * r.dir.y;
      if (t > 0 && t < best && hx * hx + hy * hy <= cyl.radius * cyl.radius) {
        best = t;
        z = cyl.height;
        normal = {0, 0, 1};
      }
    }
    return std::isfinite(best);
  }

  ScenarioSpec spec_;
  std::vector<RayCaster> casters_;
  std::vector<std::vector<float>> backgrounds_;
};

inline RenderedFrame render_frame(const ScenarioSpec& spec, int t) { return SceneRenderer(spec).render(t); }

/// Renders the requested frames into memory.
inline MemoryFrameSource render_frames(const ScenarioSpec& spec, const std::vector<int>& frames) {
  SceneRenderer r(spec);
  MemoryFrameSource src;
  for (int t : frames) src.put(t, r.render(t).images);
  return src;
}

/// Samples of the given frames (all frames when empty) with the scenario's
/// exact ground truth.
inline Dataset generate_dataset(const ScenarioSpec& spec, std::size_t negatives_per_frame,
                                std::vector<int> frames = {}, const CropConfig& crop = {}) {
  if (frames.empty())
    for (int t = 0; t < spec.n_frames; ++t) frames.push_back(t);
  return build_dataset(scenario_annotations(spec), frames, spec.grid, spec.cameras, crop, negatives_per_frame,
                       derive_seed(spec.seed, {4}));
}

/// Share of visible (frame, camera, person) projections whose box contains
/// pixels of another person.
inline double occlusion_rate(const ScenarioSpec& spec, const std::vector<int>& frames) {
  SceneRenderer r(spec);
  std::size_t occluded = 0, total = 0;
  for (int t : frames) {
    const auto f = r.render(t);
    for (std::size_t c = 0; c < spec.cameras.size(); ++c)
      for (std::size_t k = 0; k < spec.persons.size(); ++k) {
        const int cell = spec.persons[k].trajectory[static_cast<std::size_t>(t)];
        if (cell < 0) continue;
        const CropRect box = project_cylinder(spec.cameras[c],
                                              cylinder_at(spec.grid.cell_center(cell), spec.persons[k].radius,
                                                          spec.persons[k].height));
        if (!box.visible) continue;
        ++total;
        bool hidden = false;
        const int w = spec.cameras[c].width;
        for (int y = static_cast<int>(box.y0); y < static_cast<int>(std::ceil(box.y1)) && !hidden; ++y)
          for (int x = static_cast<int>(box.x0); x < static_cast<int>(std::ceil(box.x1)) && !hidden; ++x) {
            const int id = f.id_maps[c][static_cast<std::size_t>(y * w + x)];
            hidden = id >= 0 && id != static_cast<int>(k);
          }
        occluded += hidden;
      }
  }
  return total ? static_cast<double>(occluded) / static_cast<double>(total) : 0.0;
}

// JSON form of a scenario.

inline nlohmann::json calibration_to_json(const CameraCalibration& c) {
  nlohmann::json rows = nlohmann::json::array();
  for (int r = 0; r < 3; ++r) rows.push_back({c.p(r, 0), c.p(r, 1), c.p(r, 2), c.p(r, 3)});
  return {{"camera_id", c.camera_id}, {"P", rows}, {"width", c.width}, {"height", c.height}};
}

inline CameraCalibration calibration_from_json(const nlohmann::json& j) {
  CameraCalibration c;
  try {
    c.camera_id = j.at("camera_id").get<int>();
    const auto& p = j.at("P");
    std::vector<double> flat;
    if (p.size() == 3 && p[0].is_array())
      for (const auto& row : p) {
        if (row.size() != 4) throw ValidationError("P rows must have 4 entries");
        for (const auto& v : row) flat.push_back(v.get<double>());
      }
    else
      flat = p.get<std::vector<double>>();
    if (flat.size() != 12) throw ValidationError("P must have 12 entries");
    std::copy(flat.begin(), flat.end(), c.P.begin());
    // "image_width"/"image_height" are accepted as aliases
    c.width = (j.contains("width") ? j.at("width") : j.at("image_width")).get<int>();
    c.height = (j.contains("height") ? j.at("height") : j.at("image_height")).get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("calibration: ") + e.what());
  }
  c.validate();
  return c;
}

inline nlohmann::json grid_to_json(const GroundGrid& g) {
  return {{"origin", {g.origin.x, g.origin.y}}, {"cell_size", g.cell_size}, {"rows", g.rows}, {"cols", g.cols}};
}

inline GroundGrid grid_from_json(const nlohmann::json& j) {
  GroundGrid g;
  try {
    g.origin = {j.at("origin").at(0).get<double>(), j.at("origin").at(1).get<double>()};
    g.cell_size = j.at("cell_size").get<double>();
    g.rows = j.at("rows").get<int>();
    g.cols = j.at("cols").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("grid: ") + e.what());
  }
  g.validate();
  return g;
}

inline nlohmann::json scenario_to_json(const ScenarioSpec& s) {
  nlohmann::json j;
  j["grid"] = grid_to_json(s.grid);
  j["rig"] = {{"n", s.rig.n}, {"height_m", s.rig.height_m}, {"radius_m", s.rig.radius_m},
              {"image_width", s.rig.image_width}, {"image_height", s.rig.image_height}};
  j["cameras"] = nlohmann::json::array();
  for (const auto& c : s.cameras) j["cameras"].push_back(calibration_to_json(c));
  j["persons"] = nlohmann::json::array();
  for (const auto& p : s.persons)
    j["persons"].push_back({{"person_id", p.person_id}, {"trajectory", p.trajectory}, {"color", p.color},
                            {"radius", p.radius}, {"height", p.height}});
  if (!s.occluders.empty()) {
    j["occluders"] = nlohmann::json::array();
    for (const auto& o : s.occluders)
      j["occluders"].push_back({{"x", o.base_center.x}, {"y", o.base_center.y}, {"radius", o.radius}, {"height", o.height}});
  }
  j["n_frames"] = s.n_frames;
  j["n_train_frames"] = s.n_train_frames;
  j["background"] = {{"texture_seed", s.background.texture_seed}, {"noise_sigma", s.background.noise_sigma}};
  j["seed"] = s.seed;
  return j;
}

/// Missing "cameras" are generated from "rig"; missing "persons" means an
/// empty scene.
inline ScenarioSpec scenario_from_json(const nlohmann::json& j) {
  ScenarioSpec s;
  try {
    s.grid = grid_from_json(j.at("grid"));
    if (j.contains("rig")) {
      const auto& r = j["rig"];
      const CameraRig d;
      s.rig = {r.value("n", d.n), r.value("height_m", d.height_m), r.value("radius_m", d.radius_m),
               r.value("image_width", d.image_width), r.value("image_height", d.image_height)};
    }
    if (j.contains("cameras") && !j["cameras"].empty())
      for (const auto& c : j["cameras"]) s.cameras.push_back(calibration_from_json(c));
    else
      s.cameras = make_cameras(s.rig, s.grid);
    s.n_frames = j.at("n_frames").get<int>();
    s.n_train_frames = j.value("n_train_frames", s.n_frames);
    if (j.contains("persons"))
      for (const auto& p : j["persons"])
        s.persons.push_back({p.at("person_id").get<int>(), p.at("trajectory").get<std::vector<int>>(),
                             p.value("color", RGB{200, 40, 40}), p.value("radius", kDefaultCylinderRadius),
                             p.value("height", kDefaultCylinderHeight)});
    if (j.contains("occluders"))
      for (const auto& o : j["occluders"])
        s.occluders.push_back({{o.at("x").get<double>(), o.at("y").get<double>(), 0.0}, o.at("radius").get<double>(),
                               o.at("height").get<double>()});
    if (j.contains("background"))
      s.background = {j["background"].value("texture_seed", std::uint64_t{1}),
                      j["background"].value("noise_sigma", 4.0)};
    s.seed = j.value("seed", std::uint64_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("scenario: ") + e.what());
  }
  s.validate();
  return s;
}

}  // namespace mvdet
