#pragma once

#include <algorithm>
#include <cstdio>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "mvdet/geometry.hpp"
#include "mvdet/image.hpp"
#include "mvdet/rng.hpp"
#include "mvdet/tensor.hpp"

namespace mvdet {

/// One annotated person occupying a ground cell at a frame.
struct Annotation {
  int frame = 0;
  int cell = 0;
  int person = 0;
  bool operator==(const Annotation&) const = default;
};

enum class Provenance { annotated, easy_negative, hard_shift, hard_mix };

inline std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::annotated: return "annotated";
    case Provenance::easy_negative: return "easy_negative";
    case Provenance::hard_shift: return "hard_shift";
    case Provenance::hard_mix: return "hard_mix";
  }
  return "?";
}

/// How per-view rectangles become network inputs.
struct CropConfig {
  std::size_t out_h = 32;
  std::size_t out_w = 32;
  CropMode mode = CropMode::warp;
  std::size_t trim_px = 0;
  double radius = kDefaultCylinderRadius;
  double height = kDefaultCylinderHeight;
};

/// A multi-view sample described by its per-view rectangles in one frame;
/// the patches are cropped on demand.
struct SampleRef {
  int frame = 0;
  int cell = 0;
  int label = 0;
  Provenance provenance = Provenance::annotated;
  std::vector<CropRect> rects;  // one per camera, ascending camera_id
};

/// A single-view training patch.
struct MonoRef {
  int frame = 0;
  int camera = 0;
  CropRect rect;
  int label = 0;
};

struct MultiViewSample {
  std::vector<Tensor> patches;  // C patches of 3 x out_h x out_w
  int label = 0;
  int cell = 0;
  int frame_id = 0;
  Provenance provenance = Provenance::annotated;
};

/// Access to the C camera images of a frame.
class FrameSource {
 public:
  virtual ~FrameSource() = default;
  virtual const std::vector<Image>& frame(int t) const = 0;
};

/// Reads cam{c}/frame{t:05}.png below a dataset directory, caching frames.
class DiskFrameSource : public FrameSource {
 public:
  DiskFrameSource(std::string dir, int n_cameras) : dir_(std::move(dir)), n_cameras_(n_cameras) {}

  const std::vector<Image>& frame(int t) const override {
    std::lock_guard lock(mu_);
    auto it = cache_.find(t);
    if (it != cache_.end()) return it->second;
    std::vector<Image> imgs;
    for (int c = 0; c < n_cameras_; ++c) imgs.push_back(read_png(image_path(dir_, c, t)));
    return cache_.emplace(t, std::move(imgs)).first->second;
  }

  static std::string image_path(const std::string& dir, int cam, int t) {
    char name[64];
    std::snprintf(name, sizeof name, "/cam%d/frame%05d.png", cam, t);
    return dir + name;
  }

 private:
  std::string dir_;
  int n_cameras_;
  mutable std::mutex mu_;
  mutable std::map<int, std::vector<Image>> cache_;
};

/// Frames held in memory, e.g. freshly rendered.
class MemoryFrameSource : public FrameSource {
 public:
  void put(int t, std::vector<Image> imgs) { frames_[t] = std::move(imgs); }
  const std::vector<Image>& frame(int t) const override {
    auto it = frames_.find(t);
    if (it == frames_.end()) throw ValidationError("frame " + std::to_string(t) + " not available");
    return it->second;
  }
  bool contains(int t) const { return frames_.count(t) > 0; }

 private:
  std::map<int, std::vector<Image>> frames_;
};

inline void check_frame_matches(const std::vector<Image>& imgs, const std::vector<CameraCalibration>& cams) {
  if (imgs.size() != cams.size())
    throw CalibrationMismatch(std::to_string(imgs.size()) + " images for " + std::to_string(cams.size()) + " cameras");
  for (std::size_t c = 0; c < cams.size(); ++c)
    if (imgs[c].width != cams[c].width || imgs[c].height != cams[c].height)
      throw CalibrationMismatch("camera " + std::to_string(cams[c].camera_id) + " expects " +
                                std::to_string(cams[c].width) + "x" + std::to_string(cams[c].height) + ", image is " +
                                std::to_string(imgs[c].width) + "x" + std::to_string(imgs[c].height));
}

inline Tensor crop_view(const Image& img, const CropRect& r, const CropConfig& cfg) {
  return crop_region(img, r, cfg.out_h, cfg.out_w, cfg.mode, cfg.trim_px);
}

inline MultiViewSample materialize(const SampleRef& s, const FrameSource& src, const CropConfig& cfg) {
  const auto& imgs = src.frame(s.frame);
  if (imgs.size() != s.rects.size())
    throw ShapeMismatch("sample has " + std::to_string(s.rects.size()) + " views, frame has " +
                        std::to_string(imgs.size()));
  MultiViewSample m{{}, s.label, s.cell, s.frame, s.provenance};
  for (std::size_t c = 0; c < imgs.size(); ++c) m.patches.push_back(crop_view(imgs[c], s.rects[c], cfg));
  return m;
}

inline Tensor mono_patch(const MonoRef& m, const FrameSource& src, const CropConfig& cfg) {
  return crop_view(src.frame(m.frame).at(static_cast<std::size_t>(m.camera)), m.rect, cfg);
}

/// Annotations grouped by frame.
inline std::map<int, std::vector<Annotation>> by_frame(const std::vector<Annotation>& anns) {
  std::map<int, std::vector<Annotation>> out;
  for (const auto& a : anns) out[a.frame].push_back(a);
  return out;
}

struct Dataset {
  std::vector<SampleRef> multi;
  std::vector<MonoRef> mono;

  std::size_t positives() const {
    return static_cast<std::size_t>(std::count_if(multi.begin(), multi.end(), [](const auto& s) { return s.label == 1; }));
  }
};

/// Per-view label of a single crop: 1 when it overlaps some present person's
/// crop in that view with IoU >= 0.5.
inline constexpr double kMonoPositiveIoU = 0.5;

/// Positives at every annotated cell and `negatives_per_frame` easy negatives
/// at distinct unoccupied cells drawn uniformly. Mono patches are the visible
/// views of those samples.
inline Dataset build_dataset(const std::vector<Annotation>& anns, const std::vector<int>& frames,
                             const GroundGrid& grid, const std::vector<CameraCalibration>& cams,
                             const CropConfig& crop, std::size_t negatives_per_frame, std::uint64_t seed) {
  Dataset ds;
  const auto per_frame = by_frame(anns);
  for (int t : frames) {
    std::vector<Annotation> present;
    if (auto it = per_frame.find(t); it != per_frame.end()) present = it->second;
    std::set<int> occupied;
    std::vector<std::vector<CropRect>> person_rects;
    for (const auto& a : present) {
      occupied.insert(a.cell);
      person_rects.push_back(cell_rects(cams, grid, a.cell, crop.radius, crop.height));
    }
    std::vector<SampleRef> frame_samples;
    for (std::size_t k = 0; k < present.size(); ++k)
      frame_samples.push_back({t, present[k].cell, 1, Provenance::annotated, person_rects[k]});

    std::vector<int> free_cells;
    for (int p = 0; p < grid.size(); ++p)
      if (!occupied.count(p)) free_cells.push_back(p);
    std::mt19937_64 rng(derive_seed(seed, {static_cast<std::uint64_t>(t)}));
    std::shuffle(free_cells.begin(), free_cells.end(), rng);
    const std::size_t n_neg = std::min(negatives_per_frame, free_cells.size());
    for (std::size_t k = 0; k < n_neg; ++k)
      frame_samples.push_back(
          {t, free_cells[k], 0, Provenance::easy_negative, cell_rects(cams, grid, free_cells[k], crop.radius, crop.height)});

    for (const auto& s : frame_samples) {
      for (std::size_t c = 0; c < cams.size(); ++c) {
        if (!s.rects[c].visible) continue;
        int label = 0;
        for (const auto& pr : person_rects)
          if (rect_iou(s.rects[c], pr[c]) >= kMonoPositiveIoU) label = 1;
        ds.mono.push_back({t, static_cast<int>(c), s.rects[c], label});
      }
      ds.multi.push_back(s);
    }
  }
  return ds;
}

}  // namespace mvdet
