#pragma once

#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <toml.hpp>

#include "mvdet/forest.hpp"
#include "mvdet/io.hpp"
#include "mvdet/multiview.hpp"
#include "mvdet/nn/checkpoint.hpp"
#include "mvdet/synthscene.hpp"

// Command-line pipeline: synth, train-mono, train-mv, detect, eval, nms and
// inspect-forest. Settings come from a named profile, then an optional TOML
// file, then flags.

namespace mvdet::cli {

using json = nlohmann::json;
namespace fs = std::filesystem;

struct TrainConfig {
  std::size_t batch_size = 64;
  double r = 0.33;
  std::string optimizer = "adam";
  double lr = 1e-3;
  double momentum = 0.9;
  std::size_t epochs = 60;
  std::size_t patience = 10;
  double min_delta = 0;
  double val_fraction = 0.15;
  bool input_dropout = true;
  std::string hard_negatives = "none";  // none, shift, mix, both
  bool freeze_embeddings = true;
  std::size_t negatives_per_frame = 20;
};

struct RunConfig {
  std::string profile = "desk";
  std::uint64_t seed = 0;
  bool deterministic = false;

  std::string data;         // dataset directory
  std::string calibration;  // default <data>/calibration.json
  std::string grid;         // default <data>/grid.json
  std::string annotations;  // default <data>/annotations.jsonl
  std::string mask_table;

  std::size_t depth = 7;
  std::vector<std::size_t> head_hidden = nn::kDeskHeadHidden;
  std::string classifier = "mlp";  // mlp or forest
  ForestOptions forest;
  CropConfig crop;

  TrainConfig mono, mv;

  double score_threshold = 0.5;
  double nms_threshold = 0.4;
  int min_cell_distance = 0;

  MatchConfig match;
  std::vector<double> nms_sweep{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};

  std::string calibration_path() const { return !calibration.empty() ? calibration : data + "/calibration.json"; }
  std::string grid_path() const { return !grid.empty() ? grid : data + "/grid.json"; }
  std::string annotations_path() const { return !annotations.empty() ? annotations : data + "/annotations.jsonl"; }

  void validate() const {
    for (const TrainConfig* t : {&mono, &mv}) {
      const std::string w = t == &mono ? "train_mono" : "train_mv";
      if (t->batch_size == 0) throw ValidationError(w + ".batch_size must be at least 1");
      if (!(t->r > 0 && t->r < 1)) throw ValidationError(w + ".r must lie in (0, 1)");
      if (t->optimizer != "sgd" && t->optimizer != "adam")
        throw ValidationError(w + ".optimizer must be \"sgd\" or \"adam\"");
      if (!(t->lr > 0)) throw ValidationError(w + ".lr must be positive");
      if (!(t->momentum >= 0 && t->momentum < 1)) throw ValidationError(w + ".momentum must lie in [0, 1)");
      if (!(t->min_delta >= 0)) throw ValidationError(w + ".min_delta must be non-negative");
      if (!(t->val_fraction >= 0 && t->val_fraction < 1)) throw ValidationError(w + ".val_fraction must lie in [0, 1)");
      if (t->hard_negatives != "none" && t->hard_negatives != "shift" && t->hard_negatives != "mix" &&
          t->hard_negatives != "both")
        throw ValidationError(w + ".hard_negatives must be none, shift, mix or both");
    }
    if (classifier != "mlp" && classifier != "forest") throw ValidationError("model.classifier must be mlp or forest");
    if (depth == 0) throw ValidationError("model.depth must be at least 1");
    if (forest.n_trees == 0) throw ValidationError("forest.n_trees must be at least 1");
    if (forest.tree.max_depth < 0) throw ValidationError("forest.max_depth must be non-negative");
    if (forest.tree.min_leaf == 0) throw ValidationError("forest.min_leaf must be at least 1");
    if (!(score_threshold >= 0 && std::isfinite(score_threshold)))
      throw ValidationError("detect.score_threshold must be a non-negative number");
    if (!(nms_threshold >= 0 && nms_threshold <= 1)) throw ValidationError("detect.nms_threshold must lie in [0, 1]");
    if (min_cell_distance < 0) throw ValidationError("detect.min_cell_distance must be non-negative");
    if (!(match.radius > 0)) throw ValidationError("eval.match_radius must be positive");
    for (double t : nms_sweep)
      if (!(t >= 0 && t <= 1)) throw ValidationError("eval.nms_sweep values must lie in [0, 1]");
  }
};

/// Named presets. "desk" suits the small synthetic scenes; the "full"
/// profiles use SGD with lr 0.005, momentum 0.9, batch 64, r 0.33, 60 epochs
/// and trim the crop sides.
inline RunConfig profile_config(const std::string& name) {
  RunConfig c;
  c.profile = name;
  c.mono.epochs = 10;
  c.mono.patience = 4;
  c.mono.negatives_per_frame = 6;
  c.mv.min_delta = 1e-4;
  const TrainConfig full{64, 0.33, "sgd", 0.005, 0.9, 60, 10, 0, 0.15, true, "none", true, 20};
  if (name == "desk") return c;
  c.crop.trim_px = 7;  // 50 px at a 224 px crop, in 32 px output pixels
  if (name == "full-mono" || name == "full") {
    c.mono = full;
    c.mono.negatives_per_frame = 6;
  }
  if (name == "full-mv" || name == "full") {
    c.mv = full;
    c.mv.hard_negatives = "both";
    c.head_hidden = nn::kFullHeadHidden;
  }
  if (name != "full-mono" && name != "full-mv" && name != "full")
    throw ValidationError("unknown profile '" + name + "' (desk, full-mono, full-mv, full)");
  return c;
}

// ---------------------------------------------------------------------------
// TOML

namespace detail {

template <class T>
void take(const toml::table& t, const char* key, T& out, const std::string& where) {
  const toml::node* n = t.get(key);
  if (!n) return;
  const std::string name = where.empty() ? key : where + "." + key;
  if constexpr (std::is_same_v<T, bool>) {
    if (!n->is_boolean()) throw ValidationError(name + " must be true or false");
    out = n->as_boolean()->get();
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (!n->is_string()) throw ValidationError(name + " must be a string");
    out = n->as_string()->get();
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!n->is_number()) throw ValidationError(name + " must be a number");
    out = n->value<double>().value();
  } else if constexpr (std::is_integral_v<T>) {
    if (!n->is_integer()) throw ValidationError(name + " must be an integer");
    const auto v = n->as_integer()->get();
    if (std::is_unsigned_v<T> && v < 0) throw ValidationError(name + " must be non-negative");
    out = static_cast<T>(v);
  } else {
    const toml::array* a = n->as_array();
    if (!a) throw ValidationError(name + " must be a list");
    out.clear();
    for (const auto& e : *a) {
      using V = typename T::value_type;
      if constexpr (std::is_integral_v<V>) {
        if (!e.is_integer() || e.as_integer()->get() < 0)
          throw ValidationError(name + " must list non-negative integers");
        out.push_back(static_cast<V>(e.as_integer()->get()));
      } else {
        if (!e.is_number()) throw ValidationError(name + " must list numbers");
        out.push_back(e.value<double>().value());
      }
    }
  }
}

inline void check_keys(const toml::table& t, std::initializer_list<const char*> known, const std::string& where) {
  for (const auto& [k, v] : t) {
    bool ok = false;
    for (const char* n : known) ok = ok || k.str() == n;
    if (!ok)
      throw ValidationError("unknown config key '" + (where.empty() ? "" : where + ".") + std::string(k.str()) + "'");
  }
}

inline const toml::table* section(const toml::table& t, const char* key) {
  const toml::node* n = t.get(key);
  if (!n) return nullptr;
  if (!n->is_table()) throw ValidationError(std::string("[") + key + "] must be a table");
  return n->as_table();
}

inline void apply_train(const toml::table& t, TrainConfig& c, const std::string& w) {
  check_keys(t,
             {"batch_size", "r", "optimizer", "lr", "momentum", "epochs", "patience", "min_delta", "val_fraction",
              "input_dropout", "hard_negatives", "freeze_embeddings", "negatives_per_frame"},
             w);
  take(t, "batch_size", c.batch_size, w);
  take(t, "r", c.r, w);
  take(t, "optimizer", c.optimizer, w);
  take(t, "lr", c.lr, w);
  take(t, "momentum", c.momentum, w);
  take(t, "epochs", c.epochs, w);
  take(t, "patience", c.patience, w);
  take(t, "min_delta", c.min_delta, w);
  take(t, "val_fraction", c.val_fraction, w);
  take(t, "input_dropout", c.input_dropout, w);
  take(t, "hard_negatives", c.hard_negatives, w);
  take(t, "freeze_embeddings", c.freeze_embeddings, w);
  take(t, "negatives_per_frame", c.negatives_per_frame, w);
}

}  // namespace detail

inline toml::table parse_toml_file(const std::string& path) {
  const std::string text = io::read_text(path);
  try {
    return toml::parse(text, path);
  } catch (const toml::parse_error& e) {
    throw ValidationError("config '" + path + "': " + std::string(e.description()));
  }
}

/// Overlays a TOML document on `c` (everything except the profile key).
inline void apply_toml(const toml::table& t, RunConfig& c) {
  using detail::take;
  detail::check_keys(t,
                     {"profile", "seed", "deterministic", "paths", "model", "forest", "crop", "train_mono", "train_mv",
                      "detect", "eval"},
                     "");
  take(t, "seed", c.seed, "");
  take(t, "deterministic", c.deterministic, "");
  if (auto s = detail::section(t, "paths")) {
    detail::check_keys(*s, {"data", "calibration", "grid", "annotations", "mask_table"}, "paths");
    take(*s, "data", c.data, "paths");
    take(*s, "calibration", c.calibration, "paths");
    take(*s, "grid", c.grid, "paths");
    take(*s, "annotations", c.annotations, "paths");
    take(*s, "mask_table", c.mask_table, "paths");
  }
  if (auto s = detail::section(t, "model")) {
    detail::check_keys(*s, {"depth", "head_hidden", "classifier"}, "model");
    take(*s, "depth", c.depth, "model");
    take(*s, "head_hidden", c.head_hidden, "model");
    take(*s, "classifier", c.classifier, "model");
  }
  if (auto s = detail::section(t, "forest")) {
    detail::check_keys(*s, {"n_trees", "max_depth", "min_leaf", "bootstrap", "sqrt_features"}, "forest");
    take(*s, "n_trees", c.forest.n_trees, "forest");
    take(*s, "max_depth", c.forest.tree.max_depth, "forest");
    take(*s, "min_leaf", c.forest.tree.min_leaf, "forest");
    take(*s, "bootstrap", c.forest.bootstrap, "forest");
    take(*s, "sqrt_features", c.forest.sqrt_features, "forest");
  }
  if (auto s = detail::section(t, "crop")) {
    detail::check_keys(*s, {"mode", "trim_px"}, "crop");
    std::string mode = to_string(c.crop.mode);
    take(*s, "mode", mode, "crop");
    if (mode != "warp" && mode != "square") throw ValidationError("crop.mode must be warp or square");
    c.crop.mode = mode == "warp" ? CropMode::warp : CropMode::square;
    take(*s, "trim_px", c.crop.trim_px, "crop");
  }
  if (auto s = detail::section(t, "train_mono")) detail::apply_train(*s, c.mono, "train_mono");
  if (auto s = detail::section(t, "train_mv")) detail::apply_train(*s, c.mv, "train_mv");
  if (auto s = detail::section(t, "detect")) {
    detail::check_keys(*s, {"score_threshold", "nms_threshold", "min_cell_distance"}, "detect");
    take(*s, "score_threshold", c.score_threshold, "detect");
    take(*s, "nms_threshold", c.nms_threshold, "detect");
    take(*s, "min_cell_distance", c.min_cell_distance, "detect");
  }
  if (auto s = detail::section(t, "eval")) {
    detail::check_keys(*s, {"match_mode", "match_radius", "nms_sweep"}, "eval");
    std::string mode = io::to_string(c.match.mode);
    take(*s, "match_mode", mode, "eval");
    c.match.mode = io::match_mode_from_string(mode);
    take(*s, "match_radius", c.match.radius, "eval");
    take(*s, "nms_sweep", c.nms_sweep, "eval");
  }
}

// ---------------------------------------------------------------------------
// datasets on disk: cam{c}/frame{t:05}.png, calibration.json, grid.json,
// annotations.jsonl and dataset.json {"n_frames", "n_cameras", "train", "test"}

struct DiskDataset {
  std::vector<CameraCalibration> cameras;
  GroundGrid grid;
  std::vector<Annotation> annotations;
  int n_frames = 0;
  std::vector<int> train, test;
  std::unique_ptr<DiskFrameSource> frames;
};

inline DiskDataset load_dataset(const RunConfig& c) {
  if (c.data.empty()) throw ValidationError("no dataset directory given (--data or paths.data)");
  DiskDataset d;
  d.cameras = io::calibrations_from_json(io::read_json(c.calibration_path()));
  d.grid = grid_from_json(io::read_json(c.grid_path()));
  d.grid.validate();
  d.annotations = io::annotations_from_jsonl(io::read_text(c.annotations_path()));
  const json meta = io::read_json(c.data + "/dataset.json");
  d.n_frames = io::field<int>(meta, "n_frames", "dataset.json");
  d.train = io::field<std::vector<int>>(meta, "train", "dataset.json");
  d.test = io::field<std::vector<int>>(meta, "test", "dataset.json");
  if (io::field<int>(meta, "n_cameras", "dataset.json") != static_cast<int>(d.cameras.size()))
    throw CalibrationMismatch("dataset.json and the calibration file disagree on the camera count");
  for (const auto* list : {&d.train, &d.test})
    for (int t : *list)
      if (t < 0 || t >= d.n_frames) throw ValidationError("dataset.json lists frame " + std::to_string(t));
  for (const auto& a : d.annotations)
    if (a.cell < 0 || a.cell >= d.grid.size() || a.frame < 0 || a.frame >= d.n_frames)
      throw ValidationError("annotation (frame " + std::to_string(a.frame) + ", cell " + std::to_string(a.cell) +
                            ") lies outside the dataset");
  d.frames = std::make_unique<DiskFrameSource>(c.data, static_cast<int>(d.cameras.size()));
  return d;
}

/// "train", "test", "all", or an inclusive range "a-b" / single frame "a".
inline std::vector<int> select_frames(const std::string& sel, const DiskDataset& d) {
  if (sel == "train") return d.train;
  if (sel == "test") return d.test;
  std::vector<int> out;
  if (sel == "all") {
    for (int t = 0; t < d.n_frames; ++t) out.push_back(t);
    return out;
  }
  int a = 0, b = 0;
  char tail = 0;
  const int n = std::sscanf(sel.c_str(), "%d-%d%c", &a, &b, &tail);
  if (n == 1) b = a;
  if ((n != 1 && n != 2) || a < 0 || b < a || b >= d.n_frames)
    throw ValidationError("bad frame selection '" + sel + "' (train, test, all, a-b)");
  for (int t = a; t <= b; ++t) out.push_back(t);
  return out;
}

// ---------------------------------------------------------------------------
// checkpoints

inline json crop_to_json(const CropConfig& c) {
  return {{"out_h", c.out_h}, {"out_w", c.out_w},   {"mode", to_string(c.mode)},
          {"trim_px", c.trim_px}, {"radius", c.radius}, {"height", c.height}};
}

inline CropConfig crop_from_json(const json& j) {
  CropConfig c;
  c.out_h = j.at("out_h");
  c.out_w = j.at("out_w");
  c.mode = j.at("mode") == "warp" ? CropMode::warp : CropMode::square;
  c.trim_px = j.at("trim_px");
  c.radius = j.at("radius");
  c.height = j.at("height");
  return c;
}

inline nn::OptimizerAlgo optimizer_of(const TrainConfig& t) {
  if (t.optimizer == "sgd") return nn::Sgd{t.lr, t.momentum};
  return nn::Adam{t.lr};
}

inline TrainOptions train_options(const TrainConfig& t, std::uint64_t seed, const MaskTable& masks) {
  TrainOptions o;
  o.batch_size = t.batch_size;
  o.r = t.r;
  o.seed = seed;
  o.optimizer = optimizer_of(t);
  o.epochs = t.epochs;
  o.patience = t.patience;
  o.min_delta = t.min_delta;
  o.val_fraction = t.val_fraction;
  o.input_dropout = t.input_dropout;
  o.masks = masks;
  return o;
}

inline json train_config_json(const TrainConfig& t) {
  return {{"batch_size", t.batch_size},
          {"r", t.r},
          {"optimizer", t.optimizer},
          {"lr", t.lr},
          {"momentum", t.momentum},
          {"epochs", t.epochs},
          {"patience", t.patience},
          {"min_delta", t.min_delta},
          {"val_fraction", t.val_fraction},
          {"input_dropout", t.input_dropout},
          {"hard_negatives", t.hard_negatives},
          {"freeze_embeddings", t.freeze_embeddings},
          {"negatives_per_frame", t.negatives_per_frame}};
}

struct LoadedModel {
  MultiViewModel model;
  std::optional<Forest> forest;
  CropConfig crop;
  std::vector<int> camera_ids;
  json header;
};

inline LoadedModel load_model(const std::string& path) {
  const nn::CheckpointReader rd(path);
  const json& h = rd.header();
  if (h.value("kind", "") != "multiview")
    throw ValidationError("'" + path + "' is not a multi-view checkpoint (kind " + h.value("kind", "?") + ")");
  LoadedModel m;
  m.header = h;
  m.crop = crop_from_json(h.at("crop"));
  m.camera_ids = h.at("camera_ids").get<std::vector<int>>();
  const std::size_t C = h.at("views");
  m.model.depth = h.at("depth");
  m.model.feature_dim = h.at("feature_dim");
  m.model.freeze_embeddings = h.at("freeze_embeddings");
  m.model.patch_shape = {3, m.crop.out_h, m.crop.out_w};
  for (std::size_t c = 0; c < C; ++c) {
    const std::string key = "embedding" + std::to_string(c);
    m.model.embeddings.push_back(rd.network(key, key));
  }
  if (h.at("classifier") == "forest")
    m.forest = forest_from_json(h.at("forest"));
  else
    m.model.head = rd.network("head", "head");
  return m;
}

inline void save_model(const std::string& path, const LoadedModel& m) {
  nn::CheckpointWriter w;
  json h = m.header;
  h["kind"] = "multiview";
  h["views"] = m.model.views();
  h["depth"] = m.model.depth;
  h["feature_dim"] = m.model.feature_dim;
  h["freeze_embeddings"] = m.model.freeze_embeddings;
  h["camera_ids"] = m.camera_ids;
  h["crop"] = crop_to_json(m.crop);
  for (std::size_t c = 0; c < m.model.views(); ++c) {
    const std::string key = "embedding" + std::to_string(c);
    w.add_network(h, key, m.model.embeddings[c], key);
  }
  if (m.forest) {
    h["classifier"] = "forest";
    h["forest"] = forest_to_json(*m.forest);
  } else {
    h["classifier"] = "mlp";
    w.add_network(h, "head", m.model.head, "head");
  }
  w.write(path, h);
}

/// Occupancy probabilities of every cell of one frame.
inline std::vector<double> score_frame(const LoadedModel& m, const std::vector<Image>& images,
                                       const std::vector<std::vector<CropRect>>& rects) {
  const FeatureMatrix fm = frame_features(m.model, images, rects, m.crop);
  return m.forest ? predict_proba(*m.forest, fm) : head_scores(m.model.head, fm);
}

// ---------------------------------------------------------------------------
// commands

/// JSON-lines event log; carries no timings so runs can be compared.
struct Log {
  std::ostream* out = nullptr;
  void operator()(const std::string& event, json fields = json::object()) const {
    if (!out) return;
    json j{{"event", event}};
    j.update(fields);
    *out << j.dump() << "\n";
  }
};

struct Context {
  RunConfig config;
  std::ostream* out = &std::cout;
  Log log;
};

inline MaskTable load_masks(const RunConfig& c) {
  return c.mask_table.empty() ? default_mask_table() : mask_table_from_json(io::read_json(c.mask_table));
}

struct SynthArgs {
  std::string scenario;  // empty: default scenario from the seed
  std::string out;
  std::optional<int> n_frames, n_train_frames;
  std::optional<int> min_persons, max_persons, min_separation, pillars;
};

inline void cmd_synth(const Context& ctx, const SynthArgs& a) {
  ScenarioSpec s;
  if (a.scenario.empty()) {
    ScenarioOptions o;
    if (a.n_frames) o.n_frames = *a.n_frames;
    if (a.n_train_frames) o.n_train_frames = *a.n_train_frames;
    if (!a.n_train_frames && a.n_frames) o.n_train_frames = std::min(o.n_train_frames, *a.n_frames);
    if (a.min_persons) o.min_persons = *a.min_persons;
    if (a.max_persons) o.max_persons = *a.max_persons;
    if (a.min_separation) o.min_separation = *a.min_separation;
    if (a.pillars) o.n_pillars = *a.pillars;
    if (o.n_frames < 0 || o.n_train_frames < 0 || o.n_train_frames > o.n_frames)
      throw ValidationError("need 0 <= --n-train-frames <= --n-frames");
    s = default_scenario(ctx.config.seed, o);
  } else {
    if (a.n_frames || a.n_train_frames || a.min_persons || a.max_persons || a.min_separation || a.pillars)
      throw ValidationError("scene options only apply to the default scenario");
    s = scenario_from_json(io::read_json(a.scenario));
  }
  s.validate();
  const std::string& dir = a.out;
  fs::create_directories(dir);
  SceneRenderer r(s);
  for (std::size_t c = 0; c < s.cameras.size(); ++c) fs::create_directories(dir + "/cam" + std::to_string(c));
  for (int t = 0; t < s.n_frames; ++t) {
    const auto f = r.render(t);
    for (std::size_t c = 0; c < f.images.size(); ++c)
      write_png(DiskFrameSource::image_path(dir, static_cast<int>(c), t), f.images[c]);
  }
  const auto anns = scenario_annotations(s);
  io::write_text(dir + "/calibration.json", io::calibrations_to_json(s.cameras));
  io::write_text(dir + "/grid.json", grid_to_json(s.grid).dump(2) + "\n");
  io::write_text(dir + "/annotations.jsonl", io::annotations_to_jsonl(anns));
  io::write_text(dir + "/scenario.json", scenario_to_json(s).dump() + "\n");
  io::write_text(dir + "/dataset.json", json{{"n_frames", s.n_frames},
                                             {"n_cameras", s.cameras.size()},
                                             {"train", s.train_frames()},
                                             {"test", s.test_frames()}}
                                                .dump() +
                                            "\n");
  ctx.log("synth", {{"frames", s.n_frames},
                    {"cameras", s.cameras.size()},
                    {"images", static_cast<std::size_t>(s.n_frames) * s.cameras.size()},
                    {"annotations", anns.size()},
                    {"persons", s.persons.size()}});
}

struct TrainArgs {
  std::string out;     // checkpoint to write
  std::string resume;  // checkpoint to continue from
  std::string init;    // monocular checkpoint (train-mv)
  std::string log;     // per-epoch log; default <out>.log.jsonl
};

inline std::function<void(const EpochLog&)> epoch_logger(std::ostream& file, const Log& log, const std::string& stage) {
  return [&file, log, stage](const EpochLog& e) {
    const json row{{"stage", stage},
                   {"epoch", e.epoch},
                   {"train_loss", e.train_loss},
                   {"val_loss", e.val_loss},
                   {"val_accuracy", e.val_accuracy}};
    file << row.dump() << "\n";
    log("epoch", row);
  };
}

inline std::ofstream open_log(const TrainArgs& a) {
  const std::string path = a.log.empty() ? a.out + ".log.jsonl" : a.log;
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open '" + path + "' for writing");
  return f;
}

inline void cmd_train_mono(const Context& ctx, const TrainArgs& a) {
  const RunConfig& c = ctx.config;
  const DiskDataset d = load_dataset(c);
  const Dataset ds = build_dataset(d.annotations, d.train, d.grid, d.cameras, c.crop, c.mono.negatives_per_frame,
                                   derive_seed(c.seed, {4}));
  TrainOptions opt = train_options(c.mono, c.seed, load_masks(c));
  nn::Network net(nn::mono_classifier_specs(), c.seed);
  if (!a.resume.empty()) {
    const nn::CheckpointReader rd(a.resume);
    if (rd.header().value("kind", "") != "mono") throw ValidationError("'" + a.resume + "' is not a mono checkpoint");
    net = rd.network("mono", "mono");
    opt.first_epoch = rd.header().at("epochs_done").get<std::size_t>() + 1;
    opt.seed = derive_seed(c.seed, {opt.first_epoch});
  }
  std::ofstream logf = open_log(a);
  ctx.log("train_mono", {{"samples", ds.mono.size()}, {"frames", d.train.size()}, {"first_epoch", opt.first_epoch}});
  const auto rep = train_monocular(net, mono_patch_set(ds.mono, *d.frames, c.crop), opt,
                                   epoch_logger(logf, ctx.log, "mono"));
  json h{{"kind", "mono"},
         {"epochs_done", rep.epochs.empty() ? opt.first_epoch - 1 : rep.epochs.back().epoch},
         {"best_epoch", rep.best_epoch},
         {"crop", crop_to_json(c.crop)},
         {"train", train_config_json(c.mono)},
         {"seed", c.seed}};
  nn::CheckpointWriter w;
  w.add_network(h, "mono", net, "mono");
  w.write(a.out, h);
  ctx.log("checkpoint", {{"epochs", rep.epochs.size()}, {"best_epoch", rep.best_epoch}});
}

inline std::vector<SampleRef> with_hard_negatives(const std::vector<SampleRef>& refs, const std::string& mode,
                                                  std::uint64_t seed) {
  std::vector<SampleRef> out = refs;
  if (mode == "none") return out;
  std::vector<SampleRef> pos;
  for (const auto& r : refs)
    if (r.label == 1) pos.push_back(r);
  std::mt19937_64 rng(derive_seed(seed, {31}));
  if (mode == "shift" || mode == "both")
    for (auto& n : generate_hard_negatives(pos, HardNegativeMode::shift, rng)) out.push_back(std::move(n));
  if (mode == "mix" || mode == "both")
    for (auto& n : generate_hard_negatives(pos, HardNegativeMode::mix, rng)) out.push_back(std::move(n));
  return out;
}

inline void cmd_train_mv(const Context& ctx, const TrainArgs& a) {
  const RunConfig& c = ctx.config;
  const DiskDataset d = load_dataset(c);
  LoadedModel m;
  TrainOptions opt = train_options(c.mv, derive_seed(c.seed, {1}), load_masks(c));
  if (!a.resume.empty()) {
    m = load_model(a.resume);
    if (m.forest) throw ValidationError("forest checkpoints cannot be resumed; train a new forest instead");
    opt.first_epoch = m.header.at("epochs_done").get<std::size_t>() + 1;
    opt.seed = derive_seed(c.seed, {1, opt.first_epoch});
  } else {
    if (a.init.empty()) throw ValidationError("train-mv needs a monocular checkpoint (--mono)");
    const nn::CheckpointReader rd(a.init);
    if (rd.header().value("kind", "") != "mono") throw ValidationError("'" + a.init + "' is not a mono checkpoint");
    m.model = build_multiview(rd.network("mono", "mono"), c.depth, d.cameras.size(), c.head_hidden,
                              derive_seed(c.seed, {2}));
    m.model.freeze_embeddings = c.mv.freeze_embeddings;
    m.crop = c.crop;
    for (const auto& cam : d.cameras) m.camera_ids.push_back(cam.camera_id);
  }
  if (m.model.views() != d.cameras.size())
    throw CalibrationMismatch("checkpoint has " + std::to_string(m.model.views()) + " views, dataset has " +
                              std::to_string(d.cameras.size()) + " cameras");
  const Dataset ds = build_dataset(d.annotations, d.train, d.grid, d.cameras, m.crop, c.mv.negatives_per_frame,
                                   derive_seed(c.seed, {5}));
  const auto refs = with_hard_negatives(ds.multi, c.mv.hard_negatives, c.seed);
  ctx.log("train_mv", {{"samples", refs.size()},
                       {"positives", ds.positives()},
                       {"classifier", c.classifier},
                       {"first_epoch", opt.first_epoch}});
  json h{{"train", train_config_json(c.mv)}, {"seed", c.seed}};
  if (c.classifier == "forest" && a.resume.empty()) {
    const FeatureMatrix fm = compute_features(m.model, refs, *d.frames, m.crop);
    std::vector<int> labels;
    for (const auto& r : refs) labels.push_back(r.label);
    ForestOptions fo = c.forest;
    fo.seed = derive_seed(c.seed, {3});
    m.forest = train_forest(fm, labels, fo);
    h["epochs_done"] = 0;
    h["forest_options"] = {{"n_trees", fo.n_trees},
                           {"max_depth", fo.tree.max_depth},
                           {"min_leaf", fo.tree.min_leaf},
                           {"bootstrap", fo.bootstrap},
                           {"sqrt_features", fo.sqrt_features}};
  } else {
    std::ofstream logf = open_log(a);
    const auto rep = train_head(m.model, refs, *d.frames, m.crop, opt, epoch_logger(logf, ctx.log, "mv"));
    h["epochs_done"] = rep.epochs.empty() ? opt.first_epoch - 1 : rep.epochs.back().epoch;
    h["best_epoch"] = rep.best_epoch;
  }
  m.header = h;
  save_model(a.out, m);
  ctx.log("checkpoint", {{"classifier", m.forest ? "forest" : "mlp"}});
}

struct DetectArgs {
  std::string model;
  std::string out;  // directory
  std::string frames = "test";
};

inline void cmd_detect(const Context& ctx, const DetectArgs& a) {
  const RunConfig& c = ctx.config;
  const DiskDataset d = load_dataset(c);
  const LoadedModel m = load_model(a.model);
  std::vector<int> ids;
  for (const auto& cam : d.cameras) ids.push_back(cam.camera_id);
  if (ids != m.camera_ids) throw CalibrationMismatch("model cameras differ from the dataset's calibration");
  const auto rects = all_cell_rects(d.cameras, d.grid, m.crop);
  const NmsOptions nms{c.nms_threshold, c.min_cell_distance, d.grid.cols};
  std::vector<OccupancyMap> maps;
  std::vector<DetectionCandidate> pre, post;
  for (int t : select_frames(a.frames, d)) {
    const auto& images = d.frames->frame(t);
    check_frame_matches(images, d.cameras);
    OccupancyMap map{t, score_frame(m, images, rects)};
    auto cands = threshold_candidates(t, map.q, rects, c.score_threshold);
    for (auto& k : score_weighted_nms(cands, nms)) post.push_back(std::move(k));
    for (auto& k : cands) pre.push_back(std::move(k));
    maps.push_back(std::move(map));
  }
  io::write_text(a.out + "/occupancy.csv", io::occupancy_to_csv(maps));
  io::write_text(a.out + "/candidates.jsonl", io::detections_to_jsonl(pre));
  io::write_text(a.out + "/detections.jsonl", io::detections_to_jsonl(post));
  ctx.log("detect", {{"frames", maps.size()}, {"candidates", pre.size()}, {"detections", post.size()}});
}

struct EvalArgs {
  std::string detections;
  std::string candidates;  // pre-NMS list for the threshold sweep
  std::string occupancy;   // for the ROC curve
  std::string frames;      // empty: every frame seen in the inputs
  std::string out;         // report JSON
  std::string roc;
  std::string sweep;
  int match_camera = 0;  // bbox_iou mode compares rectangles of this camera
};

inline std::vector<FrameEval> evaluate(const std::vector<DetectionCandidate>& dets, const std::vector<int>& frames,
                                       const std::map<int, std::vector<int>>& truth, const DiskDataset& d,
                                       const MatchConfig& match, int camera, const CropConfig& crop) {
  std::map<int, std::vector<const DetectionCandidate*>> per;
  for (const auto& k : dets) per[k.frame].push_back(&k);
  std::vector<FrameEval> out;
  for (int t : frames) {
    const auto it = truth.find(t);
    const std::vector<int> gt = it == truth.end() ? std::vector<int>{} : it->second;
    std::vector<int> cells;
    for (const auto* k : per[t]) cells.push_back(k->cell);
    if (match.mode == MatchMode::ground_distance) {
      out.push_back(match_frame(t, cells, gt, d.grid, match));
      continue;
    }
    const auto& cam = d.cameras.at(static_cast<std::size_t>(camera));
    std::vector<CropRect> dr, gr;
    for (int p : cells) dr.push_back(cell_rects({cam}, d.grid, p, crop.radius, crop.height)[0]);
    for (int p : gt) gr.push_back(cell_rects({cam}, d.grid, p, crop.radius, crop.height)[0]);
    out.push_back(match_frame_rects(t, dr, gr, match));
  }
  return out;
}

inline void cmd_eval(const Context& ctx, const EvalArgs& a) {
  const RunConfig& c = ctx.config;
  const DiskDataset d = load_dataset(c);
  if (a.match_camera < 0 || a.match_camera >= static_cast<int>(d.cameras.size()))
    throw ValidationError("--match-camera out of range");
  const auto dets = io::detections_from_jsonl(io::read_text(a.detections));
  std::map<int, std::vector<int>> truth;
  for (const auto& ann : d.annotations) truth[ann.frame].push_back(ann.cell);

  std::vector<int> frames;
  if (!a.frames.empty()) {
    frames = select_frames(a.frames, d);
  } else {
    std::set<int> all;
    for (const auto& [t, v] : truth) all.insert(t);
    for (const auto& k : dets) all.insert(k.frame);
    frames.assign(all.begin(), all.end());
  }
  const std::set<int> chosen(frames.begin(), frames.end());
  for (const auto& k : dets) {
    if (!chosen.count(k.frame))
      throw ValidationError("detections for frame " + std::to_string(k.frame) + " outside the evaluated frames");
    if (k.cell < 0 || k.cell >= d.grid.size())
      throw ValidationError("detection cell " + std::to_string(k.cell) + " outside the grid");
  }
  if (!a.frames.empty())
    for (auto it = truth.begin(); it != truth.end();) it = chosen.count(it->first) ? std::next(it) : truth.erase(it);

  const auto evals = evaluate(dets, frames, truth, d, c.match, a.match_camera, c.crop);
  const auto report = io::make_report(evals, c.match);
  io::write_text(a.out, io::report_to_json(report).dump(2) + "\n");
  json summary{{"frames", frames.size()},
               {"moda", io::opt_json(report.moda)},
               {"modp", io::opt_json(report.modp)},
               {"precision", io::opt_json(report.precision)},
               {"recall", io::opt_json(report.recall)}};

  if (!a.occupancy.empty()) {
    if (a.roc.empty()) throw ValidationError("--occupancy needs --roc for the output file");
    std::vector<std::pair<double, int>> scored;
    for (const auto& m : io::occupancy_from_csv(io::read_text(a.occupancy))) {
      if (!chosen.count(m.frame_id)) continue;
      if (static_cast<int>(m.q.size()) != d.grid.size())
        throw ValidationError("occupancy map of frame " + std::to_string(m.frame_id) + " has the wrong cell count");
      const auto it = truth.find(m.frame_id);
      std::set<int> occ;
      if (it != truth.end()) occ.insert(it->second.begin(), it->second.end());
      for (std::size_t p = 0; p < m.q.size(); ++p) scored.push_back({m.q[p], occ.count(static_cast<int>(p)) ? 1 : 0});
    }
    const RocCurve roc = roc_auc(scored);
    io::write_text(a.roc, io::roc_to_csv(roc));
    summary["auc"] = roc.auc;
  } else if (!a.roc.empty()) {
    throw ValidationError("--roc needs --occupancy");
  }

  if (!a.sweep.empty()) {
    if (a.candidates.empty()) throw ValidationError("--sweep needs --candidates (the pre-NMS list)");
    const auto cands = io::detections_from_jsonl(io::read_text(a.candidates));
    std::string csv = "nms_threshold,moda,modp,precision,recall\n";
    auto cell = [](const std::optional<double>& v) { return v ? io::format_double(*v) : std::string(); };
    for (double tau : c.nms_sweep) {
      std::vector<DetectionCandidate> kept;
      for (const auto& k : io::nms_by_frame(cands, {tau, c.min_cell_distance, d.grid.cols}))
        if (chosen.count(k.frame)) kept.push_back(k);
      const auto r = io::make_report(evaluate(kept, frames, truth, d, c.match, a.match_camera, c.crop), c.match);
      csv += io::format_double(tau) + "," + cell(r.moda) + "," + cell(r.modp) + "," + cell(r.precision) + "," +
             cell(r.recall) + "\n";
    }
    io::write_text(a.sweep, csv);
  }
  ctx.log("eval", summary);
}

struct NmsArgs {
  std::string in, out;
};

inline void cmd_nms(const Context& ctx, const NmsArgs& a) {
  const RunConfig& c = ctx.config;
  NmsOptions opt{c.nms_threshold, c.min_cell_distance, 0};
  if (c.min_cell_distance > 0) {
    if (c.data.empty() && c.grid.empty()) throw ValidationError("--min-cell-distance needs the grid (--data or --grid)");
    opt.grid_cols = grid_from_json(io::read_json(c.grid_path())).cols;
  }
  const auto dets = io::detections_from_jsonl(io::read_text(a.in));
  const auto kept = io::nms_by_frame(dets, opt);
  io::write_text(a.out, io::detections_to_jsonl(kept));
  ctx.log("nms", {{"input", dets.size()}, {"kept", kept.size()}});
}

struct InspectArgs {
  std::string model;
  std::size_t top_k = 50;
  std::string out;  // empty: the context's output stream
};

/// Per-tree counts of the views used by the first top_k internal nodes, then
/// one "all" row per view summed over trees.
inline std::string forest_view_table(const Forest& f, std::size_t top_k, std::size_t Q, std::size_t C) {
  std::string csv = "tree,view,count,share\n";
  std::vector<std::size_t> total(C, 0);
  auto rows = [&](const std::string& tree, const std::vector<std::size_t>& counts) {
    std::size_t n = 0;
    for (auto v : counts) n += v;
    for (std::size_t c = 0; c < C; ++c)
      csv += tree + "," + std::to_string(c) + "," + std::to_string(counts[c]) + "," +
             io::format_double(n ? static_cast<double>(counts[c]) / static_cast<double>(n) : 0.0) + "\n";
  };
  for (std::size_t k = 0; k < f.trees.size(); ++k) {
    const auto counts = feature_view_distribution(f.trees[k], top_k, Q, C);
    for (std::size_t c = 0; c < C; ++c) total[c] += counts[c];
    rows(std::to_string(k), counts);
  }
  rows("all", total);
  return csv;
}

inline void cmd_inspect_forest(const Context& ctx, const InspectArgs& a) {
  const LoadedModel m = load_model(a.model);
  if (!m.forest) throw ValidationError("'" + a.model + "' holds an MLP head, not a forest");
  const std::string csv = forest_view_table(*m.forest, a.top_k, m.model.feature_dim, m.model.views());
  if (a.out.empty())
    *ctx.out << csv;
  else
    io::write_text(a.out, csv);
}

// ---------------------------------------------------------------------------
// argument parsing

inline void report_error(const Context& ctx, std::ostream& err, const std::string& kind, const std::string& msg) {
  if (ctx.log.out)
    ctx.log("error", {{"kind", kind}, {"message", msg}});
  else
    err << "error: " << msg << "\n";
}

/// Runs one command line; returns the process exit code (0 success, 2 bad
/// input, 1 runtime failure).
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Multi-view pedestrian detection on a ground-plane grid"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "mvdet 1.0");

  std::string config_file, profile;
  std::optional<std::uint64_t> seed;
  bool deterministic = false, quiet = false;
  app.add_option("--config", config_file, "TOML configuration file")->check(CLI::ExistingFile);
  app.add_option("--profile", profile, "Preset: desk, full-mono, full-mv, full");
  app.add_option("--seed", seed, "Random seed");
  app.add_flag("--deterministic", deterministic, "Single-threaded, bit-reproducible execution");
  app.add_flag("-q,--quiet", quiet, "No JSON-lines log on stderr");

  // overrides shared by several commands
  std::optional<std::string> data, calibration, grid, annotations, mask_table, classifier, hard_negatives, optimizer,
      match_mode, crop_mode, input_dropout;
  std::optional<double> score_threshold, nms_threshold, lr, match_radius;
  std::optional<int> min_cell_distance;
  std::optional<std::size_t> depth, epochs, batch_size, n_trees, patience;
  std::optional<std::vector<double>> nms_sweep;
  std::optional<bool> freeze;

  auto data_opts = [&](CLI::App* s) {
    s->add_option("--data", data, "Dataset directory");
    s->add_option("--calibration", calibration, "Calibration file (default <data>/calibration.json)");
    s->add_option("--grid", grid, "Grid file (default <data>/grid.json)");
    s->add_option("--annotations", annotations, "Annotation JSON lines (default <data>/annotations.jsonl)");
  };
  auto train_opts = [&](CLI::App* s) {
    s->add_option("--epochs", epochs, "Training epochs");
    s->add_option("--batch-size", batch_size, "Minibatch size");
    s->add_option("--lr", lr, "Learning rate");
    s->add_option("--optimizer", optimizer, "sgd or adam");
    s->add_option("--patience", patience, "Early-stopping patience in epochs");
    s->add_option("--input-dropout", input_dropout, "on or off")->check(CLI::IsMember({"on", "off"}));
    s->add_option("--mask-table", mask_table, "Occlusion mask table (JSON)");
  };

  SynthArgs synth;
  auto* s_synth = app.add_subcommand("synth", "Render a synthetic dataset");
  s_synth->add_option("--scenario", synth.scenario, "Scenario JSON (default: generated from --seed)");
  s_synth->add_option("--out", synth.out, "Output directory")->required();
  s_synth->add_option("--n-frames", synth.n_frames, "Frames of the generated scenario");
  s_synth->add_option("--n-train-frames", synth.n_train_frames, "Leading frames used for training");
  s_synth->add_option("--min-persons", synth.min_persons, "Fewest persons present at once");
  s_synth->add_option("--max-persons", synth.max_persons, "Most persons present at once");
  s_synth->add_option("--min-separation", synth.min_separation, "Chebyshev cell distance between persons");
  s_synth->add_option("--pillars", synth.pillars, "Static pillars that hide persons in some views");

  TrainArgs mono_args;
  auto* s_mono = app.add_subcommand("train-mono", "Train the monocular classifier");
  data_opts(s_mono);
  train_opts(s_mono);
  s_mono->add_option("--out", mono_args.out, "Checkpoint to write")->required();
  s_mono->add_option("--resume", mono_args.resume, "Continue from this checkpoint")->check(CLI::ExistingFile);
  s_mono->add_option("--log", mono_args.log, "Per-epoch JSON-lines log (default <out>.log.jsonl)");

  TrainArgs mv_args;
  auto* s_mv = app.add_subcommand("train-mv", "Train the multi-view classifier");
  data_opts(s_mv);
  train_opts(s_mv);
  s_mv->add_option("--mono", mv_args.init, "Monocular checkpoint providing the embeddings")->check(CLI::ExistingFile);
  s_mv->add_option("--out", mv_args.out, "Checkpoint to write")->required();
  s_mv->add_option("--resume", mv_args.resume, "Continue from this checkpoint")->check(CLI::ExistingFile);
  s_mv->add_option("--log", mv_args.log, "Per-epoch JSON-lines log (default <out>.log.jsonl)");
  s_mv->add_option("--classifier", classifier, "mlp or forest");
  s_mv->add_option("--depth", depth, "Embedding depth d");
  s_mv->add_option("--hard-negatives", hard_negatives, "none, shift, mix or both");
  s_mv->add_option("--freeze-embeddings", freeze, "Keep the copied embeddings fixed (true/false)");
  s_mv->add_option("--n-trees", n_trees, "Forest size");

  DetectArgs det;
  auto* s_det = app.add_subcommand("detect", "Score every cell and suppress duplicates");
  data_opts(s_det);
  s_det->add_option("--model", det.model, "Multi-view checkpoint")->required()->check(CLI::ExistingFile);
  s_det->add_option("--out", det.out, "Output directory")->required();
  s_det->add_option("--frames", det.frames, "train, test, all or a-b");
  s_det->add_option("--score-threshold", score_threshold, "Candidate threshold on q");
  s_det->add_option("--nms-threshold", nms_threshold, "Suppression IoU threshold");
  s_det->add_option("--min-cell-distance", min_cell_distance, "Optional ground-plane suppression radius in cells");

  EvalArgs ev;
  auto* s_eval = app.add_subcommand("eval", "Score detections against the ground truth");
  data_opts(s_eval);
  s_eval->add_option("--detections", ev.detections, "Detections JSON lines")->required()->check(CLI::ExistingFile);
  s_eval->add_option("--out", ev.out, "Report JSON")->required();
  s_eval->add_option("--frames", ev.frames, "train, test, all or a-b (default: frames seen in the inputs)");
  s_eval->add_option("--occupancy", ev.occupancy, "Occupancy CSV for the ROC curve")->check(CLI::ExistingFile);
  s_eval->add_option("--roc", ev.roc, "ROC CSV to write");
  s_eval->add_option("--candidates", ev.candidates, "Pre-NMS candidates for the sweep")->check(CLI::ExistingFile);
  s_eval->add_option("--sweep", ev.sweep, "Per-threshold metrics CSV to write");
  s_eval->add_option("--nms-sweep", nms_sweep, "Suppression thresholds of the sweep")->delimiter(',');
  s_eval->add_option("--match-mode", match_mode, "ground_distance or bbox_iou");
  s_eval->add_option("--match-radius", match_radius, "Meters, or minimum IoU in bbox_iou mode");
  s_eval->add_option("--match-camera", ev.match_camera, "Camera index for bbox_iou matching");
  s_eval->add_option("--min-cell-distance", min_cell_distance, "Ground-plane suppression radius used by the sweep");

  NmsArgs nms_args;
  auto* s_nms = app.add_subcommand("nms", "Suppress duplicates in a detection list");
  s_nms->add_option("--in", nms_args.in, "Detections JSON lines")->required()->check(CLI::ExistingFile);
  s_nms->add_option("--out", nms_args.out, "Filtered detections")->required();
  s_nms->add_option("--nms-threshold", nms_threshold, "Suppression IoU threshold");
  s_nms->add_option("--min-cell-distance", min_cell_distance, "Optional ground-plane suppression radius in cells");
  s_nms->add_option("--data", data, "Dataset directory (for the grid)");
  s_nms->add_option("--grid", grid, "Grid file");

  InspectArgs insp;
  auto* s_insp = app.add_subcommand("inspect-forest", "Views used by the top nodes of each tree, as CSV");
  s_insp->add_option("--model", insp.model, "Forest checkpoint")->required()->check(CLI::ExistingFile);
  s_insp->add_option("--top-k", insp.top_k, "Internal nodes per tree");
  s_insp->add_option("--out", insp.out, "CSV file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  Context ctx;
  ctx.out = &out;
  if (!quiet) ctx.log.out = &err;
  try {
    std::optional<toml::table> doc;
    if (!config_file.empty()) doc = parse_toml_file(config_file);
    std::string prof = profile;
    if (prof.empty() && doc) detail::take(*doc, "profile", prof, "");
    RunConfig& c = ctx.config;
    c = profile_config(prof.empty() ? "desk" : prof);
    if (doc) apply_toml(*doc, c);
    if (seed) c.seed = *seed;
    c.deterministic = c.deterministic || deterministic;
    if (data) c.data = *data;
    if (calibration) c.calibration = *calibration;
    if (grid) c.grid = *grid;
    if (annotations) c.annotations = *annotations;
    if (mask_table) c.mask_table = *mask_table;
    if (classifier) c.classifier = *classifier;
    if (depth) c.depth = *depth;
    if (n_trees) c.forest.n_trees = *n_trees;
    if (score_threshold) c.score_threshold = *score_threshold;
    if (nms_threshold) c.nms_threshold = *nms_threshold;
    if (min_cell_distance) c.min_cell_distance = *min_cell_distance;
    if (match_mode) c.match.mode = io::match_mode_from_string(*match_mode);
    if (match_radius) c.match.radius = *match_radius;
    if (nms_sweep) c.nms_sweep = *nms_sweep;
    TrainConfig& t = s_mono->parsed() ? c.mono : c.mv;
    if (epochs) t.epochs = *epochs;
    if (batch_size) t.batch_size = *batch_size;
    if (lr) t.lr = *lr;
    if (optimizer) t.optimizer = *optimizer;
    if (patience) t.patience = *patience;
    if (input_dropout) t.input_dropout = *input_dropout == "on";
    if (hard_negatives) c.mv.hard_negatives = *hard_negatives;
    if (freeze) c.mv.freeze_embeddings = *freeze;
    c.validate();

    ctx.log("start", {{"command", app.get_subcommands().front()->get_name()},
                      {"profile", c.profile},
                      {"seed", c.seed},
                      {"deterministic", c.deterministic}});
    if (s_synth->parsed()) cmd_synth(ctx, synth);
    if (s_mono->parsed()) cmd_train_mono(ctx, mono_args);
    if (s_mv->parsed()) cmd_train_mv(ctx, mv_args);
    if (s_det->parsed()) cmd_detect(ctx, det);
    if (s_eval->parsed()) cmd_eval(ctx, ev);
    if (s_nms->parsed()) cmd_nms(ctx, nms_args);
    if (s_insp->parsed()) cmd_inspect_forest(ctx, insp);
    ctx.log("done");
    return 0;
  } catch (const ValidationError& e) {
    report_error(ctx, err, "validation", e.what());
    return 2;
  } catch (const std::exception& e) {
    report_error(ctx, err, "runtime", e.what());
    return 1;
  }
}

}  // namespace mvdet::cli
