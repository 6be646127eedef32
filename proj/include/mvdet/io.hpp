#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mvdet/dataset.hpp"
#include "mvdet/metrics.hpp"
#include "mvdet/multiview.hpp"
#include "mvdet/nms.hpp"
#include "mvdet/synthscene.hpp"

// Text formats of the pipeline's artifacts. Every writer emits a canonical
// form, so reading a file and writing it back reproduces it byte for byte.

namespace mvdet::io {

using json = nlohmann::json;

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const std::string& path, const std::string& text) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw Error("write failed for '" + path + "'");
}

inline json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(what + ": " + e.what());
  }
}

inline json read_json(const std::string& path) { return parse_json(read_text(path), path); }

/// Shortest decimal that reads back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

/// Non-empty lines of a JSON-lines text, each parsed.
inline std::vector<json> parse_jsonl(const std::string& text, const std::string& what) {
  std::vector<json> out;
  std::istringstream in(text);
  std::string line;
  for (int n = 1; std::getline(in, line); ++n) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(parse_json(line, what + " line " + std::to_string(n)));
  }
  return out;
}

template <class T>
T field(const json& j, const char* key, const std::string& what) {
  if (!j.is_object() || !j.contains(key)) throw ValidationError(what + ": missing \"" + key + "\"");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(what + ": bad value for \"" + key + "\"");
  }
}

// ---------------------------------------------------------------------------
// annotations: {"frame", "cell", "person"} per line

inline std::string annotations_to_jsonl(const std::vector<Annotation>& anns) {
  std::string out;
  for (const auto& a : anns) out += json{{"frame", a.frame}, {"cell", a.cell}, {"person", a.person}}.dump() + "\n";
  return out;
}

inline std::vector<Annotation> annotations_from_jsonl(const std::string& text) {
  std::vector<Annotation> out;
  for (const auto& j : parse_jsonl(text, "annotations"))
    out.push_back({field<int>(j, "frame", "annotation"), field<int>(j, "cell", "annotation"),
                   field<int>(j, "person", "annotation")});
  return out;
}

// ---------------------------------------------------------------------------
// occupancy: CSV frame,cell,q

inline std::string occupancy_to_csv(const std::vector<OccupancyMap>& maps) {
  std::string out = "frame,cell,q\n";
  for (const auto& m : maps)
    for (std::size_t p = 0; p < m.q.size(); ++p)
      out += std::to_string(m.frame_id) + "," + std::to_string(p) + "," + format_double(m.q[p]) + "\n";
  return out;
}

inline std::vector<OccupancyMap> occupancy_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "frame,cell,q") throw ValidationError("occupancy CSV: bad header");
  std::vector<OccupancyMap> out;
  for (int n = 2; std::getline(in, line); ++n) {
    if (line.empty()) continue;
    int frame = 0, cell = 0;
    double q = 0;
    char tail = 0;
    if (std::sscanf(line.c_str(), "%d,%d,%lf%c", &frame, &cell, &q, &tail) != 3)
      throw ValidationError("occupancy CSV line " + std::to_string(n) + ": expected frame,cell,q");
    if (out.empty() || out.back().frame_id != frame) out.push_back({frame, {}});
    if (cell != static_cast<int>(out.back().q.size()))
      throw ValidationError("occupancy CSV line " + std::to_string(n) + ": cells must be listed in order");
    out.back().q.push_back(q);
  }
  return out;
}

// ---------------------------------------------------------------------------
// detections: {"frame", "cell", "score", "rects": [[x0,y0,x1,y1] | null, ...]}

inline json rect_to_json(const CropRect& r) {
  if (!r.visible) return nullptr;
  return json::array({r.x0, r.y0, r.x1, r.y1});
}

inline CropRect rect_from_json(const json& j) {
  if (j.is_null()) return {};
  if (!j.is_array() || j.size() != 4) throw ValidationError("rectangle must be [x0,y0,x1,y1] or null");
  for (const auto& v : j)
    if (!v.is_number()) throw ValidationError("rectangle coordinates must be numbers");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>(), true};
}

inline json detection_to_json(const DetectionCandidate& d) {
  json rects = json::array();
  for (const auto& r : d.rects) rects.push_back(rect_to_json(r));
  return {{"frame", d.frame}, {"cell", d.cell}, {"score", d.score}, {"rects", rects}};
}

inline DetectionCandidate detection_from_json(const json& j) {
  DetectionCandidate d{field<int>(j, "frame", "detection"), field<int>(j, "cell", "detection"),
                       field<double>(j, "score", "detection"), {}};
  if (!j.contains("rects") || !j["rects"].is_array()) throw ValidationError("detection: \"rects\" must be a list");
  for (const auto& r : j["rects"]) d.rects.push_back(rect_from_json(r));
  return d;
}

inline std::string detections_to_jsonl(const std::vector<DetectionCandidate>& dets) {
  std::string out;
  for (const auto& d : dets) out += detection_to_json(d).dump() + "\n";
  return out;
}

inline std::vector<DetectionCandidate> detections_from_jsonl(const std::string& text) {
  std::vector<DetectionCandidate> out;
  for (const auto& j : parse_jsonl(text, "detections")) out.push_back(detection_from_json(j));
  return out;
}

/// Per-frame NMS over a mixed list; frames keep their first-seen order.
inline std::vector<DetectionCandidate> nms_by_frame(const std::vector<DetectionCandidate>& dets,
                                                    const NmsOptions& opt) {
  std::vector<int> order;
  std::map<int, std::vector<DetectionCandidate>> groups;
  for (const auto& d : dets) {
    if (!groups.count(d.frame)) order.push_back(d.frame);
    groups[d.frame].push_back(d);
  }
  std::vector<DetectionCandidate> out;
  for (int f : order)
    for (auto& k : score_weighted_nms(groups[f], opt)) out.push_back(std::move(k));
  return out;
}

// ---------------------------------------------------------------------------
// calibration and grid

inline std::string calibrations_to_json(const std::vector<CameraCalibration>& cams) {
  json j = json::array();
  for (const auto& c : cams) j.push_back(calibration_to_json(c));
  return j.dump(2) + "\n";
}

/// A list of camera objects or a single one; result sorted by camera_id.
inline std::vector<CameraCalibration> calibrations_from_json(const json& j) {
  std::vector<CameraCalibration> cams;
  if (j.is_array())
    for (const auto& c : j) cams.push_back(calibration_from_json(c));
  else
    cams.push_back(calibration_from_json(j));
  std::sort(cams.begin(), cams.end(), [](const auto& a, const auto& b) { return a.camera_id < b.camera_id; });
  for (std::size_t i = 1; i < cams.size(); ++i)
    if (cams[i].camera_id == cams[i - 1].camera_id)
      throw ValidationError("duplicate camera_id " + std::to_string(cams[i].camera_id));
  return cams;
}

// ---------------------------------------------------------------------------
// evaluation

inline std::string to_string(MatchMode m) { return m == MatchMode::ground_distance ? "ground_distance" : "bbox_iou"; }

inline MatchMode match_mode_from_string(const std::string& s) {
  if (s == "ground_distance") return MatchMode::ground_distance;
  if (s == "bbox_iou") return MatchMode::bbox_iou;
  throw ValidationError("unknown match mode '" + s + "'");
}

struct EvalReport {
  std::optional<double> moda, modp, precision, recall;
  int modp_frames_without_matches = 0;
  MatchConfig match;
  std::vector<FrameEval> frames;
};

inline EvalReport make_report(const std::vector<FrameEval>& frames, const MatchConfig& match) {
  EvalReport r;
  r.match = match;
  r.frames = frames;
  const Totals t = totals(frames);
  if (t.tp + t.fn > 0) r.moda = moda(frames);
  for (const auto& f : frames) r.modp_frames_without_matches += f.tp == 0;
  if (t.tp > 0) r.modp = modp(frames);
  if (t.tp + t.fp > 0) r.precision = static_cast<double>(t.tp) / static_cast<double>(t.tp + t.fp);
  if (t.tp + t.fn > 0) r.recall = static_cast<double>(t.tp) / static_cast<double>(t.tp + t.fn);
  return r;
}

inline json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

inline std::optional<double> opt_from_json(const json& j, const char* key) {
  if (!j.contains(key)) throw ValidationError(std::string("report: missing \"") + key + "\"");
  if (j[key].is_null()) return std::nullopt;
  if (!j[key].is_number()) throw ValidationError(std::string("report: bad value for \"") + key + "\"");
  return j[key].get<double>();
}

/// Undefined metrics are null. MODP averages the frames with at least one
/// match; the others are counted separately.
inline json report_to_json(const EvalReport& r) {
  json frames = json::array();
  for (const auto& f : r.frames) {
    json scores = json::array();
    for (double s : f.matched_scores) scores.push_back(s);
    frames.push_back({{"frame", f.frame_id}, {"tp", f.tp}, {"fp", f.fp}, {"fn", f.fn}, {"match_scores", scores}});
  }
  return {{"moda", opt_json(r.moda)},
          {"modp", opt_json(r.modp)},
          {"precision", opt_json(r.precision)},
          {"recall", opt_json(r.recall)},
          {"modp_mode", "mean over frames with matches"},
          {"modp_frames_without_matches", r.modp_frames_without_matches},
          {"match", {{"mode", to_string(r.match.mode)}, {"radius", r.match.radius}}},
          {"frames", frames}};
}

inline EvalReport report_from_json(const json& j) {
  EvalReport r;
  r.moda = opt_from_json(j, "moda");
  r.modp = opt_from_json(j, "modp");
  r.precision = opt_from_json(j, "precision");
  r.recall = opt_from_json(j, "recall");
  r.modp_frames_without_matches = field<int>(j, "modp_frames_without_matches", "report");
  const json m = field<json>(j, "match", "report");
  r.match = {match_mode_from_string(field<std::string>(m, "mode", "report match")),
             field<double>(m, "radius", "report match")};
  for (const auto& f : field<json>(j, "frames", "report")) {
    FrameEval e;
    e.frame_id = field<int>(f, "frame", "report frame");
    e.tp = field<int>(f, "tp", "report frame");
    e.fp = field<int>(f, "fp", "report frame");
    e.fn = field<int>(f, "fn", "report frame");
    e.matched_scores = field<std::vector<double>>(f, "match_scores", "report frame");
    r.frames.push_back(std::move(e));
  }
  return r;
}

inline std::string roc_to_csv(const RocCurve& c) {
  std::string out = "threshold,tpr,fpr\n";
  for (const auto& p : c.points)
    out += (std::isinf(p.threshold) ? std::string("inf") : format_double(p.threshold)) + "," + format_double(p.tpr) +
           "," + format_double(p.fpr) + "\n";
  return out;
}

inline RocCurve roc_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "threshold,tpr,fpr") throw ValidationError("ROC CSV: bad header");
  RocCurve c;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    RocPoint p;
    char tail = 0;
    if (line.rfind("inf,", 0) == 0) {
      p.threshold = std::numeric_limits<double>::infinity();
      if (std::sscanf(line.c_str() + 4, "%lf,%lf%c", &p.tpr, &p.fpr, &tail) != 2)
        throw ValidationError("ROC CSV: bad row '" + line + "'");
    } else if (std::sscanf(line.c_str(), "%lf,%lf,%lf%c", &p.threshold, &p.tpr, &p.fpr, &tail) != 3) {
      throw ValidationError("ROC CSV: bad row '" + line + "'");
    }
    if (!c.points.empty()) {
      const auto& prev = c.points.back();
      c.auc += (p.fpr - prev.fpr) * (p.tpr + prev.tpr) / 2.0;
    }
    c.points.push_back(p);
  }
  return c;
}

}  // namespace mvdet::io
