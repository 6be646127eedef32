#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "mvdet/cli.hpp"

using namespace mvdet;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "mvdet");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) { return io::read_text(p.string()); }

std::vector<json> log_events(const std::string& err, const std::string& event) {
  std::vector<json> out;
  for (const auto& j : io::parse_jsonl(err, "log"))
    if (j["event"] == event) out.push_back(j);
  return out;
}

/// A small dataset, a monocular and a multi-view model shared by the tests.
class CliPipeline : public ::testing::Test {
 protected:
  static fs::path dir;

  static void SetUpTestSuite() {
    dir = fs::temp_directory_path() / "mvdet_cli_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
    ASSERT_EQ(run({"-q", "--seed", "2", "synth", "--out", p("ds"), "--n-frames", "14", "--n-train-frames", "10"}).code,
              0);
    ASSERT_EQ(run({"-q", "--seed", "2", "train-mono", "--data", p("ds"), "--out", p("mono.ck"), "--epochs", "2"}).code,
              0);
    ASSERT_EQ(run({"-q", "--seed", "2", "train-mv", "--data", p("ds"), "--mono", p("mono.ck"), "--out", p("mv.ck"),
                   "--epochs", "3"})
                  .code,
              0);
  }
  static void TearDownTestSuite() { fs::remove_all(dir); }
  static std::string p(const std::string& name) { return (dir / name).string(); }
};

fs::path CliPipeline::dir;

}  // namespace

TEST_F(CliPipeline, SynthWritesOneImagePerFrameAndCamera) {
  std::size_t pngs = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir / "ds")) pngs += e.path().extension() == ".png";
  EXPECT_EQ(pngs, 14u * 3u);
  const auto meta = io::read_json(p("ds/dataset.json"));
  EXPECT_EQ(meta["train"].size(), 10u);
  EXPECT_EQ(meta["test"].size(), 4u);
  const auto anns = io::annotations_from_jsonl(slurp(dir / "ds/annotations.jsonl"));
  const auto spec = scenario_from_json(io::read_json(p("ds/scenario.json")));
  EXPECT_EQ(anns, scenario_annotations(spec));
  EXPECT_EQ(spec.cameras, io::calibrations_from_json(io::read_json(p("ds/calibration.json"))));
  EXPECT_EQ(read_png(p("ds/cam1/frame00003.png")).rgb, render_frame(spec, 3).images[1].rgb);
}

TEST_F(CliPipeline, SynthIsReproducible) {
  ASSERT_EQ(run({"-q", "--seed", "2", "synth", "--out", p("ds2"), "--n-frames", "14", "--n-train-frames", "10"}).code,
            0);
  for (const auto& e : fs::recursive_directory_iterator(dir / "ds")) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), dir / "ds");
    EXPECT_EQ(slurp(e.path()), slurp(dir / "ds2" / rel)) << rel;
  }
  ASSERT_EQ(run({"-q", "--seed", "3", "synth", "--out", p("ds3"), "--n-frames", "14"}).code, 0);
  EXPECT_NE(slurp(dir / "ds/annotations.jsonl"), slurp(dir / "ds3/annotations.jsonl"));
}

TEST_F(CliPipeline, SynthSceneOptions) {
  ASSERT_EQ(run({"-q", "--seed", "2", "synth", "--out", p("pillars"), "--n-frames", "6", "--pillars", "2",
                 "--min-persons", "5", "--max-persons", "6", "--min-separation", "1"})
                .code,
            0);
  const auto spec = scenario_from_json(io::read_json(p("pillars/scenario.json")));
  EXPECT_EQ(spec.occluders.size(), 2u);
  for (int t = 0; t < spec.n_frames; ++t) EXPECT_GE(frame_truth(spec, t).size(), 5u);
  EXPECT_EQ(run({"-q", "synth", "--scenario", p("pillars/scenario.json"), "--out", p("x"), "--pillars", "1"}).code,
            2);
  EXPECT_EQ(run({"-q", "synth", "--out", p("x"), "--n-frames", "4", "--pillars", "50"}).code, 2);
}

TEST_F(CliPipeline, EmptyScenarioGivesValidEmptyDataset) {
  auto spec = scenario_from_json(io::read_json(p("ds/scenario.json")));
  spec.persons.clear();
  io::write_text(p("empty.json"), scenario_to_json(spec).dump());
  const auto r = run({"synth", "--scenario", p("empty.json"), "--out", p("empty")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(dir / "empty/annotations.jsonl"), "");
  EXPECT_EQ(log_events(r.err, "synth").at(0)["annotations"], 0);
  EXPECT_EQ(log_events(r.err, "synth").at(0)["images"], 14 * 3);
  EXPECT_TRUE(fs::exists(dir / "empty/cam2/frame00013.png"));
}

TEST_F(CliPipeline, TrainingLogHasOneRowPerEpoch) {
  const auto rows = io::parse_jsonl(slurp(dir / "mono.ck.log.jsonl"), "log");
  ASSERT_EQ(rows.size(), 2u);
  for (const char* k : {"epoch", "train_loss", "val_loss", "val_accuracy"}) EXPECT_TRUE(rows[0].contains(k)) << k;
  EXPECT_EQ(io::parse_jsonl(slurp(dir / "mv.ck.log.jsonl"), "log").size(), 3u);
}

TEST_F(CliPipeline, ResumeContinuesEpochNumbering) {
  const auto r = run({"--seed", "2", "train-mono", "--data", p("ds"), "--out", p("mono_b.ck"), "--resume",
                      p("mono.ck"), "--epochs", "2", "--log", p("resume.jsonl")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = io::parse_jsonl(slurp(dir / "resume.jsonl"), "log");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0]["epoch"], 3);
  EXPECT_EQ(rows[1]["epoch"], 4);
  EXPECT_EQ(nn::CheckpointReader(p("mono_b.ck")).header()["epochs_done"], 4);

  ASSERT_EQ(run({"-q", "--seed", "2", "train-mv", "--data", p("ds"), "--out", p("mv_b.ck"), "--resume", p("mv.ck"),
                 "--epochs", "1", "--log", p("resume_mv.jsonl")})
                .code,
            0);
  EXPECT_EQ(io::parse_jsonl(slurp(dir / "resume_mv.jsonl"), "log").at(0)["epoch"], 4);
}

TEST_F(CliPipeline, TrainingIsReproducible) {
  ASSERT_EQ(run({"-q", "--seed", "2", "--deterministic", "train-mono", "--data", p("ds"), "--out", p("mono_c.ck"),
                 "--epochs", "2"})
                .code,
            0);
  EXPECT_EQ(slurp(dir / "mono.ck"), slurp(dir / "mono_c.ck"));
  EXPECT_EQ(slurp(dir / "mono.ck.log.jsonl"), slurp(dir / "mono_c.ck.log.jsonl"));
}

TEST_F(CliPipeline, DetectOutputs) {
  const auto r = run({"detect", "--data", p("ds"), "--model", p("mv.ck"), "--out", p("det")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto maps = io::occupancy_from_csv(slurp(dir / "det/occupancy.csv"));
  ASSERT_EQ(maps.size(), 4u);
  for (const auto& m : maps) EXPECT_EQ(m.q.size(), 144u);
  const auto pre = io::detections_from_jsonl(slurp(dir / "det/candidates.jsonl"));
  const auto post = io::detections_from_jsonl(slurp(dir / "det/detections.jsonl"));
  EXPECT_GE(pre.size(), post.size());
  for (const auto& d : post) {
    EXPECT_GE(d.score, 0.5);
    EXPECT_EQ(d.rects.size(), 3u);
    EXPECT_EQ(d.score, maps.at(static_cast<std::size_t>(d.frame - 10)).q.at(static_cast<std::size_t>(d.cell)));
  }
  // every line carries exactly the documented keys
  for (const auto& j : io::parse_jsonl(slurp(dir / "det/detections.jsonl"), "det")) {
    EXPECT_EQ(j.size(), 4u);
    for (const auto& rect : j["rects"]) EXPECT_TRUE(rect.is_null() || rect.size() == 4u);
  }
  EXPECT_EQ(log_events(r.err, "detect").at(0)["candidates"], pre.size());
}

TEST_F(CliPipeline, ScoreThresholdAboveOneGivesNoDetections) {
  ASSERT_EQ(run({"-q", "detect", "--data", p("ds"), "--model", p("mv.ck"), "--out", p("det_hi"), "--score-threshold",
                 "1.01", "--frames", "all"})
                .code,
            0);
  EXPECT_EQ(slurp(dir / "det_hi/detections.jsonl"), "");
  const auto maps = io::occupancy_from_csv(slurp(dir / "det_hi/occupancy.csv"));
  EXPECT_EQ(maps.size(), 14u);
}

TEST_F(CliPipeline, EvalOfGroundTruthIsPerfect) {
  const auto spec = scenario_from_json(io::read_json(p("ds/scenario.json")));
  std::vector<DetectionCandidate> gt;
  for (int t : spec.test_frames())
    for (const auto& a : frame_truth(spec, t)) gt.push_back({t, a.cell, 1.0, cell_rects(spec.cameras, spec.grid, a.cell)});
  io::write_text(p("gt.jsonl"), io::detections_to_jsonl(gt));
  ASSERT_EQ(run({"-q", "eval", "--data", p("ds"), "--detections", p("gt.jsonl"), "--frames", "test", "--out",
                 p("gt_report.json"), "--candidates", p("gt.jsonl"), "--sweep", p("gt_sweep.csv"), "--nms-sweep",
                 "0.2,0.4,0.6"})
                .code,
            0);
  const auto rep = io::read_json(p("gt_report.json"));
  EXPECT_EQ(rep["moda"], 1.0);
  EXPECT_EQ(rep["precision"], 1.0);
  EXPECT_EQ(rep["recall"], 1.0);
  const std::string sweep = slurp(dir / "gt_sweep.csv");
  EXPECT_EQ(std::count(sweep.begin(), sweep.end(), '\n'), 4);
}

TEST_F(CliPipeline, EvalMatchesDirectMetricCalls) {
  ASSERT_EQ(run({"-q", "detect", "--data", p("ds"), "--model", p("mv.ck"), "--out", p("det2"), "--score-threshold",
                 "0.3"})
                .code,
            0);
  const auto r = run({"-q", "eval", "--data", p("ds"), "--detections", p("det2/detections.jsonl"), "--frames", "test",
                      "--out", p("rep.json"), "--occupancy", p("det2/occupancy.csv"), "--roc", p("roc.csv"),
                      "--candidates", p("det2/candidates.jsonl"), "--sweep", p("sweep.csv")});
  ASSERT_EQ(r.code, 0) << r.err;

  const auto spec = scenario_from_json(io::read_json(p("ds/scenario.json")));
  const auto dets = io::detections_from_jsonl(slurp(dir / "det2/detections.jsonl"));
  std::vector<FrameEval> evals;
  std::vector<std::pair<double, int>> scored;
  const auto maps = io::occupancy_from_csv(slurp(dir / "det2/occupancy.csv"));
  for (int t : spec.test_frames()) {
    std::vector<int> dc, gc;
    for (const auto& d : dets)
      if (d.frame == t) dc.push_back(d.cell);
    for (const auto& a : frame_truth(spec, t)) gc.push_back(a.cell);
    evals.push_back(match_frame(t, dc, gc, spec.grid));
    const auto& q = maps.at(static_cast<std::size_t>(t - 10)).q;
    for (int c = 0; c < 144; ++c)
      scored.push_back({q[static_cast<std::size_t>(c)], std::count(gc.begin(), gc.end(), c) ? 1 : 0});
  }
  const auto rep = io::report_from_json(io::read_json(p("rep.json")));
  EXPECT_EQ(*rep.moda, moda(evals));
  const auto [P, R] = precision_recall(evals);
  EXPECT_EQ(*rep.precision, P);
  EXPECT_EQ(*rep.recall, R);
  if (totals(evals).tp > 0) {
    EXPECT_EQ(*rep.modp, modp(evals));
  }
  EXPECT_EQ(rep.frames.size(), 4u);
  const auto roc = roc_auc(scored);
  EXPECT_EQ(io::roc_to_csv(roc), slurp(dir / "roc.csv"));

  const std::string sweep = slurp(dir / "sweep.csv");
  EXPECT_EQ(std::count(sweep.begin(), sweep.end(), '\n'), 10);
  EXPECT_NE(sweep.find("\n0.4," + io::format_double(*rep.moda) + ","), std::string::npos);
}

TEST_F(CliPipeline, NmsCommandMatchesDetect) {
  ASSERT_EQ(run({"-q", "detect", "--data", p("ds"), "--model", p("mv.ck"), "--out", p("det3"), "--score-threshold",
                 "0.2", "--nms-threshold", "0.3"})
                .code,
            0);
  ASSERT_EQ(run({"-q", "nms", "--in", p("det3/candidates.jsonl"), "--out", p("nms.jsonl"), "--nms-threshold", "0.3"})
                .code,
            0);
  EXPECT_TRUE(slurp(dir / "nms.jsonl") == slurp(dir / "det3/detections.jsonl"));
  ASSERT_EQ(run({"-q", "nms", "--in", p("det3/candidates.jsonl"), "--out", p("nms1.jsonl"), "--nms-threshold", "1"})
                .code,
            0);
  // nothing suppressed; only the order changes to descending score
  auto all = io::detections_from_jsonl(slurp(dir / "det3/candidates.jsonl"));
  auto kept = io::detections_from_jsonl(slurp(dir / "nms1.jsonl"));
  auto key = [](const DetectionCandidate& a, const DetectionCandidate& b) {
    return std::pair(a.frame, a.cell) < std::pair(b.frame, b.cell);
  };
  std::sort(all.begin(), all.end(), key);
  std::sort(kept.begin(), kept.end(), key);
  EXPECT_TRUE(all == kept);
  EXPECT_EQ(run({"-q", "nms", "--in", p("det3/candidates.jsonl"), "--out", p("x.jsonl"), "--min-cell-distance", "2"})
                .code,
            2);
  EXPECT_EQ(run({"-q", "nms", "--in", p("det3/candidates.jsonl"), "--out", p("x.jsonl"), "--min-cell-distance", "2",
                 "--data", p("ds")})
                .code,
            0);
}

TEST_F(CliPipeline, ForestCheckpointAndInspection) {
  const auto r = run({"-q", "--seed", "2", "train-mv", "--data", p("ds"), "--mono", p("mono.ck"), "--out",
                      p("forest.ck"), "--classifier", "forest", "--n-trees", "4"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto m = cli::load_model(p("forest.ck"));
  ASSERT_TRUE(m.forest);
  EXPECT_EQ(m.forest->trees.size(), 4u);
  const auto res = run({"-q", "inspect-forest", "--model", p("forest.ck"), "--top-k", "5"});
  ASSERT_EQ(res.code, 0);
  std::istringstream csv(res.out);
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "tree,view,count,share");
  std::vector<std::size_t> total(3, 0);
  for (std::size_t k = 0; k < 4; ++k) {
    const auto counts = feature_view_distribution(m.forest->trees[k], 5, 1024, 3);
    for (std::size_t c = 0; c < 3; ++c) {
      std::getline(csv, line);
      EXPECT_EQ(line.substr(0, line.rfind(',')),
                std::to_string(k) + "," + std::to_string(c) + "," + std::to_string(counts[c]));
      total[c] += counts[c];
    }
  }
  std::getline(csv, line);
  EXPECT_EQ(line.substr(0, line.rfind(',')), "all,0," + std::to_string(total[0]));
  EXPECT_EQ(run({"-q", "inspect-forest", "--model", p("mv.ck")}).code, 2);
  EXPECT_EQ(run({"-q", "detect", "--data", p("ds"), "--model", p("forest.ck"), "--out", p("detf")}).code, 0);
  EXPECT_EQ(run({"-q", "train-mv", "--data", p("ds"), "--out", p("x.ck"), "--resume", p("forest.ck")}).code, 2);
}

TEST_F(CliPipeline, EmittedFilesRoundTrip) {
  ASSERT_EQ(run({"-q", "detect", "--data", p("ds"), "--model", p("mv.ck"), "--out", p("det4"), "--score-threshold",
                 "0.3"})
                .code,
            0);
  for (const char* f : {"det4/detections.jsonl", "det4/candidates.jsonl"})
    EXPECT_EQ(io::detections_to_jsonl(io::detections_from_jsonl(slurp(dir / f))), slurp(dir / f));
  EXPECT_EQ(io::occupancy_to_csv(io::occupancy_from_csv(slurp(dir / "det4/occupancy.csv"))),
            slurp(dir / "det4/occupancy.csv"));
  EXPECT_EQ(io::annotations_to_jsonl(io::annotations_from_jsonl(slurp(dir / "ds/annotations.jsonl"))),
            slurp(dir / "ds/annotations.jsonl"));
  EXPECT_EQ(io::calibrations_to_json(io::calibrations_from_json(io::read_json(p("ds/calibration.json")))),
            slurp(dir / "ds/calibration.json"));
  EXPECT_EQ(grid_to_json(grid_from_json(io::read_json(p("ds/grid.json")))).dump(2) + "\n", slurp(dir / "ds/grid.json"));
  EXPECT_EQ(scenario_to_json(scenario_from_json(io::read_json(p("ds/scenario.json")))).dump() + "\n",
            slurp(dir / "ds/scenario.json"));
  ASSERT_EQ(run({"-q", "eval", "--data", p("ds"), "--detections", p("det4/detections.jsonl"), "--out", p("r4.json"),
                 "--occupancy", p("det4/occupancy.csv"), "--roc", p("r4.csv")})
                .code,
            0);
  EXPECT_EQ(io::report_to_json(io::report_from_json(io::read_json(p("r4.json")))).dump(2) + "\n",
            slurp(dir / "r4.json"));
  EXPECT_EQ(io::roc_to_csv(io::roc_from_csv(slurp(dir / "r4.csv"))), slurp(dir / "r4.csv"));
  // checkpoints: load then save reproduces the file
  cli::save_model(p("mv_copy.ck"), cli::load_model(p("mv.ck")));
  EXPECT_EQ(slurp(dir / "mv_copy.ck"), slurp(dir / "mv.ck"));
}

TEST_F(CliPipeline, ExitCodes) {
  EXPECT_EQ(run({"-q", "detect", "--data", p("nowhere"), "--model", p("mv.ck"), "--out", p("x")}).code, 2);
  EXPECT_EQ(run({"-q", "detect", "--data", p("ds"), "--model", p("mono.ck"), "--out", p("x")}).code, 2);
  EXPECT_EQ(run({"-q", "detect", "--data", p("ds"), "--model", p("mv.ck"), "--out", p("x"), "--frames", "99"}).code, 2);
  EXPECT_EQ(run({"-q", "train-mv", "--data", p("ds"), "--out", p("x.ck")}).code, 2);
  EXPECT_EQ(run({"-q", "train-mono", "--data", p("ds"), "--out", p("x.ck"), "--lr", "-1"}).code, 2);
  EXPECT_EQ(run({"-q", "--profile", "fast", "train-mono", "--data", p("ds"), "--out", p("x.ck")}).code, 2);
  EXPECT_EQ(run({"-q"}).code, 2);
  EXPECT_EQ(run({"--help"}).code, 0);
  // an unwritable output is a runtime failure
  io::write_text(p("blocker"), "");
  io::write_text(p("one.jsonl"), R"({"cell":1,"frame":0,"rects":[[1,2,3,4],null,null],"score":0.5})" "\n");
  EXPECT_EQ(run({"-q", "nms", "--in", p("one.jsonl"), "--out", p("one_out.jsonl")}).code, 0);
  EXPECT_EQ(run({"-q", "nms", "--in", p("one.jsonl"), "--out", p("blocker/x.jsonl")}).code, 1);
  // a corrupt image is bad input
  auto img = slurp(dir / "ds/cam0/frame00011.png");
  io::write_text(p("ds_bad/x"), "");
  fs::copy(dir / "ds", dir / "ds_bad", fs::copy_options::recursive | fs::copy_options::overwrite_existing);
  io::write_text(p("ds_bad/cam0/frame00011.png"), img.substr(0, 40));
  EXPECT_EQ(run({"-q", "detect", "--data", p("ds_bad"), "--model", p("mv.ck"), "--out", p("x")}).code, 2);
}

TEST(CliConfig, ProfilesAndOverrides) {
  const auto desk = cli::profile_config("desk");
  EXPECT_EQ(desk.mono.optimizer, "adam");
  EXPECT_EQ(desk.mv.epochs, 60u);
  const auto full = cli::profile_config("full-mono");
  EXPECT_EQ(full.mono.optimizer, "sgd");
  EXPECT_DOUBLE_EQ(full.mono.lr, 0.005);
  EXPECT_DOUBLE_EQ(full.mono.momentum, 0.9);
  EXPECT_EQ(full.mono.batch_size, 64u);
  EXPECT_DOUBLE_EQ(full.mono.r, 0.33);
  EXPECT_EQ(full.mono.epochs, 60u);
  EXPECT_EQ(cli::profile_config("full-mv").head_hidden, nn::kFullHeadHidden);
  EXPECT_EQ(desk.crop.trim_px, 0u);
  EXPECT_EQ(full.crop.trim_px, 7u);
  EXPECT_THROW(cli::profile_config("nope"), ValidationError);

  cli::RunConfig c = desk;
  cli::apply_toml(toml::parse(R"(
seed = 9
[model]
depth = 5
head_hidden = [32]
[train_mv]
hard_negatives = "mix"
lr = 0.01
[detect]
nms_threshold = 0.3
[eval]
match_mode = "bbox_iou"
match_radius = 0.5
nms_sweep = [0.25, 0.75]
)"),
                  c);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.depth, 5u);
  EXPECT_EQ(c.head_hidden, (std::vector<std::size_t>{32}));
  EXPECT_EQ(c.mv.hard_negatives, "mix");
  EXPECT_DOUBLE_EQ(c.mv.lr, 0.01);
  EXPECT_DOUBLE_EQ(c.nms_threshold, 0.3);
  EXPECT_EQ(c.match.mode, MatchMode::bbox_iou);
  EXPECT_EQ(c.nms_sweep, (std::vector<double>{0.25, 0.75}));
  c.validate();

  EXPECT_THROW(cli::apply_toml(toml::parse("[model]\ndepth = \"x\""), c), ValidationError);
  EXPECT_THROW(cli::apply_toml(toml::parse("[train_mono]\nepochs = -1"), c), ValidationError);
  EXPECT_THROW(cli::apply_toml(toml::parse("colour = 1"), c), ValidationError);
  c.mv.hard_negatives = "all";
  EXPECT_THROW(c.validate(), ValidationError);
}

TEST(CliConfig, FlagsOverrideConfigFile) {
  const auto dir = fs::temp_directory_path() / "mvdet_cli_cfg";
  fs::remove_all(dir);
  fs::create_directories(dir);
  io::write_text((dir / "c.toml").string(), "profile = \"full\"\nseed = 4\n[detect]\nnms_threshold = 2.0\n");
  // the file's invalid threshold is replaced by the flag before validation
  const auto bad = run({"--config", (dir / "c.toml").string(), "nms", "--in", (dir / "none").string(), "--out", "x"});
  EXPECT_EQ(bad.code, 2);
  io::write_text((dir / "d.jsonl").string(), "");
  const auto ok = run({"--config", (dir / "c.toml").string(), "--seed", "6", "nms", "--in", (dir / "d.jsonl").string(),
                       "--out", (dir / "o.jsonl").string(), "--nms-threshold", "0.5"});
  ASSERT_EQ(ok.code, 0) << ok.err;
  const auto start = log_events(ok.err, "start").at(0);
  EXPECT_EQ(start["profile"], "full");
  EXPECT_EQ(start["seed"], 6);
  const auto invalid = run({"--config", (dir / "c.toml").string(), "nms", "--in", (dir / "d.jsonl").string(), "--out",
                            (dir / "o.jsonl").string()});
  EXPECT_EQ(invalid.code, 2);
  EXPECT_NE(invalid.err.find("nms_threshold"), std::string::npos);
  io::write_text((dir / "broken.toml").string(), "seed = = 3\n");
  EXPECT_EQ(run({"--config", (dir / "broken.toml").string(), "nms", "--in", (dir / "d.jsonl").string(), "--out",
                 (dir / "o.jsonl").string()})
                .code,
            2);
  fs::remove_all(dir);
}
