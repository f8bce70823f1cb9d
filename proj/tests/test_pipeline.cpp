#include <gtest/gtest.h>

#include <filesystem>

#include "dextac/errors.hpp"
#include "dextac/pipeline.hpp"
#include "support.hpp"

using namespace dextac;
namespace fs = std::filesystem;

namespace {

fs::path small_bundle(const std::string& name) {
  const fs::path dir = dextac::testing::scratch_dir(name) / "bundle";
  SyntheticScenario sc;
  sc.pose_samples = 45;
  write_synthetic_bundle(dir, generate_synthetic_demo(sc, 4));
  return dir;
}

}  // namespace

TEST(Pipeline, ConfigDefaultsAndOverrides) {
  PipelineConfig d = parse_pipeline_config("{}");
  EXPECT_EQ(d.on_frame_error, FrameErrorPolicy::kAbort);
  EXPECT_EQ(d.dex_model.builtin, "synthetic_hand");
  EXPECT_EQ(d.dex_model.scale, 0.9);

  PipelineConfig c = parse_pipeline_config(R"({
    "rate": 15, "on_frame_error": "skip", "workers": 3,
    "dex_model": {"builtin": "synthetic_hand", "scale": 0.8},
    "arm_model": "arm.urdf",
    "retarget": {"lambda_dir": 0, "attenuation": {"convention": "verbatim", "beta": 0.01}, "correspondence": "same_name"},
    "ik": {"tol_pos": 1e-5, "seed": [0, 1, 2, 3, 4, 5]},
    "align": {"hand_mount": [[1,0,0,0],[0,1,0,0],[0,0,1,0.1],[0,0,0,1]]},
    "dataset": {"heatmap": "layout.json", "task": "lift"}
  })", "/cfg");
  EXPECT_EQ(c.rate, 15.0);
  EXPECT_EQ(c.on_frame_error, FrameErrorPolicy::kSkip);
  EXPECT_EQ(c.workers, 3u);
  EXPECT_EQ(c.dex_model.scale, 0.8);
  EXPECT_EQ(c.arm_model.path, fs::path("/cfg/arm.urdf"));
  EXPECT_EQ(c.retarget.lambda_dir, 0.0);
  EXPECT_EQ(c.retarget.attenuation.convention, AttenuationConvention::kVerbatim);
  EXPECT_EQ(c.retarget.attenuation.beta, 0.01);
  EXPECT_EQ(c.correspondence, "same_name");
  EXPECT_EQ(c.ik.tol_pos, 1e-5);
  ASSERT_TRUE(c.ik_seed.has_value());
  EXPECT_EQ(c.ik_seed->size(), 6);
  EXPECT_EQ(c.hand_mount.translation, Eigen::Vector3d(0, 0, 0.1));
  EXPECT_EQ(c.heatmap, "/cfg/layout.json");
  EXPECT_EQ(c.task, "lift");
}

TEST(Pipeline, ConfigErrors) {
  EXPECT_THROW(parse_pipeline_config("{"), SyntaxError);
  EXPECT_THROW(parse_pipeline_config(R"({"rat": 30})"), ConfigError);
  EXPECT_THROW(parse_pipeline_config(R"({"retarget": {"lambda": 1}})"), ConfigError);
  EXPECT_THROW(parse_pipeline_config(R"({"on_frame_error": "retry"})"), ConfigError);
  EXPECT_THROW(parse_pipeline_config(R"({"rate": "fast"})"), ConfigError);
  EXPECT_THROW(parse_pipeline_config(R"({"rate": -1})"), ConfigError);
  EXPECT_THROW(parse_pipeline_config(R"({"dex_model": {"builtin": "x", "path": "y"}})"), ConfigError);
  EXPECT_THROW(parse_pipeline_config(R"({"align": {"extrinsics": "none.json"}})", "/nonexistent"), ConfigError);
  try {
    load_pipeline_config("/nonexistent/pipeline.json");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/pipeline.json"), std::string::npos);
  }
  EXPECT_THROW(ModelSource({}, "hexapod", 1.0).load(), ConfigError);
}

TEST(Pipeline, ExitCodes) {
  EXPECT_EQ(exit_code(ConfigError("x")), 2);
  EXPECT_EQ(exit_code(SyntaxError("x")), 2);
  EXPECT_EQ(exit_code(BlobSizeMismatch("x")), 3);
  EXPECT_EQ(exit_code(EmptyOverlap("x")), 3);
  EXPECT_EQ(exit_code(NotConverged("x")), 4);
  EXPECT_EQ(exit_code(NonFiniteLoss("x")), 4);
}

TEST(Pipeline, RunWritesEveryStage) {
  const fs::path bundle = small_bundle("pipeline_run");
  const fs::path out = bundle.parent_path() / "out";
  std::vector<std::string> events;
  std::vector<BundleOutcome> outcomes;
  const int code = run_pipeline(PipelineConfig{}, {bundle}, out,
                                [&](const std::string& line) { events.push_back(line); }, &outcomes);
  ASSERT_EQ(code, 0) << outcomes[0].error;
  for (const char* stage : {"retarget", "robot_frame", "arm", "dataset", "report"}) {
    EXPECT_TRUE(fs::exists(out / "bundle" / stage / (std::string(stage) == "report" ? "contact_error.json" : "manifest.json")))
        << stage;
  }
  EXPECT_TRUE(fs::exists(out / "report" / "contact_error.csv"));
  EXPECT_EQ(read_vla_dataset(out / "bundle" / "dataset").records.size(), 45u);
  EXPECT_FALSE(events.empty());
  for (const auto& e : events) EXPECT_EQ(e.front(), '{');
}

TEST(Pipeline, IkFailurePolicy) {
  const fs::path bundle = small_bundle("pipeline_policy");
  PipelineConfig cfg;
  // Place the hand beyond the arm's reach.
  cfg.extrinsics.transform = RigidTransform::from_translation({5, 0, 0});
  EXPECT_EQ(run_pipeline(cfg, {bundle}, bundle.parent_path() / "abort"), 4);

  cfg.on_frame_error = FrameErrorPolicy::kSkip;
  EXPECT_EQ(run_pipeline(cfg, {bundle}, bundle.parent_path() / "skip"), 0);
  EXPECT_TRUE(fs::exists(bundle.parent_path() / "skip" / "bundle" / "dataset" / "actions.bin"));
}

TEST(Pipeline, BundleNamesMustBeDistinct) {
  EXPECT_THROW(run_pipeline(PipelineConfig{}, {"a/x", "b/x"}, "out"), ConfigError);
  EXPECT_THROW(run_pipeline(PipelineConfig{}, {}, "out"), ConfigError);
}

TEST(Pipeline, AlignmentAppliesSimilarityThenExtrinsics) {
  const fs::path bundle = small_bundle("pipeline_align");
  const fs::path root = bundle.parent_path();
  PipelineConfig cfg;
  retarget_stage(bundle, cfg, root / "r");
  PipelineConfig scaled = cfg;
  PointCorrespondences pc;
  pc.source = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  for (const auto& p : pc.source) pc.target.push_back(2.0 * p + Eigen::Vector3d(0.1, 0, 0));
  scaled.alignment = pc;
  scaled.hand_mount = RigidTransform::from_translation({0, 0, 0.05});
  align_stage(root / "r", scaled, root / "rf");
  const RawBundle in = load_demonstration(root / "r");
  const RawBundle out = load_demonstration(root / "rf");
  const auto hand = pose_rows(find_stream(in, "p_dex"));
  const auto moved = pose_rows(find_stream(out, "p_dex"));
  const auto tcp = pose_rows(find_stream(out, "p_tcp"));
  for (std::size_t t = 0; t < hand.size(); ++t) {
    EXPECT_LE((moved[t].translation - (2.0 * hand[t].translation + Eigen::Vector3d(0.1, 0, 0))).norm(), 1e-9);
    EXPECT_LE(((tcp[t] * scaled.hand_mount).matrix() - moved[t].matrix()).norm(), 1e-12);
  }
}
