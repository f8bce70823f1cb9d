#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <json.hpp>
#include <optional>

#include "dextac/errors.hpp"
#include "dextac/evalsuite.hpp"
#include "dextac/pipeline.hpp"

namespace fs = std::filesystem;
using namespace dextac;

namespace {

struct Flags {
  std::string config;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  std::string convention;
  std::size_t workers = 0;
};

void log_error(const EventSink& log, int code, const std::string& message) {
  log(nlohmann::json{{"event", "error"}, {"exit_code", code}, {"message", message}}.dump());
}

PipelineConfig load_config(const Flags& f) {
  PipelineConfig cfg = f.config.empty() ? PipelineConfig{} : load_pipeline_config(f.config);
  if (!f.convention.empty()) cfg.retarget.attenuation.convention = convention_from_string(f.convention);
  if (f.seed) cfg.ik.restart_seed = *f.seed;
  if (f.workers) cfg.workers = f.workers;
  return cfg;
}

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "Pipeline configuration (JSON)");
  sub->add_option("--out", f.out, "Output directory");
  sub->add_option("--convention", f.convention, "Attenuation convention")->check(CLI::IsMember({"prose", "verbatim"}));
  sub->add_option("--seed", f.seed, "Seed for synthetic data or IK restarts");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tactile-aware hand retargeting pipeline"};
  app.require_subcommand(1);
  Flags f;
  std::string bundle, retarget_dir, frame_dir, arm_dir;
  std::vector<std::string> inputs;

  auto* gen = app.add_subcommand("gen-synthetic", "Write a synthetic grasp demonstration bundle");
  add_common(gen, f);

  auto* sync = app.add_subcommand("sync", "Resample a bundle onto one timeline");
  add_common(sync, f);
  sync->add_option("bundle", bundle)->required();

  auto* retarget = app.add_subcommand("retarget", "Retarget glove motion and touch onto the dex hand");
  add_common(retarget, f);
  retarget->add_option("bundle", bundle)->required();

  auto* align = app.add_subcommand("align", "Map the hand trajectory into the robot frame");
  add_common(align, f);
  align->add_option("retarget_dir", retarget_dir)->required();

  auto* ik = app.add_subcommand("ik", "Solve arm joints for the TCP trajectory");
  add_common(ik, f);
  ik->add_option("robot_frame_dir", frame_dir)->required();

  auto* package = app.add_subcommand("package", "Write the training dataset");
  add_common(package, f);
  package->add_option("bundle", bundle)->required();
  package->add_option("--retarget", retarget_dir)->required();
  package->add_option("--robot-frame", frame_dir)->required();
  package->add_option("--arm", arm_dir)->required();

  auto* eval = app.add_subcommand("eval-contact", "Report contact error of a retargeted bundle");
  add_common(eval, f);
  eval->add_option("bundle", bundle)->required();
  eval->add_option("--retarget", retarget_dir)->required();

  auto* run = app.add_subcommand("run", "Run every stage on one or more bundles");
  add_common(run, f);
  run->add_option("--workers", f.workers, "Bundles processed in parallel (0 = available parallelism)");
  run->add_option("inputs", inputs, "[config] bundle...")->required();

  const EventSink log = stderr_sink();
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*run && f.config.empty() && !inputs.empty() && !fs::is_directory(inputs.front())) {
      f.config = inputs.front();
      inputs.erase(inputs.begin());
    }
    const fs::path out = f.out;
    if (*gen) {
      SyntheticScenario scenario;
      if (!f.config.empty()) {
        std::string text;
        try {
          text = read_file(f.config);
        } catch (const IoError&) {
          throw ConfigError("cannot read scenario '" + f.config + "'");
        }
        scenario = parse_scenario_json(text, fs::path(f.config).parent_path());
      }
      write_synthetic_bundle(out, generate_synthetic_demo(scenario, f.seed.value_or(0)));
      return 0;
    }
    const PipelineConfig cfg = load_config(f);
    if (*sync) sync_stage(bundle, cfg, out);
    else if (*retarget) retarget_stage(bundle, cfg, out, log);
    else if (*align) align_stage(retarget_dir, cfg, out, log);
    else if (*ik) ik_stage(frame_dir, cfg, out, log);
    else if (*package) package_stage(bundle, retarget_dir, frame_dir, arm_dir, cfg, out);
    else if (*eval) eval_contact_stage(bundle, retarget_dir, cfg, out);
    else if (*run) {
      std::vector<fs::path> bundles(inputs.begin(), inputs.end());
      return run_pipeline(cfg, bundles, out, log);
    }
    return 0;
  } catch (const Error& e) {
    const int code = exit_code(e);
    log_error(log, code, e.what());
    return code;
  } catch (const std::exception& e) {
    log_error(log, 3, e.what());
    return 3;
  }
}
