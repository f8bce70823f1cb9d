#include "dextac/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <iostream>
#include <json.hpp>
#include <mutex>
#include <set>
#include <thread>

#include "dextac/errors.hpp"
#include "dextac/sync.hpp"

namespace dextac {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kDiagnosticsFile = "diagnostics.json";
constexpr const char* kCorrespondenceFile = "correspondence.json";
constexpr const char* kAlignmentFile = "alignment.json";
constexpr const char* kIkFile = "ik.json";

void emit(const EventSink& log, json event) {
  if (log) log(event.dump());
}

std::string bundle_label(const fs::path& bundle) {
  fs::path p = bundle.lexically_normal();
  if (p.filename().empty()) p = p.parent_path();
  return p.filename().string();
}

std::string resolve(const fs::path& base_dir, const std::string& value) { return (base_dir / value).string(); }

RigidTransform parse_transform(const json& value) { return parse_extrinsics_json(value.dump()).transform; }

ModelSource parse_model_source(const json& value, const fs::path& base_dir) {
  ModelSource m;
  if (value.is_string()) {
    m.path = base_dir / value.get<std::string>();
    return m;
  }
  if (!value.is_object()) throw ConfigError("robot model must be a path or an object");
  for (const auto& [key, v] : value.items()) {
    if (key == "path") m.path = base_dir / v.get<std::string>();
    else if (key == "builtin") m.builtin = v.get<std::string>();
    else if (key == "scale") m.scale = v.get<double>();
    else throw ConfigError("unknown robot model key '" + key + "'");
  }
  if (m.path.empty() == m.builtin.empty()) throw ConfigError("robot model needs exactly one of path and builtin");
  return m;
}

void parse_retarget_section(const json& doc, const fs::path& base_dir, PipelineConfig& cfg) {
  RetargetConfig& r = cfg.retarget;
  for (const auto& [key, v] : doc.items()) {
    if (key == "lambda_pos") r.lambda_pos = v.get<double>();
    else if (key == "lambda_dir") r.lambda_dir = v.get<double>();
    else if (key == "force_sigmoid_gain") r.force_sigmoid_gain = v.get<double>();
    else if (key == "max_iterations") r.max_iterations = v.get<int>();
    else if (key == "gradient_tolerance") r.gradient_tolerance = v.get<double>();
    else if (key == "step_damping") r.step_damping = v.get<double>();
    else if (key == "optimize_wrist") r.optimize_wrist = v.get<bool>();
    else if (key == "warm_start") r.warm_start = v.get<bool>();
    else if (key == "norm_smoothing") r.norm_smoothing = v.get<double>();
    else if (key == "mount_offset") r.mount_offset = parse_transform(v);
    else if (key == "gate_threshold") r.gate.force_threshold = v.get<double>();
    else if (key == "keypoint_pairs") r.keypoint_pairs = v.get<std::vector<std::pair<std::string, std::string>>>();
    else if (key == "correspondence") {
      const auto s = v.get<std::string>();
      cfg.correspondence = s == "nearest" || s == "same_name" ? s : resolve(base_dir, s);
    } else if (key == "attenuation") {
      for (const auto& [k, a] : v.items()) {
        if (k == "alpha") r.attenuation.alpha = a.get<double>();
        else if (k == "beta") r.attenuation.beta = a.get<double>();
        else if (k == "convention") r.attenuation.convention = convention_from_string(a.get<std::string>());
        else throw ConfigError("unknown attenuation key '" + k + "'");
      }
    } else throw ConfigError("unknown retarget key '" + key + "'");
  }
}

void parse_ik_section(const json& doc, PipelineConfig& cfg) {
  IkOptions& o = cfg.ik;
  for (const auto& [key, v] : doc.items()) {
    if (key == "tol_pos") o.tol_pos = v.get<double>();
    else if (key == "tol_rot") o.tol_rot = v.get<double>();
    else if (key == "max_iterations") o.max_iterations = v.get<int>();
    else if (key == "initial_damping") o.initial_damping = v.get<double>();
    else if (key == "damping_floor") o.damping_floor = v.get<double>();
    else if (key == "max_step") o.max_step = v.get<double>();
    else if (key == "rotation_weight") o.rotation_weight = v.get<double>();
    else if (key == "restarts") o.restarts = v.get<int>();
    else if (key == "restart_seed") o.restart_seed = v.get<std::uint64_t>();
    else if (key == "seed") {
      const auto q = v.get<std::vector<double>>();
      cfg.ik_seed = Eigen::Map<const JointVector>(q.data(), static_cast<Eigen::Index>(q.size()));
    } else throw ConfigError("unknown ik key '" + key + "'");
  }
}

void parse_align_section(const json& doc, const fs::path& base_dir, PipelineConfig& cfg) {
  for (const auto& [key, v] : doc.items()) {
    if (key == "correspondences") {
      const std::string text = v.is_string() ? read_file(resolve(base_dir, v.get<std::string>())) : v.dump();
      cfg.alignment = parse_correspondences_json(text);
    } else if (key == "extrinsics") {
      const std::string text = v.is_string() ? read_file(resolve(base_dir, v.get<std::string>())) : v.dump();
      cfg.extrinsics = parse_extrinsics_json(text);
    } else if (key == "hand_mount") {
      cfg.hand_mount = parse_transform(v);
    } else throw ConfigError("unknown align key '" + key + "'");
  }
}

void parse_dataset_section(const json& doc, const fs::path& base_dir, PipelineConfig& cfg) {
  for (const auto& [key, v] : doc.items()) {
    if (key == "heatmap") {
      const auto s = v.get<std::string>();
      cfg.heatmap = s == "grid" || s == "synthetic_hand" || s == "none" ? s : resolve(base_dir, s);
    } else if (key == "heatmap_width") cfg.heatmap_width = v.get<int>();
    else if (key == "task") cfg.task = v.get<std::string>();
    else throw ConfigError("unknown dataset key '" + key + "'");
  }
}

void require_object(const json& v, const std::string& name) {
  if (!v.is_object()) throw ConfigError("'" + name + "' must be an object");
}

RobotModel load_glove(const fs::path& bundle, const std::string& named, const PipelineConfig& cfg) {
  if (!cfg.glove_model.empty()) return load_robot_model(cfg.glove_model.string());
  if (named.empty()) throw ConfigError("no glove model: bundle names none and the config sets none");
  return load_robot_model((bundle / named).string());
}

CorrespondenceMap build_map(const PipelineConfig& cfg, const RobotModel& glove, const RobotModel& dex) {
  if (cfg.correspondence == "nearest") return nearest_neighbor_map(glove, dex);
  if (cfg.correspondence == "same_name") return same_name_map(glove, dex);
  std::string text;
  try {
    text = read_file(cfg.correspondence);
  } catch (const IoError&) {
    throw ConfigError("cannot read correspondence file '" + cfg.correspondence + "'");
  }
  std::size_t glove_sites = 0;
  for (const auto& s : glove.sites()) glove_sites += s.kind == SiteKind::kTactile;
  return parse_correspondence_json(text, glove_sites);
}

RetargetConfig bundle_retarget_config(const PipelineConfig& cfg, const RobotModel& glove, const RobotModel& dex) {
  RetargetConfig rc = cfg.retarget;
  if (rc.keypoint_pairs.empty()) rc.keypoint_pairs = default_keypoint_pairs(glove, dex);
  rc.tactile_map = build_map(cfg, glove, dex);
  rc.skip_failed_frames = cfg.on_frame_error == FrameErrorPolicy::kSkip;
  validate_config(rc, glove, dex);
  return rc;
}

std::vector<Eigen::VectorXd> rows_of(const std::vector<JointVector>& v) { return {v.begin(), v.end()}; }

const TimedStream& stream_named(const RawBundle& b, const std::string& name, const fs::path& dir) {
  for (const auto& s : b.streams) {
    if (s.name == name) return s;
  }
  throw ManifestError("'" + dir.string() + "' has no stream '" + name + "'");
}

std::vector<JointVector> joint_rows(const TimedStream& s) {
  std::vector<JointVector> out;
  for (const auto& r : vector_rows(s)) out.emplace_back(r);
  return out;
}

json diagnostics_json(const RetargetResult& r) {
  json frames = json::array();
  for (const auto& d : r.diagnostics) {
    frames.push_back({{"loss", d.loss},
                      {"kin_loss", d.kin_loss},
                      {"tac_loss", d.tac_loss},
                      {"gradient_norm", d.gradient_norm},
                      {"iterations", d.iterations},
                      {"converged", d.converged},
                      {"failed", d.failed}});
  }
  return {{"converged_fraction", r.converged_fraction()},
          {"total_iterations", r.total_iterations()},
          {"frames", std::move(frames)}};
}

RigidTransform apply_to_pose(const SimilarityTransform& s, const RigidTransform& p) {
  return RigidTransform(s.rotation * p.rotation, s.scale * (s.rotation * p.translation) + s.translation);
}

std::optional<HeatmapLayout> heatmap_layout(const PipelineConfig& cfg, std::size_t sensors) {
  if (cfg.heatmap == "none") return std::nullopt;
  if (cfg.heatmap == "grid") return grid_layout(sensors, cfg.heatmap_width);
  if (cfg.heatmap == "synthetic_hand") return synthetic_hand_layout();
  std::string text;
  try {
    text = read_file(cfg.heatmap);
  } catch (const IoError&) {
    throw ConfigError("cannot read heatmap layout '" + cfg.heatmap + "'");
  }
  return parse_layout_json(text);
}

}  // namespace

RobotModel ModelSource::load() const {
  if (!path.empty()) return load_robot_model(path.string());
  if (builtin == "synthetic_hand") return parse_robot_model(synthetic_hand_urdf(scale));
  if (builtin == "ur5") return parse_robot_model(ur5_arm_urdf());
  if (builtin == "planar_two_link") return parse_robot_model(planar_two_link_urdf());
  throw ConfigError("unknown builtin robot model '" + builtin + "'");
}

PipelineConfig parse_pipeline_config(std::string_view document, const fs::path& base_dir) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    throw SyntaxError(std::string("pipeline config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("pipeline config must be a JSON object");
  PipelineConfig cfg;
  try {
    for (const auto& [key, v] : doc.items()) {
      if (key == "rate") cfg.rate = v.get<double>();
      else if (key == "glove_model") cfg.glove_model = base_dir / v.get<std::string>();
      else if (key == "dex_model") cfg.dex_model = parse_model_source(v, base_dir);
      else if (key == "arm_model") cfg.arm_model = parse_model_source(v, base_dir);
      else if (key == "tcp_site") cfg.tcp_site = v.get<std::string>();
      else if (key == "object") cfg.object = v.get<std::string>();
      else if (key == "workers") cfg.workers = v.get<std::size_t>();
      else if (key == "on_frame_error") {
        const auto s = v.get<std::string>();
        if (s == "skip") cfg.on_frame_error = FrameErrorPolicy::kSkip;
        else if (s == "abort") cfg.on_frame_error = FrameErrorPolicy::kAbort;
        else throw ConfigError("on_frame_error must be skip or abort, got '" + s + "'");
      } else if (key == "retarget") {
        require_object(v, key);
        parse_retarget_section(v, base_dir, cfg);
      } else if (key == "ik") {
        require_object(v, key);
        parse_ik_section(v, cfg);
      } else if (key == "align") {
        require_object(v, key);
        parse_align_section(v, base_dir, cfg);
      } else if (key == "dataset") {
        require_object(v, key);
        parse_dataset_section(v, base_dir, cfg);
      } else throw ConfigError("unknown config key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config field has the wrong type: ") + e.what());
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  if (!(cfg.rate > 0.0)) throw ConfigError("rate must be positive");
  if (cfg.heatmap_width <= 0) throw ConfigError("heatmap_width must be positive");
  return cfg;
}

PipelineConfig load_pipeline_config(const fs::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const IoError&) {
    throw ConfigError("cannot read config '" + path.string() + "'");
  }
  return parse_pipeline_config(text, path.parent_path());
}

EventSink stderr_sink() {
  static std::mutex mutex;
  return [](const std::string& line) {
    std::lock_guard lock(mutex);
    std::cerr << line << '\n' << std::flush;
  };
}

int exit_code(const Error& error) {
  switch (error.category()) {
    case Error::Category::kConfig: return 2;
    case Error::Category::kData: return 3;
    case Error::Category::kNumerical: return 4;
  }
  return 3;
}

// ---------------------------------------------------------------------------

void sync_stage(const fs::path& bundle, const PipelineConfig& cfg, const fs::path& out) {
  RawBundle raw = load_demonstration(bundle);
  RawBundle synced;
  synced.metadata = raw.metadata;
  synced.streams = resample_streams(raw.streams, cfg.rate);
  for (auto& s : synced.streams) {
    s.rate = cfg.rate;
    if (s.kind != StreamKind::kImage) continue;
    // Frames are renumbered along the new timeline.
    for (std::size_t k = 0; k < s.length(); ++k) {
      const auto source = static_cast<std::size_t>(s.samples(static_cast<Eigen::Index>(k), 0));
      const fs::path from = bundle / image_frame_ref(s.frame_pattern, source);
      if (fs::exists(from)) write_file(out / image_frame_ref(s.frame_pattern, k), read_file(from));
    }
    s.samples.resize(0, 0);
  }
  write_bundle(out, synced);
  if (!raw.metadata.glove_model.empty() && fs::exists(bundle / raw.metadata.glove_model)) {
    write_file(out / raw.metadata.glove_model, read_file(bundle / raw.metadata.glove_model));
  }
}

RetargetResult retarget_stage(const fs::path& bundle, const PipelineConfig& cfg, const fs::path& out,
                              const EventSink& log) {
  const Demonstration demo = load_synchronized(bundle, cfg.rate);
  const RobotModel glove = load_glove(bundle, demo.metadata.glove_model, cfg);
  const RobotModel dex = cfg.dex_model.load();
  const RetargetConfig rc = bundle_retarget_config(cfg, glove, dex);
  RetargetResult result = retarget_trajectory(demo, glove, dex, rc);

  RawBundle b;
  b.metadata.task = demo.metadata.task;
  b.metadata.operator_id = demo.metadata.operator_id;
  std::vector<Eigen::VectorXd> forces;
  for (const auto& f : result.gamma_dex) forces.push_back(f.values);
  b.streams.push_back(make_vector_stream("j_dex", StreamKind::kJoint, demo.timestamps, rows_of(result.j_dex)));
  b.streams.push_back(make_pose_stream("p_dex", demo.timestamps, result.p_dex));
  b.streams.push_back(make_vector_stream("gamma_dex", StreamKind::kTactile, demo.timestamps, forces));
  for (auto& s : b.streams) s.rate = cfg.rate;
  write_bundle(out, b);
  write_file(out / kDiagnosticsFile, diagnostics_json(result).dump(2) + "\n");
  write_file(out / kCorrespondenceFile, correspondence_to_json(rc.tactile_map) + "\n");

  std::size_t failed = 0;
  for (const auto& d : result.diagnostics) failed += d.failed;
  emit(log, {{"event", "retarget"},
             {"bundle", bundle_label(bundle)},
             {"frames", result.length()},
             {"converged_fraction", result.converged_fraction()},
             {"skipped_frames", failed}});
  return result;
}

RetargetResult read_retarget_output(const fs::path& dir) {
  const RawBundle b = load_demonstration(dir);
  RetargetResult r;
  r.j_dex = joint_rows(stream_named(b, "j_dex", dir));
  r.p_dex = pose_rows(stream_named(b, "p_dex", dir));
  const TimedStream& g = stream_named(b, "gamma_dex", dir);
  const auto forces = vector_rows(g);
  for (std::size_t t = 0; t < forces.size(); ++t) r.gamma_dex.push_back({forces[t], g.timestamps[t]});
  json doc;
  try {
    doc = json::parse(read_file(dir / kDiagnosticsFile));
    for (const auto& f : doc.at("frames")) {
      FrameDiagnostics d;
      d.loss = f.at("loss").get<double>();
      d.kin_loss = f.at("kin_loss").get<double>();
      d.tac_loss = f.at("tac_loss").get<double>();
      d.gradient_norm = f.at("gradient_norm").get<double>();
      d.iterations = f.at("iterations").get<int>();
      d.converged = f.at("converged").get<bool>();
      d.failed = f.at("failed").get<bool>();
      r.diagnostics.push_back(std::move(d));
    }
  } catch (const json::exception& e) {
    throw ManifestError("bad diagnostics in '" + dir.string() + "': " + e.what());
  }
  if (r.diagnostics.size() != r.j_dex.size() || r.p_dex.size() != r.j_dex.size() ||
      r.gamma_dex.size() != r.j_dex.size()) {
    throw LengthMismatch("retarget output in '" + dir.string() + "' has streams of different lengths");
  }
  return r;
}

void align_stage(const fs::path& retarget_dir, const PipelineConfig& cfg, const fs::path& out, const EventSink& log) {
  const RawBundle in = load_demonstration(retarget_dir);
  const TimedStream& hand = stream_named(in, "p_dex", retarget_dir);
  std::vector<RigidTransform> poses = pose_rows(hand);

  json alignment;
  if (cfg.alignment) {
    const SimilarityEstimate est = estimate_similarity(cfg.alignment->source, cfg.alignment->target);
    for (auto& p : poses) p = apply_to_pose(est.transform, p);
    alignment["similarity"] = json::parse(similarity_to_json(est));
  }
  alignment["extrinsics"] = json::parse(extrinsics_to_json(cfg.extrinsics));
  alignment["hand_mount"] = json::parse(extrinsics_to_json(CameraExtrinsics{cfg.hand_mount}));

  const std::vector<RigidTransform> robot = to_robot_frame(cfg.extrinsics, poses);
  const RigidTransform mount_inv = cfg.hand_mount.inverse();
  std::vector<RigidTransform> tcp;
  for (const auto& p : robot) tcp.push_back(p * mount_inv);

  RawBundle b;
  b.metadata = in.metadata;
  b.streams.push_back(make_pose_stream("p_dex", hand.timestamps, robot));
  b.streams.push_back(make_pose_stream("p_tcp", hand.timestamps, tcp));
  for (auto& s : b.streams) s.rate = hand.rate;
  write_bundle(out, b);
  write_file(out / kAlignmentFile, alignment.dump(2) + "\n");
  emit(log, {{"event", "align"}, {"frames", tcp.size()}, {"similarity", cfg.alignment.has_value()}});
}

void ik_stage(const fs::path& robot_frame_dir, const PipelineConfig& cfg, const fs::path& out, const EventSink& log) {
  const RawBundle in = load_demonstration(robot_frame_dir);
  const TimedStream& tcp_stream = stream_named(in, "p_tcp", robot_frame_dir);
  const std::vector<RigidTransform> targets = pose_rows(tcp_stream);
  const RobotModel arm = cfg.arm_model.load();
  const JointVector seed = cfg.ik_seed.value_or(arm.mid_range());
  if (static_cast<std::size_t>(seed.size()) != arm.dof()) {
    throw ConfigError("ik seed has " + std::to_string(seed.size()) + " values, arm has " +
                      std::to_string(arm.dof()) + " joints");
  }
  const IkTrajectory traj = trajectory_ik(arm, targets, cfg.tcp_site, seed, cfg.ik);
  if (!traj.failed.empty()) {
    emit(log, {{"event", "ik_frames_failed"}, {"count", traj.failed.size()}, {"first", traj.failed.front()}});
    if (cfg.on_frame_error == FrameErrorPolicy::kAbort) {
      throw NotConverged("arm IK did not converge on " + std::to_string(traj.failed.size()) +
                         " frames, first at frame " + std::to_string(traj.failed.front()));
    }
  }

  RawBundle b;
  b.metadata = in.metadata;
  b.streams.push_back(make_vector_stream("q_arm", StreamKind::kJoint, tcp_stream.timestamps, rows_of(traj.q)));
  b.streams.back().rate = tcp_stream.rate;
  write_bundle(out, b);
  json frames = json::array();
  for (const auto& f : traj.frames) {
    frames.push_back({{"converged", f.converged},
                      {"iterations", f.iterations},
                      {"pos_residual", f.pos_residual},
                      {"rot_residual", f.rot_residual}});
  }
  const json summary{{"failed", traj.failed}, {"max_joint_step", traj.max_joint_step}, {"frames", std::move(frames)}};
  write_file(out / kIkFile, summary.dump(2) + "\n");
  emit(log, {{"event", "ik"}, {"frames", targets.size()}, {"failed", traj.failed.size()},
             {"max_joint_step", traj.max_joint_step}});
}

void package_stage(const fs::path& bundle, const fs::path& retarget_dir, const fs::path& robot_frame_dir,
                   const fs::path& arm_dir, const PipelineConfig& cfg, const fs::path& out) {
  const Demonstration demo = load_synchronized(bundle, cfg.rate);
  const RetargetResult result = read_retarget_output(retarget_dir);
  const RawBundle frame = load_demonstration(robot_frame_dir);
  const RawBundle arm = load_demonstration(arm_dir);
  DatasetOptions options;
  options.task = cfg.task.empty() ? demo.metadata.task : cfg.task;
  const std::size_t sensors = result.gamma_dex.empty() ? 0 : static_cast<std::size_t>(result.gamma_dex[0].values.size());
  options.heatmap_layout = heatmap_layout(cfg, sensors);
  write_vla_dataset(result, demo, pose_rows(stream_named(frame, "p_tcp", robot_frame_dir)),
                    joint_rows(stream_named(arm, "q_arm", arm_dir)), out, options);
}

ContactErrorReport eval_contact_stage(const fs::path& bundle, const fs::path& retarget_dir, const PipelineConfig& cfg,
                                      const fs::path& out) {
  const Demonstration demo = load_synchronized(bundle, cfg.rate);
  const RobotModel glove = load_glove(bundle, demo.metadata.glove_model, cfg);
  const RobotModel dex = cfg.dex_model.load();
  const RetargetResult result = read_retarget_output(retarget_dir);
  std::size_t glove_sites = 0;
  for (const auto& s : glove.sites()) glove_sites += s.kind == SiteKind::kTactile;
  const CorrespondenceMap map = parse_correspondence_json(read_file(retarget_dir / kCorrespondenceFile), glove_sites);
  ContactErrorReport report = contact_error(result, demo, glove, dex, map, cfg.object, cfg.retarget.gate);
  emit_report(report, out);
  return report;
}

// ---------------------------------------------------------------------------

int run_pipeline(const PipelineConfig& cfg, const std::vector<fs::path>& bundles, const fs::path& out,
                 const EventSink& log, std::vector<BundleOutcome>* outcomes) {
  if (bundles.empty()) throw ConfigError("no bundles given");
  std::set<std::string> labels;
  for (const auto& b : bundles) {
    if (bundle_label(b) == StageOutputs::kReport) throw ConfigError("a bundle directory may not be named 'report'");
    if (!labels.insert(bundle_label(b)).second) {
      throw ConfigError("two bundles share the directory name '" + bundle_label(b) + "'");
    }
  }

  std::vector<BundleOutcome> results(bundles.size());
  std::vector<std::optional<ContactErrorReport>> reports(bundles.size());
  auto process = [&](std::size_t i) {
    const fs::path& bundle = bundles[i];
    const std::string label = bundle_label(bundle);
    const fs::path dir = out / label;
    results[i].bundle = bundle;
    emit(log, {{"event", "bundle_start"}, {"bundle", label}});
    try {
      retarget_stage(bundle, cfg, dir / StageOutputs::kRetarget, log);
      align_stage(dir / StageOutputs::kRetarget, cfg, dir / StageOutputs::kRobotFrame, log);
      ik_stage(dir / StageOutputs::kRobotFrame, cfg, dir / StageOutputs::kArm, log);
      package_stage(bundle, dir / StageOutputs::kRetarget, dir / StageOutputs::kRobotFrame, dir / StageOutputs::kArm,
                    cfg, dir / StageOutputs::kDataset);
      reports[i] = eval_contact_stage(bundle, dir / StageOutputs::kRetarget, cfg, dir / StageOutputs::kReport);
      emit(log, {{"event", "bundle_done"}, {"bundle", label}, {"contact_error_mm", reports[i]->aggregate_mean_mm}});
    } catch (const Error& e) {
      results[i].exit_code = exit_code(e);
      results[i].error = e.what();
    } catch (const std::exception& e) {
      results[i].exit_code = 3;
      results[i].error = e.what();
    }
    if (results[i].exit_code != 0) {
      emit(log, {{"event", "bundle_failed"}, {"bundle", label}, {"exit_code", results[i].exit_code},
                 {"message", results[i].error}});
    }
  };

  std::size_t workers = cfg.workers ? cfg.workers : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, bundles.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < bundles.size(); ++i) process(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < bundles.size(); i = next++) process(i);
      });
    }
    for (auto& t : pool) t.join();
  }

  std::vector<ContactErrorReport> done;
  for (const auto& r : reports) {
    if (r) done.push_back(*r);
  }
  const ContactErrorReport merged = merge_reports(done);
  emit_report(merged, out / StageOutputs::kReport);

  int code = 0;
  for (const auto& r : results) {
    if (r.exit_code != 0) {
      code = r.exit_code;
      break;
    }
  }
  emit(log, {{"event", "pipeline_done"}, {"bundles", bundles.size()}, {"succeeded", done.size()},
             {"contact_error_mm", merged.aggregate_mean_mm}, {"exit_code", code}});
  if (outcomes) *outcomes = std::move(results);
  return code;
}

}  // namespace dextac
