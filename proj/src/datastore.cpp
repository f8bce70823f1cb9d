#include "dextac/datastore.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "dextac/errors.hpp"

namespace dextac {

static_assert(std::endian::native == std::endian::little, "blob I/O assumes a little-endian host");

namespace fs = std::filesystem;
using nlohmann::json;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

namespace {

std::size_t element_size(SampleType t) { return t == SampleType::kF32 ? 4 : 8; }
std::string_view dtype_name(SampleType t) { return t == SampleType::kF32 ? "f32" : "f64"; }

SampleType dtype_from(const std::string& s) {
  if (s == "f32") return SampleType::kF32;
  if (s == "f64") return SampleType::kF64;
  throw ManifestError("unsupported dtype '" + s + "'");
}

template <typename T>
void append_values(std::string& out, const double* data, std::size_t n) {
  const std::size_t start = out.size();
  out.resize(start + n * sizeof(T));
  for (std::size_t i = 0; i < n; ++i) {
    const T v = static_cast<T>(data[i]);
    std::memcpy(out.data() + start + i * sizeof(T), &v, sizeof(T));
  }
}

std::string encode(const double* data, std::size_t n, SampleType t) {
  std::string out;
  if (t == SampleType::kF32) {
    append_values<float>(out, data, n);
  } else {
    append_values<double>(out, data, n);
  }
  return out;
}

std::vector<double> decode(const std::string& bytes, SampleType t) {
  const std::size_t es = element_size(t);
  std::vector<double> out(bytes.size() / es);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (t == SampleType::kF32) {
      float v;
      std::memcpy(&v, bytes.data() + i * es, es);
      out[i] = v;
    } else {
      std::memcpy(&out[i], bytes.data() + i * es, es);
    }
  }
  return out;
}

std::vector<double> read_blob(const fs::path& path, std::size_t count, SampleType t) {
  std::error_code ec;
  const auto size = fs::file_size(path, ec);
  if (ec) throw ManifestError("missing blob '" + path.filename().string() + "'");
  const std::size_t expected = count * element_size(t);
  if (size != expected) {
    throw BlobSizeMismatch("blob '" + path.filename().string() + "' holds " + std::to_string(size) +
                           " bytes, manifest declares " + std::to_string(expected));
  }
  return decode(read_file(path), t);
}

template <typename T>
T field(const json& obj, const char* key, const std::string& ctx) {
  if (!obj.contains(key)) throw ManifestError(ctx + ": missing field '" + key + "'");
  try {
    return obj[key].get<T>();
  } catch (const json::exception&) {
    throw ManifestError(ctx + ": field '" + key + "' has the wrong type");
  }
}

json load_manifest(const fs::path& dir) {
  const fs::path path = dir / "manifest.json";
  if (!fs::exists(path)) throw ManifestError("no manifest.json in '" + dir.string() + "'");
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ManifestError(std::string("manifest is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ManifestError("manifest must be a JSON object");
  const int version = field<int>(doc, "version", "manifest");
  if (version != kBundleVersion) {
    throw UnsupportedVersion("manifest version " + std::to_string(version) + " is not supported (expected " +
                             std::to_string(kBundleVersion) + ")");
  }
  return doc;
}

}  // namespace

RawBundle load_demonstration(const fs::path& dir) {
  const json doc = load_manifest(dir);
  RawBundle bundle;
  bundle.metadata.task = doc.value("task", "");
  bundle.metadata.operator_id = doc.value("operator_id", "");
  bundle.metadata.glove_model = doc.value("glove_model", "");
  if (!doc.contains("streams") || !doc["streams"].is_array()) throw ManifestError("manifest lacks a streams array");
  for (const auto& entry : doc["streams"]) {
    TimedStream s;
    s.name = field<std::string>(entry, "name", "stream");
    const std::string ctx = "stream '" + s.name + "'";
    s.kind = stream_kind_from_string(field<std::string>(entry, "kind", ctx));
    s.rate = entry.value("rate", 0.0);
    const auto shape = field<std::vector<std::size_t>>(entry, "shape", ctx);
    if (shape.empty() || shape.size() > 2) throw ManifestError(ctx + ": shape must be [T] or [T, D]");
    const std::size_t rows = shape[0];
    const std::size_t cols = shape.size() == 2 ? shape[1] : 1;
    s.timestamps = read_blob(dir / field<std::string>(entry, "timestamps", ctx), rows, SampleType::kF64);
    if (s.kind == StreamKind::kImage) {
      s.frame_pattern = field<std::string>(entry, "frame_pattern", ctx);
    } else {
      s.dtype = dtype_from(field<std::string>(entry, "dtype", ctx));
      const auto values = read_blob(dir / field<std::string>(entry, "blob", ctx), rows * cols, s.dtype);
      s.samples.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
      std::copy(values.begin(), values.end(), s.samples.data());
    }
    s.validate();
    bundle.streams.push_back(std::move(s));
  }
  return bundle;
}

void write_bundle(const fs::path& dir, const RawBundle& bundle) {
  fs::create_directories(dir);
  json doc;
  doc["version"] = kBundleVersion;
  doc["task"] = bundle.metadata.task;
  doc["operator_id"] = bundle.metadata.operator_id;
  doc["glove_model"] = bundle.metadata.glove_model;
  json streams = json::array();
  for (const auto& s : bundle.streams) {
    s.validate();
    json e;
    e["name"] = s.name;
    e["kind"] = std::string(to_string(s.kind));
    e["rate"] = s.rate;
    e["timestamps"] = s.name + ".ts.bin";
    write_file(dir / (s.name + ".ts.bin"), encode(s.timestamps.data(), s.timestamps.size(), SampleType::kF64));
    if (s.kind == StreamKind::kImage) {
      e["shape"] = {s.timestamps.size()};
      e["frame_pattern"] = s.frame_pattern;
    } else {
      e["shape"] = {static_cast<std::size_t>(s.samples.rows()), static_cast<std::size_t>(s.samples.cols())};
      e["dtype"] = std::string(dtype_name(s.dtype));
      e["blob"] = s.name + ".bin";
      write_file(dir / (s.name + ".bin"),
                 encode(s.samples.data(), static_cast<std::size_t>(s.samples.size()), s.dtype));
    }
    streams.push_back(std::move(e));
  }
  doc["streams"] = std::move(streams);
  write_file(dir / "manifest.json", doc.dump(2) + "\n");
}

Demonstration load_synchronized(const fs::path& dir, double rate) {
  const RawBundle bundle = load_demonstration(dir);
  Demonstration demo = resample(bundle.streams, rate);
  demo.metadata.task = bundle.metadata.task;
  demo.metadata.operator_id = bundle.metadata.operator_id;
  demo.metadata.glove_model = bundle.metadata.glove_model;
  return demo;
}

TimedStream make_pose_stream(const std::string& name, const std::vector<double>& timestamps,
                             const std::vector<RigidTransform>& poses, SampleType dtype) {
  if (timestamps.size() != poses.size()) throw LengthMismatch("pose stream '" + name + "' length mismatch");
  TimedStream s;
  s.name = name;
  s.kind = StreamKind::kPose;
  s.dtype = dtype;
  s.timestamps = timestamps;
  s.samples.resize(static_cast<Eigen::Index>(poses.size()), 7);
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const auto& p = poses[i];
    s.samples.row(static_cast<Eigen::Index>(i)) << p.translation.x(), p.translation.y(), p.translation.z(),
        p.rotation.w(), p.rotation.x(), p.rotation.y(), p.rotation.z();
  }
  if (timestamps.size() > 1) s.rate = static_cast<double>(timestamps.size() - 1) / (timestamps.back() - timestamps.front());
  return s;
}

TimedStream make_vector_stream(const std::string& name, StreamKind kind, const std::vector<double>& timestamps,
                               const std::vector<Eigen::VectorXd>& rows, SampleType dtype) {
  if (timestamps.size() != rows.size()) throw LengthMismatch("stream '" + name + "' length mismatch");
  TimedStream s;
  s.name = name;
  s.kind = kind;
  s.dtype = dtype;
  s.timestamps = timestamps;
  const Eigen::Index cols = rows.empty() ? 0 : rows.front().size();
  s.samples.resize(static_cast<Eigen::Index>(rows.size()), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != cols) throw LengthMismatch("stream '" + name + "' rows differ in width");
    s.samples.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  }
  if (timestamps.size() > 1) s.rate = static_cast<double>(timestamps.size() - 1) / (timestamps.back() - timestamps.front());
  return s;
}

std::vector<RigidTransform> pose_rows(const TimedStream& stream) {
  if (stream.kind != StreamKind::kPose) throw ManifestError("stream '" + stream.name + "' is not a pose stream");
  std::vector<RigidTransform> out;
  for (Eigen::Index i = 0; i < stream.samples.rows(); ++i) {
    const auto r = stream.samples.row(i);
    out.emplace_back(Eigen::Quaterniond(r[3], r[4], r[5], r[6]), Eigen::Vector3d(r[0], r[1], r[2]));
  }
  return out;
}

std::vector<Eigen::VectorXd> vector_rows(const TimedStream& stream) {
  std::vector<Eigen::VectorXd> out;
  for (Eigen::Index i = 0; i < stream.samples.rows(); ++i) out.emplace_back(stream.samples.row(i).transpose());
  return out;
}

const TimedStream& find_stream(const RawBundle& bundle, const std::string& name) {
  for (const auto& s : bundle.streams) {
    if (s.name == name) return s;
  }
  throw ManifestError("bundle has no stream '" + name + "'");
}

// ---------------------------------------------------------------------------

ActionRecord make_action(const RigidTransform& p_tcp, const JointVector& j_dex) {
  return {p_tcp.translation, rotation_to_vector(p_tcp.rotation), j_dex};
}

namespace {

std::string tactile_image_name(std::size_t t) {
  std::string idx = std::to_string(t);
  if (idx.size() < 6) idx.insert(0, 6 - idx.size(), '0');
  return "tactile/" + idx + ".ppm";
}

}  // namespace

DatasetSummary write_vla_dataset(const RetargetResult& result, const Demonstration& demo,
                                 const std::vector<RigidTransform>& p_tcp,
                                 const std::vector<JointVector>& arm_joints, const fs::path& out_dir,
                                 const DatasetOptions& options) {
  const std::size_t t_len = result.length();
  if (t_len == 0) throw LengthMismatch("cannot package an empty trajectory");
  if (demo.length() != t_len || p_tcp.size() != t_len || arm_joints.size() != t_len ||
      result.p_dex.size() != t_len || result.gamma_dex.size() != t_len) {
    throw LengthMismatch("dataset inputs disagree on frame count (expected " + std::to_string(t_len) + ")");
  }
  const auto n = static_cast<std::size_t>(result.j_dex.front().size());
  const auto arm_dof = static_cast<std::size_t>(arm_joints.front().size());
  const auto m = static_cast<std::size_t>(result.gamma_dex.front().values.size());
  if (options.heatmap_layout) validate_layout(*options.heatmap_layout, m);

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create '" + out_dir.string() + "': " + ec.message());

  std::vector<double> actions;
  std::vector<double> arm;
  std::vector<double> tactile;
  std::string records;
  for (std::size_t t = 0; t < t_len; ++t) {
    if (static_cast<std::size_t>(result.j_dex[t].size()) != n ||
        static_cast<std::size_t>(arm_joints[t].size()) != arm_dof ||
        static_cast<std::size_t>(result.gamma_dex[t].values.size()) != m) {
      throw LengthMismatch("frame " + std::to_string(t) + " has inconsistent vector sizes");
    }
    const ActionRecord a = make_action(p_tcp[t], result.j_dex[t]);
    actions.insert(actions.end(), a.pos.data(), a.pos.data() + 3);
    actions.insert(actions.end(), a.rot.data(), a.rot.data() + 3);
    actions.insert(actions.end(), a.j_dex.data(), a.j_dex.data() + n);
    arm.insert(arm.end(), arm_joints[t].data(), arm_joints[t].data() + arm_dof);
    tactile.insert(tactile.end(), result.gamma_dex[t].values.data(), result.gamma_dex[t].values.data() + m);

    json rec;
    rec["frame"] = t;
    rec["timestamp"] = demo.timestamps[t];
    rec["visual_ref"] = demo.images.empty() ? std::string() : demo.images.front().frames[t];
    if (options.heatmap_layout) {
      rec["tactile_image_ref"] = tactile_image_name(t);
      write_file(out_dir / tactile_image_name(t),
                 encode_ppm(rasterize_heatmap(result.gamma_dex[t], *options.heatmap_layout)));
    } else {
      rec["tactile_image_ref"] = nullptr;
    }
    records += rec.dump() + "\n";
  }
  write_file(out_dir / "actions.bin", encode(actions.data(), actions.size(), SampleType::kF32));
  write_file(out_dir / "arm_joints.bin", encode(arm.data(), arm.size(), SampleType::kF64));
  write_file(out_dir / "tactile.bin", encode(tactile.data(), tactile.size(), SampleType::kF32));
  write_file(out_dir / "records.jsonl", records);

  json manifest;
  manifest["version"] = kBundleVersion;
  manifest["frames"] = t_len;
  manifest["task"] = options.task;
  manifest["dex_dof"] = n;
  manifest["arm_dof"] = arm_dof;
  manifest["tactile_sensors"] = m;
  manifest["action_layout"] = "pos(3)|rot(3)|j_dex(" + std::to_string(n) + ")";
  manifest["files"] = {{"actions", {{"blob", "actions.bin"}, {"dtype", "f32"}, {"shape", {t_len, 6 + n}}}},
                       {"arm_joints", {{"blob", "arm_joints.bin"}, {"dtype", "f64"}, {"shape", {t_len, arm_dof}}}},
                       {"tactile", {{"blob", "tactile.bin"}, {"dtype", "f32"}, {"shape", {t_len, m}}}},
                       {"records", "records.jsonl"}};
  manifest["tactile_images"] = options.heatmap_layout.has_value();
  write_file(out_dir / "manifest.json", manifest.dump(2) + "\n");

  DatasetSummary summary;
  summary.frames = t_len;
  summary.action_dim = 6 + n;
  summary.arm_dof = arm_dof;
  summary.files = {"manifest.json", "records.jsonl", "actions.bin", "arm_joints.bin", "tactile.bin"};
  return summary;
}

VlaDataset read_vla_dataset(const fs::path& dir) {
  const json manifest = load_manifest(dir);
  const auto t_len = field<std::size_t>(manifest, "frames", "dataset manifest");
  const auto n = field<std::size_t>(manifest, "dex_dof", "dataset manifest");
  const auto arm_dof = field<std::size_t>(manifest, "arm_dof", "dataset manifest");
  const auto m = field<std::size_t>(manifest, "tactile_sensors", "dataset manifest");

  const auto actions = read_blob(dir / "actions.bin", t_len * (6 + n), SampleType::kF32);
  const auto arm = read_blob(dir / "arm_joints.bin", t_len * arm_dof, SampleType::kF64);
  const auto tactile = read_blob(dir / "tactile.bin", t_len * m, SampleType::kF32);

  VlaDataset ds;
  ds.dex_dof = n;
  std::istringstream lines(read_file(dir / "records.jsonl"));
  std::string line;
  std::size_t t = 0;
  while (std::getline(lines, line)) {
    if (t >= t_len) throw ManifestError("records.jsonl holds more records than declared frames");
    const json rec = json::parse(line);
    TrainingRecord r;
    r.timestamp = rec.at("timestamp").get<double>();
    r.visual_ref = rec.at("visual_ref").get<std::string>();
    if (!rec.at("tactile_image_ref").is_null()) r.tactile_image_ref = rec["tactile_image_ref"].get<std::string>();
    const double* a = actions.data() + t * (6 + n);
    r.action.pos = Eigen::Vector3d(a[0], a[1], a[2]);
    r.action.rot = Eigen::Vector3d(a[3], a[4], a[5]);
    r.action.j_dex = Eigen::Map<const Eigen::VectorXd>(a + 6, static_cast<Eigen::Index>(n));
    ds.records.push_back(std::move(r));
    ds.arm_joints.emplace_back(Eigen::Map<const Eigen::VectorXd>(arm.data() + t * arm_dof, static_cast<Eigen::Index>(arm_dof)));
    ds.tactile.emplace_back(Eigen::Map<const Eigen::VectorXd>(tactile.data() + t * m, static_cast<Eigen::Index>(m)));
    ++t;
  }
  if (t != t_len) throw ManifestError("records.jsonl holds fewer records than declared frames");
  return ds;
}

}  // namespace dextac
