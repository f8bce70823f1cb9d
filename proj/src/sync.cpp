#include "dextac/sync.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dextac/errors.hpp"

namespace dextac {

namespace {

constexpr double kWindowSlack = 1e-9;  // s

RigidTransform pose_row(const TimedStream& s, std::size_t i) {
  const auto r = s.samples.row(static_cast<Eigen::Index>(i));
  return {Eigen::Quaterniond(r[3], r[4], r[5], r[6]), Eigen::Vector3d(r[0], r[1], r[2])};
}

void set_pose_row(TimedStream& s, std::size_t i, const RigidTransform& p) {
  auto r = s.samples.row(static_cast<Eigen::Index>(i));
  r << p.translation.x(), p.translation.y(), p.translation.z(), p.rotation.w(), p.rotation.x(),
      p.rotation.y(), p.rotation.z();
}

/// Interval index i with ts[i] <= t <= ts[i+1] and the fraction inside it.
std::pair<std::size_t, double> locate(const std::vector<double>& ts, double t) {
  if (t <= ts.front()) return {0, 0.0};
  if (t >= ts.back()) return {ts.size() - 1, 0.0};
  const auto it = std::upper_bound(ts.begin(), ts.end(), t);
  const std::size_t i = static_cast<std::size_t>(it - ts.begin()) - 1;
  if (ts[i] == t) return {i, 0.0};
  return {i, (t - ts[i]) / (ts[i + 1] - ts[i])};
}

}  // namespace

std::string_view to_string(StreamKind kind) {
  switch (kind) {
    case StreamKind::kPose: return "pose";
    case StreamKind::kJoint: return "joint";
    case StreamKind::kTactile: return "tactile";
    case StreamKind::kScalar: return "scalar";
    case StreamKind::kImage: return "image";
  }
  return "scalar";
}

StreamKind stream_kind_from_string(std::string_view s) {
  if (s == "pose") return StreamKind::kPose;
  if (s == "joint") return StreamKind::kJoint;
  if (s == "tactile") return StreamKind::kTactile;
  if (s == "scalar") return StreamKind::kScalar;
  if (s == "image") return StreamKind::kImage;
  throw ManifestError("unknown stream kind '" + std::string(s) + "'");
}

void TimedStream::validate() const {
  if (timestamps.empty()) throw LengthMismatch("stream '" + name + "' is empty");
  if (kind != StreamKind::kImage && static_cast<std::size_t>(samples.rows()) != timestamps.size()) {
    throw LengthMismatch("stream '" + name + "' has " + std::to_string(samples.rows()) + " samples for " +
                         std::to_string(timestamps.size()) + " timestamps");
  }
  if (kind == StreamKind::kPose && samples.cols() != 7) {
    throw LengthMismatch("pose stream '" + name + "' rows must have 7 entries");
  }
  for (std::size_t i = 0; i < timestamps.size(); ++i) {
    if (!std::isfinite(timestamps[i]) || (i > 0 && !(timestamps[i] > timestamps[i - 1]))) {
      throw NonMonotonicTimestamps("stream '" + name + "' timestamps are not strictly increasing at sample " +
                                   std::to_string(i));
    }
  }
}

std::string image_frame_ref(const std::string& pattern, std::size_t index) {
  std::string idx = std::to_string(index);
  if (idx.size() < 6) idx.insert(0, 6 - idx.size(), '0');
  std::string out = pattern;
  const std::string key = "{index}";
  if (auto pos = out.find(key); pos != std::string::npos) {
    out.replace(pos, key.size(), idx);
  } else {
    out += idx;
  }
  return out;
}

RigidTransform interpolate_pose(const RigidTransform& a, const RigidTransform& b, double u) {
  if (u <= 0.0) return a;
  if (u >= 1.0) return b;
  Eigen::Quaterniond qa = canonical(a.rotation);
  Eigen::Quaterniond qb = canonical(b.rotation);
  double dot = qa.coeffs().dot(qb.coeffs());
  if (dot < 0.0) {
    qb.coeffs() = -qb.coeffs();
    dot = -dot;
  }
  Eigen::Quaterniond q;
  if (dot > 1.0 - 1e-12) {
    q.coeffs() = (1.0 - u) * qa.coeffs() + u * qb.coeffs();
  } else {
    const double theta = std::acos(std::min(dot, 1.0));
    const double sin_theta = std::sin(theta);
    const double wa = std::sin((1.0 - u) * theta) / sin_theta;
    const double wb = std::sin(u * theta) / sin_theta;
    q.coeffs() = wa * qa.coeffs() + wb * qb.coeffs();
  }
  return {q, (1.0 - u) * a.translation + u * b.translation};
}

std::vector<double> common_timeline(const std::vector<TimedStream>& streams, double rate) {
  if (streams.empty()) throw EmptyOverlap("no streams to synchronize");
  if (!(rate > 0.0)) throw ConfigError("resampling rate must be positive");
  double start = -std::numeric_limits<double>::infinity();
  double end = std::numeric_limits<double>::infinity();
  for (const auto& s : streams) {
    s.validate();
    start = std::max(start, s.timestamps.front());
    end = std::min(end, s.timestamps.back());
  }
  if (!(end >= start)) throw EmptyOverlap("streams share no common time window");
  const double window = end - start;
  if (window + kWindowSlack < 2.0 / rate) {
    throw EmptyOverlap("common window of " + std::to_string(window) + " s is shorter than two periods");
  }
  const auto count = static_cast<std::size_t>(std::floor(window * rate + kWindowSlack * rate)) + 1;
  std::vector<double> timeline(count);
  for (std::size_t k = 0; k < count; ++k) timeline[k] = start + static_cast<double>(k) / rate;
  return timeline;
}

std::vector<TimedStream> resample_streams(const std::vector<TimedStream>& streams, double rate) {
  const std::vector<double> timeline = common_timeline(streams, rate);
  std::vector<TimedStream> out;
  out.reserve(streams.size());
  for (const auto& s : streams) {
    TimedStream r;
    r.name = s.name;
    r.kind = s.kind;
    r.dtype = s.dtype;
    r.rate = rate;
    r.frame_pattern = s.frame_pattern;
    r.timestamps = timeline;
    if (s.kind != StreamKind::kImage) r.samples.resize(static_cast<Eigen::Index>(timeline.size()), s.samples.cols());
    if (s.kind == StreamKind::kImage) {
      // Frame indices ride in a one-column sample matrix.
      r.samples.resize(static_cast<Eigen::Index>(timeline.size()), 1);
    }
    for (std::size_t k = 0; k < timeline.size(); ++k) {
      const auto [i, u] = locate(s.timestamps, timeline[k]);
      const auto row = static_cast<Eigen::Index>(k);
      switch (s.kind) {
        case StreamKind::kPose: {
          if (u == 0.0) {
            r.samples.row(row) = s.samples.row(static_cast<Eigen::Index>(i));
          } else {
            set_pose_row(r, k, interpolate_pose(pose_row(s, i), pose_row(s, i + 1), u));
          }
          break;
        }
        case StreamKind::kImage: {
          std::size_t idx = i;
          if (u > 0.5) idx = i + 1;
          r.samples(row, 0) = static_cast<double>(idx);
          break;
        }
        default: {
          const auto a = s.samples.row(static_cast<Eigen::Index>(i));
          if (u == 0.0) {
            r.samples.row(row) = a;
          } else {
            r.samples.row(row) = (1.0 - u) * a + u * s.samples.row(static_cast<Eigen::Index>(i + 1));
          }
          if (s.kind == StreamKind::kTactile) r.samples.row(row) = r.samples.row(row).cwiseMax(0.0).cwiseMin(1.0);
          break;
        }
      }
    }
    out.push_back(std::move(r));
  }
  return out;
}

Demonstration resample(const std::vector<TimedStream>& streams, double rate) {
  const std::vector<TimedStream> rs = resample_streams(streams, rate);
  auto find = [&](const char* name, StreamKind kind) -> const TimedStream& {
    for (const auto& s : rs) {
      if (s.name == name) {
        if (s.kind != kind) {
          throw ManifestError(std::string("stream '") + name + "' must have kind " + std::string(to_string(kind)));
        }
        return s;
      }
    }
    throw ManifestError(std::string("demonstration is missing stream '") + name + "'");
  };
  const TimedStream& joints = find("j_glove", StreamKind::kJoint);
  const TimedStream& wrist = find("p_glove", StreamKind::kPose);
  const TimedStream& tactile = find("gamma_glove", StreamKind::kTactile);
  const TimedStream& object = find("p_object", StreamKind::kPose);

  Demonstration demo;
  demo.metadata.rate = rate;
  for (const auto& s : streams) demo.metadata.native_rates[s.name] = s.rate;
  demo.timestamps = joints.timestamps;
  const std::size_t t_len = demo.timestamps.size();
  for (std::size_t k = 0; k < t_len; ++k) {
    const auto row = static_cast<Eigen::Index>(k);
    demo.j_glove.emplace_back(joints.samples.row(row).transpose());
    demo.p_glove.push_back(pose_row(wrist, k));
    demo.gamma_glove.push_back({tactile.samples.row(row).transpose(), demo.timestamps[k]});
    demo.p_object.push_back(pose_row(object, k));
  }
  for (const auto& s : rs) {
    if (s.kind == StreamKind::kImage) {
      CameraStream cam{s.name, {}};
      for (std::size_t k = 0; k < t_len; ++k) {
        cam.frames.push_back(image_frame_ref(s.frame_pattern, static_cast<std::size_t>(s.samples(static_cast<Eigen::Index>(k), 0))));
      }
      demo.images.push_back(std::move(cam));
    } else if (s.kind == StreamKind::kScalar) {
      std::vector<double> values(t_len);
      for (std::size_t k = 0; k < t_len; ++k) values[k] = s.samples(static_cast<Eigen::Index>(k), 0);
      demo.scalars[s.name] = std::move(values);
    }
  }
  demo.validate();
  return demo;
}

}  // namespace dextac
