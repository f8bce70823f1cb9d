#pragma once

#include <Eigen/Core>
#include <string>
#include <string_view>
#include <vector>

#include "dextac/demonstration.hpp"
#include "dextac/rigid_transform.hpp"

namespace dextac {

enum class StreamKind { kPose, kJoint, kTactile, kScalar, kImage };

std::string_view to_string(StreamKind kind);
StreamKind stream_kind_from_string(std::string_view s);

enum class SampleType { kF32, kF64 };

/// One raw sensor stream. `samples` is row-major, one row per timestamp.
/// Pose rows are [tx, ty, tz, qw, qx, qy, qz]. Image streams carry no samples;
/// frame i is `frame_pattern` with "{index}" replaced by the zero-padded index.
struct TimedStream {
  std::string name;
  StreamKind kind = StreamKind::kScalar;
  SampleType dtype = SampleType::kF64;
  std::vector<double> timestamps;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> samples;
  double rate = 0.0;  ///< declared native rate, Hz (informational)
  std::string frame_pattern;

  std::size_t length() const { return timestamps.size(); }
  /// Throws NonMonotonicTimestamps or LengthMismatch.
  void validate() const;
};

std::string image_frame_ref(const std::string& pattern, std::size_t index);

/// Shortest-arc slerp of the rotation and lerp of the translation.
/// u = 0 and u = 1 return the (canonical) endpoints exactly.
RigidTransform interpolate_pose(const RigidTransform& a, const RigidTransform& b, double u);

/// Common window [max start, min end] sampled at t0 + k / rate.
std::vector<double> common_timeline(const std::vector<TimedStream>& streams, double rate);

/// Resamples every stream onto common_timeline(). Joint and scalar streams
/// interpolate linearly, pose streams lerp + slerp, tactile streams
/// interpolate linearly then clamp to [0, 1], image streams take the nearest
/// frame (earlier on ties). Never extrapolates. Throws EmptyOverlap when the
/// window is empty or shorter than 2 / rate.
std::vector<TimedStream> resample_streams(const std::vector<TimedStream>& streams, double rate);

/// Resamples and assembles a Demonstration from the streams named
/// j_glove, p_glove, gamma_glove and p_object. Image streams become camera
/// references; extra scalar streams are carried along.
Demonstration resample(const std::vector<TimedStream>& streams, double rate);

}  // namespace dextac
