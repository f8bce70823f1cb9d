#pragma once

#include <stdexcept>
#include <string>

namespace dextac {

/// Root of every error thrown by the library. `category()` drives the CLI
/// exit-code mapping.
class Error : public std::runtime_error {
 public:
  enum class Category { kConfig, kData, kNumerical };

  Error(Category category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  Category category() const noexcept { return category_; }

 private:
  Category category_;
};

#define DEXTAC_DEFINE_ERROR(Name, Cat)                                   \
  class Name : public Error {                                            \
   public:                                                               \
    explicit Name(const std::string& what)                               \
        : Error(Category::Cat, std::string(#Name ": ") + what) {}        \
  };

// Robot descriptions and configuration.
DEXTAC_DEFINE_ERROR(SyntaxError, kConfig)
DEXTAC_DEFINE_ERROR(ModelError, kConfig)
DEXTAC_DEFINE_ERROR(ConfigError, kConfig)
DEXTAC_DEFINE_ERROR(LayoutError, kConfig)

// Data shape and content.
DEXTAC_DEFINE_ERROR(DimensionMismatch, kData)
DEXTAC_DEFINE_ERROR(UnknownSite, kData)
DEXTAC_DEFINE_ERROR(EmptyOverlap, kData)
DEXTAC_DEFINE_ERROR(NonMonotonicTimestamps, kData)
DEXTAC_DEFINE_ERROR(ManifestError, kData)
DEXTAC_DEFINE_ERROR(BlobSizeMismatch, kData)
DEXTAC_DEFINE_ERROR(UnsupportedVersion, kData)
DEXTAC_DEFINE_ERROR(LengthMismatch, kData)
DEXTAC_DEFINE_ERROR(IoError, kData)
DEXTAC_DEFINE_ERROR(DegenerateInput, kData)

// Numerical failures.
DEXTAC_DEFINE_ERROR(NonFiniteLoss, kNumerical)
DEXTAC_DEFINE_ERROR(NotConverged, kNumerical)

#undef DEXTAC_DEFINE_ERROR

}  // namespace dextac

namespace dextac {

/// Wraps an error raised while processing one frame of a trajectory.
class FrameError : public Error {
 public:
  FrameError(std::size_t frame, const Error& cause)
      : Error(cause.category(), "frame " + std::to_string(frame) + ": " + cause.what()), frame_(frame) {}

  std::size_t frame() const noexcept { return frame_; }

 private:
  std::size_t frame_;
};

}  // namespace dextac
