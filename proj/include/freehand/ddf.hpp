#pragma once

// Dense displacement fields (DDFs) for a scan.
//
// For every frame i = 1..N-1 (frame 0 is the reference and is excluded) and
// every pixel p = (u, v, 0, 1):
//   GP[i-1, v, u] = T_global(i) * S * p - S * p     (relative to frame 0)
//   LP[i-1, v, u] = T_local(i)  * S * p - S * p     (relative to frame i-1)
// GL / LL are the same quantities evaluated at the landmark pixels.
//
// Layout of dense arrays: frame-major, then rows (v outer, u inner), xyz
// interleaved.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "freehand/calib.hpp"
#include "freehand/error.hpp"
#include "freehand/parallel.hpp"
#include "freehand/se3.hpp"

namespace freehand {

struct Landmark {
  int frame_index = 1;  // 0-based, must be in [1, N-1]
  double u = 0.0;
  double v = 0.0;
};

using LandmarkSet = std::vector<Landmark>;

enum class DdfLevel { global, local };

inline const char* to_string(DdfLevel level) { return level == DdfLevel::global ? "global" : "local"; }

struct DdfSet {
  int frame_count = 0;  // N, including the reference frame
  int width = 0;
  int height = 0;
  std::vector<double> gp;  // (N-1) x H x W x 3
  std::vector<double> gl;  // L x 3
  std::vector<double> lp;  // (N-1) x H x W x 3
  std::vector<double> ll;  // L x 3

  std::size_t landmark_count() const { return gl.size() / 3; }
  std::size_t frame_values() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3; }
  std::size_t pixel_values() const {
    return frame_count > 1 ? static_cast<std::size_t>(frame_count - 1) * frame_values() : 0;
  }

  /// Throws size_mismatch when array sizes disagree with the dimensions.
  void validate() const {
    if (frame_count < 1 || width < 1 || height < 1)
      throw Error(ErrorCode::invalid_input, "DDF dimensions must be positive");
    if (gp.size() != pixel_values() || lp.size() != pixel_values())
      throw Error(ErrorCode::size_mismatch, "dense DDF arrays do not match frame_count x height x width x 3");
    if (gl.size() != ll.size() || gl.size() % 3 != 0)
      throw Error(ErrorCode::size_mismatch, "landmark DDF arrays must both be L x 3");
  }
};

struct PoseSample {
  double timestamp = 0.0;
  RigidTransform camera_from_tool;
};

struct ScanPoses {
  std::vector<PoseSample> frames;

  std::size_t size() const { return frames.size(); }
};

// ---------------------------------------------------------------------------
// Transform chains

inline std::vector<RigidTransform> globals_from_locals(std::span<const RigidTransform> locals) {
  return accumulate_chain(locals);
}

/// locals[i-1] = T_{i-1 <- i} in image-mm coordinates, for i = 1..N-1.
inline std::vector<RigidTransform> locals_from_poses(const ScanPoses& poses, const RigidTransform& image_to_tool) {
  std::vector<RigidTransform> locals;
  if (poses.size() < 2) return locals;
  locals.reserve(poses.size() - 1);
  for (std::size_t i = 1; i < poses.size(); ++i) {
    const RigidTransform tool_rel = relative_tool(poses.frames[i].camera_from_tool, poses.frames[i - 1].camera_from_tool);
    locals.push_back(image_relative(tool_rel, image_to_tool));
  }
  return locals;
}

/// globals[i-1] = T_{0 <- i} computed directly from absolute poses (no chaining).
inline std::vector<RigidTransform> direct_globals_from_poses(const ScanPoses& poses,
                                                             const RigidTransform& image_to_tool) {
  std::vector<RigidTransform> globals;
  for (std::size_t i = 1; i < poses.size(); ++i) {
    const RigidTransform tool_rel = relative_tool(poses.frames[i].camera_from_tool, poses.frames[0].camera_from_tool);
    globals.push_back(image_relative(tool_rel, image_to_tool));
  }
  return globals;
}

// ---------------------------------------------------------------------------
// Per-pixel kernels

/// Writes displacement vectors for rows [row_begin, row_end) of one frame.
/// `out` must hold (row_end - row_begin) * width * 3 values.
inline void fill_displacement_rows(const RigidTransform& t, const ScaleTransform& scale, int width, int row_begin,
                                   int row_end, std::span<double> out) {
  std::size_t k = 0;
  for (int v = row_begin; v < row_end; ++v) {
    for (int u = 0; u < width; ++u) {
      const Eigen::Vector3d moved = map_pixel(t, scale, u, v);
      out[k++] = moved.x() - scale.sx * u;
      out[k++] = moved.y() - scale.sy * v;
      out[k++] = moved.z();
    }
  }
}

inline Eigen::Vector3d displacement_at(const RigidTransform& t, const ScaleTransform& scale, double u, double v) {
  const Eigen::Vector3d moved = map_pixel(t, scale, u, v);
  return {moved.x() - scale.sx * u, moved.y() - scale.sy * v, moved.z()};
}

namespace detail {
inline std::vector<double> dense_field(std::span<const RigidTransform> transforms, const ScaleTransform& scale,
                                       int width, int height) {
  if (width < 1 || height < 1) throw Error(ErrorCode::invalid_input, "frame dimensions must be at least 1x1");
  const std::size_t per_frame = static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3;
  std::vector<double> out(transforms.size() * per_frame);
  for (std::size_t f = 0; f < transforms.size(); ++f)
    fill_displacement_rows(transforms[f], scale, width, 0, height, std::span(out).subspan(f * per_frame, per_frame));
  return out;
}
}  // namespace detail

/// Dense global field; globals[i-1] = T_{0 <- i}.
inline std::vector<double> ddf_global_pixels(std::span<const RigidTransform> globals, const ScaleTransform& scale,
                                             int width, int height) {
  return detail::dense_field(globals, scale, width, height);
}

/// Dense local field; locals[i-1] = T_{i-1 <- i}.
inline std::vector<double> ddf_local_pixels(std::span<const RigidTransform> locals, const ScaleTransform& scale,
                                            int width, int height) {
  return detail::dense_field(locals, scale, width, height);
}

inline void validate_landmarks(const LandmarkSet& landmarks, std::size_t frame_count, int width, int height) {
  for (std::size_t j = 0; j < landmarks.size(); ++j) {
    const Landmark& lm = landmarks[j];
    const bool frame_ok = lm.frame_index >= 1 && static_cast<std::size_t>(lm.frame_index) < frame_count;
    const bool pixel_ok = std::isfinite(lm.u) && std::isfinite(lm.v) && lm.u >= 0.0 && lm.v >= 0.0 &&
                          lm.u <= width - 1 && lm.v <= height - 1;
    if (!frame_ok || !pixel_ok)
      throw Error(ErrorCode::invalid_landmark,
                  "landmark row " + std::to_string(j) + " (frame " + std::to_string(lm.frame_index) + ", u " +
                      std::to_string(lm.u) + ", v " + std::to_string(lm.v) + ") is outside a " +
                      std::to_string(frame_count) + "-frame " + std::to_string(width) + "x" + std::to_string(height) +
                      " scan");
  }
}

/// Landmark displacements (L x 3) computed directly from the per-frame
/// transforms; transforms[i-1] belongs to frame i.
inline std::vector<double> ddf_landmarks(std::span<const RigidTransform> transforms, const ScaleTransform& scale,
                                         const LandmarkSet& landmarks, int width, int height) {
  validate_landmarks(landmarks, transforms.size() + 1, width, height);
  std::vector<double> out;
  out.reserve(landmarks.size() * 3);
  for (const Landmark& lm : landmarks) {
    const Eigen::Vector3d d =
        displacement_at(transforms[static_cast<std::size_t>(lm.frame_index - 1)], scale, lm.u, lm.v);
    out.insert(out.end(), {d.x(), d.y(), d.z()});
  }
  return out;
}

/// Ground-truth DDFs from tracked poses and a calibration.
inline DdfSet gt_ddf_from_scan(const ScanPoses& poses, const CalibrationSolution& calib, const LandmarkSet& landmarks,
                               int width, int height) {
  if (poses.size() < 2) throw Error(ErrorCode::insufficient_data, "a scan needs at least 2 frames");
  const std::vector<RigidTransform> locals = locals_from_poses(poses, calib.image_to_tool);
  const std::vector<RigidTransform> globals = globals_from_locals(locals);
  DdfSet set;
  set.frame_count = static_cast<int>(poses.size());
  set.width = width;
  set.height = height;
  set.gp = ddf_global_pixels(globals, calib.scale, width, height);
  set.lp = ddf_local_pixels(locals, calib.scale, width, height);
  set.gl = ddf_landmarks(globals, calib.scale, landmarks, width, height);
  set.ll = ddf_landmarks(locals, calib.scale, landmarks, width, height);
  return set;
}

// ---------------------------------------------------------------------------
// Frame sources: row-addressable access to a DDF without materialising it.

class DdfFrameSource {
 public:
  virtual ~DdfFrameSource() = default;

  virtual int frame_count() const = 0;
  virtual int width() const = 0;
  virtual int height() const = 0;
  virtual std::size_t landmark_count() const = 0;

  /// Fills rows [row_begin, row_end) of dense frame `frame` (1..N-1).
  /// Must be safe to call concurrently for disjoint rows.
  virtual void fill_rows(DdfLevel level, int frame, int row_begin, int row_end, std::span<double> out) const = 0;

  virtual std::vector<double> landmarks(DdfLevel level) const = 0;
};

/// Views an in-memory DdfSet.
class DenseDdfSource final : public DdfFrameSource {
 public:
  explicit DenseDdfSource(const DdfSet& set) : set_(set) { set_.validate(); }

  int frame_count() const override { return set_.frame_count; }
  int width() const override { return set_.width; }
  int height() const override { return set_.height; }
  std::size_t landmark_count() const override { return set_.landmark_count(); }

  void fill_rows(DdfLevel level, int frame, int row_begin, int row_end, std::span<double> out) const override {
    const std::vector<double>& src = level == DdfLevel::global ? set_.gp : set_.lp;
    const std::size_t row_values = static_cast<std::size_t>(set_.width) * 3;
    const std::size_t offset = static_cast<std::size_t>(frame - 1) * set_.frame_values() +
                               static_cast<std::size_t>(row_begin) * row_values;
    const std::size_t count = static_cast<std::size_t>(row_end - row_begin) * row_values;
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(offset), count, out.begin());
  }

  std::vector<double> landmarks(DdfLevel level) const override {
    return level == DdfLevel::global ? set_.gl : set_.ll;
  }

 private:
  const DdfSet& set_;
};

/// Generates DDF rows on demand from per-frame transforms.
class TransformDdfSource final : public DdfFrameSource {
 public:
  TransformDdfSource(std::vector<RigidTransform> globals, std::vector<RigidTransform> locals, ScaleTransform scale,
                     int width, int height, LandmarkSet landmarks = {})
      : globals_(std::move(globals)),
        locals_(std::move(locals)),
        scale_(scale),
        width_(width),
        height_(height),
        landmarks_(std::move(landmarks)) {
    if (globals_.size() != locals_.size())
      throw Error(ErrorCode::invalid_input, "global and local transform counts differ");
    if (width < 1 || height < 1) throw Error(ErrorCode::invalid_input, "frame dimensions must be at least 1x1");
    validate_landmarks(landmarks_, globals_.size() + 1, width_, height_);
  }

  /// Ground-truth source from tracked poses and a calibration.
  static TransformDdfSource from_poses(const ScanPoses& poses, const CalibrationSolution& calib, int width,
                                       int height, LandmarkSet landmarks = {}) {
    if (poses.size() < 2) throw Error(ErrorCode::insufficient_data, "a scan needs at least 2 frames");
    std::vector<RigidTransform> locals = locals_from_poses(poses, calib.image_to_tool);
    std::vector<RigidTransform> globals = globals_from_locals(locals);
    return {std::move(globals), std::move(locals), calib.scale, width, height, std::move(landmarks)};
  }

  /// Prediction-style source: only locals are given, globals are chained.
  static TransformDdfSource from_locals(std::vector<RigidTransform> locals, ScaleTransform scale, int width,
                                        int height, LandmarkSet landmarks = {}) {
    std::vector<RigidTransform> globals = globals_from_locals(locals);
    return {std::move(globals), std::move(locals), scale, width, height, std::move(landmarks)};
  }

  int frame_count() const override { return static_cast<int>(globals_.size()) + 1; }
  int width() const override { return width_; }
  int height() const override { return height_; }
  std::size_t landmark_count() const override { return landmarks_.size(); }

  void fill_rows(DdfLevel level, int frame, int row_begin, int row_end, std::span<double> out) const override {
    const auto& transforms = level == DdfLevel::global ? globals_ : locals_;
    fill_displacement_rows(transforms[static_cast<std::size_t>(frame - 1)], scale_, width_, row_begin, row_end, out);
  }

  std::vector<double> landmarks(DdfLevel level) const override {
    return ddf_landmarks(level == DdfLevel::global ? globals_ : locals_, scale_, landmarks_, width_, height_);
  }

  const std::vector<RigidTransform>& globals() const { return globals_; }
  const std::vector<RigidTransform>& locals() const { return locals_; }

 private:
  std::vector<RigidTransform> globals_;
  std::vector<RigidTransform> locals_;
  ScaleTransform scale_;
  int width_;
  int height_;
  LandmarkSet landmarks_;
};

/// Materialises any source into a DdfSet (small scans only).
inline DdfSet materialize(const DdfFrameSource& source) {
  DdfSet set;
  set.frame_count = source.frame_count();
  set.width = source.width();
  set.height = source.height();
  set.gp.resize(set.pixel_values());
  set.lp.resize(set.pixel_values());
  const std::size_t per_frame = set.frame_values();
  for (int f = 1; f < set.frame_count; ++f) {
    const std::size_t off = static_cast<std::size_t>(f - 1) * per_frame;
    source.fill_rows(DdfLevel::global, f, 0, set.height, std::span(set.gp).subspan(off, per_frame));
    source.fill_rows(DdfLevel::local, f, 0, set.height, std::span(set.lp).subspan(off, per_frame));
  }
  set.gl = source.landmarks(DdfLevel::global);
  set.ll = source.landmarks(DdfLevel::local);
  return set;
}

}  // namespace freehand
