#pragma once

// Geometric scan simulator: probe trajectories, pinhead calibration data and
// corrupted "predictions". Everything is deterministic given the seed.
//
// Trajectories are laid out in a path frame whose x axis is the travel axis,
// whose xy plane is the skin surface and whose -z axis points into tissue. The
// path point is the top-centre of the image. Heading psi(s) varies along the
// arc length s:
//   straight  psi = 0
//   c_shape   one arc, psi from -turn/2 to +turn/2
//   s_shape   two mirrored arcs of length L/2, psi -turn/2 -> +turn/2 -> -turn/2
// so that start and end both lie on the travel axis.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "freehand/calib.hpp"
#include "freehand/ddf.hpp"
#include "freehand/error.hpp"
#include "freehand/rng.hpp"
#include "freehand/se3.hpp"

namespace freehand {

enum class TrajectoryShape { straight, c_shape, s_shape };
enum class ScanDirection { forward, reverse };
enum class ScanOrientation { perpendicular, parallel };

inline TrajectoryShape trajectory_shape_from_string(const std::string& s) {
  if (s == "straight") return TrajectoryShape::straight;
  if (s == "c_shape" || s == "c") return TrajectoryShape::c_shape;
  if (s == "s_shape" || s == "s") return TrajectoryShape::s_shape;
  throw Error(ErrorCode::invalid_input, "unknown trajectory shape '" + s + "'");
}

inline ScanDirection scan_direction_from_string(const std::string& s) {
  if (s == "forward" || s == "distal_to_proximal") return ScanDirection::forward;
  if (s == "reverse" || s == "proximal_to_distal") return ScanDirection::reverse;
  throw Error(ErrorCode::invalid_input, "unknown scan direction '" + s + "'");
}

inline ScanOrientation scan_orientation_from_string(const std::string& s) {
  if (s == "perpendicular") return ScanOrientation::perpendicular;
  if (s == "parallel") return ScanOrientation::parallel;
  throw Error(ErrorCode::invalid_input, "unknown scan orientation '" + s + "'");
}

/// Probe under simulation: calibration plus frame geometry.
struct ProbeGeometry {
  RigidTransform image_to_tool;
  ScaleTransform scale{0.2, 0.2};
  int width = 640;
  int height = 480;

  CalibrationSolution calibration() const {
    CalibrationSolution c;
    c.image_to_tool = image_to_tool;
    c.scale = scale;
    c.converged = true;
    return c;
  }
};

/// A fixed, non-trivial image->tool calibration at 0.2 mm/px on a 640x480 frame.
inline ProbeGeometry default_probe() {
  ProbeGeometry p;
  p.image_to_tool = RigidTransform::unchecked(rotation_zyx(0.12, -0.35, 1.2), Eigen::Vector3d(12.5, -40.0, 25.0));
  return p;
}

inline constexpr double kDefaultCTurn = std::numbers::pi / 2;
inline constexpr double kDefaultSTurn = std::numbers::pi / 3;

struct TrajectorySpec {
  TrajectoryShape shape = TrajectoryShape::straight;
  ScanDirection direction = ScanDirection::forward;
  ScanOrientation orientation = ScanOrientation::perpendicular;
  double length = 100.0;  // mm
  int frame_count = 101;
  double curvature = 0.0;  // 1/mm; 0 selects the default turn per arc
  double jitter_trans = 0.0;  // mm, per axis per frame
  double jitter_rot = 0.0;    // rad per frame
  std::uint64_t seed = 0;
  double frame_rate = 20.0;  // Hz, for timestamps
};

/// Camera placement of the path frame.
inline RigidTransform default_camera_from_path() {
  return RigidTransform::unchecked(rotation_zyx(0.1, -0.05, 0.3), Eigen::Vector3d(-60.0, 40.0, 850.0));
}

namespace detail {

struct PathPoint {
  Eigen::Vector2d position;
  double heading;
};

// Point on an arc of curvature k starting at `start` with heading psi0.
inline PathPoint arc_point(const Eigen::Vector2d& start, double psi0, double k, double s) {
  if (k == 0.0) return {start + s * Eigen::Vector2d(std::cos(psi0), std::sin(psi0)), psi0};
  const double psi = psi0 + k * s;
  const Eigen::Vector2d offset((std::sin(psi) - std::sin(psi0)) / k, -(std::cos(psi) - std::cos(psi0)) / k);
  return {start + offset, psi};
}

inline double arc_turn(const TrajectorySpec& spec, double arc_length, double fallback) {
  const double turn = spec.curvature > 0.0 ? spec.curvature * arc_length : fallback;
  if (turn > std::numbers::pi + 1e-12)
    throw Error(ErrorCode::invalid_input, "arc turn exceeds pi; reduce curvature or length");
  return turn;
}

inline PathPoint path_point(const TrajectorySpec& spec, double s) {
  const double length = spec.length;
  switch (spec.shape) {
    case TrajectoryShape::straight:
      return {Eigen::Vector2d(s, 0.0), 0.0};
    case TrajectoryShape::c_shape: {
      const double turn = arc_turn(spec, length, kDefaultCTurn);
      return arc_point(Eigen::Vector2d::Zero(), -turn / 2, turn / length, s);
    }
    case TrajectoryShape::s_shape: {
      const double half = length / 2;
      const double turn = arc_turn(spec, half, kDefaultSTurn);
      const double k = turn / half;
      if (s <= half) return arc_point(Eigen::Vector2d::Zero(), -turn / 2, k, s);
      const PathPoint mid = arc_point(Eigen::Vector2d::Zero(), -turn / 2, k, half);
      return arc_point(mid.position, mid.heading, -k, s - half);
    }
  }
  return {Eigen::Vector2d::Zero(), 0.0};
}

inline RigidTransform path_from_image(const TrajectorySpec& spec, const ProbeGeometry& probe, double s) {
  const PathPoint p = path_point(spec, s);
  const Eigen::Vector3d heading(std::cos(p.heading), std::sin(p.heading), 0.0);
  const Eigen::Vector3d depth(0.0, 0.0, -1.0);
  Eigen::Matrix3d r;
  if (spec.orientation == ScanOrientation::perpendicular) {
    r.col(0) = Eigen::Vector3d(std::sin(p.heading), -std::cos(p.heading), 0.0);
    r.col(1) = depth;
    r.col(2) = heading;
  } else {
    r.col(0) = heading;
    r.col(1) = depth;
    r.col(2) = heading.cross(depth);
  }
  const Eigen::Vector3d top_centre(p.position.x(), p.position.y(), 0.0);
  const Eigen::Vector3d origin = top_centre - r.col(0) * (0.5 * probe.scale.sx * (probe.width - 1));
  return RigidTransform::unchecked(r, origin);
}

inline RigidTransform small_random_motion(CounterRng& rng, double sigma_rot, double sigma_trans) {
  Eigen::Matrix3d r = Eigen::Matrix3d::Identity();
  if (sigma_rot > 0.0) {
    const Eigen::Vector3d axis(rng.normal(), rng.normal(), rng.normal());
    r = rotation_axis_angle(axis, rng.normal(0.0, sigma_rot));
  }
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
  if (sigma_trans > 0.0) t = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()) * sigma_trans;
  return RigidTransform::unchecked(r, t);
}

}  // namespace detail

/// Camera<-tool poses along the requested path (see file comment).
inline ScanPoses gen_trajectory(const TrajectorySpec& spec, const ProbeGeometry& probe = default_probe(),
                                const RigidTransform& camera_from_path = default_camera_from_path()) {
  if (!(spec.length > 0.0) || !std::isfinite(spec.length))
    throw Error(ErrorCode::invalid_input, "trajectory length must be positive");
  if (spec.frame_count < 2) throw Error(ErrorCode::invalid_input, "trajectory needs at least 2 frames");
  if (spec.curvature < 0.0 || spec.jitter_trans < 0.0 || spec.jitter_rot < 0.0 || !(spec.frame_rate > 0.0))
    throw Error(ErrorCode::invalid_input, "curvature, jitter and frame rate must be non-negative");
  if (spec.shape == TrajectoryShape::straight && spec.curvature > 0.0)
    throw Error(ErrorCode::invalid_input, "a straight trajectory cannot have curvature");

  const RigidTransform tool_from_image = invert(probe.image_to_tool);
  const double step = spec.length / (spec.frame_count - 1);
  ScanPoses poses;
  poses.frames.reserve(static_cast<std::size_t>(spec.frame_count));
  for (int k = 0; k < spec.frame_count; ++k) {
    const int along = spec.direction == ScanDirection::forward ? k : spec.frame_count - 1 - k;
    const double s = along == spec.frame_count - 1 ? spec.length : along * step;
    RigidTransform camera_from_image = compose(camera_from_path, detail::path_from_image(spec, probe, s));
    if (spec.jitter_rot > 0.0 || spec.jitter_trans > 0.0) {
      CounterRng rng(spec.seed, static_cast<std::uint64_t>(k));
      camera_from_image = compose(camera_from_image, detail::small_random_motion(rng, spec.jitter_rot, spec.jitter_trans));
    }
    poses.frames.push_back({k / spec.frame_rate, compose(camera_from_image, tool_from_image)});
  }
  return poses;
}

/// Pinhead observations whose pixels exactly satisfy the calibration model
/// for the generated probe poses, plus isotropic Gaussian pixel noise.
inline std::vector<PinheadObservation> gen_pinhead_observations(const ProbeGeometry& truth,
                                                                const Eigen::Vector3d& pin_world, int count,
                                                                double pixel_noise_std, std::uint64_t seed) {
  if (count < 1) throw Error(ErrorCode::invalid_input, "observation count must be at least 1");
  if (pixel_noise_std < 0.0) throw Error(ErrorCode::invalid_input, "pixel noise must be non-negative");
  std::vector<PinheadObservation> obs;
  obs.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    CounterRng rng(seed, static_cast<std::uint64_t>(i));
    const double u = rng.uniform(0.1, 0.9) * (truth.width - 1);
    const double v = rng.uniform(0.1, 0.9) * (truth.height - 1);
    // Probe held roughly downward, tilted and spun over a wide range.
    const Eigen::Matrix3d r = rotation_zyx(rng.uniform(-0.7, 0.7), rng.uniform(-0.7, 0.7),
                                           rng.uniform(-std::numbers::pi, std::numbers::pi));
    const Eigen::Vector3d in_tool = map_pixel(truth.image_to_tool, truth.scale, u, v);
    PinheadObservation o;
    o.camera_from_tool = RigidTransform::unchecked(r, pin_world - r * in_tool);
    o.pin_pixel = Eigen::Vector2d(u, v);
    if (pixel_noise_std > 0.0) {
      o.pin_pixel.x() = std::max(0.0, u + rng.normal(0.0, pixel_noise_std));
      o.pin_pixel.y() = std::max(0.0, v + rng.normal(0.0, pixel_noise_std));
    }
    obs.push_back(o);
  }
  return obs;
}

struct CorruptionSpec {
  double sigma_rot = 0.0;    // rad
  double sigma_trans = 0.0;  // mm
  Eigen::Vector3d bias = Eigen::Vector3d::Zero();  // mm per frame
  std::uint64_t seed = 0;
};

/// Left-multiplies each local transform by a random small motion plus the
/// bias translation. A zero spec returns the input unchanged.
inline std::vector<RigidTransform> corrupt_locals(const std::vector<RigidTransform>& gt_locals,
                                                  const CorruptionSpec& spec) {
  if (spec.sigma_rot < 0.0 || spec.sigma_trans < 0.0)
    throw Error(ErrorCode::invalid_input, "corruption sigmas must be non-negative");
  const bool noisy = spec.sigma_rot > 0.0 || spec.sigma_trans > 0.0;
  const bool biased = !spec.bias.isZero(0.0);
  std::vector<RigidTransform> out;
  out.reserve(gt_locals.size());
  for (std::size_t k = 0; k < gt_locals.size(); ++k) {
    RigidTransform t = gt_locals[k];
    if (noisy) {
      CounterRng rng(spec.seed, static_cast<std::uint64_t>(k));
      t = compose(detail::small_random_motion(rng, spec.sigma_rot, spec.sigma_trans), t);
    }
    if (biased) t = RigidTransform::unchecked(t.rotation(), t.translation() + spec.bias);
    out.push_back(t);
  }
  return out;
}

}  // namespace freehand
