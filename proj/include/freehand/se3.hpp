#pragma once

// Rigid-transform algebra for freehand ultrasound: image (pixel / mm), tracker
// tool and camera coordinate systems, chaining of frame-to-frame transforms and
// scan-length geometry.
//
// Conventions used throughout the library:
//   - A transform named `a_from_b` maps coordinates expressed in frame b into
//     frame a (T^{a<-b}).
//   - Image pixel origin is the centre of the top-left pixel, x grows to the
//     right along the width, y grows downward along the height, z points into
//     the image.
//   - Euler angles are intrinsic Z-Y-X: R = Rz(rz) * Ry(ry) * Rx(rx), radians.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "freehand/error.hpp"

namespace freehand {

/// Drift above which a composed rotation is projected back onto SO(3).
inline constexpr double kOrthonormalityDrift = 1e-9;

/// Six-parameter pose: translation in mm, intrinsic Z-Y-X angles in radians.
struct Pose6 {
  double tx = 0.0, ty = 0.0, tz = 0.0;
  double rx = 0.0, ry = 0.0, rz = 0.0;

  bool finite() const {
    return std::isfinite(tx) && std::isfinite(ty) && std::isfinite(tz) && std::isfinite(rx) &&
           std::isfinite(ry) && std::isfinite(rz);
  }
};

inline Eigen::Matrix3d rotation_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Eigen::Matrix3d r;
  r << 1, 0, 0, 0, c, -s, 0, s, c;
  return r;
}

inline Eigen::Matrix3d rotation_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Eigen::Matrix3d r;
  r << c, 0, s, 0, 1, 0, -s, 0, c;
  return r;
}

inline Eigen::Matrix3d rotation_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Eigen::Matrix3d r;
  r << c, -s, 0, s, c, 0, 0, 0, 1;
  return r;
}

/// Rz(rz) * Ry(ry) * Rx(rx) in closed form.
inline Eigen::Matrix3d rotation_zyx(double rx, double ry, double rz) {
  const double cx = std::cos(rx), sx = std::sin(rx);
  const double cy = std::cos(ry), sy = std::sin(ry);
  const double cz = std::cos(rz), sz = std::sin(rz);
  Eigen::Matrix3d r;
  r << cz * cy, cz * sy * sx - sz * cx, cz * sy * cx + sz * sx,  //
      sz * cy, sz * sy * sx + cz * cx, sz * sy * cx - cz * sx,   //
      -sy, cy * sx, cy * cx;
  return r;
}

/// Rotation by `angle` about `axis` (need not be normalised; zero axis -> I).
inline Eigen::Matrix3d rotation_axis_angle(const Eigen::Vector3d& axis, double angle) {
  const double n = axis.norm();
  if (n == 0.0 || angle == 0.0) return Eigen::Matrix3d::Identity();
  const Eigen::Vector3d k = axis / n;
  Eigen::Matrix3d kx;
  kx << 0, -k.z(), k.y(), k.z(), 0, -k.x(), -k.y(), k.x(), 0;
  return Eigen::Matrix3d::Identity() + std::sin(angle) * kx + (1.0 - std::cos(angle)) * kx * kx;
}

/// Frobenius norm of R^T R - I.
inline double orthonormality_error(const Eigen::Matrix3d& r) {
  return (r.transpose() * r - Eigen::Matrix3d::Identity()).norm();
}

/// Nearest rotation in the Frobenius sense (polar factor).
inline Eigen::Matrix3d project_to_rotation(const Eigen::Matrix3d& m) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d u = svd.matrixU();
  const Eigen::Matrix3d v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0.0) u.col(2) *= -1.0;
  return u * v.transpose();
}

/// Rotation plus translation (mm). The rotation is kept orthonormal with
/// det +1; the homogeneous form always has bottom row (0, 0, 0, 1).
class RigidTransform {
 public:
  RigidTransform() : rotation_(Eigen::Matrix3d::Identity()), translation_(Eigen::Vector3d::Zero()) {}

  /// Validating constructor. Rotations within 1e-6 of SO(3) are accepted and
  /// re-projected when their drift exceeds 1e-9.
  RigidTransform(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation)
      : rotation_(rotation), translation_(translation) {
    if (!rotation.allFinite() || !translation.allFinite())
      throw Error(ErrorCode::invalid_input, "rigid transform has non-finite entries");
    const double drift = orthonormality_error(rotation);
    if (drift > 1e-6 || rotation.determinant() < 0.0)
      throw Error(ErrorCode::invalid_input, "rotation is not a proper orthonormal matrix");
    if (drift > kOrthonormalityDrift) rotation_ = project_to_rotation(rotation);
  }

  static RigidTransform identity() { return {}; }

  /// Skips validation; the caller guarantees the invariants.
  static RigidTransform unchecked(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation) {
    RigidTransform t;
    t.rotation_ = rotation;
    t.translation_ = translation;
    return t;
  }

  static RigidTransform from_translation(double x, double y, double z) {
    return unchecked(Eigen::Matrix3d::Identity(), Eigen::Vector3d(x, y, z));
  }

  static RigidTransform from_rotation(const Eigen::Matrix3d& r) { return {r, Eigen::Vector3d::Zero()}; }

  /// Builds from a homogeneous matrix, rejecting anything that is not rigid
  /// within `tolerance` (rotation block and bottom row).
  static RigidTransform from_matrix(const Eigen::Matrix4d& m, double tolerance = 1e-9) {
    if (!m.allFinite()) throw Error(ErrorCode::validation, "matrix has non-finite entries");
    const Eigen::Vector4d bottom = m.row(3).transpose();
    if ((bottom - Eigen::Vector4d(0, 0, 0, 1)).cwiseAbs().maxCoeff() > tolerance)
      throw Error(ErrorCode::validation, "bottom row is not (0, 0, 0, 1)");
    const Eigen::Matrix3d r = m.topLeftCorner<3, 3>();
    if (orthonormality_error(r) > tolerance)
      throw Error(ErrorCode::validation, "rotation block is not orthonormal");
    if (std::abs(r.determinant() - 1.0) > tolerance)
      throw Error(ErrorCode::validation, "rotation block has determinant " + std::to_string(r.determinant()));
    Eigen::Matrix3d rotation = r;
    if (orthonormality_error(r) > kOrthonormalityDrift) rotation = project_to_rotation(r);
    return unchecked(rotation, m.topRightCorner<3, 1>());
  }

  const Eigen::Matrix3d& rotation() const { return rotation_; }
  const Eigen::Vector3d& translation() const { return translation_; }

  Eigen::Matrix4d matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = rotation_;
    m.topRightCorner<3, 1>() = translation_;
    return m;
  }

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return rotation_ * p + translation_; }

 private:
  Eigen::Matrix3d rotation_;
  Eigen::Vector3d translation_;
};

/// Pixel-to-mm scaling, diag(sx, sy, 1, 1).
struct ScaleTransform {
  double sx = 1.0;
  double sy = 1.0;

  ScaleTransform() = default;
  ScaleTransform(double sx_mm, double sy_mm) : sx(sx_mm), sy(sy_mm) {
    if (!(sx > 0.0) || !(sy > 0.0) || !std::isfinite(sx) || !std::isfinite(sy))
      throw Error(ErrorCode::invalid_input, "scale factors must be finite and positive");
  }

  Eigen::Matrix4d matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m(0, 0) = sx;
    m(1, 1) = sy;
    return m;
  }
};

enum class Unit { pixel, mm };

struct PointSet {
  Unit unit = Unit::pixel;
  std::vector<Eigen::Vector3d> points;
};

// ---------------------------------------------------------------------------
// Pose parameterisation

inline RigidTransform mat_from_pose6(const Pose6& pose) {
  if (!pose.finite()) throw Error(ErrorCode::invalid_input, "pose has non-finite components");
  return RigidTransform::unchecked(rotation_zyx(pose.rx, pose.ry, pose.rz),
                                   Eigen::Vector3d(pose.tx, pose.ty, pose.tz));
}

namespace detail {
inline double wrap_pi(double a) { return a == -std::numbers::pi ? std::numbers::pi : a; }
}  // namespace detail

/// Inverse of mat_from_pose6. At gimbal lock (|cos ry| < 1e-9) rx is fixed to
/// 0 and rz carries the remaining in-plane rotation.
inline Pose6 pose6_from_mat(const RigidTransform& t) {
  const Eigen::Matrix3d& r = t.rotation();
  Pose6 p;
  p.tx = t.translation().x();
  p.ty = t.translation().y();
  p.tz = t.translation().z();
  const double s = std::clamp(-r(2, 0), -1.0, 1.0);
  p.ry = std::atan2(s, std::sqrt(r(0, 0) * r(0, 0) + r(1, 0) * r(1, 0)));
  const double cos_ry = std::sqrt(r(0, 0) * r(0, 0) + r(1, 0) * r(1, 0));
  if (cos_ry < 1e-9) {
    p.ry = s > 0 ? std::numbers::pi / 2 : -std::numbers::pi / 2;
    p.rx = 0.0;
    p.rz = detail::wrap_pi(std::atan2(-r(0, 1), r(1, 1)));
  } else {
    p.rx = detail::wrap_pi(std::atan2(r(2, 1), r(2, 2)));
    p.rz = detail::wrap_pi(std::atan2(r(1, 0), r(0, 0)));
  }
  return p;
}

// ---------------------------------------------------------------------------
// Group operations

/// Homogeneous product a * b.
inline RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  Eigen::Matrix3d r = a.rotation() * b.rotation();
  const Eigen::Vector3d t = a.rotation() * b.translation() + a.translation();
  if (orthonormality_error(r) > kOrthonormalityDrift) r = project_to_rotation(r);
  return RigidTransform::unchecked(r, t);
}

inline RigidTransform operator*(const RigidTransform& a, const RigidTransform& b) { return compose(a, b); }

inline RigidTransform invert(const RigidTransform& t) {
  const Eigen::Matrix3d rt = t.rotation().transpose();
  return RigidTransform::unchecked(rt, -(rt * t.translation()));
}

/// Tool frame i expressed in tool frame j: (camera_from_tool_j)^-1 * camera_from_tool_i.
inline RigidTransform relative_tool(const RigidTransform& camera_from_tool_i,
                                    const RigidTransform& camera_from_tool_j) {
  if (camera_from_tool_i.rotation() == camera_from_tool_j.rotation() &&
      camera_from_tool_i.translation() == camera_from_tool_j.translation())
    return RigidTransform::identity();
  return compose(invert(camera_from_tool_j), camera_from_tool_i);
}

/// Conjugates a tool-frame relative transform into image (mm) frames:
/// image_to_tool^-1 * tool_rel * image_to_tool.
inline RigidTransform image_relative(const RigidTransform& tool_rel, const RigidTransform& image_to_tool) {
  // No motion maps to no motion exactly, not merely to R^T R.
  if (tool_rel.rotation() == Eigen::Matrix3d::Identity() && tool_rel.translation().isZero(0.0))
    return RigidTransform::identity();
  return compose(compose(invert(image_to_tool), tool_rel), image_to_tool);
}

/// Maps pixel (u, v) of an image plane to mm through scale then `t`. Every
/// per-pixel path in the library goes through this function so dense, batch
/// and landmark computations agree bitwise.
inline Eigen::Vector3d map_pixel(const RigidTransform& t, const ScaleTransform& scale, double u, double v) {
  const Eigen::Matrix3d& r = t.rotation();
  const Eigen::Vector3d& o = t.translation();
  const double x = scale.sx * u;
  const double y = scale.sy * v;
  return {r(0, 0) * x + r(0, 1) * y + o.x(), r(1, 0) * x + r(1, 1) * y + o.y(),
          r(2, 0) * x + r(2, 1) * y + o.z()};
}

inline PointSet transform_points(const RigidTransform& t, const ScaleTransform& scale, const PointSet& pts) {
  if (pts.unit != Unit::pixel) throw Error(ErrorCode::invalid_input, "transform_points expects pixel-unit points");
  PointSet out;
  out.unit = Unit::mm;
  out.points.reserve(pts.points.size());
  for (const auto& p : pts.points) {
    if (p.z() != 0.0) throw Error(ErrorCode::invalid_input, "pixel points must lie in the image plane (z = 0)");
    out.points.push_back(map_pixel(t, scale, p.x(), p.y()));
  }
  return out;
}

/// output[k] = locals[0] * locals[1] * ... * locals[k].
inline std::vector<RigidTransform> accumulate_chain(std::span<const RigidTransform> locals) {
  std::vector<RigidTransform> globals;
  globals.reserve(locals.size());
  for (const auto& local : locals) {
    globals.push_back(globals.empty() ? local : compose(globals.back(), local));
  }
  return globals;
}

/// Corner pixels ordered top-left, top-right, bottom-left, bottom-right.
inline PointSet frame_corners(int width, int height) {
  if (width < 1 || height < 1) throw Error(ErrorCode::invalid_input, "frame dimensions must be at least 1x1");
  const double w = width - 1, h = height - 1;
  return {Unit::pixel, {{0, 0, 0}, {w, 0, 0}, {0, h, 0}, {w, h, 0}}};
}

/// Corner positions (mm, reference image frame) of one frame.
inline std::array<Eigen::Vector3d, 4> corner_positions(const RigidTransform& reference_from_frame,
                                                       const ScaleTransform& scale, int width, int height) {
  const PointSet corners = frame_corners(width, height);
  std::array<Eigen::Vector3d, 4> out;
  for (std::size_t c = 0; c < 4; ++c)
    out[c] = map_pixel(reference_from_frame, scale, corners.points[c].x(), corners.points[c].y());
  return out;
}

/// Sum over consecutive frames of the mean corner displacement. `globals`
/// holds frames 1..N-1 relative to frame 0, which is implicitly identity.
inline double scan_length(std::span<const RigidTransform> globals, const ScaleTransform& scale, int width,
                          int height) {
  if (globals.empty()) return 0.0;
  auto previous = corner_positions(RigidTransform::identity(), scale, width, height);
  double length = 0.0;
  for (const auto& g : globals) {
    const auto current = corner_positions(g, scale, width, height);
    double step = 0.0;
    for (std::size_t c = 0; c < 4; ++c) step += (current[c] - previous[c]).norm();
    length += step / 4.0;
    previous = current;
  }
  return length;
}

}  // namespace freehand
