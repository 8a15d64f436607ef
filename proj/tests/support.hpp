#pragma once

// Shared helpers for the test suites. The oracles here deliberately avoid the
// library's own arithmetic: plain arrays, explicit loops, textbook formulas.

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>

#include <Eigen/Core>

#include "freehand/se3.hpp"

namespace testing_support {

using Mat4 = std::array<std::array<double, 4>, 4>;

inline Mat4 identity4() {
  Mat4 m{};
  for (int i = 0; i < 4; ++i) m[i][i] = 1.0;
  return m;
}

inline Mat4 multiply(const Mat4& a, const Mat4& b) {
  Mat4 c{};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      double s = 0.0;
      for (int k = 0; k < 4; ++k) s += a[i][k] * b[k][j];
      c[i][j] = s;
    }
  return c;
}

inline Mat4 rot_x(double a) {
  Mat4 m = identity4();
  m[1][1] = std::cos(a);
  m[1][2] = -std::sin(a);
  m[2][1] = std::sin(a);
  m[2][2] = std::cos(a);
  return m;
}

inline Mat4 rot_y(double a) {
  Mat4 m = identity4();
  m[0][0] = std::cos(a);
  m[0][2] = std::sin(a);
  m[2][0] = -std::sin(a);
  m[2][2] = std::cos(a);
  return m;
}

inline Mat4 rot_z(double a) {
  Mat4 m = identity4();
  m[0][0] = std::cos(a);
  m[0][1] = -std::sin(a);
  m[1][0] = std::sin(a);
  m[1][1] = std::cos(a);
  return m;
}

inline Mat4 translation4(double x, double y, double z) {
  Mat4 m = identity4();
  m[0][3] = x;
  m[1][3] = y;
  m[2][3] = z;
  return m;
}

inline Mat4 from_eigen(const Eigen::Matrix4d& e) {
  Mat4 m{};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) m[i][j] = e(i, j);
  return m;
}

/// Rigid inverse computed from the block formula with explicit loops.
inline Mat4 rigid_inverse(const Mat4& m) {
  Mat4 r = identity4();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r[i][j] = m[j][i];
  for (int i = 0; i < 3; ++i) {
    double s = 0.0;
    for (int k = 0; k < 3; ++k) s += r[i][k] * m[k][3];
    r[i][3] = -s;
  }
  return r;
}

inline double max_abs_diff(const Mat4& a, const Mat4& b) {
  double d = 0.0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) d = std::max(d, std::abs(a[i][j] - b[i][j]));
  return d;
}

inline double max_abs_diff(const Eigen::Matrix4d& a, const Mat4& b) { return max_abs_diff(from_eigen(a), b); }

inline double max_abs_diff(const freehand::RigidTransform& a, const freehand::RigidTransform& b) {
  return (a.matrix() - b.matrix()).cwiseAbs().maxCoeff();
}

/// Random rigid transform from a uniformly distributed unit quaternion and a
/// translation in [-range, range]^3, using std::mt19937_64.
inline freehand::RigidTransform random_rigid(std::mt19937_64& gen, double range = 100.0) {
  std::normal_distribution<double> n01;
  std::uniform_real_distribution<double> uni(-range, range);
  double w = n01(gen), x = n01(gen), y = n01(gen), z = n01(gen);
  const double norm = std::sqrt(w * w + x * x + y * y + z * z);
  w /= norm;
  x /= norm;
  y /= norm;
  z /= norm;
  Eigen::Matrix3d r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w),  //
      2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w),   //
      2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y);
  return freehand::RigidTransform(r, Eigen::Vector3d(uni(gen), uni(gen), uni(gen)));
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("freehand_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing_support
