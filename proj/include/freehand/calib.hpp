#pragma once

// Spatial (pinhead) and temporal calibration.
//
// Spatial calibration estimates the image(mm)->tool rigid transform, the pixel
// scale factors and the fixed pin position from observations of a stationary
// pinhead: every observed pin pixel, mapped through
//   camera_from_tool_i * image_to_tool * scale * (u, v, 0, 1)
// should land on the same camera-frame point. The 11 unknowns are solved by
// Levenberg-Marquardt over the stacked 3-component residuals.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/SVD>

#include "freehand/error.hpp"
#include "freehand/rng.hpp"
#include "freehand/se3.hpp"

namespace freehand {

struct PinheadObservation {
  RigidTransform camera_from_tool;
  Eigen::Vector2d pin_pixel = Eigen::Vector2d::Zero();
};

struct CalibrationParams {
  RigidTransform image_to_tool;
  double sx = 0.2;
  double sy = 0.2;
  Eigen::Vector3d pin_world = Eigen::Vector3d::Zero();
};

struct CalibrationSolution {
  RigidTransform image_to_tool;
  ScaleTransform scale{0.2, 0.2};
  Eigen::Vector3d pin_world = Eigen::Vector3d::Zero();
  double rms_residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct SolverOptions {
  int max_iterations = 200;
  double initial_damping = 1e-3;
  double relative_step = 1e-6;
  double relative_decrease_tolerance = 1e-10;
  double gradient_tolerance = 1e-8;
  double max_condition = 1e12;
  int restarts = 8;
  std::uint64_t seed = 0x5EED;
  double initial_scale = 0.2;
};

inline constexpr std::size_t kMinCalibrationObservations = 6;

/// Stacked residuals, 3 per observation: mapped pin position minus pin_world.
inline Eigen::VectorXd calibration_residuals(const CalibrationParams& params,
                                             std::span<const PinheadObservation> obs) {
  const ScaleTransform scale(params.sx, params.sy);
  Eigen::VectorXd r(3 * static_cast<Eigen::Index>(obs.size()));
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const Eigen::Vector3d in_tool = map_pixel(params.image_to_tool, scale, obs[i].pin_pixel.x(), obs[i].pin_pixel.y());
    r.segment<3>(3 * static_cast<Eigen::Index>(i)) = obs[i].camera_from_tool.apply(in_tool) - params.pin_world;
  }
  return r;
}

namespace detail {

inline constexpr std::array<const char*, 11> kCalibrationParameterNames = {
    "rigid tx", "rigid ty", "rigid tz", "rigid rx", "rigid ry", "rigid rz",
    "scale sx", "scale sy", "pin x",    "pin y",    "pin z"};

using ParamVector = Eigen::Matrix<double, 11, 1>;

inline CalibrationParams unpack(const ParamVector& x) {
  CalibrationParams p;
  p.image_to_tool = RigidTransform::unchecked(rotation_zyx(x[3], x[4], x[5]), Eigen::Vector3d(x[0], x[1], x[2]));
  p.sx = x[6];
  p.sy = x[7];
  p.pin_world = x.segment<3>(8);
  return p;
}

inline ParamVector pack(const CalibrationParams& p) {
  const Pose6 pose = pose6_from_mat(p.image_to_tool);
  ParamVector x;
  x << pose.tx, pose.ty, pose.tz, pose.rx, pose.ry, pose.rz, p.sx, p.sy, p.pin_world.x(), p.pin_world.y(),
      p.pin_world.z();
  return x;
}

// Residuals without the positivity check so the line search can probe freely;
// non-positive scales are rejected by the caller through the objective.
inline Eigen::VectorXd raw_residuals(const ParamVector& x, std::span<const PinheadObservation> obs) {
  const CalibrationParams p = unpack(x);
  Eigen::VectorXd r(3 * static_cast<Eigen::Index>(obs.size()));
  for (std::size_t i = 0; i < obs.size(); ++i) {
    ScaleTransform scale;
    scale.sx = p.sx;
    scale.sy = p.sy;
    const Eigen::Vector3d in_tool = map_pixel(p.image_to_tool, scale, obs[i].pin_pixel.x(), obs[i].pin_pixel.y());
    r.segment<3>(3 * static_cast<Eigen::Index>(i)) = obs[i].camera_from_tool.apply(in_tool) - p.pin_world;
  }
  return r;
}

inline double objective_of(const ParamVector& x, const Eigen::VectorXd& r) {
  if (!(x[6] > 0.0) || !(x[7] > 0.0) || !r.allFinite()) return std::numeric_limits<double>::infinity();
  return r.squaredNorm();
}

/// Forward-difference Jacobian with step relative_step * max(1, |x_j|).
inline Eigen::MatrixXd forward_jacobian(const ParamVector& x, const Eigen::VectorXd& r0,
                                        std::span<const PinheadObservation> obs, double relative_step) {
  Eigen::MatrixXd j(r0.size(), 11);
  for (int k = 0; k < 11; ++k) {
    ParamVector xp = x;
    const double h = relative_step * std::max(1.0, std::abs(x[k]));
    xp[k] += h;
    const double step = xp[k] - x[k];
    j.col(k) = (raw_residuals(xp, obs) - r0) / step;
  }
  return j;
}

struct LmRun {
  ParamVector x;
  double objective = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
};

inline LmRun levenberg_marquardt(ParamVector x, std::span<const PinheadObservation> obs, const SolverOptions& opts) {
  LmRun run;
  Eigen::VectorXd r = raw_residuals(x, obs);
  double f = objective_of(x, r);
  double lambda = opts.initial_damping;
  int it = 0;
  bool converged = false;
  for (; it < opts.max_iterations && !converged; ++it) {
    if (f == 0.0) {
      converged = true;
      break;
    }
    const Eigen::MatrixXd j = forward_jacobian(x, r, obs, opts.relative_step);
    const Eigen::Matrix<double, 11, 11> a = j.transpose() * j;
    const ParamVector g = j.transpose() * r;
    if (g.norm() < opts.gradient_tolerance) {
      converged = true;
      break;
    }
    bool accepted = false;
    while (!accepted) {
      Eigen::Matrix<double, 11, 11> damped = a;
      for (int k = 0; k < 11; ++k) damped(k, k) += lambda * std::max(a(k, k), 1e-12);
      const ParamVector delta = damped.ldlt().solve(-g);
      const ParamVector trial = x + delta;
      const Eigen::VectorXd r_trial = raw_residuals(trial, obs);
      const double f_trial = objective_of(trial, r_trial);
      if (f_trial < f) {
        const double decrease = (f - f_trial) / f;
        x = trial;
        r = r_trial;
        f = f_trial;
        lambda = std::max(lambda / 10.0, 1e-15);
        accepted = true;
        if (decrease < opts.relative_decrease_tolerance) converged = true;
      } else {
        lambda *= 10.0;
        if (lambda > 1e16) {
          // No descent direction left at machine precision: stationary point.
          converged = g.norm() < std::sqrt(opts.gradient_tolerance) || f < 1e-24;
          run.x = x;
          run.objective = f;
          run.iterations = it + 1;
          run.converged = converged;
          return run;
        }
      }
    }
  }
  run.x = x;
  run.objective = f;
  run.iterations = it;
  run.converged = converged;
  return run;
}

inline Eigen::Matrix3d random_rotation(CounterRng& rng) {
  // Uniform unit quaternion from four normals.
  Eigen::Vector4d q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  q.normalize();
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Eigen::Matrix3d r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w),  //
      2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w),   //
      2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y);
  return r;
}

inline ParamVector initial_guess(std::span<const PinheadObservation> obs, const Eigen::Matrix3d& rotation,
                                 double scale) {
  CalibrationParams p;
  p.image_to_tool = RigidTransform::unchecked(rotation, Eigen::Vector3d::Zero());
  p.sx = scale;
  p.sy = scale;
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& o : obs) {
    mean += o.camera_from_tool.apply(rotation.col(0) * (scale * o.pin_pixel.x()) +
                                     rotation.col(1) * (scale * o.pin_pixel.y()));
  }
  p.pin_world = mean / static_cast<double>(obs.size());
  return pack(p);
}

}  // namespace detail

/// Solves for the calibration by Levenberg-Marquardt (see SolverOptions).
/// Starts from identity rotation, scale 0.2 mm/px and the mean mapped pin;
/// if that run does not converge, `restarts` random initial rotations are
/// tried and the lowest objective wins (ties -> lowest start index).
inline CalibrationSolution solve_spatial(std::span<const PinheadObservation> obs, const SolverOptions& opts = {}) {
  if (obs.size() < kMinCalibrationObservations)
    throw Error(ErrorCode::insufficient_data, "spatial calibration needs at least " +
                                                  std::to_string(kMinCalibrationObservations) + " observations, got " +
                                                  std::to_string(obs.size()));
  for (const auto& o : obs) {
    if (!o.pin_pixel.allFinite() || o.pin_pixel.x() < 0.0 || o.pin_pixel.y() < 0.0)
      throw Error(ErrorCode::invalid_input, "pin pixel coordinates must be finite and non-negative");
  }

  detail::LmRun best =
      detail::levenberg_marquardt(detail::initial_guess(obs, Eigen::Matrix3d::Identity(), opts.initial_scale), obs, opts);
  int total_iterations = best.iterations;
  if (!best.converged) {
    for (int start = 1; start <= opts.restarts; ++start) {
      CounterRng rng(opts.seed, static_cast<std::uint64_t>(start));
      const detail::LmRun run = detail::levenberg_marquardt(
          detail::initial_guess(obs, detail::random_rotation(rng), opts.initial_scale), obs, opts);
      total_iterations += run.iterations;
      const bool better = (run.converged && !best.converged) ||
                          (run.converged == best.converged && run.objective < best.objective);
      if (better) best = run;
    }
  }

  // Observability check on the column-normalised Jacobian at the solution.
  const Eigen::VectorXd r = detail::raw_residuals(best.x, obs);
  Eigen::MatrixXd j = detail::forward_jacobian(best.x, r, obs, opts.relative_step);
  for (int k = 0; k < 11; ++k) {
    const double n = j.col(k).norm();
    if (n > 0.0) j.col(k) /= n;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(j, Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double condition = sv[10] > 0.0 ? sv[0] / sv[10] : std::numeric_limits<double>::infinity();
  if (!(condition <= opts.max_condition)) {
    const Eigen::VectorXd null_dir = svd.matrixV().col(10);
    Eigen::Index dominant = 0;
    null_dir.cwiseAbs().maxCoeff(&dominant);
    throw Error(ErrorCode::degenerate_geometry,
                "calibration Jacobian is rank-deficient (condition " + std::to_string(condition) +
                    "); null direction dominated by " + detail::kCalibrationParameterNames[dominant]);
  }

  const CalibrationParams p = detail::unpack(best.x);
  CalibrationSolution sol;
  sol.image_to_tool = p.image_to_tool;
  sol.scale = ScaleTransform(p.sx, p.sy);
  sol.pin_world = p.pin_world;
  sol.rms_residual = std::sqrt(best.objective / static_cast<double>(obs.size()));
  sol.iterations = total_iterations;
  sol.converged = best.converged;
  return sol;
}

// ---------------------------------------------------------------------------
// Temporal calibration

struct MotionSignal {
  std::vector<double> timestamps;
  std::vector<double> values;
};

namespace detail {

inline void validate_signal(const MotionSignal& s, const char* name) {
  if (s.timestamps.size() != s.values.size())
    throw Error(ErrorCode::invalid_input, std::string(name) + " signal has mismatched timestamp/value counts");
  if (s.timestamps.size() < 2)
    throw Error(ErrorCode::insufficient_data, std::string(name) + " signal needs at least 2 samples");
  for (std::size_t i = 0; i < s.timestamps.size(); ++i) {
    if (!std::isfinite(s.timestamps[i]) || !std::isfinite(s.values[i]))
      throw Error(ErrorCode::invalid_input, std::string(name) + " signal has non-finite samples");
    if (i > 0 && !(s.timestamps[i] > s.timestamps[i - 1]))
      throw Error(ErrorCode::invalid_input, std::string(name) + " signal timestamps must be strictly increasing");
  }
  double mean = 0.0;
  for (double v : s.values) mean += v;
  mean /= static_cast<double>(s.values.size());
  double var = 0.0;
  for (double v : s.values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(s.values.size());
  if (var < 1e-12) throw Error(ErrorCode::degenerate_signal, std::string(name) + " signal is constant");
}

/// Linear interpolation; t must lie within the signal's time span.
inline double interpolate(const MotionSignal& s, double t) {
  const auto& ts = s.timestamps;
  auto it = std::upper_bound(ts.begin(), ts.end(), t);
  if (it == ts.begin()) return s.values.front();
  if (it == ts.end()) return s.values.back();
  const std::size_t hi = static_cast<std::size_t>(it - ts.begin());
  const std::size_t lo = hi - 1;
  const double w = (t - ts[lo]) / (ts[hi] - ts[lo]);
  return s.values[lo] + w * (s.values[hi] - s.values[lo]);
}

inline double correlation(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa / n < 1e-12 || sbb / n < 1e-12) return -std::numeric_limits<double>::infinity();
  return sab / std::sqrt(saa * sbb);
}

}  // namespace detail

/// Lag (s) by which `image` trails `tracker`, i.e. image(t) ~ tracker(t - lag),
/// chosen on a uniform grid in [-lag_range, lag_range] to maximise normalised
/// cross-correlation of the linearly resampled signals. Ties go to the
/// smallest |lag| (positive before negative).
inline double temporal_offset(const MotionSignal& tracker, const MotionSignal& image, double lag_range,
                              double grid = 0.005) {
  if (!(grid > 0.0) || !(lag_range >= 0.0) || !std::isfinite(lag_range))
    throw Error(ErrorCode::invalid_input, "lag range must be >= 0 and grid step > 0");
  detail::validate_signal(tracker, "tracker");
  detail::validate_signal(image, "image");

  const double t0 = tracker.timestamps.front(), t1 = tracker.timestamps.back();
  const double i0 = image.timestamps.front(), i1 = image.timestamps.back();
  const double min_duration = std::min(t1 - t0, i1 - i0);
  const long steps = static_cast<long>(std::floor((t1 - t0) / grid + 1e-9));
  const long max_lag = static_cast<long>(std::floor(lag_range / grid + 1e-9));

  double best_lag = 0.0;
  double best_score = -std::numeric_limits<double>::infinity();
  std::vector<double> a, b;
  for (long m = 0; m <= 2 * max_lag; ++m) {
    const long k = (m == 0) ? 0 : ((m % 2 == 1) ? (m + 1) / 2 : -(m / 2));
    const double lag = static_cast<double>(k) * grid;
    a.clear();
    b.clear();
    for (long s = 0; s <= steps; ++s) {
      const double t = t0 + static_cast<double>(s) * grid;
      const double ti = t + lag;
      if (ti < i0 || ti > i1) continue;
      a.push_back(detail::interpolate(tracker, t));
      b.push_back(detail::interpolate(image, ti));
    }
    const double overlap = a.empty() ? 0.0 : static_cast<double>(a.size() - 1) * grid;
    if (overlap + 1e-9 < 0.5 * min_duration)
      throw Error(ErrorCode::insufficient_data,
                  "signals overlap for less than half their duration at lag " + std::to_string(lag) + " s");
    const double score = detail::correlation(a, b);
    if (score > best_score) {
      best_score = score;
      best_lag = lag;
    }
  }
  return best_lag;
}

}  // namespace freehand
