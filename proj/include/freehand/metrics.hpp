#pragma once

// Reconstruction error metrics for one scan:
//   GPE / LPE  mean Euclidean distance between predicted and ground-truth
//              reconstructions over every pixel of frames 1..N-1
//   GLE / LLE  the same over the landmark set
// Both reconstructions share the base position S*p, so each distance reduces
// to |pred_displacement - gt_displacement|.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "freehand/ddf.hpp"
#include "freehand/error.hpp"
#include "freehand/parallel.hpp"

namespace freehand {

enum class ScanStatus { ok, failed, overtime };

inline const char* to_string(ScanStatus s) {
  switch (s) {
    case ScanStatus::ok: return "ok";
    case ScanStatus::failed: return "failed";
    case ScanStatus::overtime: return "overtime";
  }
  return "ok";
}

inline ScanStatus scan_status_from_string(const std::string& s) {
  if (s == "ok") return ScanStatus::ok;
  if (s == "failed") return ScanStatus::failed;
  if (s == "overtime") return ScanStatus::overtime;
  throw Error(ErrorCode::schema, "unknown scan status '" + s + "'");
}

/// Per-scan metrics for one team. Failed reports carry no metric values.
struct ScanMetricReport {
  std::string team;
  std::string scan;
  ScanStatus status = ScanStatus::ok;
  double gpe = 0.0;
  double gle = 0.0;
  double lpe = 0.0;
  double lle = 0.0;
  double runtime = 0.0;  // seconds

  bool has_metrics() const { return status != ScanStatus::failed; }
};

inline constexpr double kDefaultRuntimeLimit = 120.0;

/// Neumaier-compensated running sum.
struct CompensatedSum {
  double sum = 0.0;
  double compensation = 0.0;

  void add(double x) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x))
      compensation += (sum - t) + x;
    else
      compensation += (x - t) + sum;
    sum = t;
  }

  double value() const { return sum + compensation; }
};

namespace detail {
inline double distance_sum(std::span<const double> a, std::span<const double> b) {
  CompensatedSum s;
  for (std::size_t k = 0; k + 2 < a.size(); k += 3) {
    const double dx = a[k] - b[k];
    const double dy = a[k + 1] - b[k + 1];
    const double dz = a[k + 2] - b[k + 2];
    s.add(std::sqrt(dx * dx + dy * dy + dz * dz));
  }
  return s.value();
}
}  // namespace detail

/// Mean |pred - gt| over xyz-interleaved vectors. Empty input gives 0.
inline double mean_point_error(std::span<const double> pred, std::span<const double> gt) {
  if (pred.size() != gt.size() || pred.size() % 3 != 0)
    throw Error(ErrorCode::invalid_input, "prediction and ground truth shapes differ (" +
                                              std::to_string(pred.size()) + " vs " + std::to_string(gt.size()) +
                                              " values)");
  if (pred.empty()) return 0.0;
  return detail::distance_sum(pred, gt) / static_cast<double>(pred.size() / 3);
}

struct EvaluationOptions {
  int threads = 1;
  double runtime_limit = kDefaultRuntimeLimit;
};

/// Mean pixel error of one dense level, streamed row by row. Each row is
/// filled into a worker-local buffer, so memory stays at a few rows; row sums
/// are reduced in row, then frame, order so the result does not depend on the
/// thread count.
inline double streamed_pixel_error(const DdfFrameSource& pred, const DdfFrameSource& gt, DdfLevel level,
                                   int threads = 1) {
  const int width = gt.width(), height = gt.height(), frames = gt.frame_count();
  if (frames < 2) return 0.0;
  const std::size_t row_values = static_cast<std::size_t>(width) * 3;
  std::vector<double> row_sums(static_cast<std::size_t>(height));
  const int workers = resolve_threads(threads);

  CompensatedSum total;
  for (int f = 1; f < frames; ++f) {
    parallel_for(workers, height, [&](long v) {
      thread_local std::vector<double> p, g;
      p.resize(row_values);
      g.resize(row_values);
      pred.fill_rows(level, f, static_cast<int>(v), static_cast<int>(v) + 1, p);
      gt.fill_rows(level, f, static_cast<int>(v), static_cast<int>(v) + 1, g);
      row_sums[static_cast<std::size_t>(v)] = detail::distance_sum(p, g);
    });
    CompensatedSum frame;
    for (double s : row_sums) frame.add(s);
    total.add(frame.value());
  }
  const double count = static_cast<double>(frames - 1) * static_cast<double>(width) * static_cast<double>(height);
  return total.value() / count;
}

inline void check_compatible(const DdfFrameSource& pred, const DdfFrameSource& gt) {
  if (pred.frame_count() != gt.frame_count() || pred.width() != gt.width() || pred.height() != gt.height() ||
      pred.landmark_count() != gt.landmark_count())
    throw Error(ErrorCode::invalid_input,
                "prediction dimensions (" + std::to_string(pred.frame_count()) + " frames, " +
                    std::to_string(pred.width()) + "x" + std::to_string(pred.height()) + ", " +
                    std::to_string(pred.landmark_count()) + " landmarks) differ from ground truth (" +
                    std::to_string(gt.frame_count()) + " frames, " + std::to_string(gt.width()) + "x" +
                    std::to_string(gt.height()) + ", " + std::to_string(gt.landmark_count()) + " landmarks)");
}

/// Streams all four metrics. status = overtime when runtime > limit; the
/// metrics are reported either way.
inline ScanMetricReport evaluate_streamed(const DdfFrameSource& pred, const DdfFrameSource& gt, double runtime,
                                          const EvaluationOptions& opts = {}) {
  check_compatible(pred, gt);
  ScanMetricReport report;
  report.gpe = streamed_pixel_error(pred, gt, DdfLevel::global, opts.threads);
  report.lpe = streamed_pixel_error(pred, gt, DdfLevel::local, opts.threads);
  report.gle = mean_point_error(pred.landmarks(DdfLevel::global), gt.landmarks(DdfLevel::global));
  report.lle = mean_point_error(pred.landmarks(DdfLevel::local), gt.landmarks(DdfLevel::local));
  report.runtime = runtime;
  report.status = runtime > opts.runtime_limit ? ScanStatus::overtime : ScanStatus::ok;
  return report;
}

inline ScanMetricReport evaluate_scan(const DdfSet& pred, const DdfSet& gt, double runtime,
                                      double limit = kDefaultRuntimeLimit, int threads = 1) {
  const DenseDdfSource p(pred), g(gt);
  return evaluate_streamed(p, g, runtime, EvaluationOptions{threads, limit});
}

}  // namespace freehand
