#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "freehand/ddf.hpp"
#include "freehand/sim.hpp"
#include "support.hpp"

using namespace freehand;
namespace ts = testing_support;

namespace {

/// gp/lp value by direct 4x4 products over plain arrays.
std::array<double, 3> oracle_displacement(const RigidTransform& t, const ScaleTransform& s, double u, double v) {
  const auto m = ts::from_eigen(t.matrix());
  const double p[4] = {s.sx * u, s.sy * v, 0.0, 1.0};
  std::array<double, 3> out{};
  for (int r = 0; r < 3; ++r) {
    double acc = 0.0;
    for (int c = 0; c < 4; ++c) acc += m[r][c] * p[c];
    out[static_cast<std::size_t>(r)] = acc - p[r];
  }
  return out;
}

std::size_t index_of(int frame, int v, int u, int width, int height) {
  return ((static_cast<std::size_t>(frame - 1) * static_cast<std::size_t>(height) + static_cast<std::size_t>(v)) *
              static_cast<std::size_t>(width) +
          static_cast<std::size_t>(u)) *
         3;
}

ScanPoses short_scan(int frames, double jitter = 0.0, std::uint64_t seed = 0) {
  TrajectorySpec spec;
  spec.shape = TrajectoryShape::c_shape;
  spec.frame_count = frames;
  spec.length = 60.0;
  spec.jitter_rot = jitter * 0.01;
  spec.jitter_trans = jitter;
  spec.seed = seed;
  return gen_trajectory(spec);
}

}  // namespace

TEST(GlobalPixels, IdentityGivesZero) {
  const std::vector<RigidTransform> globals(3);
  const auto gp = ddf_global_pixels(globals, ScaleTransform(0.2, 0.2), 5, 4);
  ASSERT_EQ(gp.size(), 3u * 5 * 4 * 3);
  for (double x : gp) EXPECT_EQ(x, 0.0);
}

TEST(GlobalPixels, PureTranslationEverywhere) {
  std::vector<RigidTransform> globals;
  for (int i = 1; i <= 4; ++i) globals.push_back(RigidTransform::from_translation(0, 0, i));
  const auto gp = ddf_global_pixels(globals, ScaleTransform(0.2, 0.3), 6, 5);
  for (int f = 1; f <= 4; ++f)
    for (int v = 0; v < 5; ++v)
      for (int u = 0; u < 6; ++u) {
        const std::size_t k = index_of(f, v, u, 6, 5);
        ASSERT_EQ(gp[k], 0.0);
        ASSERT_EQ(gp[k + 1], 0.0);
        ASSERT_EQ(gp[k + 2], static_cast<double>(f));
      }
}

TEST(GlobalPixels, MatchesScalarLoopOracle) {
  std::mt19937_64 gen(41);
  const ScaleTransform s(0.21, 0.18);
  std::vector<RigidTransform> globals;
  for (int i = 0; i < 5; ++i) globals.push_back(ts::random_rigid(gen, 30.0));
  const auto gp = ddf_global_pixels(globals, s, 8, 8);
  for (int f = 1; f <= 5; ++f)
    for (int v = 0; v < 8; ++v)
      for (int u = 0; u < 8; ++u) {
        const auto o = oracle_displacement(globals[static_cast<std::size_t>(f - 1)], s, u, v);
        const std::size_t k = index_of(f, v, u, 8, 8);
        for (std::size_t c = 0; c < 3; ++c) ASSERT_NEAR(gp[k + c], o[c], 1e-9);
      }
}

TEST(LocalPixels, IdentityAndConstantTranslation) {
  const std::vector<RigidTransform> identity(4);
  for (double x : ddf_local_pixels(identity, ScaleTransform(0.37, 0.21), 7, 3)) ASSERT_EQ(x, 0.0);
  const std::vector<RigidTransform> step(4, RigidTransform::from_translation(0, 0, 1));
  const auto lp = ddf_local_pixels(step, ScaleTransform(0.2, 0.2), 7, 3);
  for (std::size_t k = 0; k < lp.size(); k += 3) {
    ASSERT_EQ(lp[k], 0.0);
    ASSERT_EQ(lp[k + 2], 1.0);
  }
}

TEST(LocalPixels, FirstFrameEqualsGlobal) {
  const ScanPoses poses = short_scan(6, 0.3, 2);
  const auto calib = default_probe().calibration();
  const DdfSet set = gt_ddf_from_scan(poses, calib, {}, 9, 7);
  const std::size_t frame = set.frame_values();
  for (std::size_t k = 0; k < frame; ++k) ASSERT_EQ(set.gp[k], set.lp[k]);
}

TEST(Landmarks, IdentityTransformsGiveZero) {
  const std::vector<RigidTransform> identity(3);
  const LandmarkSet lms{{1, 2, 3}, {3, 0, 0}, {2, 9, 9}};
  for (double x : ddf_landmarks(identity, ScaleTransform(0.2, 0.2), lms, 10, 10)) EXPECT_EQ(x, 0.0);
}

TEST(Landmarks, MatchDenseIndexing) {
  std::mt19937_64 gen(42);
  const ScaleTransform s(0.2, 0.2);
  std::vector<RigidTransform> globals;
  for (int i = 0; i < 6; ++i) globals.push_back(ts::random_rigid(gen, 30.0));
  const int w = 11, h = 9;
  const auto gp = ddf_global_pixels(globals, s, w, h);
  std::uniform_int_distribution<int> frame(1, 6), uu(0, w - 1), vv(0, h - 1);
  LandmarkSet lms;
  for (int j = 0; j < 40; ++j) lms.push_back({frame(gen), static_cast<double>(uu(gen)), static_cast<double>(vv(gen))});
  const auto gl = ddf_landmarks(globals, s, lms, w, h);
  for (std::size_t j = 0; j < lms.size(); ++j) {
    const std::size_t k = index_of(lms[j].frame_index, static_cast<int>(lms[j].v), static_cast<int>(lms[j].u), w, h);
    for (std::size_t c = 0; c < 3; ++c) ASSERT_NEAR(gl[3 * j + c], gp[k + c], 1e-12);
  }
}

TEST(Landmarks, FrameZeroAndOutOfBoundsRejected) {
  const std::vector<RigidTransform> globals(3);
  const ScaleTransform s(0.2, 0.2);
  try {
    ddf_landmarks(globals, s, {{1, 1, 1}, {0, 10, 10}}, 64, 64);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::invalid_landmark);
    EXPECT_NE(std::string(e.what()).find("row 1"), std::string::npos);
  }
  EXPECT_THROW(ddf_landmarks(globals, s, {{4, 1, 1}}, 64, 64), Error);
  EXPECT_THROW(ddf_landmarks(globals, s, {{1, 64, 1}}, 64, 64), Error);
  EXPECT_THROW(ddf_landmarks(globals, s, {{1, -0.5, 1}}, 64, 64), Error);
  EXPECT_NO_THROW(ddf_landmarks(globals, s, {{3, 63, 63}}, 64, 64));
}

TEST(GtDdf, StaticProbeGivesZero) {
  ScanPoses poses;
  const RigidTransform pose = mat_from_pose6({10, -20, 700, 0.3, -0.1, 2.0});
  for (int i = 0; i < 5; ++i) poses.frames.push_back({i * 0.05, pose});
  const DdfSet set = gt_ddf_from_scan(poses, default_probe().calibration(), {{2, 3, 4}}, 8, 6);
  for (double x : set.gp) ASSERT_EQ(x, 0.0);
  for (double x : set.lp) ASSERT_EQ(x, 0.0);
  for (double x : set.gl) ASSERT_EQ(x, 0.0);
  for (double x : set.ll) ASSERT_EQ(x, 0.0);
}

TEST(GtDdf, TwoFramesGlobalEqualsLocal) {
  const DdfSet set = gt_ddf_from_scan(short_scan(2), default_probe().calibration(), {{1, 2, 2}}, 6, 5);
  EXPECT_EQ(set.gp, set.lp);
  EXPECT_EQ(set.gl, set.ll);
}

TEST(GtDdf, CornersMatchAbsolutePoseOracle) {
  const ScanPoses poses = short_scan(40, 0.2, 9);
  const ProbeGeometry probe = default_probe();
  const int w = 640, h = 480;
  // Only the corner pixels are needed, so evaluate them through the source
  // rather than materialising 39 full frames.
  const auto source = TransformDdfSource::from_poses(poses, probe.calibration(), w, h);
  const auto m_rigid = ts::from_eigen(probe.image_to_tool.matrix());
  const auto m_rigid_inv = ts::rigid_inverse(m_rigid);
  const auto cam0_inv = ts::rigid_inverse(ts::from_eigen(poses.frames[0].camera_from_tool.matrix()));
  std::vector<double> row(static_cast<std::size_t>(w) * 3);
  for (int f = 1; f < 40; ++f) {
    const auto direct = ts::multiply(
        ts::multiply(ts::multiply(m_rigid_inv, cam0_inv),
                     ts::from_eigen(poses.frames[static_cast<std::size_t>(f)].camera_from_tool.matrix())),
        m_rigid);
    for (int v : {0, h - 1}) {
      source.fill_rows(DdfLevel::global, f, v, v + 1, row);
      for (int u : {0, w - 1}) {
        const double p[4] = {0.2 * u, 0.2 * v, 0.0, 1.0};
        for (int r = 0; r < 3; ++r) {
          double acc = 0.0;
          for (int c = 0; c < 4; ++c) acc += direct[r][c] * p[c];
          ASSERT_NEAR(row[static_cast<std::size_t>(u) * 3 + static_cast<std::size_t>(r)], acc - p[r], 1e-8)
              << "frame " << f << " corner (" << u << "," << v << ")";
        }
      }
    }
  }
}

TEST(GtDdf, ChainedLocalsReproduceDirectGlobals) {
  TrajectorySpec spec;
  spec.shape = TrajectoryShape::s_shape;
  spec.frame_count = 500;
  spec.length = 250.0;
  spec.jitter_trans = 0.3;
  spec.jitter_rot = 0.004;
  spec.seed = 17;
  const ScanPoses poses = gen_trajectory(spec);
  const ProbeGeometry probe = default_probe();
  const auto chained = globals_from_locals(locals_from_poses(poses, probe.image_to_tool));
  const auto direct = direct_globals_from_poses(poses, probe.image_to_tool);
  ASSERT_EQ(chained.size(), direct.size());
  for (std::size_t i = 0; i < chained.size(); ++i) {
    const auto a = corner_positions(chained[i], probe.scale, probe.width, probe.height);
    const auto b = corner_positions(direct[i], probe.scale, probe.width, probe.height);
    for (std::size_t c = 0; c < 4; ++c) ASSERT_LT((a[c] - b[c]).norm(), 1e-8) << "frame " << i + 1;
  }
}

TEST(GtDdf, DisplacedFramesStayRigid) {
  const ScanPoses poses = short_scan(8, 0.5, 4);
  const auto calib = default_probe().calibration();
  const int w = 12, h = 10;
  const DdfSet set = gt_ddf_from_scan(poses, calib, {}, w, h);
  std::mt19937_64 gen(43);
  std::uniform_int_distribution<int> uu(0, w - 1), vv(0, h - 1);
  for (int f = 1; f < 8; ++f)
    for (int trial = 0; trial < 50; ++trial) {
      const int u1 = uu(gen), v1 = vv(gen), u2 = uu(gen), v2 = vv(gen);
      const std::size_t k1 = index_of(f, v1, u1, w, h), k2 = index_of(f, v2, u2, w, h);
      const Eigen::Vector3d p1(0.2 * u1 + set.gp[k1], 0.2 * v1 + set.gp[k1 + 1], set.gp[k1 + 2]);
      const Eigen::Vector3d p2(0.2 * u2 + set.gp[k2], 0.2 * v2 + set.gp[k2 + 1], set.gp[k2 + 2]);
      const double before = std::hypot(0.2 * (u1 - u2), 0.2 * (v1 - v2));
      ASSERT_NEAR((p1 - p2).norm(), before, 1e-8);
    }
}

TEST(GtDdf, Deterministic) {
  const ScanPoses poses = short_scan(5, 0.4, 3);
  const auto calib = default_probe().calibration();
  const DdfSet a = gt_ddf_from_scan(poses, calib, {{1, 1, 1}}, 7, 5);
  const DdfSet b = gt_ddf_from_scan(poses, calib, {{1, 1, 1}}, 7, 5);
  EXPECT_EQ(a.gp, b.gp);
  EXPECT_EQ(a.lp, b.lp);
  EXPECT_EQ(a.gl, b.gl);
}

TEST(GtDdf, RequiresTwoFrames) {
  ScanPoses one;
  one.frames.push_back({0.0, RigidTransform::identity()});
  EXPECT_THROW(gt_ddf_from_scan(one, default_probe().calibration(), {}, 4, 4), Error);
}

TEST(FrameSources, TransformSourceMatchesMaterialisedSet) {
  const ScanPoses poses = short_scan(6, 0.2, 8);
  const auto calib = default_probe().calibration();
  const LandmarkSet lms{{1, 0, 0}, {5, 6, 4}, {3, 2.5, 1.5}};
  const DdfSet dense = gt_ddf_from_scan(poses, calib, lms, 7, 5);
  const DdfSet streamed = materialize(TransformDdfSource::from_poses(poses, calib, 7, 5, lms));
  EXPECT_EQ(dense.gp, streamed.gp);
  EXPECT_EQ(dense.lp, streamed.lp);
  EXPECT_EQ(dense.gl, streamed.gl);
  EXPECT_EQ(dense.ll, streamed.ll);
  const DdfSet copied = materialize(DenseDdfSource(dense));
  EXPECT_EQ(copied.gp, dense.gp);
  EXPECT_EQ(copied.ll, dense.ll);
}

TEST(DdfSetValidation, RejectsInconsistentShapes) {
  DdfSet set;
  set.frame_count = 3;
  set.width = 2;
  set.height = 2;
  set.gp.assign(24, 0.0);
  set.lp.assign(24, 0.0);
  EXPECT_NO_THROW(set.validate());
  set.lp.pop_back();
  try {
    set.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::size_mismatch);
  }
}
