#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "freehand/io.hpp"
#include "support.hpp"

using namespace freehand;
namespace fs = std::filesystem;
namespace ts = testing_support;

namespace {

struct CliRun {
  int code = -1;
  std::string out;
};

CliRun run(const std::string& args, const fs::path& dir) {
  const fs::path out = dir / "stdout.txt";
  const std::string cmd = std::string(FREEHAND_CLI) + " " + args + " > " + out.string() + " 2> " +
                          (dir / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  CliRun r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = io::read_text(out);
  return r;
}

std::string bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int data_rows(const fs::path& p) {
  std::istringstream in(io::read_text(p));
  std::string line;
  int n = 0;
  while (std::getline(in, line))
    if (!io::is_skippable(line)) ++n;
  return n;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

}  // namespace

TEST(Cli, SimulateIsDeterministic) {
  const fs::path d = ts::scratch_dir("cli_sim");
  ASSERT_EQ(run("simulate --shape c_shape --frames 101 --seed 3 --jitter-trans 0.1 --out " + q(d / "a.csv"), d).code, 0);
  ASSERT_EQ(run("simulate --shape c_shape --frames 101 --seed 3 --jitter-trans 0.1 --out " + q(d / "b.csv"), d).code, 0);
  EXPECT_EQ(data_rows(d / "a.csv"), 101);
  EXPECT_EQ(bytes(d / "a.csv"), bytes(d / "b.csv"));
  EXPECT_EQ(run("simulate --shape zigzag --out " + q(d / "c.csv"), d).code, 2);
  EXPECT_EQ(run("simulate --frames 1 --out " + q(d / "c.csv"), d).code, 2);
  EXPECT_EQ(run("", d).code, 2);
}

TEST(Cli, CalibrateRecoversTruth) {
  const fs::path d = ts::scratch_dir("cli_calib");
  ASSERT_EQ(run("simulate --frames 5 --out " + q(d / "p.csv") + " --calib-out " + q(d / "truth.json") +
                    " --pinhead-out " + q(d / "obs.csv") + " --pinhead-count 30 --seed 4",
                d)
                .code,
            0);
  const CliRun r = run("calibrate --observations " + q(d / "obs.csv") + " --out " + q(d / "calib.json"), d);
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("rms_residual"), std::string::npos);
  const CalibrationSolution truth = io::read_calibration(d / "truth.json");
  const CalibrationSolution sol = io::read_calibration(d / "calib.json");
  EXPECT_LT(sol.rms_residual, 1e-8);
  EXPECT_NEAR(sol.scale.sx, truth.scale.sx, 1e-6 * truth.scale.sx);
  EXPECT_LT((sol.pin_world - truth.pin_world).norm(), 1e-6);

  // Three observations are not enough.
  std::istringstream in(io::read_text(d / "obs.csv"));
  std::string line, few;
  for (int kept = 0; kept < 3 && std::getline(in, line);)
    if (!io::is_skippable(line)) {
      few += line + "\n";
      ++kept;
    }
  io::write_text(d / "few.csv", few);
  EXPECT_EQ(run("calibrate --observations " + q(d / "few.csv") + " --out " + q(d / "x.json"), d).code, 2);
}

TEST(Cli, StaticScanGivesZeroField) {
  const fs::path d = ts::scratch_dir("cli_static");
  std::string poses;
  for (int k = 0; k < 4; ++k) poses += std::to_string(k) + ",0,1,0,0,5,0,1,0,6,0,0,1,7,0,0,0,1\n";
  io::write_text(d / "static.csv", poses);
  ASSERT_EQ(run("simulate --frames 2 --out " + q(d / "unused.csv") + " --calib-out " + q(d / "c.json"), d).code, 0);
  ASSERT_EQ(run("ddf-gt --poses " + q(d / "static.csv") + " --calib " + q(d / "c.json") +
                    " --width 8 --height 6 --out " + q(d / "gt.ddf"),
                d)
                .code,
            0);
  const DdfSet s = io::read_ddf(d / "gt.ddf");
  EXPECT_EQ(s.frame_count, 4);
  for (double v : s.gp) EXPECT_EQ(v, 0.0);
  for (double v : s.lp) EXPECT_EQ(v, 0.0);
}

TEST(Cli, EvaluatePipeline) {
  const fs::path d = ts::scratch_dir("cli_eval");
  const std::string common = " --shape s_shape --frames 30 --width 16 --height 12 --seed 9";
  ASSERT_EQ(run("simulate" + common + " --out " + q(d / "p.csv") + " --calib-out " + q(d / "c.json") +
                    " --landmarks-out " + q(d / "lm.csv") + " --landmark-count 20 --pred-out " + q(d / "exact.ddf"),
                d)
                .code,
            0);
  ASSERT_EQ(run("ddf-gt --poses " + q(d / "p.csv") + " --calib " + q(d / "c.json") + " --landmarks " +
                    q(d / "lm.csv") + " --width 16 --height 12 --out " + q(d / "gt.ddf"),
                d)
                .code,
            0);
  EXPECT_EQ(io::read_ddf(d / "gt.ddf").landmark_count(), 20u);

  // The uncorrupted prediction reproduces ground truth up to f32 rounding.
  ASSERT_EQ(run("evaluate --pred " + q(d / "exact.ddf") + " --gt " + q(d / "gt.ddf") + " --out " + q(d / "r0.json"),
                d)
                .code,
            0);
  const ScanMetricReport r0 = io::read_report(d / "r0.json");
  EXPECT_LT(r0.gpe, 1e-4);
  EXPECT_LT(r0.lle, 1e-4);
  ASSERT_EQ(run("evaluate --pred " + q(d / "gt.ddf") + " --gt " + q(d / "gt.ddf") + " --out " + q(d / "same.json"),
                d)
                .code,
            0);
  const ScanMetricReport same = io::read_report(d / "same.json");
  EXPECT_EQ(same.gpe, 0.0);
  EXPECT_EQ(same.gle, 0.0);
  EXPECT_EQ(same.lpe, 0.0);
  EXPECT_EQ(same.lle, 0.0);
  EXPECT_EQ(same.team, "gt");

  ASSERT_EQ(run("simulate" + common + " --out " + q(d / "p2.csv") + " --landmarks-out " + q(d / "lm2.csv") +
                    " --landmark-count 20 --pred-out " + q(d / "biased.ddf") + " --pred-bias 0.1",
                d)
                .code,
            0);
  ASSERT_EQ(run("evaluate --pred " + q(d / "biased.ddf") + " --gt " + q(d / "gt.ddf") +
                    " --team t1 --scan s1 --runtime-s 200 --out " + q(d / "r1.json"),
                d)
                .code,
            0);
  const ScanMetricReport r1 = io::read_report(d / "r1.json");
  EXPECT_NEAR(r1.lpe, 0.1, 1e-5);
  EXPECT_GT(r1.gpe, r1.lpe);
  EXPECT_EQ(r1.status, ScanStatus::overtime);

  ASSERT_EQ(run("simulate --frames 30 --width 8 --height 12 --out " + q(d / "p3.csv") + " --pred-out " +
                    q(d / "narrow.ddf"),
                d)
                .code,
            0);
  EXPECT_EQ(run("evaluate --pred " + q(d / "narrow.ddf") + " --gt " + q(d / "gt.ddf") + " --out " + q(d / "x.json"),
                d)
                .code,
            2);

  io::write_text(d / "garbage.ddf", "not a ddf");
  EXPECT_EQ(run("evaluate --pred " + q(d / "garbage.ddf") + " --gt " + q(d / "gt.ddf") + " --team t2 --scan s1 --out " +
                    q(d / "r2.json"),
                d)
                .code,
            4);
  const ScanMetricReport r2 = io::read_report(d / "r2.json");
  EXPECT_EQ(r2.status, ScanStatus::failed);
  EXPECT_EQ(r2.team, "t2");
}

TEST(Cli, RankAndStats) {
  const fs::path d = ts::scratch_dir("cli_rank");
  const fs::path reports = d / "reports";
  fs::create_directories(reports);
  const char* teams[] = {"alpha", "beta", "gamma"};
  for (int t = 0; t < 3; ++t)
    for (int s = 0; s < 4; ++s) {
      ScanMetricReport r;
      r.team = teams[t];
      r.scan = "scan" + std::to_string(s);
      r.gpe = 1.0 + t + 0.1 * s;
      r.gle = 1.0 + t;
      r.lpe = 0.1 * (1 + t);
      r.lle = 0.1 * (1 + t) + 0.01 * s;
      r.runtime = 5.0;
      io::write_report(reports / (r.team + "_" + r.scan + ".json"), r);
    }
  const CliRun r = run("rank --reports-dir " + q(reports) + " --out " + q(d / "board.json") + " --scores-out " +
                        q(d / "scores.csv"),
                    d);
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("alpha"), std::string::npos);
  const auto board = io::json::parse(io::read_text(d / "board.json"));
  EXPECT_EQ(board.at("teams").at(0).at("team"), "alpha");
  EXPECT_EQ(board.at("teams").at(2).at("team"), "gamma");
  EXPECT_EQ(data_rows(d / "scores.csv"), 13);

  const CliRun boot = run("stats --mode bootstrap --scores " + q(d / "scores.csv") + " --seed 1 --out " +
                           q(d / "boot.json"),
                       d);
  ASSERT_EQ(boot.code, 0);
  const auto bj = io::json::parse(io::read_text(d / "boot.json"));
  EXPECT_EQ(bj.at("resamples"), 2000);
  EXPECT_EQ(run("stats --mode bootstrap --scores " + q(d / "scores.csv"), d).code, 2);

  ASSERT_EQ(run("stats --mode clt --scores " + q(d / "scores.csv") + " --out " + q(d / "clt.json"), d).code, 0);

  const CliRun power = run("stats --mode power --mean-diff 0.25 --sd 0.46 --alpha 0.05 --power 0.9 --tail one", d);
  ASSERT_EQ(power.code, 0);
  EXPECT_EQ(power.out, "31\n");
  EXPECT_EQ(run("stats --mode power --effect-size -1", d).code, 2);
}

TEST(Cli, TrajectoryExport) {
  const fs::path d = ts::scratch_dir("cli_traj");
  ASSERT_EQ(run("simulate --frames 12 --out " + q(d / "p.csv") + " --calib-out " + q(d / "c.json"), d).code, 0);
  ASSERT_EQ(run("traj --poses " + q(d / "p.csv") + " --calib " + q(d / "c.json") + " --out " + q(d / "t.csv"), d).code,
            0);
  const io::Table t = io::read_table(d / "t.csv");
  EXPECT_EQ(t.rows.size(), 12u);
  EXPECT_EQ(t.header.front(), "frame_index");
  // Straight scan: the top-left corner advances the same distance each frame.
  const auto x = t.numeric_column("tl_x"), y = t.numeric_column("tl_y"), z = t.numeric_column("tl_z");
  const double step0 = std::hypot(x[1] - x[0], y[1] - y[0], z[1] - z[0]);
  for (std::size_t k = 2; k < x.size(); ++k)
    EXPECT_NEAR(std::hypot(x[k] - x[k - 1], y[k] - y[k - 1], z[k] - z[k - 1]), step0, 1e-9);
  EXPECT_EQ(run("traj --poses " + q(d / "p.csv") + " --calib " + q(d / "nope.json") + " --out " + q(d / "u.csv"), d)
                .code,
            2);
}
