// freehand: command-line front end for simulation, calibration, ground-truth
// DDF generation, evaluation, ranking and statistics.
//
// Exit codes: 0 success, 2 usage or input error, 3 calibration did not
// converge, 4 prediction file unreadable.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "freehand/freehand.hpp"

namespace fs = std::filesystem;
using namespace freehand;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNotConverged = 3;
constexpr int kExitBadPrediction = 4;

struct Globals {
  int threads = 0;
};

// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string shape = "straight";
  std::string direction = "forward";
  std::string orientation = "perpendicular";
  double length = 100.0;
  int frames = 101;
  double curvature = 0.0;
  double jitter_trans = 0.0;
  double jitter_rot = 0.0;
  std::uint64_t seed = 0;
  double frame_rate = 20.0;
  int width = 640;
  int height = 480;
  std::string out;
  std::string calib_out;
  std::string pinhead_out;
  int pinhead_count = 30;
  double pixel_noise = 0.0;
  std::string landmarks_out;
  int landmark_count = 20;
  std::string pred_out;
  double pred_noise_rot = 0.0;
  double pred_noise_trans = 0.0;
  double pred_bias = 0.0;
};

const Eigen::Vector3d kPinWorld(-20.0, 35.0, 880.0);

int run_simulate(const SimulateArgs& a) {
  ProbeGeometry probe = default_probe();
  probe.width = a.width;
  probe.height = a.height;

  TrajectorySpec spec;
  spec.shape = trajectory_shape_from_string(a.shape);
  spec.direction = scan_direction_from_string(a.direction);
  spec.orientation = scan_orientation_from_string(a.orientation);
  spec.length = a.length;
  spec.frame_count = a.frames;
  spec.curvature = a.curvature;
  spec.jitter_trans = a.jitter_trans;
  spec.jitter_rot = a.jitter_rot;
  spec.seed = a.seed;
  spec.frame_rate = a.frame_rate;
  const ScanPoses poses = gen_trajectory(spec, probe);
  io::write_poses(a.out, poses);

  CalibrationSolution truth = probe.calibration();
  truth.pin_world = kPinWorld;
  if (!a.calib_out.empty()) io::write_text(a.calib_out, io::calibration_json(truth, false).dump(2) + "\n");
  if (!a.pinhead_out.empty())
    io::write_observations(a.pinhead_out,
                           gen_pinhead_observations(probe, kPinWorld, a.pinhead_count, a.pixel_noise, a.seed));

  LandmarkSet landmarks;
  if (!a.landmarks_out.empty()) {
    for (int j = 0; j < a.landmark_count; ++j) {
      CounterRng rng(a.seed, 0x1A4D0000u + static_cast<std::uint64_t>(j));
      Landmark lm;
      lm.frame_index = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(a.frames - 1)));
      lm.u = std::floor(rng.uniform() * a.width);
      lm.v = std::floor(rng.uniform() * a.height);
      landmarks.push_back(lm);
    }
    io::write_landmarks(a.landmarks_out, landmarks);
  }

  if (!a.pred_out.empty()) {
    CorruptionSpec corruption;
    corruption.sigma_rot = a.pred_noise_rot;
    corruption.sigma_trans = a.pred_noise_trans;
    corruption.bias = Eigen::Vector3d(0.0, 0.0, a.pred_bias);
    corruption.seed = a.seed ^ 0x9E3779B97F4A7C15ULL;
    const auto gt_locals = locals_from_poses(poses, probe.image_to_tool);
    const auto source = TransformDdfSource::from_locals(corrupt_locals(gt_locals, corruption), probe.scale, a.width,
                                                        a.height, landmarks);
    io::write_ddf(a.pred_out, source);
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct CalibrateArgs {
  std::string observations;
  std::string out;
  int max_iter = 200;
  std::uint64_t seed = 0x5EED;
};

int run_calibrate(const CalibrateArgs& a) {
  const auto obs = io::read_observations(a.observations);
  SolverOptions opts;
  opts.max_iterations = a.max_iter;
  opts.seed = a.seed;
  const CalibrationSolution sol = solve_spatial(obs, opts);
  io::write_calibration(a.out, sol);
  std::printf("rms_residual %.6e\n", sol.rms_residual);
  std::printf("iterations %d\n", sol.iterations);
  if (!sol.converged) {
    std::fprintf(stderr, "error: calibration did not converge within %d iterations\n", a.max_iter);
    return kExitNotConverged;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct DdfGtArgs {
  std::string poses;
  std::string calib;
  std::string landmarks;
  int width = 640;
  int height = 480;
  std::string out;
};

int run_ddf_gt(const DdfGtArgs& a) {
  const ScanPoses poses = io::read_poses(a.poses);
  const CalibrationSolution calib = io::read_calibration(a.calib);
  const LandmarkSet landmarks = a.landmarks.empty() ? LandmarkSet{} : io::read_landmarks(a.landmarks);
  const auto source = TransformDdfSource::from_poses(poses, calib, a.width, a.height, landmarks);
  io::write_ddf(a.out, source);
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct EvaluateArgs {
  std::string pred;
  std::string gt;
  double runtime = 0.0;
  double limit = kDefaultRuntimeLimit;
  std::string team;
  std::string scan;
  std::string out;
};

int run_evaluate(const EvaluateArgs& a, const Globals& g) {
  const io::DdfFileSource gt(a.gt);
  ScanMetricReport report;
  report.team = a.team.empty() ? fs::path(a.pred).stem().string() : a.team;
  report.scan = a.scan.empty() ? fs::path(a.gt).stem().string() : a.scan;
  report.runtime = a.runtime;

  std::optional<io::DdfFileSource> pred;
  try {
    pred.emplace(a.pred);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: unreadable prediction: %s\n", e.what());
    report.status = ScanStatus::failed;
    io::write_report(a.out, report);
    return kExitBadPrediction;
  }
  const ScanMetricReport metrics = evaluate_streamed(*pred, gt, a.runtime, EvaluationOptions{g.threads, a.limit});
  report.status = metrics.status;
  report.gpe = metrics.gpe;
  report.gle = metrics.gle;
  report.lpe = metrics.lpe;
  report.lle = metrics.lle;
  io::write_report(a.out, report);
  std::printf("gpe %.6f\ngle %.6f\nlpe %.6f\nlle %.6f\nstatus %s\n", report.gpe, report.gle, report.lpe, report.lle,
              to_string(report.status));
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct RankArgs {
  std::string reports_dir;
  std::string out;
  std::string policy = "keep";
  std::string scores_out;
};

int run_rank(const RankArgs& a) {
  const auto reports = io::read_reports_dir(a.reports_dir);
  const Leaderboard board = build_leaderboard(reports, overtime_policy_from_string(a.policy));
  io::write_leaderboard(a.out, board);
  if (!a.scores_out.empty()) io::write_text(a.scores_out, io::format_scores(board));
  std::printf("%-4s  %-20s  %7s  %7s  %7s  %7s  %7s  %10s\n", "rank", "team", "overall", "gs", "ls", "ps", "lms",
              "runtime_s");
  for (const auto& e : board.entries)
    std::printf("%-4d  %-20s  %7.3f  %7.3f  %7.3f  %7.3f  %7.3f  %10.3f\n", e.rank, e.team.c_str(), round3(e.overall),
                round3(e.gs), round3(e.ls), round3(e.ps), round3(e.lms), e.mean_runtime);
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct StatsArgs {
  std::string mode;
  std::string scores;
  std::string out;
  int resamples = 2000;
  std::optional<std::uint64_t> seed;
  std::string x;
  std::string y;
  double effect_size = 0.0;
  double mean_diff = 0.0;
  double sd = 0.0;
  double alpha = 0.05;
  double power = 0.9;
  std::string tail = "one";
};

void emit(const std::string& out, const io::json& j) {
  const std::string text = j.dump(2) + "\n";
  if (out.empty())
    std::fputs(text.c_str(), stdout);
  else
    io::write_text(out, text);
}

int run_stats(const StatsArgs& a, const Globals& g) {
  if (a.mode == "power") {
    double d = a.effect_size;
    if (d == 0.0 && a.sd > 0.0) d = a.mean_diff / a.sd;
    const int n = paired_t_sample_size(d, a.alpha, a.power, tail_from_string(a.tail));
    if (!a.out.empty()) {
      io::json j;
      j["effect_size"] = d;
      j["alpha"] = a.alpha;
      j["power"] = a.power;
      j["tail"] = a.tail;
      j["sample_size"] = n;
      io::write_text(a.out, j.dump(2) + "\n");
    }
    std::printf("%d\n", n);
    return kExitOk;
  }
  if (a.scores.empty()) throw Error(ErrorCode::invalid_input, "--scores is required for mode " + a.mode);
  const io::Table table = io::read_table(a.scores);
  if (a.mode == "pearson") {
    if (a.x.empty() || a.y.empty()) throw Error(ErrorCode::invalid_input, "pearson needs --x and --y column names");
    const double r = pearson_r(table.numeric_column(a.x), table.numeric_column(a.y));
    if (!a.out.empty()) {
      io::json j;
      j["x"] = a.x;
      j["y"] = a.y;
      j["n"] = table.rows.size();
      j["r"] = r;
      io::write_text(a.out, j.dump(2) + "\n");
    }
    std::printf("%.6f\n", r);
    return kExitOk;
  }
  const io::ScoreMatrix m = io::score_matrix(table);
  if (a.mode == "clt") {
    emit(a.out, io::clt_json(clt_report(m.teams, m.fs)));
    return kExitOk;
  }
  if (a.mode == "bootstrap") {
    if (!a.seed) throw Error(ErrorCode::invalid_input, "bootstrap needs --seed");
    emit(a.out, io::bootstrap_json(bootstrap_ranks(m.teams, m.fs, m.mean_runtime, a.resamples, *a.seed, g.threads)));
    return kExitOk;
  }
  throw Error(ErrorCode::invalid_input, "unknown stats mode '" + a.mode + "'");
}

// ---------------------------------------------------------------------------

struct TrajArgs {
  std::string poses;
  std::string calib;
  int width = 640;
  int height = 480;
  std::string out;
};

int run_traj(const TrajArgs& a) {
  const ScanPoses poses = io::read_poses(a.poses);
  const CalibrationSolution calib = io::read_calibration(a.calib);
  const auto globals = direct_globals_from_poses(poses, calib.image_to_tool);
  std::string text = "frame_index,tl_x,tl_y,tl_z,tr_x,tr_y,tr_z,bl_x,bl_y,bl_z,br_x,br_y,br_z\n";
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const RigidTransform t = i == 0 ? RigidTransform::identity() : globals[i - 1];
    const auto corners = corner_positions(t, calib.scale, a.width, a.height);
    text += std::to_string(i);
    for (const auto& c : corners)
      for (int k = 0; k < 3; ++k) text += "," + io::format_double(c[k]);
    text += '\n';
  }
  io::write_text(a.out, text);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Freehand ultrasound reconstruction evaluation toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--threads", g.threads, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);

  const std::vector<std::string> shapes{"straight", "c_shape", "s_shape"};
  const std::vector<std::string> directions{"forward", "reverse"};
  const std::vector<std::string> orientations{"perpendicular", "parallel"};

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic tracked scan");
  simulate->add_option("--shape", sim.shape)->check(CLI::IsMember(shapes));
  simulate->add_option("--direction", sim.direction)->check(CLI::IsMember(directions));
  simulate->add_option("--orientation", sim.orientation)->check(CLI::IsMember(orientations));
  simulate->add_option("--length-mm", sim.length)->check(CLI::PositiveNumber);
  simulate->add_option("--frames", sim.frames)->check(CLI::Range(2, 1 << 24));
  simulate->add_option("--curvature", sim.curvature, "Arc curvature in 1/mm (0 = default turn)");
  simulate->add_option("--jitter-trans", sim.jitter_trans, "Per-frame translation jitter (mm)");
  simulate->add_option("--jitter-rot", sim.jitter_rot, "Per-frame rotation jitter (rad)");
  simulate->add_option("--seed", sim.seed);
  simulate->add_option("--frame-rate", sim.frame_rate)->check(CLI::PositiveNumber);
  simulate->add_option("--width", sim.width)->check(CLI::PositiveNumber);
  simulate->add_option("--height", sim.height)->check(CLI::PositiveNumber);
  simulate->add_option("--out", sim.out, "Pose file")->required();
  simulate->add_option("--calib-out", sim.calib_out, "True calibration file");
  simulate->add_option("--pinhead-out", sim.pinhead_out, "Pinhead observation file");
  simulate->add_option("--pinhead-count", sim.pinhead_count)->check(CLI::PositiveNumber);
  simulate->add_option("--pixel-noise", sim.pixel_noise, "Pinhead pixel noise sd")->check(CLI::NonNegativeNumber);
  simulate->add_option("--landmarks-out", sim.landmarks_out, "Random landmark file");
  simulate->add_option("--landmark-count", sim.landmark_count)->check(CLI::NonNegativeNumber);
  simulate->add_option("--pred-out", sim.pred_out, "Corrupted prediction DDF file");
  simulate->add_option("--pred-noise-rot", sim.pred_noise_rot)->check(CLI::NonNegativeNumber);
  simulate->add_option("--pred-noise-trans", sim.pred_noise_trans)->check(CLI::NonNegativeNumber);
  simulate->add_option("--pred-bias", sim.pred_bias, "Per-frame z bias of the prediction (mm)");

  CalibrateArgs cal;
  auto* calibrate = app.add_subcommand("calibrate", "Solve the pinhead spatial calibration");
  calibrate->add_option("--observations", cal.observations)->required();
  calibrate->add_option("--out", cal.out)->required();
  calibrate->add_option("--max-iter", cal.max_iter)->check(CLI::PositiveNumber);
  calibrate->add_option("--seed", cal.seed, "Seed for restart rotations");

  DdfGtArgs gt;
  auto* ddf_gt = app.add_subcommand("ddf-gt", "Write ground-truth DDFs for a tracked scan");
  ddf_gt->add_option("--poses", gt.poses)->required();
  ddf_gt->add_option("--calib", gt.calib)->required();
  ddf_gt->add_option("--landmarks", gt.landmarks);
  ddf_gt->add_option("--width", gt.width)->check(CLI::PositiveNumber);
  ddf_gt->add_option("--height", gt.height)->check(CLI::PositiveNumber);
  ddf_gt->add_option("--out", gt.out)->required();

  EvaluateArgs ev;
  auto* evaluate = app.add_subcommand("evaluate", "Score a predicted DDF file against ground truth");
  evaluate->add_option("--pred", ev.pred)->required();
  evaluate->add_option("--gt", ev.gt)->required();
  evaluate->add_option("--runtime-s", ev.runtime)->check(CLI::NonNegativeNumber);
  evaluate->add_option("--limit-s", ev.limit)->check(CLI::PositiveNumber);
  evaluate->add_option("--team", ev.team);
  evaluate->add_option("--scan", ev.scan);
  evaluate->add_option("--out", ev.out)->required();

  RankArgs rk;
  auto* rank = app.add_subcommand("rank", "Aggregate per-scan reports into a leaderboard");
  rank->add_option("--reports-dir", rk.reports_dir)->required();
  rank->add_option("--out", rk.out)->required();
  rank->add_option("--overtime-policy", rk.policy)->check(CLI::IsMember({"keep", "fail"}));
  rank->add_option("--scores-out", rk.scores_out, "Per-scan final score table");

  StatsArgs st;
  auto* stats = app.add_subcommand("stats", "Ranking stability and study-design statistics");
  stats->add_option("--mode", st.mode)->required()->check(CLI::IsMember({"bootstrap", "clt", "pearson", "power"}));
  stats->add_option("--scores", st.scores, "CSV with team,scan,fs[,runtime_s] (or any columns for pearson)");
  stats->add_option("--out", st.out);
  stats->add_option("--resamples", st.resamples)->check(CLI::PositiveNumber);
  stats->add_option("--seed", st.seed);
  stats->add_option("--x", st.x);
  stats->add_option("--y", st.y);
  stats->add_option("--effect-size", st.effect_size);
  stats->add_option("--mean-diff", st.mean_diff);
  stats->add_option("--sd", st.sd);
  stats->add_option("--alpha", st.alpha);
  stats->add_option("--power", st.power);
  stats->add_option("--tail", st.tail)->check(CLI::IsMember({"one", "two"}));

  TrajArgs tr;
  auto* traj = app.add_subcommand("traj", "Export per-frame corner trajectories");
  traj->add_option("--poses", tr.poses)->required();
  traj->add_option("--calib", tr.calib)->required();
  traj->add_option("--width", tr.width)->check(CLI::PositiveNumber);
  traj->add_option("--height", tr.height)->check(CLI::PositiveNumber);
  traj->add_option("--out", tr.out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (*simulate) return run_simulate(sim);
    if (*calibrate) return run_calibrate(cal);
    if (*ddf_gt) return run_ddf_gt(gt);
    if (*evaluate) return run_evaluate(ev, g);
    if (*rank) return run_rank(rk);
    if (*stats) return run_stats(st, g);
    if (*traj) return run_traj(tr);
  } catch (const Error& e) {
    std::fprintf(stderr, "error [%s]: %s\n", to_string(e.code()), e.what());
    return kExitInput;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInput;
  }
  return kExitInput;
}
