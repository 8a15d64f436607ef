#pragma once

// Aggregate-then-rank scoring.
//
// Per scan, each raw metric is min-max normalised over the teams that
// produced a result, x* = (max - x) / (max - min), so the best team gets 1 and
// the worst 0. Failed teams score 0 and do not enter min / max; a zero range
// gives every scored team 1. The final score is the mean of the four
// normalised metrics; composites pair them up (global, local, pixel,
// landmark). Teams are ranked by their mean final score over all scans,
// compared at three decimals, then by smaller mean runtime, then by id.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "freehand/error.hpp"
#include "freehand/metrics.hpp"
#include "freehand/parallel.hpp"
#include "freehand/rng.hpp"

namespace freehand {

enum class OvertimePolicy { keep, fail };

inline OvertimePolicy overtime_policy_from_string(const std::string& s) {
  if (s == "keep") return OvertimePolicy::keep;
  if (s == "fail") return OvertimePolicy::fail;
  throw Error(ErrorCode::invalid_input, "overtime policy must be 'keep' or 'fail', got '" + s + "'");
}

struct ScanScore {
  double gpe_n = 0.0, gle_n = 0.0, lpe_n = 0.0, lle_n = 0.0;
  double fs = 0.0, gs = 0.0, ls = 0.0, ps = 0.0, lms = 0.0;
};

struct LeaderboardEntry {
  std::string team;
  double overall = 0.0;
  double gs = 0.0, ls = 0.0, ps = 0.0, lms = 0.0;
  double mean_runtime = 0.0;
  int rank = 0;
  // Raw metric means over the scans this team was scored on.
  double gpe = 0.0, gle = 0.0, lpe = 0.0, lle = 0.0;
  int scans = 0;
  int failures = 0;
};

inline double round3(double x) { return std::round(x * 1000.0) / 1000.0; }

/// Normalises one metric across teams for a single scan.
inline std::vector<double> normalize_metric(std::span<const double> values, const std::vector<bool>& failed) {
  if (failed.size() != values.size())
    throw Error(ErrorCode::invalid_input, "values and failure flags differ in length");
  std::vector<double> out(values.size(), 0.0);
  double lo = 0.0, hi = 0.0;
  bool any = false;
  for (std::size_t t = 0; t < values.size(); ++t) {
    if (failed[t]) continue;
    if (!any) {
      lo = hi = values[t];
      any = true;
    } else {
      lo = std::min(lo, values[t]);
      hi = std::max(hi, values[t]);
    }
  }
  if (!any) return out;
  const double range = hi - lo;
  for (std::size_t t = 0; t < values.size(); ++t) {
    if (failed[t]) continue;
    out[t] = range < 1e-12 ? 1.0 : (hi - values[t]) / range;
  }
  return out;
}

inline bool counts_as_failed(const ScanMetricReport& r, OvertimePolicy policy) {
  return r.status == ScanStatus::failed || (policy == OvertimePolicy::fail && r.status == ScanStatus::overtime);
}

inline ScanScore compose_scores(double gpe_n, double gle_n, double lpe_n, double lle_n) {
  ScanScore s;
  s.gpe_n = gpe_n;
  s.gle_n = gle_n;
  s.lpe_n = lpe_n;
  s.lle_n = lle_n;
  s.fs = 0.25 * gpe_n + 0.25 * gle_n + 0.25 * lpe_n + 0.25 * lle_n;
  s.gs = 0.5 * gpe_n + 0.5 * gle_n;
  s.ls = 0.5 * lpe_n + 0.5 * lle_n;
  s.ps = 0.5 * gpe_n + 0.5 * lpe_n;
  s.lms = 0.5 * gle_n + 0.5 * lle_n;
  return s;
}

/// Scores every team on one scan; `reports` holds one entry per team.
inline std::vector<ScanScore> scan_scores(std::span<const ScanMetricReport> reports,
                                          OvertimePolicy policy = OvertimePolicy::keep) {
  const std::size_t n = reports.size();
  std::vector<bool> failed(n);
  std::vector<double> gpe(n), gle(n), lpe(n), lle(n);
  for (std::size_t t = 0; t < n; ++t) {
    failed[t] = counts_as_failed(reports[t], policy);
    gpe[t] = reports[t].gpe;
    gle[t] = reports[t].gle;
    lpe[t] = reports[t].lpe;
    lle[t] = reports[t].lle;
  }
  const auto gpe_n = normalize_metric(gpe, failed);
  const auto gle_n = normalize_metric(gle, failed);
  const auto lpe_n = normalize_metric(lpe, failed);
  const auto lle_n = normalize_metric(lle, failed);
  std::vector<ScanScore> out(n);
  for (std::size_t t = 0; t < n; ++t) out[t] = compose_scores(gpe_n[t], gle_n[t], lpe_n[t], lle_n[t]);
  return out;
}

/// Team order under the ranking rule: overall (3 dp) descending, mean
/// runtime ascending, team id ascending. Returns team indices, best first.
inline std::vector<std::size_t> ranking_order(std::span<const double> overall, std::span<const double> runtimes,
                                              std::span<const std::string> teams) {
  std::vector<std::size_t> order(overall.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double ra = round3(overall[a]), rb = round3(overall[b]);
    if (ra != rb) return ra > rb;
    if (runtimes[a] != runtimes[b]) return runtimes[a] < runtimes[b];
    return teams[a] < teams[b];
  });
  return order;
}

/// Aggregates per-scan scores (indexed [scan][team]) and ranks the teams.
/// The returned entries are sorted by rank.
inline std::vector<LeaderboardEntry> rank_teams(const std::vector<std::string>& teams,
                                                const std::vector<std::vector<ScanScore>>& scores,
                                                const std::vector<double>& mean_runtimes) {
  const std::size_t n = teams.size();
  if (mean_runtimes.size() != n) throw Error(ErrorCode::invalid_input, "one mean runtime per team is required");
  std::vector<LeaderboardEntry> entries(n);
  for (std::size_t t = 0; t < n; ++t) {
    entries[t].team = teams[t];
    entries[t].mean_runtime = mean_runtimes[t];
  }
  for (const auto& scan : scores) {
    if (scan.size() != n) throw Error(ErrorCode::invalid_input, "every scan needs a score for every team");
    for (std::size_t t = 0; t < n; ++t) {
      entries[t].overall += scan[t].fs;
      entries[t].gs += scan[t].gs;
      entries[t].ls += scan[t].ls;
      entries[t].ps += scan[t].ps;
      entries[t].lms += scan[t].lms;
    }
  }
  if (!scores.empty()) {
    const double m = static_cast<double>(scores.size());
    for (auto& e : entries) {
      e.overall /= m;
      e.gs /= m;
      e.ls /= m;
      e.ps /= m;
      e.lms /= m;
    }
  }
  std::vector<double> overall(n);
  for (std::size_t t = 0; t < n; ++t) overall[t] = entries[t].overall;
  const auto order = ranking_order(overall, mean_runtimes, teams);
  std::vector<LeaderboardEntry> ranked;
  ranked.reserve(n);
  for (std::size_t r = 0; r < n; ++r) {
    ranked.push_back(entries[order[r]]);
    ranked.back().rank = static_cast<int>(r) + 1;
  }
  return ranked;
}

// ---------------------------------------------------------------------------
// Tournament: raw per-scan reports -> leaderboard

struct ScanResult {
  std::string scan;
  std::vector<ScanMetricReport> reports;  // one per team, team order
  std::vector<ScanScore> scores;          // one per team, team order
};

struct Leaderboard {
  std::vector<std::string> teams;  // sorted ids
  std::vector<ScanResult> scans;   // sorted by scan id
  std::vector<LeaderboardEntry> entries;  // sorted by rank
  OvertimePolicy policy = OvertimePolicy::keep;

  /// Final scores indexed [team][scan] in `teams` / `scans` order.
  std::vector<std::vector<double>> final_scores() const {
    std::vector<std::vector<double>> fs(teams.size(), std::vector<double>(scans.size()));
    for (std::size_t s = 0; s < scans.size(); ++s)
      for (std::size_t t = 0; t < teams.size(); ++t) fs[t][s] = scans[s].scores[t].fs;
    return fs;
  }

  std::vector<double> mean_runtimes() const {
    std::vector<double> out(teams.size(), 0.0);
    for (const auto& e : entries) {
      const auto it = std::find(teams.begin(), teams.end(), e.team);
      out[static_cast<std::size_t>(it - teams.begin())] = e.mean_runtime;
    }
    return out;
  }
};

/// Groups reports by scan, treats a team's missing report on a scan as a
/// failure, scores every scan and ranks. Duplicate (team, scan) pairs are an
/// input error.
inline Leaderboard build_leaderboard(const std::vector<ScanMetricReport>& reports,
                                     OvertimePolicy policy = OvertimePolicy::keep) {
  Leaderboard board;
  board.policy = policy;
  std::map<std::string, std::map<std::string, ScanMetricReport>> by_scan;
  std::map<std::string, int> team_index;
  for (const auto& r : reports) {
    team_index.emplace(r.team, 0);
    auto& slot = by_scan[r.scan];
    if (!slot.emplace(r.team, r).second)
      throw Error(ErrorCode::invalid_input, "duplicate report for team '" + r.team + "' on scan '" + r.scan + "'");
  }
  for (const auto& [team, _] : team_index) board.teams.push_back(team);
  const std::size_t n = board.teams.size();

  std::vector<double> runtime_sum(n, 0.0);
  std::vector<int> runtime_count(n, 0);
  std::vector<double> gpe(n, 0.0), gle(n, 0.0), lpe(n, 0.0), lle(n, 0.0);
  std::vector<int> scored(n, 0), failures(n, 0);
  std::vector<std::vector<ScanScore>> all_scores;

  for (const auto& [scan, per_team] : by_scan) {
    ScanResult result;
    result.scan = scan;
    for (std::size_t t = 0; t < n; ++t) {
      const auto it = per_team.find(board.teams[t]);
      if (it == per_team.end()) {
        ScanMetricReport missing;
        missing.team = board.teams[t];
        missing.scan = scan;
        missing.status = ScanStatus::failed;
        result.reports.push_back(missing);
      } else {
        result.reports.push_back(it->second);
        runtime_sum[t] += it->second.runtime;
        ++runtime_count[t];
      }
      const ScanMetricReport& r = result.reports.back();
      if (counts_as_failed(r, policy)) {
        ++failures[t];
      } else {
        gpe[t] += r.gpe;
        gle[t] += r.gle;
        lpe[t] += r.lpe;
        lle[t] += r.lle;
        ++scored[t];
      }
    }
    result.scores = scan_scores(result.reports, policy);
    all_scores.push_back(result.scores);
    board.scans.push_back(std::move(result));
  }

  std::vector<double> mean_runtime(n, 0.0);
  for (std::size_t t = 0; t < n; ++t)
    if (runtime_count[t] > 0) mean_runtime[t] = runtime_sum[t] / runtime_count[t];

  board.entries = rank_teams(board.teams, all_scores, mean_runtime);
  for (auto& e : board.entries) {
    const auto t = static_cast<std::size_t>(
        std::find(board.teams.begin(), board.teams.end(), e.team) - board.teams.begin());
    e.scans = scored[t];
    e.failures = failures[t];
    if (scored[t] > 0) {
      e.gpe = gpe[t] / scored[t];
      e.gle = gle[t] / scored[t];
      e.lpe = lpe[t] / scored[t];
      e.lle = lle[t] / scored[t];
    }
  }
  return board;
}

// ---------------------------------------------------------------------------
// Bootstrap ranking stability

struct BootstrapReport {
  std::vector<std::string> teams;
  std::vector<std::vector<double>> rank_frequency;  // [team][rank - 1]
  std::vector<double> median_rank;
  int resamples = 0;
  std::uint64_t seed = 0;
};

inline double median_of(std::vector<int> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t m = values.size() / 2;
  if (values.size() % 2 == 1) return values[m];
  return 0.5 * (values[m - 1] + values[m]);
}

/// Resamples scans with replacement (same count) and re-ranks each time with
/// the leaderboard rule. Resample b draws its scan indices from
/// CounterRng(seed, b), so the report depends only on (inputs, seed).
inline BootstrapReport bootstrap_ranks(const std::vector<std::string>& teams,
                                       const std::vector<std::vector<double>>& final_scores,
                                       const std::vector<double>& mean_runtimes, int resamples, std::uint64_t seed,
                                       int threads = 1) {
  const std::size_t n = teams.size();
  if (final_scores.size() != n || mean_runtimes.size() != n)
    throw Error(ErrorCode::invalid_input, "bootstrap needs one score row and one runtime per team");
  if (resamples < 1) throw Error(ErrorCode::invalid_input, "resample count must be positive");
  const std::size_t scans = n == 0 ? 0 : final_scores.front().size();
  if (n > 0 && scans == 0) throw Error(ErrorCode::insufficient_data, "bootstrap needs at least one scan");
  for (const auto& row : final_scores)
    if (row.size() != scans) throw Error(ErrorCode::invalid_input, "score rows differ in length");

  // ranks[b * n + t] = rank of team t in resample b.
  std::vector<int> ranks(static_cast<std::size_t>(resamples) * n);
  parallel_for(resolve_threads(threads), resamples, [&](long b) {
    CounterRng rng(seed, static_cast<std::uint64_t>(b));
    std::vector<double> sums(n, 0.0);
    for (std::size_t j = 0; j < scans; ++j) {
      const std::size_t pick = static_cast<std::size_t>(rng.below(scans));
      for (std::size_t t = 0; t < n; ++t) sums[t] += final_scores[t][pick];
    }
    for (auto& s : sums) s /= static_cast<double>(scans);
    const auto order = ranking_order(sums, mean_runtimes, teams);
    for (std::size_t r = 0; r < n; ++r) ranks[static_cast<std::size_t>(b) * n + order[r]] = static_cast<int>(r) + 1;
  });

  BootstrapReport report;
  report.teams = teams;
  report.resamples = resamples;
  report.seed = seed;
  report.rank_frequency.assign(n, std::vector<double>(n, 0.0));
  report.median_rank.assign(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    std::vector<int> counts(n, 0);
    std::vector<int> team_ranks(static_cast<std::size_t>(resamples));
    for (int b = 0; b < resamples; ++b) {
      const int r = ranks[static_cast<std::size_t>(b) * n + t];
      ++counts[static_cast<std::size_t>(r - 1)];
      team_ranks[static_cast<std::size_t>(b)] = r;
    }
    for (std::size_t r = 0; r < n; ++r) report.rank_frequency[t][r] = static_cast<double>(counts[r]) / resamples;
    report.median_rank[t] = median_of(std::move(team_ranks));
  }
  return report;
}

}  // namespace freehand
