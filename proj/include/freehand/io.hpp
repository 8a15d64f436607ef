#pragma once

// File formats. Byte-level layouts are documented in FORMATS.md.
//
//   *.ddf            TUSDDF01 binary displacement fields (little-endian f32)
//   poses            frame_index,timestamp_s,m00..m33 per line
//   calibration      JSON object (sx, sy, rotation, translation, ...)
//   landmarks        frame_index,u,v per line
//   observations     u,v,m00..m33 per line (pinhead calibration input)
//   reports          JSON ScanMetricReport, one file per (team, scan)
//   leaderboards     JSON, stable key order
//   scores           team,scan,fs,runtime_s CSV

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <nlohmann/json.hpp>

#include "freehand/calib.hpp"
#include "freehand/ddf.hpp"
#include "freehand/error.hpp"
#include "freehand/metrics.hpp"
#include "freehand/ranking.hpp"
#include "freehand/se3.hpp"
#include "freehand/statistics.hpp"

namespace freehand::io {

using json = nlohmann::ordered_json;

inline constexpr std::string_view kDdfMagic = "TUSDDF01";
inline constexpr std::size_t kDdfHeaderBytes = 24;

// ---------------------------------------------------------------------------
// Text helpers

/// Shortest decimal that round-trips.
inline std::string format_double(double x) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  return std::string(buf.data(), res.ptr);
}

/// 17 significant digits.
inline std::string format_double17(double x) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x, std::chars_format::general, 17);
  return std::string(buf.data(), res.ptr);
}

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split(std::string_view line, char sep = ',') {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline double parse_double(std::string_view field, const std::string& where) {
  double value = 0.0;
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  const auto res = std::from_chars(field.data(), field.data() + field.size(), value);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size())
    throw Error(ErrorCode::parse, where + ": '" + std::string(field) + "' is not a number");
  return value;
}

inline long long parse_int(std::string_view field, const std::string& where) {
  long long value = 0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), value);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size())
    throw Error(ErrorCode::parse, where + ": '" + std::string(field) + "' is not an integer");
  return value;
}

inline bool is_skippable(std::string_view line) {
  const auto t = trim(line);
  return t.empty() || t.front() == '#';
}

inline std::ifstream open_input(const std::filesystem::path& path, bool binary = false) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw Error(ErrorCode::io, "cannot open '" + path.string() + "' for reading");
  return in;
}

inline std::ofstream open_output(const std::filesystem::path& path, bool binary = false) {
  std::ofstream out(path, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
  if (!out) throw Error(ErrorCode::io, "cannot open '" + path.string() + "' for writing");
  return out;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  auto out = open_output(path, true);
  out << text;
  if (!out) throw Error(ErrorCode::io, "failed writing '" + path.string() + "'");
}

inline std::string read_text(const std::filesystem::path& path) {
  auto in = open_input(path, true);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// TUSDDF01 binary

struct DdfHeader {
  std::uint32_t frame_count = 0;
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::uint32_t landmark_count = 0;

  std::uint64_t frame_floats() const { return std::uint64_t{width} * height * 3; }
  std::uint64_t pixel_floats() const { return frame_count > 1 ? (frame_count - 1ULL) * frame_floats() : 0; }
  std::uint64_t landmark_floats() const { return std::uint64_t{landmark_count} * 3; }
  std::uint64_t file_bytes() const { return kDdfHeaderBytes + 4 * (2 * pixel_floats() + 2 * landmark_floats()); }
};

namespace detail {

inline void put_u32(std::vector<char>& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

inline std::uint32_t get_u32(const unsigned char* p) {
  return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) | (std::uint32_t{p[3]} << 24);
}

inline void put_f32(std::vector<char>& buf, double v) {
  put_u32(buf, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

inline void write_floats(std::ostream& out, std::span<const double> values) {
  std::vector<char> buf;
  buf.reserve(values.size() * 4);
  for (double v : values) put_f32(buf, v);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

inline void decode_floats(const unsigned char* bytes, std::span<double> out) {
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<double>(std::bit_cast<float>(get_u32(bytes + 4 * i)));
}

inline std::vector<char> header_bytes(const DdfHeader& h) {
  std::vector<char> buf(kDdfMagic.begin(), kDdfMagic.end());
  put_u32(buf, h.frame_count);
  put_u32(buf, h.width);
  put_u32(buf, h.height);
  put_u32(buf, h.landmark_count);
  return buf;
}

inline std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > 0xFFFFFFFFu) throw Error(ErrorCode::invalid_input, std::string(what) + " does not fit in 32 bits");
  return static_cast<std::uint32_t>(v);
}

}  // namespace detail

inline DdfHeader parse_ddf_header(std::span<const unsigned char> bytes, std::uint64_t actual_size,
                                  const std::string& name) {
  if (bytes.size() < kDdfHeaderBytes)
    throw Error(ErrorCode::size_mismatch, name + ": expected at least " + std::to_string(kDdfHeaderBytes) +
                                              " header bytes, got " + std::to_string(actual_size));
  if (std::memcmp(bytes.data(), kDdfMagic.data(), kDdfMagic.size()) != 0)
    throw Error(ErrorCode::format, name + ": bad magic (expected TUSDDF01)");
  DdfHeader h;
  h.frame_count = detail::get_u32(bytes.data() + 8);
  h.width = detail::get_u32(bytes.data() + 12);
  h.height = detail::get_u32(bytes.data() + 16);
  h.landmark_count = detail::get_u32(bytes.data() + 20);
  if (h.frame_count < 1 || h.width < 1 || h.height < 1)
    throw Error(ErrorCode::format, name + ": header dimensions must be positive");
  if (h.file_bytes() != actual_size)
    throw Error(ErrorCode::size_mismatch, name + ": expected " + std::to_string(h.file_bytes()) + " bytes, got " +
                                              std::to_string(actual_size));
  return h;
}

/// Streams any frame source to disk, one frame resident at a time.
inline void write_ddf(const std::filesystem::path& path, const DdfFrameSource& source) {
  DdfHeader h;
  h.frame_count = detail::checked_u32(static_cast<std::size_t>(source.frame_count()), "frame count");
  h.width = detail::checked_u32(static_cast<std::size_t>(source.width()), "width");
  h.height = detail::checked_u32(static_cast<std::size_t>(source.height()), "height");
  h.landmark_count = detail::checked_u32(source.landmark_count(), "landmark count");
  auto out = open_output(path, true);
  const auto header = detail::header_bytes(h);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  std::vector<double> frame(static_cast<std::size_t>(h.frame_floats()));
  auto write_level = [&](DdfLevel level) {
    for (int f = 1; f < source.frame_count(); ++f) {
      source.fill_rows(level, f, 0, source.height(), frame);
      detail::write_floats(out, frame);
    }
  };
  write_level(DdfLevel::global);
  detail::write_floats(out, source.landmarks(DdfLevel::global));
  write_level(DdfLevel::local);
  detail::write_floats(out, source.landmarks(DdfLevel::local));
  if (!out) throw Error(ErrorCode::io, "failed writing '" + path.string() + "'");
}

inline void write_ddf(const std::filesystem::path& path, const DdfSet& set) {
  const DenseDdfSource source(set);
  write_ddf(path, source);
}

/// Row-addressable reader over a TUSDDF01 file; the payload is never loaded
/// as a whole.
class DdfFileSource final : public DdfFrameSource {
 public:
  explicit DdfFileSource(const std::filesystem::path& path) : path_(path), in_(open_input(path, true)) {
    std::error_code ec;
    const auto size = std::filesystem::file_size(path, ec);
    if (ec) throw Error(ErrorCode::io, "cannot stat '" + path.string() + "'");
    std::array<unsigned char, kDdfHeaderBytes> raw{};
    in_.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    const auto got = static_cast<std::size_t>(in_.gcount());
    header_ = parse_ddf_header(std::span<const unsigned char>(raw.data(), got), size, path.string());
  }

  const DdfHeader& header() const { return header_; }

  int frame_count() const override { return static_cast<int>(header_.frame_count); }
  int width() const override { return static_cast<int>(header_.width); }
  int height() const override { return static_cast<int>(header_.height); }
  std::size_t landmark_count() const override { return header_.landmark_count; }

  void fill_rows(DdfLevel level, int frame, int row_begin, int row_end, std::span<double> out) const override {
    const std::uint64_t base = level == DdfLevel::global ? 0 : header_.pixel_floats() + header_.landmark_floats();
    const std::uint64_t first = base + static_cast<std::uint64_t>(frame - 1) * header_.frame_floats() +
                                static_cast<std::uint64_t>(row_begin) * header_.width * 3;
    const std::size_t count = static_cast<std::size_t>(row_end - row_begin) * header_.width * 3;
    read_floats(first, out.first(count));
  }

  std::vector<double> landmarks(DdfLevel level) const override {
    const std::uint64_t base =
        level == DdfLevel::global ? header_.pixel_floats() : 2 * header_.pixel_floats() + header_.landmark_floats();
    std::vector<double> out(static_cast<std::size_t>(header_.landmark_floats()));
    read_floats(base, out);
    return out;
  }

 private:
  void read_floats(std::uint64_t first_float, std::span<double> out) const {
    if (out.empty()) return;
    std::vector<unsigned char> raw(out.size() * 4);
    {
      std::lock_guard lock(mutex_);
      in_.clear();
      in_.seekg(static_cast<std::streamoff>(kDdfHeaderBytes + 4 * first_float));
      in_.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
      if (static_cast<std::size_t>(in_.gcount()) != raw.size())
        throw Error(ErrorCode::size_mismatch, path_.string() + ": payload ended early");
    }
    detail::decode_floats(raw.data(), out);
  }

  std::filesystem::path path_;
  mutable std::ifstream in_;
  mutable std::mutex mutex_;
  DdfHeader header_;
};

inline DdfSet read_ddf(const std::filesystem::path& path) {
  const DdfFileSource source(path);
  return materialize(source);
}

// ---------------------------------------------------------------------------
// Poses

inline std::string format_poses(const ScanPoses& poses) {
  std::string text = "# frame_index,timestamp_s,m00,m01,m02,m03,m10,m11,m12,m13,m20,m21,m22,m23,m30,m31,m32,m33\n";
  for (std::size_t i = 0; i < poses.size(); ++i) {
    text += std::to_string(i);
    text += ',';
    text += format_double17(poses.frames[i].timestamp);
    const Eigen::Matrix4d m = poses.frames[i].camera_from_tool.matrix();
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) {
        text += ',';
        text += format_double17(m(r, c));
      }
    text += '\n';
  }
  return text;
}

inline void write_poses(const std::filesystem::path& path, const ScanPoses& poses) {
  write_text(path, format_poses(poses));
}

inline ScanPoses parse_poses(const std::string& text, const std::string& name = "poses") {
  ScanPoses poses;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_skippable(line)) continue;
    const std::string where = name + " line " + std::to_string(line_no);
    const auto fields = split(line);
    if (fields.size() != 18)
      throw Error(ErrorCode::parse, where + ": expected 18 fields, got " + std::to_string(fields.size()));
    const long long index = parse_int(fields[0], where);
    if (index != static_cast<long long>(poses.size()))
      throw Error(ErrorCode::validation, where + ": frame index " + std::to_string(index) + " out of sequence");
    PoseSample sample;
    sample.timestamp = parse_double(fields[1], where);
    if (!poses.frames.empty() && sample.timestamp < poses.frames.back().timestamp)
      throw Error(ErrorCode::validation, where + ": timestamps must be non-decreasing");
    Eigen::Matrix4d m;
    for (int k = 0; k < 16; ++k) m(k / 4, k % 4) = parse_double(fields[static_cast<std::size_t>(k + 2)], where);
    try {
      sample.camera_from_tool = RigidTransform::from_matrix(m, 1e-6);
    } catch (const Error& e) {
      throw Error(ErrorCode::validation,
                  where + ": frame " + std::to_string(index) + " is not rigid (" + e.what() + ")");
    }
    poses.frames.push_back(sample);
  }
  return poses;
}

inline ScanPoses read_poses(const std::filesystem::path& path) { return parse_poses(read_text(path), path.string()); }

// ---------------------------------------------------------------------------
// Calibration

inline json rotation_json(const Eigen::Matrix3d& r) {
  json a = json::array();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) a.push_back(r(i, j));
  return a;
}

inline json vector_json(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

inline json calibration_json(const CalibrationSolution& c, bool with_solver_fields = true) {
  json j;
  j["sx"] = c.scale.sx;
  j["sy"] = c.scale.sy;
  j["rotation"] = rotation_json(c.image_to_tool.rotation());
  j["translation"] = vector_json(c.image_to_tool.translation());
  j["pin_world"] = vector_json(c.pin_world);
  if (with_solver_fields) {
    j["rms_residual"] = c.rms_residual;
    j["iterations"] = c.iterations;
    j["converged"] = c.converged;
  }
  return j;
}

inline void write_calibration(const std::filesystem::path& path, const CalibrationSolution& c) {
  write_text(path, calibration_json(c).dump(2) + "\n");
}

namespace detail {
inline const json& require(const json& j, const char* key, const std::string& name) {
  if (!j.contains(key)) throw Error(ErrorCode::schema, name + ": missing field '" + key + "'");
  return j.at(key);
}

inline double number_of(const json& j, const std::string& what) {
  if (!j.is_number()) throw Error(ErrorCode::schema, what + " must be a number");
  return j.get<double>();
}

inline std::vector<double> numbers_of(const json& j, std::size_t n, const std::string& what) {
  if (!j.is_array() || j.size() != n)
    throw Error(ErrorCode::schema, what + " must be an array of " + std::to_string(n) + " numbers");
  std::vector<double> out;
  for (const auto& e : j) out.push_back(number_of(e, what));
  return out;
}
}  // namespace detail

inline CalibrationSolution parse_calibration(const std::string& text, const std::string& name = "calibration") {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::parse, name + ": " + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::schema, name + ": expected a JSON object");
  const double sx = detail::number_of(detail::require(j, "sx", name), "sx");
  const double sy = detail::number_of(detail::require(j, "sy", name), "sy");
  if (!(sx > 0.0) || !(sy > 0.0) || !std::isfinite(sx) || !std::isfinite(sy))
    throw Error(ErrorCode::validation, name + ": scale factors must be positive");
  const auto rot = detail::numbers_of(detail::require(j, "rotation", name), 9, "rotation");
  const auto tr = detail::numbers_of(detail::require(j, "translation", name), 3, "translation");
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  for (int k = 0; k < 9; ++k) m(k / 3, k % 3) = rot[static_cast<std::size_t>(k)];
  for (int k = 0; k < 3; ++k) m(k, 3) = tr[static_cast<std::size_t>(k)];
  CalibrationSolution c;
  try {
    c.image_to_tool = RigidTransform::from_matrix(m, 1e-6);
  } catch (const Error& e) {
    throw Error(ErrorCode::validation, name + ": " + e.what());
  }
  c.scale = ScaleTransform(sx, sy);
  if (j.contains("pin_world")) {
    const auto p = detail::numbers_of(j.at("pin_world"), 3, "pin_world");
    c.pin_world = Eigen::Vector3d(p[0], p[1], p[2]);
  }
  if (j.contains("rms_residual")) c.rms_residual = detail::number_of(j.at("rms_residual"), "rms_residual");
  if (j.contains("iterations")) c.iterations = j.at("iterations").get<int>();
  c.converged = j.value("converged", true);
  return c;
}

inline CalibrationSolution read_calibration(const std::filesystem::path& path) {
  return parse_calibration(read_text(path), path.string());
}

// ---------------------------------------------------------------------------
// Landmarks

inline LandmarkSet parse_landmarks(const std::string& text, const std::string& name = "landmarks") {
  LandmarkSet set;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_skippable(line)) continue;
    const std::string where = name + " line " + std::to_string(line_no);
    const auto fields = split(line);
    if (fields.size() != 3)
      throw Error(ErrorCode::parse, where + ": expected frame_index,u,v");
    Landmark lm;
    const long long f = parse_int(fields[0], where);
    if (f < 0 || f > 0x7FFFFFFF) throw Error(ErrorCode::parse, where + ": frame index out of range");
    lm.frame_index = static_cast<int>(f);
    lm.u = parse_double(fields[1], where);
    lm.v = parse_double(fields[2], where);
    set.push_back(lm);
  }
  return set;
}

inline LandmarkSet read_landmarks(const std::filesystem::path& path) {
  return parse_landmarks(read_text(path), path.string());
}

inline void write_landmarks(const std::filesystem::path& path, const LandmarkSet& set) {
  std::string text = "# frame_index,u,v\n";
  for (const auto& lm : set)
    text += std::to_string(lm.frame_index) + "," + format_double(lm.u) + "," + format_double(lm.v) + "\n";
  write_text(path, text);
}

// ---------------------------------------------------------------------------
// Pinhead observations

inline void write_observations(const std::filesystem::path& path, const std::vector<PinheadObservation>& obs) {
  std::string text = "# u,v,m00,m01,m02,m03,m10,m11,m12,m13,m20,m21,m22,m23,m30,m31,m32,m33\n";
  for (const auto& o : obs) {
    text += format_double17(o.pin_pixel.x()) + "," + format_double17(o.pin_pixel.y());
    const Eigen::Matrix4d m = o.camera_from_tool.matrix();
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) text += "," + format_double17(m(r, c));
    text += '\n';
  }
  write_text(path, text);
}

inline std::vector<PinheadObservation> parse_observations(const std::string& text,
                                                          const std::string& name = "observations") {
  std::vector<PinheadObservation> obs;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_skippable(line)) continue;
    const std::string where = name + " line " + std::to_string(line_no);
    const auto fields = split(line);
    if (fields.size() != 18)
      throw Error(ErrorCode::parse, where + ": expected 18 fields, got " + std::to_string(fields.size()));
    PinheadObservation o;
    o.pin_pixel = Eigen::Vector2d(parse_double(fields[0], where), parse_double(fields[1], where));
    Eigen::Matrix4d m;
    for (int k = 0; k < 16; ++k) m(k / 4, k % 4) = parse_double(fields[static_cast<std::size_t>(k + 2)], where);
    try {
      o.camera_from_tool = RigidTransform::from_matrix(m, 1e-6);
    } catch (const Error& e) {
      throw Error(ErrorCode::validation, where + ": " + e.what());
    }
    obs.push_back(o);
  }
  return obs;
}

inline std::vector<PinheadObservation> read_observations(const std::filesystem::path& path) {
  return parse_observations(read_text(path), path.string());
}

// ---------------------------------------------------------------------------
// Metric reports

inline json report_json(const ScanMetricReport& r) {
  json j;
  j["team"] = r.team;
  j["scan"] = r.scan;
  j["status"] = to_string(r.status);
  if (r.has_metrics()) {
    j["gpe"] = r.gpe;
    j["gle"] = r.gle;
    j["lpe"] = r.lpe;
    j["lle"] = r.lle;
  } else {
    j["gpe"] = nullptr;
    j["gle"] = nullptr;
    j["lpe"] = nullptr;
    j["lle"] = nullptr;
  }
  j["runtime_s"] = r.runtime;
  return j;
}

inline void write_report(const std::filesystem::path& path, const ScanMetricReport& r) {
  write_text(path, report_json(r).dump(2) + "\n");
}

inline ScanMetricReport parse_report(const std::string& text, const std::string& name = "report") {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::parse, name + ": " + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::schema, name + ": expected a JSON object");
  ScanMetricReport r;
  const auto& team = detail::require(j, "team", name);
  const auto& scan = detail::require(j, "scan", name);
  if (!team.is_string() || !scan.is_string()) throw Error(ErrorCode::schema, name + ": team and scan must be strings");
  r.team = team.get<std::string>();
  r.scan = scan.get<std::string>();
  r.status = scan_status_from_string(detail::require(j, "status", name).get<std::string>());
  if (r.has_metrics()) {
    r.gpe = detail::number_of(detail::require(j, "gpe", name), "gpe");
    r.gle = detail::number_of(detail::require(j, "gle", name), "gle");
    r.lpe = detail::number_of(detail::require(j, "lpe", name), "lpe");
    r.lle = detail::number_of(detail::require(j, "lle", name), "lle");
  }
  if (j.contains("runtime_s") && !j.at("runtime_s").is_null())
    r.runtime = detail::number_of(j.at("runtime_s"), "runtime_s");
  return r;
}

inline ScanMetricReport read_report(const std::filesystem::path& path) {
  return parse_report(read_text(path), path.string());
}

/// Every *.json report in a directory, in file-name order.
inline std::vector<ScanMetricReport> read_reports_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw Error(ErrorCode::io, "'" + dir.string() + "' is not a directory");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::vector<ScanMetricReport> reports;
  for (const auto& f : files) reports.push_back(read_report(f));
  return reports;
}

// ---------------------------------------------------------------------------
// Leaderboard

inline json leaderboard_json(const Leaderboard& board) {
  json j;
  j["overtime_policy"] = board.policy == OvertimePolicy::keep ? "keep" : "fail";
  json teams = json::array();
  for (const auto& e : board.entries) {
    json t;
    t["rank"] = e.rank;
    t["team"] = e.team;
    t["overall"] = round3(e.overall);
    t["gs"] = round3(e.gs);
    t["ls"] = round3(e.ls);
    t["ps"] = round3(e.ps);
    t["lms"] = round3(e.lms);
    t["mean_runtime_s"] = e.mean_runtime;
    t["gpe"] = e.gpe;
    t["gle"] = e.gle;
    t["lpe"] = e.lpe;
    t["lle"] = e.lle;
    t["scored_scans"] = e.scans;
    t["failed_scans"] = e.failures;
    teams.push_back(t);
  }
  j["teams"] = teams;
  json scans = json::array();
  for (const auto& s : board.scans) {
    json results = json::array();
    for (std::size_t t = 0; t < s.reports.size(); ++t) {
      json r = report_json(s.reports[t]);
      r.erase("scan");
      const ScanScore& sc = s.scores[t];
      r["gpe_n"] = round3(sc.gpe_n);
      r["gle_n"] = round3(sc.gle_n);
      r["lpe_n"] = round3(sc.lpe_n);
      r["lle_n"] = round3(sc.lle_n);
      r["fs"] = round3(sc.fs);
      r["gs"] = round3(sc.gs);
      r["ls"] = round3(sc.ls);
      r["ps"] = round3(sc.ps);
      r["lms"] = round3(sc.lms);
      results.push_back(r);
    }
    json scan;
    scan["scan"] = s.scan;
    scan["results"] = results;
    scans.push_back(scan);
  }
  j["scans"] = scans;
  return j;
}

inline std::string format_leaderboard(const Leaderboard& board) { return leaderboard_json(board).dump(2) + "\n"; }

inline void write_leaderboard(const std::filesystem::path& path, const Leaderboard& board) {
  write_text(path, format_leaderboard(board));
}

// ---------------------------------------------------------------------------
// Score tables

/// team,scan,fs,runtime_s rows with full-precision final scores.
inline std::string format_scores(const Leaderboard& board) {
  std::string text = "team,scan,fs,runtime_s\n";
  for (std::size_t t = 0; t < board.teams.size(); ++t)
    for (const auto& s : board.scans)
      text += board.teams[t] + "," + s.scan + "," + format_double(s.scores[t].fs) + "," +
              format_double(s.reports[t].runtime) + "\n";
  return text;
}

/// A CSV with a header row, parsed as numeric columns where possible.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error(ErrorCode::schema, "missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  }

  std::vector<double> numeric_column(const std::string& name) const {
    const std::size_t c = column(name);
    std::vector<double> out;
    for (std::size_t r = 0; r < rows.size(); ++r)
      out.push_back(parse_double(rows[r][c], "row " + std::to_string(r + 2) + " column " + name));
    return out;
  }
};

inline Table parse_table(const std::string& text, const std::string& name = "table") {
  Table t;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_skippable(line)) continue;
    const auto fields = split(line);
    std::vector<std::string> row(fields.begin(), fields.end());
    if (t.header.empty()) {
      t.header = std::move(row);
      continue;
    }
    if (row.size() != t.header.size())
      throw Error(ErrorCode::parse, name + " line " + std::to_string(line_no) + ": expected " +
                                        std::to_string(t.header.size()) + " fields");
    t.rows.push_back(std::move(row));
  }
  if (t.header.empty()) throw Error(ErrorCode::parse, name + ": missing header row");
  return t;
}

inline Table read_table(const std::filesystem::path& path) { return parse_table(read_text(path), path.string()); }

/// Score matrix [team][scan] plus mean runtime per team, from a scores table.
struct ScoreMatrix {
  std::vector<std::string> teams;
  std::vector<std::string> scans;
  std::vector<std::vector<double>> fs;
  std::vector<double> mean_runtime;
};

inline ScoreMatrix score_matrix(const Table& table) {
  const std::size_t team_col = table.column("team"), scan_col = table.column("scan"), fs_col = table.column("fs");
  const bool has_runtime =
      std::find(table.header.begin(), table.header.end(), "runtime_s") != table.header.end();
  ScoreMatrix m;
  std::map<std::string, std::map<std::string, double>> cells;
  std::map<std::string, std::pair<double, int>> runtime;
  std::map<std::string, int> scans;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::string where = "scores row " + std::to_string(r + 2);
    if (!cells[row[team_col]].emplace(row[scan_col], parse_double(row[fs_col], where)).second)
      throw Error(ErrorCode::validation, where + ": duplicate team/scan pair");
    scans.emplace(row[scan_col], 0);
    if (has_runtime) {
      auto& acc = runtime[row[team_col]];
      acc.first += parse_double(row[table.column("runtime_s")], where);
      ++acc.second;
    }
  }
  for (const auto& [scan, _] : scans) m.scans.push_back(scan);
  for (const auto& [team, row] : cells) {
    m.teams.push_back(team);
    std::vector<double> values;
    for (const auto& scan : m.scans) {
      const auto it = row.find(scan);
      values.push_back(it == row.end() ? 0.0 : it->second);  // missing -> failed -> 0
    }
    m.fs.push_back(std::move(values));
    const auto rt = runtime.find(team);
    m.mean_runtime.push_back(rt == runtime.end() || rt->second.second == 0 ? 0.0
                                                                          : rt->second.first / rt->second.second);
  }
  return m;
}

// ---------------------------------------------------------------------------
// Statistics reports

inline json bootstrap_json(const BootstrapReport& r) {
  json j;
  j["resamples"] = r.resamples;
  j["seed"] = r.seed;
  json teams = json::array();
  for (std::size_t t = 0; t < r.teams.size(); ++t) {
    json e;
    e["team"] = r.teams[t];
    e["median_rank"] = r.median_rank[t];
    e["rank_frequency"] = r.rank_frequency[t];
    teams.push_back(e);
  }
  j["teams"] = teams;
  return j;
}

inline json clt_json(const CltReport& r) {
  json teams = json::array();
  for (std::size_t t = 0; t < r.teams.size(); ++t) {
    json e;
    e["team"] = r.teams[t];
    e["mean"] = r.stats[t].mean;
    e["stderr"] = r.stats[t].stderr_mean;
    e["n"] = r.stats[t].count;
    teams.push_back(e);
  }
  json j;
  j["teams"] = teams;
  return j;
}

}  // namespace freehand::io
