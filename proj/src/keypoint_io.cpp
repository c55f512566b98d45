// SPDX-License-Identifier: Apache-2.0
#include "jar/keypoint_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "jar/error.hpp"
#include "json.hpp"

namespace jar {
namespace {

using nlohmann::ordered_json;
namespace fs = std::filesystem;

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("failed reading " + path.string());
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("failed writing " + path.string());
}

ordered_json parse_json(std::string_view text, const std::string& what) {
  try {
    return ordered_json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    const auto upto = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
    throw ParseError(what + ": malformed JSON at line " + std::to_string(line) + ": " + e.what());
  }
}

double finite_number(const ordered_json& v, const std::string& where) {
  if (!v.is_number()) throw ValidationError(where + " is not a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ValidationError(where + " is not finite");
  return d;
}

std::string frame_joint(std::size_t frame, std::size_t joint) {
  return "frame " + std::to_string(frame) + " joint " + std::string(keypoint_name(joint));
}

ordered_json point_json(Point2 p) { return ordered_json::array({p.x, p.y}); }

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> canonical_names() {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < kNumKeypoints; ++i) names.emplace_back(keypoint_name(i));
  return names;
}

std::string limb_column(std::size_t edge) {
  const auto& limb = KinematicTree::canonical().limb(edge);
  return std::string(keypoint_name(limb.parent)) + "-" + std::string(keypoint_name(limb.child));
}

}  // namespace

void validate_pose_sequence(const PoseSequence& seq) {
  if (seq.frames.empty()) throw ValidationError("pose sequence needs at least one frame");
  if (!(seq.fps > 0.0) || !std::isfinite(seq.fps)) throw ValidationError("fps must be a positive number");
  for (std::size_t f = 0; f < seq.frames.size(); ++f) {
    for (std::size_t k = 0; k < kNumKeypoints; ++k) {
      const Point2 p = seq.frames[f].xy[k];
      if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
        throw ValidationError("non-finite coordinate at " + frame_joint(f, k));
      }
    }
  }
}

PoseSequence parse_keypoints_text(std::string_view text) {
  const ordered_json j = parse_json(text, "keypoint file");
  if (!j.is_object()) throw SchemaError("keypoint file must hold a JSON object");
  for (const char* key : {"fps", "keypoints", "frames"}) {
    if (!j.contains(key)) throw SchemaError(std::string("keypoint file lacks \"") + key + "\"");
  }
  const auto& names = j.at("keypoints");
  if (!names.is_array()) throw SchemaError("\"keypoints\" must be an array of names");
  std::vector<std::string> given;
  for (const auto& n : names) {
    if (!n.is_string()) throw SchemaError("\"keypoints\" entries must be strings");
    given.push_back(n.get<std::string>());
  }
  const auto canonical = canonical_names();
  if (given != canonical) {
    std::string missing, extra;
    for (const auto& c : canonical) {
      if (std::find(given.begin(), given.end(), c) == given.end()) missing += (missing.empty() ? "" : ", ") + c;
    }
    for (const auto& g : given) {
      if (std::find(canonical.begin(), canonical.end(), g) == canonical.end()) extra += (extra.empty() ? "" : ", ") + g;
    }
    if (missing.empty() && extra.empty()) {
      throw SchemaError("keypoints must be listed once each in canonical order");
    }
    throw SchemaError("keypoint set mismatch; missing: [" + missing + "]; extra: [" + extra + "]");
  }

  PoseSequence seq;
  seq.fps = finite_number(j.at("fps"), "fps");
  if (!(seq.fps > 0.0)) throw ValidationError("fps must be > 0");
  const auto& frames = j.at("frames");
  if (!frames.is_array()) throw SchemaError("\"frames\" must be an array");
  seq.frames.reserve(frames.size());
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const auto& fr = frames[f];
    if (!fr.is_object() || !fr.contains("xy") || !fr.at("xy").is_array()) {
      throw SchemaError("frame " + std::to_string(f) + " lacks an \"xy\" array");
    }
    const auto& xy = fr.at("xy");
    if (xy.size() != kNumKeypoints) {
      throw SchemaError("frame " + std::to_string(f) + " holds " + std::to_string(xy.size()) +
                        " points, expected " + std::to_string(kNumKeypoints));
    }
    PoseFrame pose;
    for (std::size_t k = 0; k < kNumKeypoints; ++k) {
      const auto& p = xy[k];
      if (!p.is_array() || p.size() != 2) {
        throw SchemaError("point at " + frame_joint(f, k) + " must be [x, y]");
      }
      pose.xy[k] = {finite_number(p[0], "x at " + frame_joint(f, k)),
                    finite_number(p[1], "y at " + frame_joint(f, k))};
    }
    seq.frames.push_back(pose);
  }
  validate_pose_sequence(seq);
  return seq;
}

PoseSequence parse_keypoints(const fs::path& path) {
  try {
    return parse_keypoints_text(read_text(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::string keypoints_to_text(const PoseSequence& seq) {
  validate_pose_sequence(seq);
  std::string out = "{\n  \"fps\": " + ordered_json(seq.fps).dump() + ",\n  \"keypoints\": " +
                    ordered_json(canonical_names()).dump() + ",\n  \"frames\": [";
  for (std::size_t f = 0; f < seq.frames.size(); ++f) {
    ordered_json xy = ordered_json::array();
    for (const auto& p : seq.frames[f].xy) xy.push_back(point_json(p));
    out += (f == 0 ? "\n    " : ",\n    ") + ordered_json{{"xy", xy}}.dump();
  }
  out += "\n  ]\n}\n";
  return out;
}

void write_keypoints(const PoseSequence& seq, const fs::path& path) { write_text(path, keypoints_to_text(seq)); }

void RefinedMotion::validate() const {
  if (base.empty()) throw ValidationError("refined motion needs at least one frame");
  if (angles.size() != base.size() || lengths.size() != base.size()) {
    throw ValidationError("refined motion components disagree on frame count (base " +
                          std::to_string(base.size()) + ", angles " + std::to_string(angles.size()) +
                          ", lengths " + std::to_string(lengths.size()) + ")");
  }
  if (!(fps > 0.0) || !std::isfinite(fps)) throw ValidationError("fps must be a positive number");
}

PoseSequence RefinedMotion::reconstruct(const KinematicTree& tree) const {
  validate();
  PoseSequence seq;
  seq.fps = fps;
  seq.frames.reserve(size());
  for (std::size_t i = 0; i < size(); ++i) {
    seq.frames.push_back(reconstruct_pose(base[i], angles.frames[i], lengths.frames[i], tree));
  }
  return seq;
}

void write_motion(const RefinedMotion& motion, const fs::path& path) {
  motion.validate();
  ordered_json j;
  j["fps"] = motion.fps;
  j["frames"] = motion.size();
  j["limbs"] = [] {
    std::vector<std::string> cols;
    for (std::size_t e = 0; e < kNumLimbs; ++e) cols.push_back(limb_column(e));
    return cols;
  }();
  auto base = ordered_json::array(), angles = ordered_json::array(), lengths = ordered_json::array();
  for (std::size_t i = 0; i < motion.size(); ++i) {
    base.push_back(point_json(motion.base[i]));
    angles.push_back(motion.angles.frames[i].theta);
    lengths.push_back(motion.lengths.frames[i].lengths);
  }
  j["base"] = base;
  j["angles"] = angles;
  j["lengths"] = lengths;
  write_text(path, j.dump() + "\n");
}

RefinedMotion read_motion(const fs::path& path) {
  const std::string text = read_text(path);
  const ordered_json j = parse_json(text, path.string());
  RefinedMotion m;
  try {
    m.fps = j.at("fps").get<double>();
    for (const auto& p : j.at("base")) m.base.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    for (const auto& a : j.at("angles")) {
      if (a.size() != kNumLimbs) throw SchemaError("angle row must hold 12 values in " + path.string());
      JointAngleFrame f;
      for (std::size_t e = 0; e < kNumLimbs; ++e) f.theta[e] = a.at(e).get<double>();
      m.angles.frames.push_back(f);
    }
    for (const auto& l : j.at("lengths")) {
      if (l.size() != kNumLimbs) throw SchemaError("length row must hold 12 values in " + path.string());
      LimbLengthFrame f;
      for (std::size_t e = 0; e < kNumLimbs; ++e) f.lengths[e] = l.at(e).get<double>();
      m.lengths.frames.push_back(f);
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("refined motion " + path.string() + ": " + e.what());
  }
  m.validate();
  return m;
}

SeriesKind series_kind_from_name(std::string_view name) {
  if (name == "positions") return SeriesKind::Positions;
  if (name == "angles") return SeriesKind::Angles;
  if (name == "velocities") return SeriesKind::Velocities;
  throw InvalidInputError("unknown series '" + std::string(name) + "' (positions, angles, velocities)");
}

void export_series(const RefinedMotion& motion, SeriesKind what, const fs::path& path) {
  motion.validate();
  const std::size_t n = motion.size();
  std::vector<std::string> header{"frame", "time_s"};
  std::vector<std::vector<double>> columns;

  if (what == SeriesKind::Angles) {
    for (std::size_t e = 0; e < kNumLimbs; ++e) {
      header.push_back(limb_column(e));
      columns.push_back(motion.angles.joint_series(e));
    }
  } else {
    const PoseSequence poses = motion.reconstruct();
    for (std::size_t k = 0; k < kNumKeypoints; ++k) {
      std::vector<Point2> track(n);
      for (std::size_t i = 0; i < n; ++i) track[i] = poses.frames[i].xy[k];
      if (what == SeriesKind::Velocities) track = velocity_series(track, motion.fps);
      const std::string name(keypoint_name(k));
      const char* sx = what == SeriesKind::Velocities ? "_vx" : "_x";
      const char* sy = what == SeriesKind::Velocities ? "_vy" : "_y";
      header.push_back(name + sx);
      header.push_back(name + sy);
      std::vector<double> xs(n), ys(n);
      for (std::size_t i = 0; i < n; ++i) {
        xs[i] = track[i].x;
        ys[i] = track[i].y;
      }
      columns.push_back(std::move(xs));
      columns.push_back(std::move(ys));
    }
  }

  std::string out;
  for (std::size_t c = 0; c < header.size(); ++c) out += (c ? "," : "") + header[c];
  out += '\n';
  for (std::size_t i = 0; i < n; ++i) {
    out += std::to_string(i) + "," + fmt(static_cast<double>(i) / motion.fps);
    for (const auto& col : columns) out += "," + fmt(col[i]);
    out += '\n';
  }
  write_text(path, out);
}

void write_angles_csv(const JointAngleSequence& angles, double fps, const fs::path& path) {
  RefinedMotion m;
  m.fps = fps;
  m.angles = angles;
  m.base.assign(angles.size(), Point2{});
  m.lengths.frames.assign(angles.size(), LimbLengthFrame{});
  export_series(m, SeriesKind::Angles, path);
}

}  // namespace jar
