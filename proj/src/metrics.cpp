// SPDX-License-Identifier: Apache-2.0
#include "jar/metrics.hpp"

#include <cmath>
#include <fstream>

#include "jar/error.hpp"
#include "json.hpp"

namespace jar {

using nlohmann::ordered_json;

MetricsReport evaluate_metrics(const JointAngleSequence& refined, const JointAngleSequence& truth,
                               const std::vector<ErroneousFrame>& erroneous, double tau) {
  if (refined.size() != truth.size()) {
    throw ShapeError("refined sequence has " + std::to_string(refined.size()) + " frames, truth has " +
                     std::to_string(truth.size()));
  }
  if (refined.size() == 0) throw ShapeError("metrics need at least one frame");
  if (!(tau >= 0.0)) throw InvalidInputError("tolerance tau must be >= 0");

  MetricsReport r;
  r.frames = refined.size();
  r.tau = tau;
  double total = 0.0;
  for (std::size_t j = 0; j < kNumLimbs; ++j) {
    double sum = 0.0;
    for (std::size_t i = 0; i < r.frames; ++i) {
      const double d = wrap_angle(refined.frames[i].theta[j] - truth.frames[i].theta[j]);
      sum += d * d;
    }
    r.joint_mse[j] = sum / static_cast<double>(r.frames);
    total += sum;
  }
  r.mse = total / static_cast<double>(r.frames * kNumLimbs);

  for (const auto& e : erroneous) {
    if (e.frame >= r.frames) {
      throw InvalidInputError("erroneous frame " + std::to_string(e.frame) + " is outside the " +
                              std::to_string(r.frames) + "-frame sequence");
    }
    bool ok = true;
    auto check = [&](std::size_t j) {
      if (j >= kNumLimbs) throw InvalidInputError("joint index " + std::to_string(j) + " out of range");
      ok = ok && std::abs(wrap_angle(refined.frames[e.frame].theta[j] - truth.frames[e.frame].theta[j])) <= tau;
    };
    if (e.joints.empty()) {
      for (std::size_t j = 0; j < kNumLimbs; ++j) check(j);
    } else {
      for (std::size_t j : e.joints) check(j);
    }
    ++r.erroneous_frames;
    if (ok) ++r.corrected_frames;
  }
  r.correction_rate = r.erroneous_frames == 0
                          ? 1.0
                          : static_cast<double>(r.corrected_frames) / static_cast<double>(r.erroneous_frames);
  return r;
}

std::string metrics_json(const MetricsReport& r) {
  ordered_json j;
  j["mse_rad2"] = r.mse;
  j["joint_mse_rad2"] = r.joint_mse;
  j["correction_rate"] = r.correction_rate;
  j["frames"] = r.frames;
  j["erroneous_frames"] = r.erroneous_frames;
  j["corrected_frames"] = r.corrected_frames;
  j["tau_rad"] = r.tau;
  j["tau_deg"] = r.tau * 180.0 / std::numbers::pi;
  return j.dump(2) + "\n";
}

std::vector<ErroneousFrame> read_erroneous_set(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open erroneous-frame file " + path.string());
  ordered_json j;
  try {
    j = ordered_json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("erroneous-frame file " + path.string() + ": " + e.what());
  }
  if (j.is_object()) {
    if (!j.contains("erroneous")) throw SchemaError("erroneous-frame file lacks \"erroneous\"");
    j = j.at("erroneous");
  }
  if (!j.is_array()) throw SchemaError("erroneous-frame file must hold an array");
  std::vector<ErroneousFrame> out;
  for (const auto& item : j) {
    ErroneousFrame e;
    if (item.is_number_unsigned()) {
      e.frame = item.get<std::size_t>();
    } else if (item.is_object() && item.contains("frame") && item.at("frame").is_number_unsigned()) {
      e.frame = item.at("frame").get<std::size_t>();
      if (item.contains("joints")) {
        for (const auto& jn : item.at("joints")) {
          if (!jn.is_number_unsigned()) throw SchemaError("joint indices must be non-negative integers");
          e.joints.push_back(jn.get<std::size_t>());
        }
      }
    } else {
      throw SchemaError("erroneous-frame entries must be frame indices or {\"frame\", \"joints\"} objects");
    }
    out.push_back(std::move(e));
  }
  return out;
}

void write_erroneous_set(const std::vector<ErroneousFrame>& set, const std::filesystem::path& path) {
  ordered_json arr = ordered_json::array();
  for (const auto& e : set) {
    if (e.joints.empty()) {
      arr.push_back(e.frame);
    } else {
      arr.push_back({{"frame", e.frame}, {"joints", e.joints}});
    }
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << ordered_json{{"erroneous", arr}}.dump(2) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace jar
