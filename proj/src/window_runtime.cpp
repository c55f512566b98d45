// SPDX-License-Identifier: Apache-2.0
#include "jar/window_runtime.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "jar/error.hpp"
#include "jar/refiner_net.hpp"

namespace jar {
namespace {

std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) {
  if (n == 1) return 0;
  const auto period = static_cast<std::ptrdiff_t>(2 * (n - 1));
  std::ptrdiff_t k = i % period;
  if (k < 0) k += period;
  if (k >= static_cast<std::ptrdiff_t>(n)) k = period - k;
  return static_cast<std::size_t>(k);
}

void check_windows(const WindowPlan& plan, std::span<const std::vector<double>> windows) {
  if (windows.size() != plan.starts.size()) {
    throw PlanViolationError("plan has " + std::to_string(plan.starts.size()) + " windows, got " +
                             std::to_string(windows.size()) + " refined windows");
  }
  for (std::size_t k = 0; k < windows.size(); ++k) {
    if (windows[k].size() != plan.window) {
      throw PlanViolationError("refined window " + std::to_string(k) + " holds " +
                               std::to_string(windows[k].size()) + " values, plan length is " +
                               std::to_string(plan.window));
    }
  }
}

// Covering windows of frame j are the contiguous range [first, last).
std::pair<std::size_t, std::size_t> covering(const WindowPlan& plan, std::size_t j) {
  const auto& s = plan.starts;
  const auto last = static_cast<std::size_t>(std::upper_bound(s.begin(), s.end(), j) - s.begin());
  std::size_t first = last;
  while (first > 0 && s[first - 1] + plan.window > j) --first;
  return {first, last};
}

double merge_range(const WindowPlan& plan, std::span<const std::vector<double>> windows,
                   std::size_t j, std::size_t first, std::size_t last, double eps) {
  const double half = (static_cast<double>(plan.window) - 1.0) / 2.0;
  const double ref = windows[first][j - plan.starts[first]];
  double lo = ref, hi = ref, wsum = 0.0, acc = 0.0;
  for (std::size_t k = first; k < last; ++k) {
    const double v = windows[k][j - plan.starts[k]];
    const double d = std::abs(static_cast<double>(plan.starts[k]) + half - static_cast<double>(j));
    const double w = 1.0 / (d + eps);
    wsum += w;
    acc += w * (v - ref);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  return std::clamp(ref + acc / wsum, lo, hi);
}

}  // namespace

void MergeConfig::validate() const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw InvalidInputError("merge epsilon must be > 0");
}

void RuntimeConfig::validate() const {
  if (stride < 1) throw InvalidInputError("window stride must be >= 1");
  merge.validate();
}

WindowPlan plan_windows(std::size_t n_frames, std::size_t window, std::size_t stride) {
  if (n_frames < 1) throw InvalidInputError("window plan needs at least one frame");
  if (window < 2) throw InvalidInputError("window length must be >= 2");
  if (stride < 1) throw InvalidInputError("window stride must be >= 1");
  WindowPlan plan;
  plan.frames = n_frames;
  plan.window = window;
  plan.stride = stride;
  if (n_frames < window) {
    plan.pad_before = (window - n_frames) / 2;
    plan.pad_after = window - n_frames - plan.pad_before;
    plan.starts = {0};
    return plan;
  }
  for (std::size_t s = 0; s + window <= n_frames; s += stride) plan.starts.push_back(s);
  if (plan.starts.back() != n_frames - window) plan.starts.push_back(n_frames - window);
  return plan;
}

std::vector<double> reflect_pad(std::span<const double> series, std::size_t before, std::size_t after) {
  if (series.empty()) throw InvalidInputError("cannot pad an empty series");
  std::vector<double> out;
  out.reserve(series.size() + before + after);
  const auto n = series.size();
  const auto total = static_cast<std::ptrdiff_t>(n + before + after);
  for (std::ptrdiff_t i = 0; i < total; ++i) {
    out.push_back(series[reflect_index(i - static_cast<std::ptrdiff_t>(before), n)]);
  }
  return out;
}

double merge_windows(const WindowPlan& plan, std::span<const std::vector<double>> windows,
                     std::size_t frame, const MergeConfig& config) {
  config.validate();
  check_windows(plan, windows);
  const auto [first, last] = covering(plan, frame);
  if (first == last) {
    throw PlanViolationError("frame " + std::to_string(frame) + " is not covered by any window");
  }
  return merge_range(plan, windows, frame, first, last, config.epsilon);
}

std::vector<double> merge_all(const WindowPlan& plan, std::span<const std::vector<double>> windows,
                              const MergeConfig& config) {
  config.validate();
  check_windows(plan, windows);
  std::vector<double> out(plan.padded_frames());
  for (std::size_t j = 0; j < out.size(); ++j) {
    const auto [first, last] = covering(plan, j);
    if (first == last) {
      throw PlanViolationError("frame " + std::to_string(j) + " is not covered by any window");
    }
    out[j] = merge_range(plan, windows, j, first, last, config.epsilon);
  }
  return out;
}

JointAngleSequence refine_sequence(const JointAngleSequence& angles, const WindowRefiner& refiner,
                                   std::size_t window, const RuntimeConfig& config) {
  config.validate();
  if (angles.size() == 0) throw InvalidInputError("cannot refine an empty angle sequence");
  const WindowPlan plan = plan_windows(angles.size(), window, config.stride);
  const auto L = static_cast<Eigen::Index>(window);
  const auto S = static_cast<Eigen::Index>(plan.starts.size());

  const JointAngleSequence unwrapped = unwrap_joint_angles(angles);
  Eigen::MatrixXd batch(L, S * static_cast<Eigen::Index>(kNumLimbs));
  for (std::size_t joint = 0; joint < kNumLimbs; ++joint) {
    const auto padded = reflect_pad(unwrapped.joint_series(joint), plan.pad_before, plan.pad_after);
    for (Eigen::Index k = 0; k < S; ++k) {
      const auto start = static_cast<std::ptrdiff_t>(plan.starts[static_cast<std::size_t>(k)]);
      batch.col(static_cast<Eigen::Index>(joint) * S + k) =
          Eigen::Map<const Eigen::VectorXd>(padded.data() + start, L);
    }
  }
  const Eigen::MatrixXd refined = refiner(batch);
  if (refined.rows() != batch.rows() || refined.cols() != batch.cols()) {
    throw ShapeError("window refiner changed the batch shape");
  }

  JointAngleSequence out = unwrapped;
  std::vector<std::vector<double>> windows(static_cast<std::size_t>(S));
  for (std::size_t joint = 0; joint < kNumLimbs; ++joint) {
    for (Eigen::Index k = 0; k < S; ++k) {
      const auto col = refined.col(static_cast<Eigen::Index>(joint) * S + k);
      windows[static_cast<std::size_t>(k)].assign(col.data(), col.data() + L);
    }
    const auto merged = merge_all(plan, windows, config.merge);
    out.set_joint_series(joint, std::span<const double>(merged).subspan(plan.pad_before, plan.frames));
  }
  return out;
}

JointAngleSequence refine_sequence(const JointAngleSequence& angles, const RefinerModel& model,
                                   const RuntimeConfig& config) {
  return refine_sequence(
      angles, [&model](const Eigen::MatrixXd& windows) { return refine_batch(windows, model); },
      static_cast<std::size_t>(model.window()), config);
}

}  // namespace jar
