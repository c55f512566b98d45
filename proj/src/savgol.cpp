// SPDX-License-Identifier: Apache-2.0
#include "jar/savgol.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <string>

#include "jar/error.hpp"

namespace jar {

void SavGolConfig::validate() const {
  if (half_width < 1) throw InvalidInputError("savgol half_width must be >= 1");
  if (degree != 2) throw InvalidInputError("savgol degree must be 2");
}

std::vector<double> savgol_weights(int lo, int hi, int at) {
  // Fit in coordinates centred on `at`; the value there is the constant term.
  Eigen::Matrix3d normal = Eigen::Matrix3d::Zero();
  for (int k = lo; k <= hi; ++k) {
    const double t = k - at;
    const double p[5] = {1.0, t, t * t, t * t * t, t * t * t * t};
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) normal(r, c) += p[r + c];
  }
  const Eigen::Vector3d row = normal.fullPivLu().solve(Eigen::Vector3d::UnitX());
  std::vector<double> w;
  w.reserve(static_cast<std::size_t>(hi - lo + 1));
  for (int k = lo; k <= hi; ++k) {
    const double t = k - at;
    w.push_back(row(0) + row(1) * t + row(2) * t * t);
  }
  return w;
}

std::vector<double> savgol_smooth(std::span<const double> series, const SavGolConfig& config) {
  config.validate();
  const int n = static_cast<int>(series.size());
  if (n < 3) {
    throw InsufficientDataError("savgol smoothing needs at least 3 samples, got " +
                                std::to_string(n));
  }
  const int w = config.half_width;
  std::vector<double> out(series.size());

  auto window_for = [&](int i, int& lo, int& hi) {
    lo = std::max(0, i - w);
    hi = std::min(n - 1, i + w);
    while (hi - lo + 1 < 3) {
      if (lo > 0) --lo;
      else ++hi;
    }
  };

  std::vector<double> interior;
  for (int i = 0; i < n; ++i) {
    int lo = 0, hi = 0;
    window_for(i, lo, hi);
    const bool full = (lo == i - w) && (hi == i + w);
    std::vector<double> local;
    const std::vector<double>* weights = &local;
    if (full) {
      if (interior.empty()) interior = savgol_weights(-w, w, 0);
      weights = &interior;
    } else {
      local = savgol_weights(lo, hi, i);
    }
    double acc = 0.0;
    for (int k = lo; k <= hi; ++k) acc += (*weights)[static_cast<std::size_t>(k - lo)] * series[k];
    out[static_cast<std::size_t>(i)] = acc;
  }
  return out;
}

std::vector<Point2> smooth_base_trajectory(const PoseSequence& seq, const SavGolConfig& config) {
  std::vector<double> xs(seq.size()), ys(seq.size());
  for (std::size_t n = 0; n < seq.size(); ++n) {
    xs[n] = seq.frames[n][KeypointId::Nose].x;
    ys[n] = seq.frames[n][KeypointId::Nose].y;
  }
  const auto sx = savgol_smooth(xs, config);
  const auto sy = savgol_smooth(ys, config);
  std::vector<Point2> out(seq.size());
  for (std::size_t n = 0; n < seq.size(); ++n) out[n] = {sx[n], sy[n]};
  return out;
}

}  // namespace jar
