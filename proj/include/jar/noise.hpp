// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

#include "jar/fourier.hpp"

namespace jar {

/// Jitter and outlier model for synthetic joint-angle windows. Angles in rad.
struct NoiseSpec {
  double jitter_sigma_lo = 0.0;
  double jitter_sigma_hi = 0.0;  // per-window sigma drawn from (lo, hi]
  double outlier_fraction = 0.05;
  double outlier_sigma_max = 0.0;  // per-event sigma drawn from (max/3, max]
  double secondary_sigma = 2.0;    // frames
  int secondary_max = 5;
  std::uint64_t seed = 0;

  /// 3 sigma < 45 deg jitter, 3 sigma up to 135 deg outliers, 5 % primary frames.
  static NoiseSpec defaults();
  void validate() const;
};

struct NoisyWindow {
  std::vector<double> noisy;
  std::vector<std::size_t> primary_frames;  // ascending
  std::vector<std::uint8_t> perturbed;      // 1 where an outlier or secondary frame was added
  double jitter_sigma = 0.0;
};

/// Number of primary outlier frames for a window of `len` frames.
std::size_t primary_outlier_count(double fraction, std::size_t len);

NoisyWindow inject_noise(std::span<const double> truth, const NoiseSpec& spec, Rng& rng);

/// Order-sensitive 64-bit mix of the inputs (splitmix64 finaliser chain).
std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts);

}  // namespace jar
