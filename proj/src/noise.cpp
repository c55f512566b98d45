// SPDX-License-Identifier: Apache-2.0
#include "jar/noise.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "jar/error.hpp"

namespace jar {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

// Uniform on (lo, hi]; degenerate ranges return hi.
double draw_half_open(Rng& rng, double lo, double hi) {
  if (!(hi > lo)) return hi;
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  return hi - u * (hi - lo);
}

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

NoiseSpec NoiseSpec::defaults() {
  NoiseSpec s;
  s.jitter_sigma_lo = 0.0;
  s.jitter_sigma_hi = 15.0 * kDeg;
  s.outlier_fraction = 0.05;
  s.outlier_sigma_max = 45.0 * kDeg;
  s.secondary_sigma = 2.0;
  s.secondary_max = 5;
  return s;
}

void NoiseSpec::validate() const {
  if (!(outlier_fraction >= 0.0 && outlier_fraction <= 1.0)) {
    throw InvalidInputError("outlier_fraction must lie in [0, 1]");
  }
  if (jitter_sigma_lo < 0.0 || jitter_sigma_hi < jitter_sigma_lo || outlier_sigma_max < 0.0 ||
      secondary_sigma < 0.0 || secondary_max < 0) {
    throw InvalidInputError("noise sigmas must be non-negative and ordered");
  }
}

std::size_t primary_outlier_count(double fraction, std::size_t len) {
  // Tolerate representation error, e.g. 0.05 * 200.
  const double raw = fraction * static_cast<double>(len);
  const auto count = static_cast<std::size_t>(std::ceil(raw - 1e-9));
  return std::min(count, len);
}

NoisyWindow inject_noise(std::span<const double> truth, const NoiseSpec& spec, Rng& rng) {
  spec.validate();
  if (truth.empty()) throw InvalidInputError("cannot add noise to an empty window");
  const std::size_t len = truth.size();
  NoisyWindow out;
  out.noisy.assign(truth.begin(), truth.end());
  out.perturbed.assign(len, 0);

  std::normal_distribution<double> standard(0.0, 1.0);
  out.jitter_sigma = draw_half_open(rng, spec.jitter_sigma_lo, spec.jitter_sigma_hi);
  if (out.jitter_sigma > 0.0) {
    for (double& v : out.noisy) v += out.jitter_sigma * standard(rng);
  }

  const std::size_t primaries = primary_outlier_count(spec.outlier_fraction, len);
  if (primaries == 0) return out;

  std::vector<std::size_t> frames(len);
  std::iota(frames.begin(), frames.end(), std::size_t{0});
  for (std::size_t k = 0; k < primaries; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, len - 1);
    std::swap(frames[k], frames[pick(rng)]);
  }
  frames.resize(primaries);
  std::sort(frames.begin(), frames.end());
  out.primary_frames = frames;

  for (std::size_t p : frames) {
    const double sigma = draw_half_open(rng, spec.outlier_sigma_max / 3.0, spec.outlier_sigma_max);
    const double error = sigma * standard(rng);
    const double spread = std::round(std::abs(spec.secondary_sigma * standard(rng)));
    const int secondary = std::min(spec.secondary_max, static_cast<int>(spread));
    out.noisy[p] += error;
    out.perturbed[p] = 1;
    for (int d = 1; d <= secondary; ++d) {
      const double scaled = std::ldexp(error, -d);
      if (p >= static_cast<std::size_t>(d)) {
        out.noisy[p - static_cast<std::size_t>(d)] += scaled;
        out.perturbed[p - static_cast<std::size_t>(d)] = 1;
      }
      if (p + static_cast<std::size_t>(d) < len) {
        out.noisy[p + static_cast<std::size_t>(d)] += scaled;
        out.perturbed[p + static_cast<std::size_t>(d)] = 1;
      }
    }
  }
  return out;
}

std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x6a09e667f3bcc909ULL;
  for (std::uint64_t p : parts) h = splitmix(h ^ splitmix(p));
  return h;
}

}  // namespace jar
