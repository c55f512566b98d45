// SPDX-License-Identifier: Apache-2.0
#include "jar/fourier.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <string>

#include "jar/error.hpp"

namespace jar {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Harmonics {
  double a0;
  std::array<double, kFourierOrder> a;
  std::array<double, kFourierOrder> b;
};

FourierCoeffs make(const Harmonics& h, double period) {
  FourierCoeffs c;
  c.a0 = h.a0;
  c.a = h.a;
  c.b = h.b;
  c.period = period;
  return c;
}

// The contralateral limb runs half a cycle behind: odd harmonics flip sign.
FourierCoeffs mirrored(const Harmonics& h, double a0, double period) {
  FourierCoeffs c = make(h, period);
  c.a0 = a0;
  for (int k = 1; k <= kFourierOrder; k += 2) {
    c.a[k - 1] = -c.a[k - 1];
    c.b[k - 1] = -c.b[k - 1];
  }
  return c;
}

struct BodyCycle {
  const char* name;
  Harmonics head_left;   // nose -> left shoulder
  double head_right_a0;  // nose -> right shoulder
  Harmonics upper_arm;
  Harmonics forearm;
  Harmonics torso;
  double torso_right_a0;
  Harmonics thigh;
  Harmonics shank;
};

FourierMotionTemplate build(const BodyCycle& body, double period) {
  FourierMotionTemplate t;
  t.name = body.name;
  t.joints[0] = make(body.head_left, period);
  t.joints[1] = mirrored(body.head_left, body.head_right_a0, period);
  t.joints[2] = make(body.upper_arm, period);
  t.joints[3] = make(body.forearm, period);
  t.joints[4] = mirrored(body.upper_arm, body.upper_arm.a0, period);
  t.joints[5] = mirrored(body.forearm, body.forearm.a0, period);
  t.joints[6] = make(body.torso, period);
  t.joints[7] = mirrored(body.torso, body.torso_right_a0, period);
  t.joints[8] = make(body.thigh, period);
  t.joints[9] = make(body.shank, period);
  t.joints[10] = mirrored(body.thigh, body.thigh.a0, period);
  t.joints[11] = mirrored(body.shank, body.shank.a0, period);
  return t;
}

double draw(Rng& rng, double lo, double hi) {
  if (!(hi > lo)) return lo;
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

double perturb(double value, const ParamRange& r, Rng& rng) {
  const double mul = draw(rng, r.mul_lo, r.mul_hi);
  const double add = draw(rng, r.add_lo, r.add_hi);
  return value * mul + add;
}

}  // namespace

void FourierCoeffs::validate() const {
  if (!(period > 0.0) || !std::isfinite(period)) {
    throw InvalidInputError("Fourier period must be positive");
  }
  bool finite = std::isfinite(a0);
  for (int k = 0; k < kFourierOrder; ++k) finite = finite && std::isfinite(a[k]) && std::isfinite(b[k]);
  if (!finite) throw InvalidInputError("Fourier coefficients must be finite");
}

double eval_fourier(const FourierCoeffs& c, double m) {
  const double phase = std::fmod(m, c.period) / c.period;
  double theta = c.a0;
  for (int k = 1; k <= kFourierOrder; ++k) {
    const double arg = kTwoPi * k * phase;
    theta += c.a[k - 1] * std::cos(arg) + c.b[k - 1] * std::sin(arg);
  }
  return theta;
}

FourierCoeffs fit_fourier(std::span<const FourierSample> samples, int order, double period) {
  if (order < 0 || order > kFourierOrder) {
    throw InvalidInputError("Fourier order must be in [0, 8], got " + std::to_string(order));
  }
  if (!(period > 0.0)) throw InvalidInputError("Fourier period must be positive");
  const auto cols = static_cast<Eigen::Index>(2 * order + 1);
  const auto rows = static_cast<Eigen::Index>(samples.size());
  if (rows < cols) {
    throw InsufficientDataError("order-" + std::to_string(order) + " Fourier fit needs " +
                                std::to_string(cols) + " samples, got " + std::to_string(rows));
  }
  Eigen::MatrixXd basis(rows, cols);
  Eigen::VectorXd rhs(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const double phase = std::fmod(samples[r].m, period) / period;
    basis(r, 0) = 1.0;
    for (int k = 1; k <= order; ++k) {
      basis(r, 2 * k - 1) = std::cos(kTwoPi * k * phase);
      basis(r, 2 * k) = std::sin(kTwoPi * k * phase);
    }
    rhs(r) = samples[r].theta;
  }
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(basis);
  if (qr.rank() < cols) {
    throw DegenerateSamplingError("Fourier basis is rank deficient (rank " +
                                  std::to_string(qr.rank()) + " of " + std::to_string(cols) +
                                  "); samples do not resolve every harmonic");
  }
  const Eigen::VectorXd x = qr.solve(rhs);
  FourierCoeffs c;
  c.period = period;
  c.a0 = x(0);
  for (int k = 1; k <= order; ++k) {
    c.a[k - 1] = x(2 * k - 1);
    c.b[k - 1] = x(2 * k);
  }
  return c;
}

const std::vector<FourierMotionTemplate>& reference_templates() {
  static const std::vector<FourierMotionTemplate> templates = [] {
    const BodyCycle walk{
        "walk",
        {1.00, {0.03, 0.02}, {0.01, -0.01}},
        2.10,
        {1.57, {0.30, 0.04, 0.010}, {0.08, -0.02}},
        {1.35, {0.40, 0.06, -0.020}, {0.15, 0.03, 0.010}},
        {1.62, {0.01, 0.02}, {0.00, 0.01}},
        1.52,
        {1.50, {0.35, -0.05, 0.020, 0.005}, {0.12, 0.04, -0.010}},
        {1.62, {0.28, -0.18, 0.050, -0.015, 0.005}, {0.42, 0.10, -0.040, 0.010}},
    };
    const BodyCycle run{
        "run",
        {1.05, {0.05, 0.04, 0.01}, {0.02, -0.02}},
        2.05,
        {1.45, {0.55, 0.08, 0.020}, {0.20, -0.05, 0.010}},
        {0.85, {0.60, 0.12, -0.040, 0.010}, {0.30, 0.06, 0.020}},
        {1.75, {0.03, 0.05, 0.010}, {0.02, 0.03}},
        1.40,
        {1.40, {0.60, -0.10, 0.050, 0.010, 0.004}, {0.25, 0.08, -0.030, 0.008}},
        {1.80, {0.45, -0.35, 0.120, -0.040, 0.015, -0.005}, {0.70, 0.22, -0.080, 0.030, -0.010}},
    };
    const BodyCycle stairs{
        "stairs",
        {0.95, {0.02, 0.03}, {0.02, 0.00, 0.005}},
        2.15,
        {1.60, {0.18, 0.05}, {0.05, -0.03}},
        {1.45, {0.22, 0.07, 0.015}, {0.09, 0.02}},
        {1.70, {0.04, 0.03}, {0.03, -0.01}},
        1.45,
        {1.20, {0.50, 0.10, -0.030, 0.010}, {0.30, -0.06, 0.020}},
        {1.75, {0.35, -0.20, 0.090, -0.020, 0.006}, {0.50, 0.15, -0.050, 0.020, -0.005}},
    };
    return std::vector<FourierMotionTemplate>{build(walk, 100.0), build(run, 100.0),
                                              build(stairs, 100.0)};
  }();
  return templates;
}

TemplateRanges TemplateRanges::defaults() {
  TemplateRanges r;
  r.a0 = ParamRange::additive(0.15);
  r.a1 = {0.6, 1.4, -0.05, 0.05};
  r.b1 = {0.6, 1.4, -0.05, 0.05};
  r.a2 = {0.6, 1.4, -0.03, 0.03};
  r.b2 = {0.6, 1.4, -0.03, 0.03};
  r.period = ParamRange::multiplicative(0.75, 1.35);
  return r;
}

FourierMotionTemplate randomize_template(const FourierMotionTemplate& base,
                                         const TemplateRanges& ranges, Rng& rng) {
  const ParamRange* all[] = {&ranges.a0, &ranges.a1, &ranges.b1,
                             &ranges.a2, &ranges.b2, &ranges.period};
  for (const ParamRange* r : all) {
    if (!std::isfinite(r->mul_lo) || !std::isfinite(r->mul_hi) || !std::isfinite(r->add_lo) ||
        !std::isfinite(r->add_hi) || r->mul_lo > r->mul_hi || r->add_lo > r->add_hi) {
      throw InvalidRangeError("template range bounds must be finite and ordered");
    }
  }
  for (const auto& joint : base.joints) {
    const double lowest = std::min(joint.period * ranges.period.mul_lo,
                                   joint.period * ranges.period.mul_hi) + ranges.period.add_lo;
    if (!(lowest > 0.0)) throw InvalidRangeError("period range allows T <= 0");
  }

  FourierMotionTemplate out = base;
  const double period_mul = draw(rng, ranges.period.mul_lo, ranges.period.mul_hi);
  const double period_add = draw(rng, ranges.period.add_lo, ranges.period.add_hi);
  for (auto& joint : out.joints) {
    joint.a0 = perturb(joint.a0, ranges.a0, rng);
    joint.a[0] = perturb(joint.a[0], ranges.a1, rng);
    joint.b[0] = perturb(joint.b[0], ranges.b1, rng);
    joint.a[1] = perturb(joint.a[1], ranges.a2, rng);
    joint.b[1] = perturb(joint.b[1], ranges.b2, rng);
    joint.period = joint.period * period_mul + period_add;
  }
  return out;
}

std::array<std::vector<double>, kNumLimbs> synthesize_truth(const FourierMotionTemplate& t,
                                                            int frames_per_cycle, int cycles) {
  if (frames_per_cycle < 2 || cycles < 1) {
    throw InvalidInputError("need frames_per_cycle >= 2 and cycles >= 1");
  }
  const auto len = static_cast<std::size_t>(frames_per_cycle) * static_cast<std::size_t>(cycles);
  std::array<std::vector<double>, kNumLimbs> out;
  for (std::size_t j = 0; j < kNumLimbs; ++j) {
    out[j].resize(len);
    for (std::size_t m = 0; m < len; ++m) out[j][m] = eval_fourier(t.joints[j], static_cast<double>(m));
  }
  return out;
}

std::vector<std::size_t> window_starts(std::size_t len, std::size_t window, std::size_t stride) {
  if (window == 0 || stride == 0) throw InvalidInputError("window and stride must be positive");
  if (len < window) {
    throw InsufficientDataError("sequence of " + std::to_string(len) +
                                " frames is shorter than the window of " + std::to_string(window));
  }
  std::vector<std::size_t> starts;
  for (std::size_t s = 0; s + window <= len; s += stride) starts.push_back(s);
  return starts;
}

std::vector<std::vector<double>> segment_windows(std::span<const double> seq, std::size_t window,
                                                 std::size_t stride) {
  std::vector<std::vector<double>> out;
  for (std::size_t s : window_starts(seq.size(), window, stride)) {
    out.emplace_back(seq.begin() + static_cast<std::ptrdiff_t>(s),
                     seq.begin() + static_cast<std::ptrdiff_t>(s + window));
  }
  return out;
}

}  // namespace jar
