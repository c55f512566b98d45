// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "jar/kinematics.hpp"

namespace jar {

/// Pairwise limb-length ratios. Only the upper triangle is stored;
/// operator() returns 1 on the diagonal and 1/R[j][i] below it.
class RatioTable {
 public:
  RatioTable();
  double operator()(std::size_t i, std::size_t j) const;
  /// Sets R[i][j] for i < j; R[j][i] becomes its reciprocal.
  void set(std::size_t i, std::size_t j, double ratio);
  Eigen::MatrixXd to_matrix() const;

 private:
  std::array<std::array<double, kNumLimbs>, kNumLimbs> upper_{};
};

struct TrustRegionConfig {
  int max_iterations = 200;
  double initial_radius = 1.0;  // infinity norm, log-length units
  double gradient_tolerance = 1e-8;
  double smoothness_weight = 1.0;

  void validate() const;
};

/// Per-frame median of L_i / L_j over frames where both lengths are positive.
RatioTable estimate_ratios(const LimbLengthMatrix& raw);

/// Frames x limbs table.
Eigen::MatrixXd to_table(const LimbLengthMatrix& lengths);
LimbLengthMatrix from_table(const Eigen::MatrixXd& table);

/// sum_{i<j} sum_n (L_n^i / L_n^j - R_ij)^2 + lambda * sum_i sum_{n>=2} (L_n^i - L_{n-1}^i)^2
double limb_loss(const Eigen::MatrixXd& lengths, const Eigen::MatrixXd& ratios, double lambda);
double limb_loss(const LimbLengthMatrix& lengths, const RatioTable& ratios, double lambda);

/// The same objective over log-lengths u[n * limbs + i] = log L_n^i, written
/// as a stacked residual vector (ratio terms, then sqrt(lambda) * differences).
class LimbObjective {
 public:
  LimbObjective(std::size_t frames, const Eigen::MatrixXd& ratios, double lambda);

  std::size_t frames() const noexcept { return frames_; }
  std::size_t limbs() const noexcept { return limbs_; }
  std::size_t num_variables() const noexcept { return frames_ * limbs_; }
  std::size_t num_residuals() const noexcept;

  Eigen::VectorXd residuals(const Eigen::VectorXd& u) const;
  double value(const Eigen::VectorXd& u) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& u) const;

  Eigen::VectorXd to_log(const Eigen::MatrixXd& lengths) const;
  Eigen::MatrixXd from_log(const Eigen::VectorXd& u) const;

  /// Visits every Jacobian entry as (row, col, value).
  template <typename F>
  void for_each_jacobian_entry(const Eigen::VectorXd& u, F&& visit) const;

 private:
  std::size_t frames_;
  std::size_t limbs_;
  double sqrt_lambda_;
  std::vector<std::pair<std::size_t, std::size_t>> pairs_;
  std::vector<double> pair_ratio_;
};

struct LimbSolveResult {
  Eigen::MatrixXd lengths;  // frames x limbs
  bool converged = false;
  int iterations = 0;
  double initial_loss = 0.0;  // at the raw input
  double start_loss = 0.0;    // at the starting point of the iteration
  double final_loss = 0.0;
  double gradient_norm = 0.0;
  /// Loss at the start point, then after each accepted step.
  std::vector<double> loss_history;
};

/// Trust-region Levenberg-Marquardt over log-lengths. Starts from the per-limb
/// temporal median of `raw` (or from `raw` itself when that already scores
/// lower). Steps keep the mean log-length of the start point fixed, since the
/// loss does not pin the overall scale.
LimbSolveResult solve_limb_lengths(const Eigen::MatrixXd& raw, const Eigen::MatrixXd& ratios,
                                   const TrustRegionConfig& config);

struct OptimizedLimbs {
  LimbLengthMatrix lengths;
  LimbSolveResult report;
};

OptimizedLimbs optimize_limb_lengths(const LimbLengthMatrix& raw, const RatioTable& ratios,
                                     const TrustRegionConfig& config);

template <typename F>
void LimbObjective::for_each_jacobian_entry(const Eigen::VectorXd& u, F&& visit) const {
  std::size_t row = 0;
  for (std::size_t n = 0; n < frames_; ++n) {
    const std::size_t base = n * limbs_;
    for (const auto& [i, j] : pairs_) {
      const double e = std::exp(u[base + i] - u[base + j]);
      visit(row, base + i, e);
      visit(row, base + j, -e);
      ++row;
    }
  }
  for (std::size_t n = 1; n < frames_; ++n) {
    for (std::size_t i = 0; i < limbs_; ++i) {
      const std::size_t cur = n * limbs_ + i;
      const std::size_t prev = cur - limbs_;
      visit(row, cur, sqrt_lambda_ * std::exp(u[cur]));
      visit(row, prev, -sqrt_lambda_ * std::exp(u[prev]));
      ++row;
    }
  }
}

}  // namespace jar
