// SPDX-License-Identifier: Apache-2.0
#include "jar/limb_solver.hpp"

#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "jar/error.hpp"

namespace jar {
namespace {

double median(std::vector<double> v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

}  // namespace

RatioTable::RatioTable() {
  for (auto& row : upper_) row.fill(1.0);
}

double RatioTable::operator()(std::size_t i, std::size_t j) const {
  if (i == j) return 1.0;
  if (i < j) return upper_.at(i).at(j);
  return 1.0 / upper_.at(j).at(i);
}

void RatioTable::set(std::size_t i, std::size_t j, double ratio) {
  if (i >= j) throw InvalidInputError("RatioTable::set expects i < j");
  if (!(ratio > 0.0) || !std::isfinite(ratio)) {
    throw InvalidInputError("limb ratio must be finite and positive");
  }
  upper_.at(i).at(j) = ratio;
}

Eigen::MatrixXd RatioTable::to_matrix() const {
  Eigen::MatrixXd m(kNumLimbs, kNumLimbs);
  for (std::size_t i = 0; i < kNumLimbs; ++i)
    for (std::size_t j = 0; j < kNumLimbs; ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (*this)(i, j);
  return m;
}

void TrustRegionConfig::validate() const {
  if (max_iterations <= 0 || !(initial_radius > 0.0) || !(gradient_tolerance > 0.0) ||
      !(smoothness_weight > 0.0)) {
    throw InvalidInputError("trust-region settings must all be positive");
  }
}

RatioTable estimate_ratios(const LimbLengthMatrix& raw) {
  for (std::size_t i = 0; i < kNumLimbs; ++i) {
    const bool any = std::any_of(raw.frames.begin(), raw.frames.end(),
                                 [i](const LimbLengthFrame& f) { return f.lengths[i] > 0.0; });
    if (!any) {
      throw DegenerateLimbError(i, std::nullopt,
                                "limb " + std::to_string(i) + " has zero length in every frame");
    }
  }
  RatioTable table;
  std::vector<double> ratios;
  for (std::size_t i = 0; i < kNumLimbs; ++i) {
    for (std::size_t j = i + 1; j < kNumLimbs; ++j) {
      ratios.clear();
      for (const auto& f : raw.frames) {
        if (f.lengths[i] > 0.0 && f.lengths[j] > 0.0) ratios.push_back(f.lengths[i] / f.lengths[j]);
      }
      if (ratios.empty()) {
        throw DegenerateLimbError(i, std::nullopt,
                                  "limbs " + std::to_string(i) + " and " + std::to_string(j) +
                                      " are never positive in the same frame");
      }
      table.set(i, j, median(ratios));
    }
  }
  return table;
}

Eigen::MatrixXd to_table(const LimbLengthMatrix& lengths) {
  Eigen::MatrixXd t(static_cast<Eigen::Index>(lengths.size()), kNumLimbs);
  for (std::size_t n = 0; n < lengths.size(); ++n)
    for (std::size_t i = 0; i < kNumLimbs; ++i)
      t(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(i)) = lengths.frames[n].lengths[i];
  return t;
}

LimbLengthMatrix from_table(const Eigen::MatrixXd& table) {
  if (table.cols() != static_cast<Eigen::Index>(kNumLimbs)) {
    throw ShapeError("limb table must have 12 columns");
  }
  LimbLengthMatrix out;
  out.frames.resize(static_cast<std::size_t>(table.rows()));
  for (Eigen::Index n = 0; n < table.rows(); ++n)
    for (Eigen::Index i = 0; i < table.cols(); ++i)
      out.frames[static_cast<std::size_t>(n)].lengths[static_cast<std::size_t>(i)] = table(n, i);
  return out;
}

double limb_loss(const Eigen::MatrixXd& lengths, const Eigen::MatrixXd& ratios, double lambda) {
  const Eigen::Index frames = lengths.rows(), limbs = lengths.cols();
  double ratio_term = 0.0;
  for (Eigen::Index n = 0; n < frames; ++n)
    for (Eigen::Index i = 0; i < limbs; ++i)
      for (Eigen::Index j = i + 1; j < limbs; ++j) {
        const double r = lengths(n, i) / lengths(n, j) - ratios(i, j);
        ratio_term += r * r;
      }
  double smooth_term = 0.0;
  for (Eigen::Index n = 1; n < frames; ++n)
    for (Eigen::Index i = 0; i < limbs; ++i) {
      const double d = lengths(n, i) - lengths(n - 1, i);
      smooth_term += d * d;
    }
  return ratio_term + lambda * smooth_term;
}

double limb_loss(const LimbLengthMatrix& lengths, const RatioTable& ratios, double lambda) {
  return limb_loss(to_table(lengths), ratios.to_matrix(), lambda);
}

LimbObjective::LimbObjective(std::size_t frames, const Eigen::MatrixXd& ratios, double lambda)
    : frames_(frames),
      limbs_(static_cast<std::size_t>(ratios.rows())),
      sqrt_lambda_(std::sqrt(lambda)) {
  if (ratios.rows() != ratios.cols()) throw ShapeError("ratio table must be square");
  for (std::size_t i = 0; i < limbs_; ++i)
    for (std::size_t j = i + 1; j < limbs_; ++j) {
      pairs_.emplace_back(i, j);
      pair_ratio_.push_back(ratios(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    }
}

std::size_t LimbObjective::num_residuals() const noexcept {
  return frames_ * pairs_.size() + (frames_ > 0 ? (frames_ - 1) * limbs_ : 0);
}

Eigen::VectorXd LimbObjective::residuals(const Eigen::VectorXd& u) const {
  Eigen::VectorXd r(static_cast<Eigen::Index>(num_residuals()));
  Eigen::Index row = 0;
  for (std::size_t n = 0; n < frames_; ++n) {
    const std::size_t base = n * limbs_;
    for (std::size_t p = 0; p < pairs_.size(); ++p) {
      const auto [i, j] = pairs_[p];
      r[row++] = std::exp(u[base + i] - u[base + j]) - pair_ratio_[p];
    }
  }
  for (std::size_t n = 1; n < frames_; ++n)
    for (std::size_t i = 0; i < limbs_; ++i) {
      const std::size_t cur = n * limbs_ + i;
      r[row++] = sqrt_lambda_ * (std::exp(u[cur]) - std::exp(u[cur - limbs_]));
    }
  return r;
}

double LimbObjective::value(const Eigen::VectorXd& u) const { return residuals(u).squaredNorm(); }

Eigen::VectorXd LimbObjective::gradient(const Eigen::VectorXd& u) const {
  const Eigen::VectorXd r = residuals(u);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(num_variables()));
  for_each_jacobian_entry(u, [&](std::size_t row, std::size_t col, double v) {
    g[static_cast<Eigen::Index>(col)] += 2.0 * v * r[static_cast<Eigen::Index>(row)];
  });
  return g;
}

Eigen::VectorXd LimbObjective::to_log(const Eigen::MatrixXd& lengths) const {
  Eigen::VectorXd u(static_cast<Eigen::Index>(num_variables()));
  for (std::size_t n = 0; n < frames_; ++n)
    for (std::size_t i = 0; i < limbs_; ++i)
      u[static_cast<Eigen::Index>(n * limbs_ + i)] =
          std::log(lengths(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(i)));
  return u;
}

Eigen::MatrixXd LimbObjective::from_log(const Eigen::VectorXd& u) const {
  Eigen::MatrixXd t(static_cast<Eigen::Index>(frames_), static_cast<Eigen::Index>(limbs_));
  for (std::size_t n = 0; n < frames_; ++n)
    for (std::size_t i = 0; i < limbs_; ++i)
      t(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(i)) =
          std::exp(u[static_cast<Eigen::Index>(n * limbs_ + i)]);
  return t;
}

LimbSolveResult solve_limb_lengths(const Eigen::MatrixXd& raw, const Eigen::MatrixXd& ratios,
                                   const TrustRegionConfig& config) {
  config.validate();
  const Eigen::Index frames = raw.rows(), limbs = raw.cols();
  if (frames < 1) throw InsufficientDataError("limb optimisation needs at least one frame");
  if (ratios.rows() != limbs || ratios.cols() != limbs) {
    throw ShapeError("ratio table does not match the number of limbs");
  }
  const double lambda = config.smoothness_weight;

  Eigen::MatrixXd start(frames, limbs);
  std::vector<double> positive;
  for (Eigen::Index i = 0; i < limbs; ++i) {
    positive.clear();
    for (Eigen::Index n = 0; n < frames; ++n)
      if (raw(n, i) > 0.0 && std::isfinite(raw(n, i))) positive.push_back(raw(n, i));
    if (positive.empty()) {
      throw DegenerateLimbError(static_cast<std::size_t>(i), std::nullopt,
                                "limb " + std::to_string(i) + " has no positive length");
    }
    start.col(i).setConstant(median(positive));
  }

  LimbSolveResult result;
  const bool raw_valid = (raw.array() > 0.0).all() && raw.allFinite();
  result.initial_loss =
      raw_valid ? limb_loss(raw, ratios, lambda) : std::numeric_limits<double>::infinity();
  double start_loss = limb_loss(start, ratios, lambda);
  if (!std::isfinite(start_loss)) throw InvalidInputError("limb loss is not finite at the start");
  if (raw_valid && result.initial_loss < start_loss) {
    start = raw;
    start_loss = result.initial_loss;
  }

  const LimbObjective objective(static_cast<std::size_t>(frames), ratios, lambda);
  const Eigen::Index nv = static_cast<Eigen::Index>(objective.num_variables());
  const Eigen::Index nr = static_cast<Eigen::Index>(objective.num_residuals());

  Eigen::VectorXd u = objective.to_log(start);
  Eigen::VectorXd r = objective.residuals(u);
  double loss = r.squaredNorm();
  result.start_loss = loss;
  result.loss_history.push_back(loss);

  using SpMat = Eigen::SparseMatrix<double>;
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(2 * nr));
  SpMat jac(nr, nv), identity(nv, nv);
  identity.setIdentity();
  Eigen::SimplicialLDLT<SpMat> ldlt;
  bool pattern_ready = false;
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(nv);

  double radius = config.initial_radius;
  double mu = 0.0;
  for (int iter = 0; iter < config.max_iterations; ++iter) {
    triplets.clear();
    objective.for_each_jacobian_entry(u, [&](std::size_t row, std::size_t col, double v) {
      triplets.emplace_back(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col), v);
    });
    jac.setFromTriplets(triplets.begin(), triplets.end());
    const SpMat normal = SpMat(jac.transpose()) * jac;
    const Eigen::VectorXd g = jac.transpose() * r;
    const Eigen::VectorXd projected = g - ones * (g.sum() / static_cast<double>(nv));
    result.gradient_norm = 2.0 * projected.norm();
    if (result.gradient_norm <= config.gradient_tolerance) {
      result.converged = true;
      break;
    }
    result.iterations = iter + 1;

    const double diag_max = normal.diagonal().cwiseAbs().maxCoeff();
    const double mu_min = 1e-9 * std::max(diag_max, 1e-12);
    mu = std::max(mu_min, mu > 0.0 ? 0.25 * mu : 1e-3 * diag_max);

    bool accepted = false;
    for (int inner = 0; inner < 80 && !accepted; ++inner) {
      const SpMat system = normal + mu * identity;
      if (!pattern_ready) {
        ldlt.analyzePattern(system);
        pattern_ready = true;
      }
      ldlt.factorize(system);
      if (ldlt.info() != Eigen::Success) {
        mu *= 4.0;
        continue;
      }
      // Minimise the damped model subject to sum(step) == 0.
      const Eigen::VectorXd x = ldlt.solve(g);
      const Eigen::VectorXd y = ldlt.solve(ones);
      const Eigen::VectorXd step = -(x - y * (x.sum() / y.sum()));
      const double step_size = step.cwiseAbs().maxCoeff();
      if (step_size > radius) {
        mu *= 4.0;
        continue;
      }
      const Eigen::VectorXd jstep = jac * step;
      const double predicted = -(2.0 * g.dot(step) + jstep.squaredNorm());
      const Eigen::VectorXd u_new = u + step;
      const Eigen::VectorXd r_new = objective.residuals(u_new);
      const double loss_new = r_new.squaredNorm();
      const double rho = predicted > 0.0 ? (loss - loss_new) / predicted : -1.0;

      if (rho > 1e-4 && loss_new <= loss) {
        u = u_new;
        r = r_new;
        loss = loss_new;
        result.loss_history.push_back(loss);
        accepted = true;
        if (rho > 0.75 && step_size > 0.5 * radius) radius *= 2.0;
        else if (rho < 0.25) radius = 0.5 * step_size;
      } else {
        radius = 0.5 * step_size;
        mu *= 4.0;
      }
      if (radius < 1e-15) break;
    }
    if (!accepted) break;  // no productive step left at working precision
  }

  if (!result.converged) {
    const Eigen::VectorXd g = objective.gradient(u);
    result.gradient_norm = (g - ones * (g.sum() / static_cast<double>(nv))).norm();
    result.converged = result.gradient_norm <= config.gradient_tolerance;
  }
  result.final_loss = loss;
  result.lengths = objective.from_log(u);
  return result;
}

OptimizedLimbs optimize_limb_lengths(const LimbLengthMatrix& raw, const RatioTable& ratios,
                                     const TrustRegionConfig& config) {
  OptimizedLimbs out;
  out.report = solve_limb_lengths(to_table(raw), ratios.to_matrix(), config);
  out.lengths = from_table(out.report.lengths);
  return out;
}

}  // namespace jar
