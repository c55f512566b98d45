// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "jar/dataset.hpp"
#include "jar/refiner_model.hpp"

namespace jar {

/// h = (1 - z) * h_prev + z * h~ with
/// z = sigmoid(x W_z + h_prev U_z + b_z), r = sigmoid(x W_r + h_prev U_r + b_r),
/// h~ = tanh(x W_h + (r * h_prev) U_h + b_h).
Eigen::RowVectorXd gru_cell_forward(const Eigen::RowVectorXd& x, const Eigen::RowVectorXd& h_prev,
                                    const GruParams& params);

/// L x in sequence to L x 2H, rows [h_fwd | h_bwd], zero initial states.
Eigen::MatrixXd bigru_layer_forward(const Eigen::MatrixXd& seq, const BiGruParams& params);

struct AttentionOutput {
  Eigen::MatrixXd features;  // L x 4H, rows [h_t | c]
  Eigen::VectorXd alpha;     // L, sums to 1
  Eigen::RowVectorXd context;
};

/// Scores s_t = (mean(h) W_q) . (h_t W_k) / sqrt(d_att), alpha = softmax(s).
AttentionOutput attention_head(const Eigen::MatrixXd& hidden, const AttentionParams& params);

/// Denoises one window of model.window() angles (rad).
std::vector<double> refine_window(std::span<const double> noisy, const RefinerModel& model);

/// Windows are the columns of `noisy` (L x B).
Eigen::MatrixXd refine_batch(const Eigen::MatrixXd& noisy, const RefinerModel& model);

double mse_loss(std::span<const double> pred, std::span<const double> truth);

struct GradientResult {
  double loss = 0.0;  // mean batch mse
  RefinerModel gradient;
};

/// Exact reverse-mode gradient of the mean batch mse.
GradientResult param_gradients(std::span<const SamplePair> batch, const RefinerModel& model);

}  // namespace jar
