// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "jar/dataset.hpp"
#include "jar/refiner_model.hpp"

namespace jar {

struct TrainConfig {
  std::size_t batch_size = 256;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  int max_epochs = 30;
  int patience = 5;
  std::uint64_t seed = 0;
  double validation_fraction = 0.1;
  int hidden = 64;
  int attention = 32;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double train_mse = 0.0;
  double validation_mse = 0.0;
  double seconds = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double best_validation_mse = 0.0;
  bool early_stopped = false;
  std::size_t train_samples = 0;
  std::size_t validation_samples = 0;
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
  TrainConfig config;
};

struct TrainResult {
  RefinerModel model;
  TrainLog log;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Fan-in uniform initialisation U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for the
/// GRU and attention matrices; biases and the output head start at zero, so
/// the initial model is the identity refiner.
RefinerModel initialise_model(const RefinerHyper& hyper, std::uint64_t seed);

/// Adam on the mean window mse. Returns the best-validation model.
TrainResult train_on_samples(std::span<const SamplePair> samples, std::size_t window,
                             const TrainConfig& config, const EpochCallback& on_epoch = {});

TrainResult train_model(const DatasetManifest& manifest, const TrainConfig& config,
                        const EpochCallback& on_epoch = {});

struct DatasetMetrics {
  std::size_t windows = 0;
  double noisy_mse = 0.0;
  double refined_mse = 0.0;
  std::size_t erroneous_frames = 0;  // primary outlier frames
  std::size_t corrected_frames = 0;
  double tau = 0.0;

  double mse_ratio() const { return noisy_mse > 0.0 ? refined_mse / noisy_mse : 0.0; }
  double correction_rate() const {
    return erroneous_frames ? static_cast<double>(corrected_frames) / static_cast<double>(erroneous_frames) : 1.0;
  }
};

/// Refines every window and scores it against its truth. A primary outlier
/// frame counts as corrected when the refined angle is within tau of truth.
DatasetMetrics evaluate_dataset(const RefinerModel& model, std::span<const SamplePair> samples, double tau);
std::string dataset_metrics_json(const DatasetMetrics& metrics);

/// Log as JSON. Timing fields are included only when asked for, so the
/// default rendering is a pure function of data, config and seed.
std::string train_log_json(const TrainLog& log, bool include_timing = false);

}  // namespace jar
