// SPDX-License-Identifier: Apache-2.0
#include "jar/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "jar/error.hpp"
#include "jar/fourier.hpp"
#include "jar/kinematics.hpp"
#include "jar/noise.hpp"
#include "jar/refiner_net.hpp"
#include "json.hpp"
#include "refiner_engine.hpp"

namespace jar {
namespace {

using Eigen::Index;
using MatF = detail::Mat<float>;

constexpr std::uint64_t kInitStream = 0x1a17;
constexpr std::uint64_t kSplitStream = 0x5b17;
constexpr std::uint64_t kShuffleStream = 0x5f1e;

struct Adam {
  std::vector<float> m, v;
  double beta1_t = 1.0, beta2_t = 1.0;

  explicit Adam(std::size_t n) : m(n, 0.0f), v(n, 0.0f) {}

  void step(std::vector<float>& w, const std::vector<float>& g, const TrainConfig& c) {
    beta1_t *= c.beta1;
    beta2_t *= c.beta2;
    const auto b1 = static_cast<float>(c.beta1), b2 = static_cast<float>(c.beta2);
    const auto lr = static_cast<float>(c.learning_rate * std::sqrt(1.0 - beta2_t) / (1.0 - beta1_t));
    const auto eps = static_cast<float>(c.adam_epsilon * std::sqrt(1.0 - beta2_t));
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = b1 * m[i] + (1.0f - b1) * g[i];
      v[i] = b2 * v[i] + (1.0f - b2) * g[i] * g[i];
      w[i] -= lr * m[i] / (std::sqrt(v[i]) + eps);
    }
  }
};

void gather(const MatF& all, std::span<const std::size_t> idx, MatF& out) {
  out.resize(all.rows(), static_cast<Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out.col(static_cast<Index>(i)) = all.col(static_cast<Index>(idx[i]));
}

double evaluate(const std::vector<float>& w, const detail::NetLayout& n, const MatF& x,
                const MatF& y, std::span<const std::size_t> idx, std::size_t chunk) {
  if (idx.empty()) return 0.0;
  detail::NetCache<float> cache;
  MatF xb, yb;
  double sum = 0.0;
  for (std::size_t start = 0; start < idx.size(); start += chunk) {
    const auto part = idx.subspan(start, std::min(chunk, idx.size() - start));
    gather(x, part, xb);
    gather(y, part, yb);
    detail::net_forward<float>(w.data(), n, xb, cache, false);
    sum += (cache.pred - yb).cast<double>().squaredNorm();
  }
  return sum / static_cast<double>(idx.size() * static_cast<std::size_t>(x.rows()));
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 1) throw InvalidInputError("batch size must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw InvalidInputError("learning rate must be > 0");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(adam_epsilon > 0.0)) {
    throw InvalidInputError("Adam moments must lie in [0, 1) and epsilon must be > 0");
  }
  if (max_epochs < 1) throw InvalidInputError("max_epochs must be >= 1");
  if (patience < 1) throw InvalidInputError("patience must be >= 1");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw InvalidInputError("validation fraction must lie in [0, 1)");
  }
  if (hidden < 1 || attention < 1) throw InvalidInputError("hidden and attention sizes must be >= 1");
}

RefinerModel initialise_model(const RefinerHyper& hyper, std::uint64_t seed) {
  RefinerModel model(hyper);
  Rng rng(mix_seed({seed, kInitStream}));
  for (const auto& t : model.tensors()) {
    if (t.rank != 2 || t.name.rfind("head.", 0) == 0) continue;
    const double bound = 1.0 / std::sqrt(static_cast<double>(t.rows));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t i = 0; i < t.size(); ++i) model.params()[t.offset + i] = dist(rng);
  }
  return model;
}

TrainResult train_on_samples(std::span<const SamplePair> samples, std::size_t window,
                             const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  if (samples.empty()) throw InvalidInputError("training needs at least one sample");
  const auto clock_start = std::chrono::steady_clock::now();

  const auto L = static_cast<Index>(window);
  const auto N = samples.size();
  MatF x(L, static_cast<Index>(N)), y(L, static_cast<Index>(N));
  for (std::size_t i = 0; i < N; ++i) {
    const auto& s = samples[i];
    if (s.noisy.size() != window || s.truth.size() != window) {
      throw ShapeError("sample " + std::to_string(i) + " does not match the window of " +
                       std::to_string(window));
    }
    for (Index t = 0; t < L; ++t) {
      x(t, static_cast<Index>(i)) = static_cast<float>(s.noisy[static_cast<std::size_t>(t)]);
      y(t, static_cast<Index>(i)) = static_cast<float>(s.truth[static_cast<std::size_t>(t)]);
    }
  }

  std::vector<std::size_t> order(N);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t n_val = 0;
  if (config.validation_fraction > 0.0 && N >= 2) {
    Rng split_rng(mix_seed({config.seed, kSplitStream}));
    std::shuffle(order.begin(), order.end(), split_rng);
    n_val = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(config.validation_fraction * static_cast<double>(N))), 1, N - 1);
  }
  std::vector<std::size_t> val(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(val.begin(), val.end());
  std::sort(train.begin(), train.end());

  RefinerHyper hyper{config.hidden, config.attention, static_cast<int>(window)};
  RefinerModel best = initialise_model(hyper, config.seed);
  const auto layout = detail::NetLayout::from(best);
  std::vector<float> w(best.params().begin(), best.params().end());
  std::vector<float> g(w.size());
  Adam adam(w.size());

  TrainResult result{best, {}};
  TrainLog& log = result.log;
  log.seed = config.seed;
  log.config = config;
  log.train_samples = train.size();
  log.validation_samples = val.size();

  constexpr std::size_t kEvalChunk = 512;
  const auto& select = val.empty() ? train : val;
  log.best_validation_mse = evaluate(w, layout, x, y, select, kEvalChunk);
  int since_best = 0;

  detail::NetCache<float> cache;
  MatF xb, yb, dpred;
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto epoch_start = std::chrono::steady_clock::now();
    Rng shuffle_rng(mix_seed({config.seed, kShuffleStream, static_cast<std::uint64_t>(epoch)}));
    std::shuffle(train.begin(), train.end(), shuffle_rng);

    double train_sum = 0.0;
    for (std::size_t start = 0; start < train.size(); start += config.batch_size) {
      const auto part = std::span<const std::size_t>(train).subspan(
          start, std::min(config.batch_size, train.size() - start));
      gather(x, part, xb);
      gather(y, part, yb);
      detail::net_forward<float>(w.data(), layout, xb, cache, true);
      dpred = cache.pred - yb;
      const double sq = dpred.cast<double>().squaredNorm();
      if (!std::isfinite(sq)) {
        throw TrainingDivergedError("training loss became non-finite in epoch " + std::to_string(epoch));
      }
      train_sum += sq;
      dpred *= 2.0f / static_cast<float>(dpred.size());
      std::fill(g.begin(), g.end(), 0.0f);
      detail::net_backward<float>(w.data(), layout, cache, dpred, g.data());
      for (float gi : g) {
        if (!std::isfinite(gi)) {
          throw TrainingDivergedError("non-finite gradient in epoch " + std::to_string(epoch));
        }
      }
      adam.step(w, g, config);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_mse = train_sum / static_cast<double>(train.size() * window);
    rec.validation_mse = val.empty() ? evaluate(w, layout, x, y, train, kEvalChunk)
                                     : evaluate(w, layout, x, y, val, kEvalChunk);
    if (!std::isfinite(rec.validation_mse)) {
      throw TrainingDivergedError("validation loss became non-finite in epoch " + std::to_string(epoch));
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_start).count();
    log.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (rec.validation_mse < log.best_validation_mse) {
      log.best_validation_mse = rec.validation_mse;
      log.best_epoch = epoch;
      std::copy(w.begin(), w.end(), result.model.params().begin());
      since_best = 0;
    } else if (++since_best >= config.patience) {
      log.early_stopped = epoch < config.max_epochs;
      break;
    }
  }
  log.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_start).count();
  return result;
}

TrainResult train_model(const DatasetManifest& manifest, const TrainConfig& config,
                        const EpochCallback& on_epoch) {
  const auto samples = read_split(manifest, Split::Train);
  return train_on_samples(samples, manifest.window, config, on_epoch);
}

DatasetMetrics evaluate_dataset(const RefinerModel& model, std::span<const SamplePair> samples, double tau) {
  if (samples.empty()) throw InvalidInputError("evaluation needs at least one sample");
  if (!(tau >= 0.0)) throw InvalidInputError("tolerance tau must be >= 0");
  const Index L = model.window();
  constexpr std::size_t kChunk = 512;
  DatasetMetrics m;
  m.windows = samples.size();
  m.tau = tau;
  double noisy_sum = 0.0, refined_sum = 0.0;
  Eigen::MatrixXd x;
  for (std::size_t start = 0; start < samples.size(); start += kChunk) {
    const auto part = samples.subspan(start, std::min(kChunk, samples.size() - start));
    x.resize(L, static_cast<Index>(part.size()));
    for (std::size_t b = 0; b < part.size(); ++b) {
      if (static_cast<Index>(part[b].noisy.size()) != L || static_cast<Index>(part[b].truth.size()) != L) {
        throw ShapeError("sample " + std::to_string(start + b) + " does not match the model window of " +
                         std::to_string(L));
      }
      x.col(static_cast<Index>(b)) = Eigen::Map<const Eigen::VectorXd>(part[b].noisy.data(), L);
    }
    const Eigen::MatrixXd refined = refine_batch(x, model);
    for (std::size_t b = 0; b < part.size(); ++b) {
      const auto& s = part[b];
      for (Index t = 0; t < L; ++t) {
        const auto i = static_cast<std::size_t>(t);
        const double dn = wrap_angle(s.noisy[i] - s.truth[i]);
        const double dr = wrap_angle(refined(t, static_cast<Index>(b)) - s.truth[i]);
        noisy_sum += dn * dn;
        refined_sum += dr * dr;
      }
      for (std::size_t f : s.primary_frames) {
        ++m.erroneous_frames;
        if (std::abs(wrap_angle(refined(static_cast<Index>(f), static_cast<Index>(b)) - s.truth[f])) <= tau) {
          ++m.corrected_frames;
        }
      }
    }
  }
  const double n = static_cast<double>(samples.size()) * static_cast<double>(L);
  m.noisy_mse = noisy_sum / n;
  m.refined_mse = refined_sum / n;
  return m;
}

std::string dataset_metrics_json(const DatasetMetrics& m) {
  nlohmann::ordered_json j;
  j["windows"] = m.windows;
  j["noisy_mse_rad2"] = m.noisy_mse;
  j["refined_mse_rad2"] = m.refined_mse;
  j["mse_ratio"] = m.mse_ratio();
  j["correction_rate"] = m.correction_rate();
  j["erroneous_frames"] = m.erroneous_frames;
  j["corrected_frames"] = m.corrected_frames;
  j["tau_rad"] = m.tau;
  j["tau_deg"] = m.tau * 180.0 / std::numbers::pi;
  return j.dump(2) + "\n";
}

std::string train_log_json(const TrainLog& log, bool include_timing) {
  nlohmann::ordered_json j;
  j["seed"] = log.seed;
  const auto& c = log.config;
  j["config"] = {{"batch_size", c.batch_size},   {"learning_rate", c.learning_rate},
                 {"beta1", c.beta1},             {"beta2", c.beta2},
                 {"adam_epsilon", c.adam_epsilon}, {"max_epochs", c.max_epochs},
                 {"patience", c.patience},       {"validation_fraction", c.validation_fraction},
                 {"hidden", c.hidden},           {"attention", c.attention}};
  j["train_samples"] = log.train_samples;
  j["validation_samples"] = log.validation_samples;
  j["best_epoch"] = log.best_epoch;
  j["best_validation_mse"] = log.best_validation_mse;
  j["early_stopped"] = log.early_stopped;
  auto epochs = nlohmann::ordered_json::array();
  for (const auto& e : log.epochs) {
    nlohmann::ordered_json r{{"epoch", e.epoch}, {"train_mse", e.train_mse}, {"validation_mse", e.validation_mse}};
    if (include_timing) r["seconds"] = e.seconds;
    epochs.push_back(r);
  }
  j["epochs"] = epochs;
  if (include_timing) j["wall_seconds"] = log.wall_seconds;
  return j.dump(2) + "\n";
}

}  // namespace jar
