// SPDX-License-Identifier: Apache-2.0
// jar: synthetic data, training, refinement and evaluation of pose keypoints.
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <string>

#include "CLI11.hpp"
#include "jar/config.hpp"
#include "jar/dataset.hpp"
#include "jar/error.hpp"
#include "jar/keypoint_io.hpp"
#include "jar/metrics.hpp"
#include "jar/pipeline.hpp"
#include "jar/refiner_net.hpp"
#include "jar/trainer.hpp"

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

// Options are bound to plain variables; a config file fills those whose flag
// was not given on the command line.
struct Command {
  CLI::App* app = nullptr;
  std::map<std::string, std::function<void(const std::string&)>> setters;
  std::uint64_t seed = 0;
  std::string config;

  template <typename T>
  CLI::Option* add(const std::string& key, T& var, const std::string& help) {
    setters[key] = [&var, key](const std::string& text) {
      if (!CLI::detail::lexical_cast(text, var)) {
        throw jar::ValidationError("config key '" + key + "' has invalid value '" + text + "'");
      }
    };
    return app->add_option("--" + key, var, help)->capture_default_str();
  }

  CLI::Option* flag(const std::string& key, bool& var, const std::string& help) {
    setters[key] = [&var, key](const std::string& text) {
      if (!CLI::detail::lexical_cast(text, var)) {
        throw jar::ValidationError("config key '" + key + "' expects true or false, got '" + text + "'");
      }
    };
    return app->add_flag("--" + key, var, help);
  }
};

Command& make_command(CLI::App& root, std::map<std::string, Command>& commands, const std::string& name,
                      const std::string& help) {
  Command& c = commands[name];
  c.app = root.add_subcommand(name, help);
  c.add("seed", c.seed, "Base random seed");
  c.app->add_option("--config", c.config, "Flat key = value file; command-line flags win");
  return c;
}

void apply_config(Command& active, const std::map<std::string, Command>& all) {
  if (active.config.empty()) return;
  const jar::ConfigMap cfg = jar::load_config(active.config);
  for (const auto& [key, value] : cfg) {
    if (key == "config") throw jar::ValidationError("config files cannot name another config");
    const auto it = active.setters.find(key);
    if (it != active.setters.end()) {
      if (active.app->get_option("--" + key)->count() == 0) it->second(value);
      continue;
    }
    bool known = false;
    for (const auto& [name, c] : all) known = known || c.setters.count(key) > 0;
    if (!known) throw jar::ValidationError("unknown config key '" + key + "' in " + active.config);
  }
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw jar::ValidationError(std::string("missing required option --") + flag);
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw jar::IoError("cannot write " + path);
  out << text;
  if (!out) throw jar::IoError("failed writing " + path);
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    write_file(path, text);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App root{"Joint-angle refinement of 2D pose keypoint sequences"};
  root.require_subcommand(1);
  std::map<std::string, Command> commands;

  // synth
  Command& synth = make_command(root, commands, "synth", "Generate a synthetic training/test dataset");
  std::string synth_out;
  jar::DatasetConfig dc;
  double jitter_lo_deg = 0.0, jitter_hi_deg = 15.0, outlier_deg = 45.0;
  synth.add("out", synth_out, "Output directory for shards and manifest.json");
  synth.add("train-count", dc.train_count, "Training windows");
  synth.add("test-count", dc.test_count, "Test windows");
  synth.add("window", dc.window, "Window length (frames)");
  synth.add("data-stride", dc.stride, "Stride between windows cut from each synthetic sequence");
  synth.add("frames-per-cycle", dc.frames_per_cycle, "Frames per motion cycle");
  synth.add("cycles", dc.cycles, "Cycles per synthetic sequence");
  synth.add("shard-size", dc.shard_size, "Records per shard file");
  synth.add("jitter-deg-min", jitter_lo_deg, "Lower bound of the per-window jitter sigma (deg)");
  synth.add("jitter-deg-max", jitter_hi_deg, "Upper bound of the per-window jitter sigma (deg)");
  synth.add("outlier-fraction", dc.noise.outlier_fraction, "Fraction of primary outlier frames");
  synth.add("outlier-deg-max", outlier_deg, "Largest outlier sigma (deg)");
  synth.add("secondary-sigma", dc.noise.secondary_sigma, "Sigma of the secondary-frame count (frames)");
  synth.add("secondary-max", dc.noise.secondary_max, "Most secondary frames on each side");

  // train
  Command& train = make_command(root, commands, "train", "Train the refiner on a dataset manifest");
  std::string manifest_path, model_out, log_out, timing_out;
  jar::TrainConfig tc;
  bool quiet = false;
  train.add("manifest", manifest_path, "Dataset manifest.json");
  train.add("model-out", model_out, "Model file to write");
  train.add("log-out", log_out, "Training log JSON (default: <model-out>.log.json)");
  train.add("timing-out", timing_out, "Optional JSON with wall-clock timings");
  train.add("batch", tc.batch_size, "Batch size");
  train.add("lr", tc.learning_rate, "Adam learning rate");
  train.add("epochs", tc.max_epochs, "Maximum epochs");
  train.add("patience", tc.patience, "Epochs without validation improvement before stopping");
  train.add("validation-fraction", tc.validation_fraction, "Share of training windows held out");
  train.add("hidden", tc.hidden, "GRU hidden size");
  train.add("attention", tc.attention, "Attention projection size");
  train.flag("quiet", quiet, "No per-epoch progress on stderr");

  // refine
  Command& refine = make_command(root, commands, "refine", "Refine a keypoint sequence");
  std::string refine_in, refine_model, refine_out, motion_out;
  std::size_t refine_window = 0;
  jar::PipelineConfig pc;
  refine.add("input", refine_in, "Keypoint JSON to refine");
  refine.add("model", refine_model, "Model file");
  refine.add("output", refine_out, "Refined keypoint JSON to write");
  refine.add("motion-out", motion_out, "Optional refined-motion JSON (input to export)");
  refine.add("window", refine_window, "Window length; must match the model (0 = from model)");
  refine.add("stride", pc.runtime.stride, "Sliding-window stride (frames)");
  refine.add("epsilon", pc.runtime.merge.epsilon, "Merge weight epsilon");
  refine.add("sg-halfwidth", pc.savgol.half_width, "Savitzky-Golay half width for the base trajectory");
  refine.add("lambda", pc.limbs.smoothness_weight, "Limb-length smoothness weight");
  refine.add("max-iterations", pc.limbs.max_iterations, "Trust-region iteration cap");

  // eval
  Command& eval = make_command(root, commands, "eval", "Score refined output against truth");
  std::string eval_refined, eval_truth, eval_err, eval_out, eval_model, eval_manifest, eval_split = "test";
  double tau_deg = 10.0;
  eval.add("refined", eval_refined, "Refined keypoint JSON");
  eval.add("truth", eval_truth, "Ground-truth keypoint JSON");
  eval.add("erroneous", eval_err, "Erroneous-frame JSON");
  eval.add("model", eval_model, "Model file (dataset mode, with --manifest)");
  eval.add("manifest", eval_manifest, "Dataset manifest (dataset mode)");
  eval.add("split", eval_split, "Dataset split to score: train or test");
  eval.add("tau-deg", tau_deg, "Correction tolerance (deg)");
  eval.add("out", eval_out, "Metrics JSON (default stdout)");

  // angles
  Command& angles = make_command(root, commands, "angles", "Convert keypoints to a joint-angle CSV");
  std::string angles_in, angles_out;
  bool unwrap = false;
  angles.add("input", angles_in, "Keypoint JSON");
  angles.add("output", angles_out, "CSV to write");
  angles.flag("unwrap", unwrap, "Remove 2 pi jumps per joint");

  // export
  Command& exp = make_command(root, commands, "export", "Export a refined motion as CSV");
  std::string exp_motion, exp_what = "positions", exp_out;
  exp.add("motion", exp_motion, "Refined-motion JSON written by refine --motion-out");
  exp.add("what", exp_what, "positions, angles or velocities")
      ->check(CLI::IsMember({"positions", "angles", "velocities"}));
  exp.add("output", exp_out, "CSV to write");

  try {
    root.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return root.exit(e);
  }

  try {
    Command* active = nullptr;
    for (auto& [name, c] : commands) {
      if (c.app->parsed()) active = &c;
    }
    apply_config(*active, commands);

    if (active == &synth) {
      require(synth_out, "out");
      dc.noise.seed = synth.seed;
      dc.noise.jitter_sigma_lo = jitter_lo_deg * kDeg;
      dc.noise.jitter_sigma_hi = jitter_hi_deg * kDeg;
      dc.noise.outlier_sigma_max = outlier_deg * kDeg;
      const auto m = jar::generate_dataset(jar::reference_templates(), dc, synth_out);
      std::cerr << "wrote " << m.train_count << " train / " << m.test_count << " test windows in "
                << m.shards.size() << " shards to " << synth_out << "\n";
    } else if (active == &train) {
      require(manifest_path, "manifest");
      require(model_out, "model-out");
      tc.seed = train.seed;
      const auto manifest = jar::load_manifest(manifest_path);
      const auto result = jar::train_model(manifest, tc, [&](const jar::EpochRecord& e) {
        if (!quiet) {
          std::fprintf(stderr, "epoch %3d  train %.6f  val %.6f  (%.1f s)\n", e.epoch, e.train_mse,
                       e.validation_mse, e.seconds);
        }
      });
      jar::save_model(result.model, model_out);
      write_file(log_out.empty() ? model_out + ".log.json" : log_out, jar::train_log_json(result.log));
      if (!timing_out.empty()) write_file(timing_out, jar::train_log_json(result.log, true));
      std::fprintf(stderr, "best epoch %d, validation mse %.6f, %.1f s\n", result.log.best_epoch,
                   result.log.best_validation_mse, result.log.wall_seconds);
    } else if (active == &refine) {
      require(refine_in, "input");
      require(refine_model, "model");
      require(refine_out, "output");
      const auto model = jar::load_model(refine_model);
      if (refine_window != 0 && refine_window != static_cast<std::size_t>(model.window())) {
        throw jar::ValidationError("--window " + std::to_string(refine_window) +
                                   " does not match the model window of " + std::to_string(model.window()));
      }
      const auto input = jar::parse_keypoints(refine_in);
      const auto r = jar::run_jar(input, model, pc);
      jar::write_keypoints(r.output, refine_out);
      if (!motion_out.empty()) jar::write_motion(r.motion, motion_out);
    } else if (active == &eval) {
      const double tau = tau_deg * kDeg;
      if (!eval_manifest.empty() || !eval_model.empty()) {
        require(eval_manifest, "manifest");
        require(eval_model, "model");
        if (eval_split != "train" && eval_split != "test") {
          throw jar::ValidationError("--split must be train or test");
        }
        const auto manifest = jar::load_manifest(eval_manifest);
        const auto samples =
            jar::read_split(manifest, eval_split == "train" ? jar::Split::Train : jar::Split::Test);
        const auto model = jar::load_model(eval_model);
        emit(eval_out, jar::dataset_metrics_json(jar::evaluate_dataset(model, samples, tau)));
      } else {
        require(eval_refined, "refined");
        require(eval_truth, "truth");
        const auto& tree = jar::KinematicTree::canonical();
        const auto refined = jar::angles_from_sequence(jar::parse_keypoints(eval_refined), tree);
        const auto truth = jar::angles_from_sequence(jar::parse_keypoints(eval_truth), tree);
        const auto err = eval_err.empty() ? std::vector<jar::ErroneousFrame>{} : jar::read_erroneous_set(eval_err);
        emit(eval_out, jar::metrics_json(jar::evaluate_metrics(refined, truth, err, tau)));
      }
    } else if (active == &angles) {
      require(angles_in, "input");
      require(angles_out, "output");
      const auto seq = jar::parse_keypoints(angles_in);
      auto a = jar::angles_from_sequence(seq, jar::KinematicTree::canonical());
      if (unwrap) a = jar::unwrap_joint_angles(a);
      jar::write_angles_csv(a, seq.fps, angles_out);
    } else if (active == &exp) {
      require(exp_motion, "motion");
      require(exp_out, "output");
      jar::export_series(jar::read_motion(exp_motion), jar::series_kind_from_name(exp_what), exp_out);
    }
  } catch (const jar::Error& e) {
    std::cerr << "jar: error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "jar: internal error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
