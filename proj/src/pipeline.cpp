// SPDX-License-Identifier: Apache-2.0
#include "jar/pipeline.hpp"

#include <string>

#include "jar/error.hpp"
#include "jar/refiner_net.hpp"

namespace jar {
namespace {

#define JAR_RETHROW_AS(Type)                         \
  catch (const Type& e) {                            \
    throw Type(std::string(stage) + ": " + e.what()); \
  }

// Must be called from inside a catch block.
[[noreturn]] void rethrow_in_stage(const char* stage) {
  try {
    throw;
  } catch (const DegenerateLimbError& e) {
    throw DegenerateLimbError(e.edge(), e.frame(), std::string(stage) + ": " + e.what());
  }
  JAR_RETHROW_AS(InsufficientDataError)
  JAR_RETHROW_AS(InvalidInputError)
  JAR_RETHROW_AS(InvalidRangeError)
  JAR_RETHROW_AS(DegenerateSamplingError)
  JAR_RETHROW_AS(ShapeError)
  JAR_RETHROW_AS(NumericOverflowError)
  JAR_RETHROW_AS(ValidationError)
  JAR_RETHROW_AS(PlanViolationError)
  JAR_RETHROW_AS(IoError)
  JAR_RETHROW_AS(FormatError)
  JAR_RETHROW_AS(CorruptModelError)
  JAR_RETHROW_AS(ParseError)
  JAR_RETHROW_AS(SchemaError)
  catch (const Error& e) {
    throw Error(std::string(stage) + ": " + e.what());
  }
}

#undef JAR_RETHROW_AS

}  // namespace

void PipelineConfig::validate() const {
  savgol.validate();
  limbs.validate();
  runtime.validate();
}

PipelineResult run_jar(const PoseSequence& input, const WindowRefiner& refiner, std::size_t window,
                       const PipelineConfig& config) {
  config.validate();
  validate_pose_sequence(input);
  const KinematicTree& tree = KinematicTree::canonical();
  PipelineResult r;

  LimbLengthMatrix raw_lengths;
  try {
    r.raw_angles = angles_from_sequence(input, tree);
    raw_lengths = lengths_from_sequence(input, tree);
  } catch (...) {
    rethrow_in_stage("stage 1 (pose to angles)");
  }

  try {
    r.motion.fps = input.fps;
    r.motion.base = smooth_base_trajectory(input, config.savgol);
    const RatioTable ratios = estimate_ratios(raw_lengths);
    auto limbs = optimize_limb_lengths(raw_lengths, ratios, config.limbs);
    r.motion.lengths = std::move(limbs.lengths);
    r.limb_report = std::move(limbs.report);
    r.motion.angles = refine_sequence(r.raw_angles, refiner, window, config.runtime);
  } catch (...) {
    rethrow_in_stage("stage 2 (conditioning and refinement)");
  }

  try {
    r.output = r.motion.reconstruct(tree);
    validate_pose_sequence(r.output);
  } catch (...) {
    rethrow_in_stage("stage 3 (reconstruction)");
  }
  return r;
}

PipelineResult run_jar(const PoseSequence& input, const RefinerModel& model, const PipelineConfig& config) {
  return run_jar(
      input, [&model](const Eigen::MatrixXd& w) { return refine_batch(w, model); },
      static_cast<std::size_t>(model.window()), config);
}

PipelineResult run_jar(const std::filesystem::path& input, const std::filesystem::path& model,
                       const std::filesystem::path& output, const PipelineConfig& config) {
  const PoseSequence seq = parse_keypoints(input);
  const RefinerModel m = load_model(model);
  PipelineResult r = run_jar(seq, m, config);
  write_keypoints(r.output, output);
  return r;
}

}  // namespace jar
