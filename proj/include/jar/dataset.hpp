// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "jar/fourier.hpp"
#include "jar/noise.hpp"

namespace jar {

enum class Split : std::uint8_t { Train = 0, Test = 1 };

std::string_view split_name(Split split);

struct SampleProvenance {
  std::uint64_t template_id = 0;  // synthetic subject (split tag in the high bits)
  std::uint32_t base_template = 0;
  std::uint32_t window_offset = 0;
  std::uint64_t seed = 0;
};

struct SamplePair {
  std::vector<double> noisy;
  std::vector<double> truth;
  std::uint16_t joint_index = 0;
  std::vector<std::size_t> primary_frames;
  SampleProvenance provenance;
};

struct DatasetConfig {
  std::size_t train_count = 512000;
  std::size_t test_count = 128000;
  std::size_t window = 100;
  std::size_t stride = 1;
  int frames_per_cycle = 100;
  int cycles = 2;
  std::size_t shard_size = 65536;
  NoiseSpec noise = NoiseSpec::defaults();  // noise.seed is the base seed
  TemplateRanges ranges = TemplateRanges::defaults();

  void validate() const;
};

struct ShardInfo {
  std::string file;
  std::string outliers_file;
  Split split = Split::Train;
  std::size_t records = 0;
  std::uintmax_t bytes = 0;
};

struct DatasetManifest {
  std::size_t train_count = 0;
  std::size_t test_count = 0;
  std::size_t window = 0;
  std::size_t stride = 0;
  int frames_per_cycle = 0;
  int cycles = 0;
  NoiseSpec noise;
  TemplateRanges ranges;
  std::vector<std::string> templates;
  std::vector<ShardInfo> shards;
  /// Directory holding the shards; not serialised.
  std::filesystem::path directory;
};

/// The first `count` samples of a split, generated in memory. Sample k is a
/// pure function of (config, templates, split, k).
std::vector<SamplePair> generate_samples(const std::vector<FourierMotionTemplate>& templates,
                                         const DatasetConfig& config, Split split,
                                         std::size_t count);

/// Writes shards plus manifest.json into `out_dir`.
DatasetManifest generate_dataset(const std::vector<FourierMotionTemplate>& templates,
                                 const DatasetConfig& config,
                                 const std::filesystem::path& out_dir);

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
DatasetManifest load_manifest(const std::filesystem::path& path);

/// Reads every record of a split and checks it against the declared counts.
std::vector<SamplePair> read_split(const DatasetManifest& manifest, Split split);

/// Raw record IO for a single shard.
void write_shard(const std::filesystem::path& path, const std::filesystem::path& outliers_path,
                 const std::vector<SamplePair>& records);
std::vector<SamplePair> read_shard(const std::filesystem::path& path,
                                   const std::filesystem::path& outliers_path);

}  // namespace jar
