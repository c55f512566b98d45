// SPDX-License-Identifier: Apache-2.0
#include "jar/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>

#include "binary_io.hpp"
#include "jar/error.hpp"
#include "json.hpp"

namespace jar {
namespace {

using nlohmann::ordered_json;
namespace fs = std::filesystem;

constexpr double kRadToDeg = 180.0 / std::numbers::pi;
constexpr int kManifestVersion = 1;

std::uint64_t split_tag(Split split) { return static_cast<std::uint64_t>(split) << 40; }

ordered_json range_json(const ParamRange& r) {
  return ordered_json{{"mul_lo", r.mul_lo}, {"mul_hi", r.mul_hi}, {"add_lo", r.add_lo},
                      {"add_hi", r.add_hi}};
}

ParamRange range_from_json(const ordered_json& j) {
  return {j.at("mul_lo").get<double>(), j.at("mul_hi").get<double>(), j.at("add_lo").get<double>(),
          j.at("add_hi").get<double>()};
}

std::string shard_name(Split split, std::size_t index, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s-%05zu.%s", std::string(split_name(split)).c_str(), index, ext);
  return buf;
}

}  // namespace

std::string_view split_name(Split split) { return split == Split::Train ? "train" : "test"; }

void DatasetConfig::validate() const {
  noise.validate();
  if (train_count < 1 || test_count < 1) throw InvalidInputError("dataset counts must be >= 1");
  if (window < 2 || window > std::numeric_limits<std::uint16_t>::max()) {
    throw InvalidInputError("window length must be in [2, 65535]");
  }
  if (stride < 1) throw InvalidInputError("dataset stride must be >= 1");
  if (frames_per_cycle < 2 || cycles < 1) throw InvalidInputError("invalid cycle layout");
  if (static_cast<std::size_t>(frames_per_cycle) * static_cast<std::size_t>(cycles) < window) {
    throw InvalidInputError("synthesised sequence is shorter than the window");
  }
  if (shard_size < 1) throw InvalidInputError("shard_size must be >= 1");
}

std::vector<SamplePair> generate_samples(const std::vector<FourierMotionTemplate>& templates,
                                         const DatasetConfig& config, Split split,
                                         std::size_t count) {
  config.validate();
  if (templates.empty()) throw InvalidInputError("at least one motion template is required");
  const std::uint64_t base_seed = config.noise.seed;
  const std::size_t seq_len =
      static_cast<std::size_t>(config.frames_per_cycle) * static_cast<std::size_t>(config.cycles);
  const auto starts = window_starts(seq_len, config.window, config.stride);

  std::vector<SamplePair> out;
  out.reserve(count);
  for (std::uint64_t seq = 0; out.size() < count; ++seq) {
    const std::uint64_t template_id = split_tag(split) | seq;
    const std::size_t base_index = static_cast<std::size_t>(seq % templates.size());
    Rng subject_rng(mix_seed({base_seed, template_id}));
    const auto subject = randomize_template(templates[base_index], config.ranges, subject_rng);
    const auto truth = synthesize_truth(subject, config.frames_per_cycle, config.cycles);

    for (std::size_t joint = 0; joint < kNumLimbs && out.size() < count; ++joint) {
      for (std::size_t start : starts) {
        if (out.size() >= count) break;
        SamplePair s;
        s.joint_index = static_cast<std::uint16_t>(joint);
        s.truth.assign(truth[joint].begin() + static_cast<std::ptrdiff_t>(start),
                       truth[joint].begin() + static_cast<std::ptrdiff_t>(start + config.window));
        const std::uint64_t seed = mix_seed({base_seed, template_id, joint, start});
        Rng rng(seed);
        NoisyWindow noisy = inject_noise(s.truth, config.noise, rng);
        s.noisy = std::move(noisy.noisy);
        s.primary_frames = std::move(noisy.primary_frames);
        s.provenance = {template_id, static_cast<std::uint32_t>(base_index),
                        static_cast<std::uint32_t>(start), seed};
        out.push_back(std::move(s));
      }
    }
  }
  return out;
}

void write_shard(const fs::path& path, const fs::path& outliers_path,
                 const std::vector<SamplePair>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  std::ofstream err(outliers_path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open shard for writing: " + path.string());
  if (!err) throw IoError("cannot open outlier index for writing: " + outliers_path.string());
  for (const auto& r : records) {
    if (r.noisy.size() != r.truth.size()) throw ShapeError("sample noisy/truth length mismatch");
    detail::write_le<std::uint16_t>(out, r.joint_index);
    detail::write_le<std::uint16_t>(out, static_cast<std::uint16_t>(r.truth.size()));
    for (double v : r.truth) detail::write_le<float>(out, static_cast<float>(v));
    for (double v : r.noisy) detail::write_le<float>(out, static_cast<float>(v));
    detail::write_le<std::uint16_t>(err, static_cast<std::uint16_t>(r.primary_frames.size()));
    for (std::size_t f : r.primary_frames) detail::write_le<std::uint16_t>(err, static_cast<std::uint16_t>(f));
  }
  out.flush();
  err.flush();
  if (!out) throw IoError("failed writing shard: " + path.string());
  if (!err) throw IoError("failed writing outlier index: " + outliers_path.string());
}

std::vector<SamplePair> read_shard(const fs::path& path, const fs::path& outliers_path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open shard: " + path.string());
  std::ifstream err;
  if (!outliers_path.empty()) {
    err.open(outliers_path, std::ios::binary);
    if (!err) throw IoError("cannot open outlier index: " + outliers_path.string());
  }
  std::vector<SamplePair> records;
  std::uint16_t joint = 0;
  while (detail::read_le(in, joint)) {
    std::uint16_t len = 0;
    if (!detail::read_le(in, len)) throw IoError("truncated record header in " + path.string());
    SamplePair s;
    s.joint_index = joint;
    s.truth.resize(len);
    s.noisy.resize(len);
    float v = 0.0f;
    for (auto& t : s.truth) {
      if (!detail::read_le(in, v)) throw IoError("truncated record in " + path.string());
      t = v;
    }
    for (auto& n : s.noisy) {
      if (!detail::read_le(in, v)) throw IoError("truncated record in " + path.string());
      n = v;
    }
    if (err.is_open()) {
      std::uint16_t count = 0;
      if (!detail::read_le(err, count)) throw IoError("truncated outlier index " + outliers_path.string());
      s.primary_frames.resize(count);
      for (auto& f : s.primary_frames) {
        std::uint16_t idx = 0;
        if (!detail::read_le(err, idx)) throw IoError("truncated outlier index " + outliers_path.string());
        f = idx;
      }
    }
    records.push_back(std::move(s));
  }
  return records;
}

DatasetManifest generate_dataset(const std::vector<FourierMotionTemplate>& templates,
                                 const DatasetConfig& config, const fs::path& out_dir) {
  config.validate();
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create dataset directory " + out_dir.string() + ": " + ec.message());

  DatasetManifest m;
  m.train_count = config.train_count;
  m.test_count = config.test_count;
  m.window = config.window;
  m.stride = config.stride;
  m.frames_per_cycle = config.frames_per_cycle;
  m.cycles = config.cycles;
  m.noise = config.noise;
  m.ranges = config.ranges;
  m.directory = out_dir;
  for (const auto& t : templates) m.templates.push_back(t.name);

  for (Split split : {Split::Train, Split::Test}) {
    const std::size_t want = split == Split::Train ? config.train_count : config.test_count;
    const auto samples = generate_samples(templates, config, split, want);
    if (samples.size() != want) {
      throw GenerationError("generated " + std::to_string(samples.size()) + " of " +
                            std::to_string(want) + " " + std::string(split_name(split)) + " samples");
    }
    std::size_t written = 0;
    for (std::size_t shard = 0; written < want; ++shard) {
      const std::size_t n = std::min(config.shard_size, want - written);
      std::vector<SamplePair> chunk(samples.begin() + static_cast<std::ptrdiff_t>(written),
                                    samples.begin() + static_cast<std::ptrdiff_t>(written + n));
      ShardInfo info;
      info.file = shard_name(split, shard, "bin");
      info.outliers_file = shard_name(split, shard, "err");
      info.split = split;
      info.records = n;
      write_shard(out_dir / info.file, out_dir / info.outliers_file, chunk);
      info.bytes = fs::file_size(out_dir / info.file);
      m.shards.push_back(info);
      written += n;
    }
  }
  save_manifest(m, out_dir / "manifest.json");
  return m;
}

void save_manifest(const DatasetManifest& m, const fs::path& path) {
  ordered_json j;
  j["format"] = "jar-dataset";
  j["version"] = kManifestVersion;
  j["counts"] = {{"train", m.train_count}, {"test", m.test_count}};
  j["window_length"] = m.window;
  j["stride"] = m.stride;
  j["frames_per_cycle"] = m.frames_per_cycle;
  j["cycles"] = m.cycles;
  j["base_seed"] = m.noise.seed;
  j["noise"] = {{"jitter_sigma_deg", {m.noise.jitter_sigma_lo * kRadToDeg, m.noise.jitter_sigma_hi * kRadToDeg}},
                {"outlier_fraction", m.noise.outlier_fraction},
                {"outlier_sigma_max_deg", m.noise.outlier_sigma_max * kRadToDeg},
                {"secondary_sigma_frames", m.noise.secondary_sigma},
                {"secondary_max_frames", m.noise.secondary_max}};
  j["template_ranges"] = {{"a0", range_json(m.ranges.a0)}, {"a1", range_json(m.ranges.a1)},
                          {"b1", range_json(m.ranges.b1)}, {"a2", range_json(m.ranges.a2)},
                          {"b2", range_json(m.ranges.b2)}, {"T", range_json(m.ranges.period)}};
  j["templates"] = m.templates;
  ordered_json shards = ordered_json::array();
  for (const auto& s : m.shards) {
    shards.push_back({{"file", s.file},
                      {"outliers", s.outliers_file},
                      {"split", split_name(s.split)},
                      {"records", s.records},
                      {"bytes", s.bytes}});
  }
  j["shards"] = shards;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write manifest: " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing manifest: " + path.string());
}

DatasetManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest: " + path.string());
  ordered_json j;
  try {
    j = ordered_json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("manifest " + path.string() + ": " + e.what());
  }
  constexpr double kDegToRad = std::numbers::pi / 180.0;
  DatasetManifest m;
  try {
    if (j.at("version").get<int>() != kManifestVersion) {
      throw FormatError("unsupported manifest version in " + path.string());
    }
    m.train_count = j.at("counts").at("train").get<std::size_t>();
    m.test_count = j.at("counts").at("test").get<std::size_t>();
    m.window = j.at("window_length").get<std::size_t>();
    m.stride = j.at("stride").get<std::size_t>();
    m.frames_per_cycle = j.at("frames_per_cycle").get<int>();
    m.cycles = j.at("cycles").get<int>();
    const auto& noise = j.at("noise");
    m.noise.seed = j.at("base_seed").get<std::uint64_t>();
    m.noise.jitter_sigma_lo = noise.at("jitter_sigma_deg").at(0).get<double>() * kDegToRad;
    m.noise.jitter_sigma_hi = noise.at("jitter_sigma_deg").at(1).get<double>() * kDegToRad;
    m.noise.outlier_fraction = noise.at("outlier_fraction").get<double>();
    m.noise.outlier_sigma_max = noise.at("outlier_sigma_max_deg").get<double>() * kDegToRad;
    m.noise.secondary_sigma = noise.at("secondary_sigma_frames").get<double>();
    m.noise.secondary_max = noise.at("secondary_max_frames").get<int>();
    const auto& r = j.at("template_ranges");
    m.ranges = {range_from_json(r.at("a0")), range_from_json(r.at("a1")),
                range_from_json(r.at("b1")), range_from_json(r.at("a2")),
                range_from_json(r.at("b2")), range_from_json(r.at("T"))};
    m.templates = j.at("templates").get<std::vector<std::string>>();
    for (const auto& s : j.at("shards")) {
      ShardInfo info;
      info.file = s.at("file").get<std::string>();
      info.outliers_file = s.value("outliers", std::string{});
      const auto split = s.at("split").get<std::string>();
      if (split != "train" && split != "test") throw FormatError("unknown split " + split);
      info.split = split == "train" ? Split::Train : Split::Test;
      info.records = s.at("records").get<std::size_t>();
      info.bytes = s.at("bytes").get<std::uintmax_t>();
      m.shards.push_back(info);
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("manifest " + path.string() + ": " + e.what());
  }
  m.directory = path.parent_path();
  return m;
}

std::vector<SamplePair> read_split(const DatasetManifest& manifest, Split split) {
  std::vector<SamplePair> all;
  std::size_t declared = 0;
  for (const auto& shard : manifest.shards) {
    if (shard.split != split) continue;
    const fs::path err = shard.outliers_file.empty() ? fs::path{} : manifest.directory / shard.outliers_file;
    auto records = read_shard(manifest.directory / shard.file, err);
    if (records.size() != shard.records) {
      throw IoError("shard " + shard.file + " holds " + std::to_string(records.size()) +
                    " records, manifest declares " + std::to_string(shard.records));
    }
    declared += shard.records;
    for (auto& r : records) all.push_back(std::move(r));
  }
  const std::size_t expected = split == Split::Train ? manifest.train_count : manifest.test_count;
  if (declared != expected) {
    throw IoError(std::string(split_name(split)) + " shards hold " + std::to_string(declared) +
                  " records, manifest counts " + std::to_string(expected));
  }
  return all;
}

}  // namespace jar
