// SPDX-License-Identifier: Apache-2.0
#include "jar/refiner_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>

#include "binary_io.hpp"
#include "jar/error.hpp"

namespace jar {
namespace {

constexpr char kMagic[4] = {'J', 'A', 'R', 'M'};
constexpr std::uint32_t kVersion = 1;

const char* const kGateNames[] = {"W_z", "W_r", "W_h", "U_z", "U_r", "U_h", "b_z", "b_r", "b_h"};

std::string gru_prefix(int layer, bool backward) {
  return "l" + std::to_string(layer) + (backward ? ".bwd." : ".fwd.");
}

}  // namespace

void RefinerHyper::validate() const {
  if (hidden < 1 || attention < 1 || window < 1) {
    throw InvalidInputError("refiner hyperparameters must be positive (H=" + std::to_string(hidden) +
                            ", d_att=" + std::to_string(attention) + ", L=" + std::to_string(window) +
                            ")");
  }
}

std::vector<TensorInfo> RefinerModel::layout(const RefinerHyper& hyper) {
  hyper.validate();
  const auto H = static_cast<std::size_t>(hyper.hidden);
  const auto D = static_cast<std::size_t>(hyper.attention);
  std::vector<TensorInfo> out;
  std::size_t offset = 0;
  auto add = [&](std::string name, std::size_t rows, std::size_t cols, int rank) {
    out.push_back({std::move(name), rows, cols, offset, rank});
    offset += rows * cols;
  };
  for (int layer = 0; layer < kRefinerLayers; ++layer) {
    const std::size_t in = layer == 0 ? 1 : 2 * H;
    for (bool backward : {false, true}) {
      const std::string prefix = gru_prefix(layer, backward);
      for (int g = 0; g < 3; ++g) add(prefix + kGateNames[g], in, H, 2);
      for (int g = 3; g < 6; ++g) add(prefix + kGateNames[g], H, H, 2);
      for (int g = 6; g < 9; ++g) add(prefix + kGateNames[g], 1, H, 1);
    }
  }
  add("att.W_q", 2 * H, D, 2);
  add("att.W_k", 2 * H, D, 2);
  add("head.W_o", 4 * H, 1, 2);
  add("head.b_o", 1, 1, 1);
  return out;
}

RefinerModel::RefinerModel(const RefinerHyper& hyper) : hyper_(hyper), tensors_(layout(hyper)) {
  params_.assign(tensors_.back().offset + tensors_.back().size(), 0.0);
}

const TensorInfo& RefinerModel::info(const std::string& name) const {
  const auto it = std::find_if(tensors_.begin(), tensors_.end(),
                               [&](const TensorInfo& t) { return t.name == name; });
  if (it == tensors_.end()) throw ShapeError("unknown tensor '" + name + "'");
  return *it;
}

std::span<double> RefinerModel::tensor(const std::string& name) {
  const auto& t = info(name);
  return {params_.data() + t.offset, t.size()};
}

std::span<const double> RefinerModel::tensor(const std::string& name) const {
  const auto& t = info(name);
  return {params_.data() + t.offset, t.size()};
}

Eigen::MatrixXd RefinerModel::matrix(const std::string& name) const {
  const auto& t = info(name);
  return Eigen::Map<const Eigen::MatrixXd>(params_.data() + t.offset,
                                           static_cast<Eigen::Index>(t.rows),
                                           static_cast<Eigen::Index>(t.cols));
}

void RefinerModel::set_matrix(const std::string& name, const Eigen::MatrixXd& value) {
  const auto& t = info(name);
  if (static_cast<std::size_t>(value.rows()) != t.rows ||
      static_cast<std::size_t>(value.cols()) != t.cols) {
    throw ShapeError("tensor '" + name + "' is " + std::to_string(t.rows) + "x" +
                     std::to_string(t.cols) + ", got " + std::to_string(value.rows()) + "x" +
                     std::to_string(value.cols()));
  }
  Eigen::Map<Eigen::MatrixXd>(params_.data() + t.offset, value.rows(), value.cols()) = value;
}

GruParams RefinerModel::gru(int layer, bool backward) const {
  if (layer < 0 || layer >= kRefinerLayers) throw ShapeError("layer index out of range");
  const std::string p = gru_prefix(layer, backward);
  GruParams g;
  g.W_z = matrix(p + "W_z");
  g.W_r = matrix(p + "W_r");
  g.W_h = matrix(p + "W_h");
  g.U_z = matrix(p + "U_z");
  g.U_r = matrix(p + "U_r");
  g.U_h = matrix(p + "U_h");
  g.b_z = matrix(p + "b_z");
  g.b_r = matrix(p + "b_r");
  g.b_h = matrix(p + "b_h");
  return g;
}

AttentionParams RefinerModel::attention_params() const {
  return {matrix("att.W_q"), matrix("att.W_k")};
}

void RefinerModel::validate() const {
  for (const auto& t : tensors_) {
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (!std::isfinite(params_[t.offset + i])) {
        throw CorruptModelError("tensor '" + t.name + "' holds a non-finite value");
      }
    }
  }
}

void save_model(const RefinerModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open model file for writing: " + path.string());
  out.write(kMagic, sizeof kMagic);
  detail::write_le<std::uint32_t>(out, kVersion);
  detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.hidden()));
  detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.attention()));
  detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.window()));
  detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.tensors().size()));
  for (const auto& t : model.tensors()) {
    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank));
    if (t.rank == 2) detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.rows));
    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.cols));
    for (std::size_t i = 0; i < t.size(); ++i) detail::write_le<double>(out, model.params()[t.offset + i]);
  }
  out.flush();
  if (!out) throw IoError("failed writing model file: " + path.string());
}

RefinerModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model file: " + path.string());
  const std::string where = " in " + path.string();

  char magic[4] = {};
  in.read(magic, sizeof magic);
  if (in.gcount() != sizeof magic || !std::equal(magic, magic + 4, kMagic)) {
    throw FormatError("not a refiner model (bad magic)" + where);
  }
  auto u32 = [&](const char* what) {
    std::uint32_t v = 0;
    if (!detail::read_le(in, v)) throw CorruptModelError(std::string("truncated ") + what + where);
    return v;
  };
  const std::uint32_t version = u32("version");
  if (version != kVersion) {
    throw FormatError("unsupported model version " + std::to_string(version) + where);
  }
  RefinerHyper hyper;
  const std::uint32_t H = u32("hyperparameters");
  const std::uint32_t D = u32("hyperparameters");
  const std::uint32_t L = u32("hyperparameters");
  constexpr std::uint32_t kLimit = 1u << 16;
  if (H == 0 || D == 0 || L == 0 || H > kLimit || D > kLimit || L > kLimit) {
    throw CorruptModelError("implausible hyperparameters" + where);
  }
  hyper.hidden = static_cast<int>(H);
  hyper.attention = static_cast<int>(D);
  hyper.window = static_cast<int>(L);
  RefinerModel model(hyper);

  const std::uint32_t count = u32("tensor count");
  if (count != model.tensors().size()) {
    throw CorruptModelError("tensor table holds " + std::to_string(count) + " entries, expected " +
                            std::to_string(model.tensors().size()) + where);
  }
  for (const auto& t : model.tensors()) {
    const std::uint32_t name_len = u32("tensor name");
    if (name_len > 256) throw CorruptModelError("implausible tensor name length" + where);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (static_cast<std::uint32_t>(in.gcount()) != name_len) throw CorruptModelError("truncated tensor name" + where);
    if (name != t.name) {
      throw CorruptModelError("expected tensor '" + t.name + "', found '" + name + "'" + where);
    }
    const std::uint32_t rank = u32("tensor rank");
    if (rank != static_cast<std::uint32_t>(t.rank)) {
      throw CorruptModelError("tensor '" + t.name + "' has rank " + std::to_string(rank) + where);
    }
    const std::size_t rows = rank == 2 ? u32("tensor dims") : 1;
    const std::size_t cols = u32("tensor dims");
    if (rows != t.rows || cols != t.cols) {
      throw CorruptModelError("tensor '" + t.name + "' is " + std::to_string(rows) + "x" +
                              std::to_string(cols) + ", expected " + std::to_string(t.rows) + "x" +
                              std::to_string(t.cols) + where);
    }
    for (std::size_t i = 0; i < t.size(); ++i) {
      double v = 0.0;
      if (!detail::read_le(in, v)) throw CorruptModelError("truncated values of tensor '" + t.name + "'" + where);
      model.params()[t.offset + i] = v;
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) throw CorruptModelError("trailing bytes" + where);
  model.validate();
  return model;
}

}  // namespace jar
