// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace jar {

inline constexpr int kRefinerLayers = 2;

struct RefinerHyper {
  int hidden = 64;
  int attention = 32;
  int window = 100;

  void validate() const;
  friend bool operator==(const RefinerHyper&, const RefinerHyper&) = default;
};

/// One named tensor inside the flat parameter vector, stored column-major.
struct TensorInfo {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t offset = 0;
  int rank = 2;

  std::size_t size() const { return rows * cols; }
  friend bool operator==(const TensorInfo&, const TensorInfo&) = default;
};

/// Gate weights of one GRU direction; row-vector convention
/// z = sigmoid(x W_z + h U_z + b_z).
struct GruParams {
  Eigen::MatrixXd W_z, W_r, W_h;
  Eigen::MatrixXd U_z, U_r, U_h;
  Eigen::RowVectorXd b_z, b_r, b_h;
};

struct BiGruParams {
  GruParams fwd;
  GruParams bwd;
};

struct AttentionParams {
  Eigen::MatrixXd W_q;  // 2H x d_att
  Eigen::MatrixXd W_k;  // 2H x d_att
};

/// Two-layer BiGRU with a temporal attention head. Tensors, per layer l and
/// direction d: "l{l}.{fwd|bwd}.{W_z,W_r,W_h,U_z,U_r,U_h,b_z,b_r,b_h}", then
/// "att.W_q", "att.W_k", "head.W_o", "head.b_o".
class RefinerModel {
 public:
  RefinerModel() : RefinerModel(RefinerHyper{}) {}
  /// All tensors zero: the identity refiner.
  explicit RefinerModel(const RefinerHyper& hyper);

  static std::vector<TensorInfo> layout(const RefinerHyper& hyper);

  const RefinerHyper& hyper() const { return hyper_; }
  int hidden() const { return hyper_.hidden; }
  int attention() const { return hyper_.attention; }
  int window() const { return hyper_.window; }

  const std::vector<TensorInfo>& tensors() const { return tensors_; }
  const TensorInfo& info(const std::string& name) const;

  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }
  std::span<double> tensor(const std::string& name);
  std::span<const double> tensor(const std::string& name) const;
  Eigen::MatrixXd matrix(const std::string& name) const;
  void set_matrix(const std::string& name, const Eigen::MatrixXd& value);

  GruParams gru(int layer, bool backward) const;
  BiGruParams bigru(int layer) const { return {gru(layer, false), gru(layer, true)}; }
  AttentionParams attention_params() const;

  /// Throws CorruptModelError naming the first non-finite tensor.
  void validate() const;

  friend bool operator==(const RefinerModel&, const RefinerModel&) = default;

 private:
  RefinerHyper hyper_;
  std::vector<TensorInfo> tensors_;
  std::vector<double> params_;
};

void save_model(const RefinerModel& model, const std::filesystem::path& path);
RefinerModel load_model(const std::filesystem::path& path);

}  // namespace jar
