// SPDX-License-Identifier: Apache-2.0
#include "jar/refiner_net.hpp"

#include <cmath>
#include <string>

#include "jar/error.hpp"
#include "refiner_engine.hpp"

namespace jar {
namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::RowVectorXd;

void expect_shape(const MatrixXd& m, Index rows, Index cols, const char* name) {
  if (m.rows() != rows || m.cols() != cols) {
    throw ShapeError("tensor " + std::string(name) + " is " + std::to_string(m.rows()) + "x" +
                     std::to_string(m.cols()) + ", expected " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  }
}

void expect_len(const RowVectorXd& v, Index len, const char* name) {
  if (v.size() != len) {
    throw ShapeError("tensor " + std::string(name) + " has " + std::to_string(v.size()) +
                     " entries, expected " + std::to_string(len));
  }
}

void check_gru(const GruParams& p, Index in) {
  const Index H = p.U_z.rows();
  expect_shape(p.W_z, in, H, "W_z");
  expect_shape(p.W_r, in, H, "W_r");
  expect_shape(p.W_h, in, H, "W_h");
  expect_shape(p.U_z, H, H, "U_z");
  expect_shape(p.U_r, H, H, "U_r");
  expect_shape(p.U_h, H, H, "U_h");
  expect_len(p.b_z, H, "b_z");
  expect_len(p.b_r, H, "b_r");
  expect_len(p.b_h, H, "b_h");
}

double logistic(double a) { return 1.0 / (1.0 + std::exp(-a)); }

std::vector<double> pack(const GruParams& p) {
  const Index in = p.W_z.rows(), H = p.U_z.rows();
  std::vector<double> flat(static_cast<std::size_t>(3 * H * (in + H + 1)));
  double* out = flat.data();
  for (const MatrixXd* m : {&p.W_z, &p.W_r, &p.W_h, &p.U_z, &p.U_r, &p.U_h}) {
    Eigen::Map<MatrixXd>(out, m->rows(), m->cols()) = *m;
    out += m->size();
  }
  for (const RowVectorXd* v : {&p.b_z, &p.b_r, &p.b_h}) {
    Eigen::Map<RowVectorXd>(out, v->size()) = *v;
    out += v->size();
  }
  return flat;
}

detail::Mat<double> as_batch(std::span<const double> noisy) {
  detail::Mat<double> x(static_cast<Index>(noisy.size()), 1);
  for (std::size_t i = 0; i < noisy.size(); ++i) x(static_cast<Index>(i), 0) = noisy[i];
  return x;
}

}  // namespace

RowVectorXd gru_cell_forward(const RowVectorXd& x, const RowVectorXd& h_prev, const GruParams& p) {
  check_gru(p, x.size());
  expect_len(h_prev, p.U_z.rows(), "h_prev");
  const RowVectorXd az = x * p.W_z + h_prev * p.U_z + p.b_z;
  const RowVectorXd ar = x * p.W_r + h_prev * p.U_r + p.b_r;
  const RowVectorXd z = az.unaryExpr(&logistic);
  const RowVectorXd r = ar.unaryExpr(&logistic);
  const RowVectorXd rh = r.cwiseProduct(h_prev);
  const RowVectorXd hh = (x * p.W_h + rh * p.U_h + p.b_h).array().tanh().matrix();
  return (RowVectorXd::Ones(z.size()) - z).cwiseProduct(h_prev) + z.cwiseProduct(hh);
}

MatrixXd bigru_layer_forward(const MatrixXd& seq, const BiGruParams& params) {
  const Index in = seq.cols(), L = seq.rows();
  check_gru(params.fwd, in);
  check_gru(params.bwd, in);
  const Index H = params.fwd.U_z.rows();
  if (params.bwd.U_z.rows() != H) throw ShapeError("forward and backward hidden sizes differ");
  if (L < 1) throw ShapeError("sequence must hold at least one timestep");
  MatrixXd out(L, 2 * H);
  const auto fwd = pack(params.fwd);
  const auto bwd = pack(params.bwd);
  detail::gru_direction_forward<double>(seq, {fwd.data(), in, H}, L, 1, false, out, 0, nullptr);
  detail::gru_direction_forward<double>(seq, {bwd.data(), in, H}, L, 1, true, out, H, nullptr);
  return out;
}

AttentionOutput attention_head(const MatrixXd& hidden, const AttentionParams& params) {
  const Index L = hidden.rows(), F = hidden.cols();
  if (L < 1) throw ShapeError("attention needs at least one timestep");
  if (params.W_q.rows() != F) expect_shape(params.W_q, F, params.W_q.cols(), "W_q");
  expect_shape(params.W_k, F, params.W_q.cols(), "W_k");
  const double scale = 1.0 / std::sqrt(static_cast<double>(params.W_q.cols()));
  const RowVectorXd q = hidden.colwise().mean() * params.W_q;
  const MatrixXd k = hidden * params.W_k;
  Eigen::VectorXd s = (k * q.transpose()) * scale;
  s = (s.array() - s.maxCoeff()).exp().matrix();
  AttentionOutput out;
  out.alpha = s / s.sum();
  out.context = out.alpha.transpose() * hidden;
  out.features.resize(L, 2 * F);
  out.features.leftCols(F) = hidden;
  out.features.rightCols(F) = out.context.replicate(L, 1);
  return out;
}

MatrixXd refine_batch(const MatrixXd& noisy, const RefinerModel& model) {
  if (noisy.rows() != model.window()) {
    throw ShapeError("window holds " + std::to_string(noisy.rows()) + " frames, model expects " +
                     std::to_string(model.window()));
  }
  const auto layout = detail::NetLayout::from(model);
  detail::NetCache<double> cache;
  detail::net_forward<double>(model.params().data(), layout, noisy, cache, false);
  return cache.pred;
}

std::vector<double> refine_window(std::span<const double> noisy, const RefinerModel& model) {
  const MatrixXd out = refine_batch(as_batch(noisy), model);
  return {out.data(), out.data() + out.size()};
}

double mse_loss(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size()) {
    throw ShapeError("mse_loss length mismatch: " + std::to_string(pred.size()) + " vs " +
                     std::to_string(truth.size()));
  }
  if (pred.empty()) throw ShapeError("mse_loss needs at least one value");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) sum += (pred[i] - truth[i]) * (pred[i] - truth[i]);
  return sum / static_cast<double>(pred.size());
}

GradientResult param_gradients(std::span<const SamplePair> batch, const RefinerModel& model) {
  if (batch.empty()) throw ShapeError("gradient batch is empty");
  const Index L = model.window();
  const auto B = static_cast<Index>(batch.size());
  MatrixXd x(L, B), y(L, B);
  for (Index b = 0; b < B; ++b) {
    const auto& s = batch[static_cast<std::size_t>(b)];
    if (static_cast<Index>(s.noisy.size()) != L || static_cast<Index>(s.truth.size()) != L) {
      throw ShapeError("sample " + std::to_string(b) + " does not match the model window of " +
                       std::to_string(L));
    }
    x.col(b) = Eigen::Map<const Eigen::VectorXd>(s.noisy.data(), L);
    y.col(b) = Eigen::Map<const Eigen::VectorXd>(s.truth.data(), L);
  }
  const auto layout = detail::NetLayout::from(model);
  detail::NetCache<double> cache;
  detail::net_forward<double>(model.params().data(), layout, x, cache, true);
  const MatrixXd resid = cache.pred - y;
  const double n = static_cast<double>(L * B);

  GradientResult out{resid.squaredNorm() / n, RefinerModel(model.hyper())};
  const MatrixXd dpred = resid * (2.0 / n);
  detail::net_backward<double>(model.params().data(), layout, cache, dpred,
                               out.gradient.params().data());
  for (const auto& t : out.gradient.tensors()) {
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (!std::isfinite(out.gradient.params()[t.offset + i])) {
        throw NumericOverflowError("non-finite gradient in tensor '" + t.name + "'");
      }
    }
  }
  return out;
}

}  // namespace jar
