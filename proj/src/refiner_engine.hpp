// SPDX-License-Identifier: Apache-2.0
// Batched BiGRU-attention forward and reverse pass over a flat parameter
// vector laid out as RefinerModel::layout(). Batch rows are t * B + b.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include "jar/refiner_model.hpp"

namespace jar::detail {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using RowVec = Eigen::Matrix<S, 1, Eigen::Dynamic>;
template <typename S>
using ColVec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

struct NetLayout {
  Eigen::Index H = 0;
  Eigen::Index D = 0;
  Eigen::Index L = 0;
  Eigen::Index in[kRefinerLayers] = {};
  std::size_t block[kRefinerLayers][2] = {};  // offset of W_z per (layer, direction)
  std::size_t wq = 0, wk = 0, wo = 0, bo = 0, total = 0;

  static NetLayout from(const RefinerModel& model) {
    NetLayout n;
    n.H = model.hidden();
    n.D = model.attention();
    n.L = model.window();
    for (int l = 0; l < kRefinerLayers; ++l) {
      n.in[l] = l == 0 ? 1 : 2 * n.H;
      n.block[l][0] = model.info("l" + std::to_string(l) + ".fwd.W_z").offset;
      n.block[l][1] = model.info("l" + std::to_string(l) + ".bwd.W_z").offset;
    }
    n.wq = model.info("att.W_q").offset;
    n.wk = model.info("att.W_k").offset;
    n.wo = model.info("head.W_o").offset;
    n.bo = model.info("head.b_o").offset;
    n.total = model.params().size();
    return n;
  }
};

template <typename S>
struct GruView {
  Eigen::Map<const Mat<S>> W;     // in x 3H, columns [z | r | h]
  Eigen::Map<const Mat<S>> U;     // H x 3H
  Eigen::Map<const RowVec<S>> b;  // 3H

  GruView(const S* p, Eigen::Index in, Eigen::Index H)
      : W(p, in, 3 * H), U(p + in * 3 * H, H, 3 * H), b(p + in * 3 * H + 3 * H * H, 3 * H) {}
};

template <typename S>
struct GruGrad {
  Eigen::Map<Mat<S>> W;
  Eigen::Map<Mat<S>> U;
  Eigen::Map<RowVec<S>> b;

  GruGrad(S* p, Eigen::Index in, Eigen::Index H)
      : W(p, in, 3 * H), U(p + in * 3 * H, H, 3 * H), b(p + in * 3 * H + 3 * H * H, 3 * H) {}
};

template <typename Derived>
auto sigmoid(const Eigen::ArrayBase<Derived>& a) {
  using S = typename Derived::Scalar;
  return (a * S(0.5)).tanh() * S(0.5) + S(0.5);
}

template <typename S>
struct DirCache {
  Mat<S> gates;  // LB x 3H: z, r, h~
  Mat<S> hprev;  // LB x H
  Mat<S> rh;     // LB x H: r * h_prev
};

/// One direction of one layer. Writes h_t into columns [col, col + H) of Y.
template <typename S>
void gru_direction_forward(const Mat<S>& X, const GruView<S>& p, Eigen::Index L, Eigen::Index B,
                           bool reverse, Mat<S>& Y, Eigen::Index col, DirCache<S>* cache) {
  const Eigen::Index H = p.U.rows();
  Mat<S> xw = X * p.W;
  xw.rowwise() += p.b;
  if (cache) {
    cache->gates.resize(L * B, 3 * H);
    cache->hprev.resize(L * B, H);
    cache->rh.resize(L * B, H);
  }
  Mat<S> h = Mat<S>::Zero(B, H);
  Mat<S> a_zr(B, 2 * H), a_h(B, H), z(B, H), r(B, H), hh(B, H), rh(B, H);
  for (Eigen::Index s = 0; s < L; ++s) {
    const Eigen::Index t = reverse ? L - 1 - s : s;
    const auto xt = xw.middleRows(t * B, B);
    a_zr.noalias() = h * p.U.leftCols(2 * H);
    a_zr += xt.leftCols(2 * H);
    z = sigmoid(a_zr.leftCols(H).array()).matrix();
    r = sigmoid(a_zr.rightCols(H).array()).matrix();
    rh = r.cwiseProduct(h);
    a_h.noalias() = rh * p.U.rightCols(H);
    a_h += xt.rightCols(H);
    hh = a_h.array().tanh().matrix();
    if (cache) {
      cache->gates.block(t * B, 0, B, H) = z;
      cache->gates.block(t * B, H, B, H) = r;
      cache->gates.block(t * B, 2 * H, B, H) = hh;
      cache->hprev.middleRows(t * B, B) = h;
      cache->rh.middleRows(t * B, B) = rh;
    }
    h += z.cwiseProduct(hh - h);
    Y.block(t * B, col, B, H) = h;
  }
}

/// Reverse pass of one direction. dY columns [col, col + H) hold dLoss/dh_t.
/// Accumulates parameter gradients into g and, if dX is given, input
/// gradients into dX.
template <typename S>
void gru_direction_backward(const Mat<S>& X, const GruView<S>& p, GruGrad<S>& g, Eigen::Index L,
                            Eigen::Index B, bool reverse, const Mat<S>& dY, Eigen::Index col,
                            const DirCache<S>& c, Mat<S>* dX) {
  const Eigen::Index H = p.U.rows();
  Mat<S> dA(L * B, 3 * H);
  Mat<S> carry = Mat<S>::Zero(B, H);
  Mat<S> dh(B, H), dhp(B, H), drh(B, H), dzr(B, 2 * H);
  for (Eigen::Index s = 0; s < L; ++s) {
    const Eigen::Index t = reverse ? s : L - 1 - s;
    const auto z = c.gates.block(t * B, 0, B, H).array();
    const auto r = c.gates.block(t * B, H, B, H).array();
    const auto hh = c.gates.block(t * B, 2 * H, B, H).array();
    const auto hp = c.hprev.middleRows(t * B, B).array();
    dh = dY.block(t * B, col, B, H) + carry;
    auto dAh = dA.block(t * B, 2 * H, B, H);
    dAh = (dh.array() * z * (S(1) - hh * hh)).matrix();
    dhp = (dh.array() * (S(1) - z)).matrix();
    drh.noalias() = dAh * p.U.rightCols(H).transpose();
    dhp.array() += drh.array() * r;
    dA.block(t * B, 0, B, H) = (dh.array() * (hh - hp) * z * (S(1) - z)).matrix();
    dA.block(t * B, H, B, H) = (drh.array() * hp * r * (S(1) - r)).matrix();
    dhp.noalias() += dA.block(t * B, 0, B, 2 * H) * p.U.leftCols(2 * H).transpose();
    carry = dhp;
  }
  g.W.noalias() += X.transpose() * dA;
  g.U.leftCols(2 * H).noalias() += c.hprev.transpose() * dA.leftCols(2 * H);
  g.U.rightCols(H).noalias() += c.rh.transpose() * dA.rightCols(H);
  g.b += dA.colwise().sum();
  if (dX) dX->noalias() += dA * p.W.transpose();
}

template <typename S>
struct NetCache {
  Mat<S> x0;                                  // LB x 1 normalised input
  Mat<S> y[kRefinerLayers];                   // LB x 2H
  DirCache<S> dir[kRefinerLayers][2];
  Mat<S> hbar;                                // B x 2H
  Mat<S> q;                                   // B x D
  Mat<S> k;                                   // LB x D
  Mat<S> alpha;                               // L x B
  Mat<S> context;                             // B x 2H
  Mat<S> pred;                                // L x B
};

/// Forward pass on a batch of windows (columns of `x`, L x B). Keeps what the
/// reverse pass needs when `keep` is set.
template <typename S>
void net_forward(const S* params, const NetLayout& n, const Mat<S>& x, NetCache<S>& c, bool keep) {
  const Eigen::Index L = n.L, H = n.H, D = n.D;
  const Eigen::Index B = x.cols();
  const S inv_pi = S(1) / std::numbers::pi_v<S>;

  c.x0.resize(L * B, 1);
  for (Eigen::Index b = 0; b < B; ++b) {
    const S mean = x.col(b).mean();
    for (Eigen::Index t = 0; t < L; ++t) c.x0(t * B + b, 0) = (x(t, b) - mean) * inv_pi;
  }

  const Mat<S>* input = &c.x0;
  for (int l = 0; l < kRefinerLayers; ++l) {
    c.y[l].resize(L * B, 2 * H);
    for (int d = 0; d < 2; ++d) {
      const GruView<S> p(params + n.block[l][d], n.in[l], H);
      gru_direction_forward(*input, p, L, B, d == 1, c.y[l], d * H, keep ? &c.dir[l][d] : nullptr);
    }
    input = &c.y[l];
  }
  const Mat<S>& y = c.y[kRefinerLayers - 1];

  const Eigen::Map<const Mat<S>> Wq(params + n.wq, 2 * H, D);
  const Eigen::Map<const Mat<S>> Wk(params + n.wk, 2 * H, D);
  const Eigen::Map<const ColVec<S>> Wo(params + n.wo, 4 * H);
  const S bo = params[n.bo];
  const S scale = S(1) / std::sqrt(static_cast<S>(D));

  c.hbar = Mat<S>::Zero(B, 2 * H);
  for (Eigen::Index t = 0; t < L; ++t) c.hbar += y.middleRows(t * B, B);
  c.hbar /= static_cast<S>(L);
  c.q.noalias() = c.hbar * Wq;
  c.k.noalias() = y * Wk;
  c.alpha.resize(L, B);
  for (Eigen::Index t = 0; t < L; ++t) {
    c.alpha.row(t) = (c.k.middleRows(t * B, B).cwiseProduct(c.q)).rowwise().sum().transpose() * scale;
  }
  for (Eigen::Index b = 0; b < B; ++b) {
    auto col = c.alpha.col(b);
    const S top = col.maxCoeff();
    col = (col.array() - top).exp().matrix();
    col /= col.sum();
  }
  c.context = Mat<S>::Zero(B, 2 * H);
  for (Eigen::Index t = 0; t < L; ++t) {
    c.context.noalias() += c.alpha.row(t).transpose().asDiagonal() * y.middleRows(t * B, B);
  }

  const ColVec<S> head_h = y * Wo.head(2 * H);
  const ColVec<S> head_c = c.context * Wo.tail(2 * H);
  const S pi = std::numbers::pi_v<S>;
  c.pred.resize(L, B);
  for (Eigen::Index t = 0; t < L; ++t) {
    for (Eigen::Index b = 0; b < B; ++b) {
      c.pred(t, b) = x(t, b) + pi * (head_h(t * B + b) + head_c(b) + bo);
    }
  }
}

/// Reverse pass given dLoss/dpred (L x B). Gradients are accumulated into g.
template <typename S>
void net_backward(const S* params, const NetLayout& n, const NetCache<S>& c, const Mat<S>& dpred,
                  S* g) {
  const Eigen::Index L = n.L, H = n.H, D = n.D;
  const Eigen::Index B = dpred.cols();
  const Mat<S>& y = c.y[kRefinerLayers - 1];
  const S pi = std::numbers::pi_v<S>;
  const S scale = S(1) / std::sqrt(static_cast<S>(D));

  const Eigen::Map<const Mat<S>> Wq(params + n.wq, 2 * H, D);
  const Eigen::Map<const Mat<S>> Wk(params + n.wk, 2 * H, D);
  const Eigen::Map<const ColVec<S>> Wo(params + n.wo, 4 * H);
  Eigen::Map<Mat<S>> gWq(g + n.wq, 2 * H, D);
  Eigen::Map<Mat<S>> gWk(g + n.wk, 2 * H, D);
  Eigen::Map<ColVec<S>> gWo(g + n.wo, 4 * H);

  ColVec<S> dout(L * B);
  for (Eigen::Index t = 0; t < L; ++t) {
    for (Eigen::Index b = 0; b < B; ++b) dout(t * B + b) = pi * dpred(t, b);
  }
  const ColVec<S> dsum = dpred.colwise().sum().transpose() * pi;  // per window
  g[n.bo] += dsum.sum();
  gWo.head(2 * H).noalias() += y.transpose() * dout;
  gWo.tail(2 * H).noalias() += c.context.transpose() * dsum;

  Mat<S> dy = dout * Wo.head(2 * H).transpose();
  const Mat<S> dctx = dsum * Wo.tail(2 * H).transpose();  // B x 2H

  Mat<S> ds(L, B);
  for (Eigen::Index t = 0; t < L; ++t) {
    ds.row(t) = (y.middleRows(t * B, B).cwiseProduct(dctx)).rowwise().sum().transpose();
    dy.middleRows(t * B, B).noalias() += c.alpha.row(t).transpose().asDiagonal() * dctx;
  }
  for (Eigen::Index b = 0; b < B; ++b) {
    const S dot = c.alpha.col(b).dot(ds.col(b));
    ds.col(b) = (c.alpha.col(b).array() * (ds.col(b).array() - dot)).matrix() * scale;
  }
  Mat<S> dk(L * B, D);
  Mat<S> dq = Mat<S>::Zero(B, D);
  for (Eigen::Index t = 0; t < L; ++t) {
    const auto st = ds.row(t).transpose().asDiagonal();
    dk.middleRows(t * B, B).noalias() = st * c.q;
    dq.noalias() += st * c.k.middleRows(t * B, B);
  }
  gWk.noalias() += y.transpose() * dk;
  dy.noalias() += dk * Wk.transpose();
  gWq.noalias() += c.hbar.transpose() * dq;
  const Mat<S> dhbar = (dq * Wq.transpose()) / static_cast<S>(L);
  for (Eigen::Index t = 0; t < L; ++t) dy.middleRows(t * B, B) += dhbar;

  for (int l = kRefinerLayers - 1; l >= 0; --l) {
    const Mat<S>& input = l == 0 ? c.x0 : c.y[l - 1];
    Mat<S> dinput;
    if (l > 0) dinput = Mat<S>::Zero(L * B, n.in[l]);
    for (int d = 0; d < 2; ++d) {
      const GruView<S> p(params + n.block[l][d], n.in[l], H);
      GruGrad<S> gg(g + n.block[l][d], n.in[l], H);
      gru_direction_backward(input, p, gg, L, B, d == 1, dy, d * H, c.dir[l][d], l > 0 ? &dinput : nullptr);
    }
    if (l > 0) dy = std::move(dinput);
  }
}

}  // namespace jar::detail
