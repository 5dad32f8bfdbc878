// Copyright 2026 The Matchbox Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <span>

#include <Eigen/Core>

#include "matchbox/nn/tensor.h"
#include "matchbox/random.h"

namespace matchbox::nn {

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace detail {

inline void expect(bool ok, const std::string& what) {
  if (!ok) fail(ErrorCode::ShapeMismatch, what);
}

template <typename Scalar>
void expect_rank3(const Tensor<Scalar>& x, const char* op) {
  expect(x.rank() == 3, std::string(op) + ": expected N x C x T input, got " + shape_string(x.shape()));
}

}  // namespace detail

/// Per-channel 1D convolution over time with same padding and stride 1.
/// out[n,c,t] = sum_j x[n,c,t + (j - k/2) * dilation] * w[c,j] + bias[c].
template <typename Scalar>
Tensor<Scalar> depthwise_conv1d(const Tensor<Scalar>& x, const Tensor<Scalar>& w,
                                const std::optional<Tensor<Scalar>>& bias = std::nullopt,
                                int dilation = 1) {
  using Array = typename Tensor<Scalar>::Array;
  detail::expect_rank3(x, "depthwise_conv1d");
  const Index N = x.dim(0), C = x.dim(1), T = x.dim(2);
  detail::expect(w.rank() == 2 && w.dim(0) == C,
                 "depthwise_conv1d: weight " + shape_string(w.shape()) + " for " + std::to_string(C) + " channels");
  detail::expect(!bias || bias->size() == C, "depthwise_conv1d: bias length");
  detail::expect(dilation >= 1, "depthwise_conv1d: dilation must be >= 1");
  const Index k = w.dim(1);
  const Index half = k / 2;

  // Valid output range [lo, hi) for tap j reads x[t + off].
  auto tap = [=](Index j) {
    const Index off = (j - half) * dilation;
    const Index lo = std::max<Index>(0, -off);
    const Index hi = std::min<Index>(T, T - off);
    return std::tuple{off, lo, std::max<Index>(0, hi - lo)};
  };

  Array out(N * C * T);
  const Array& xd = x.data();
  const Array& wd = w.data();
  for (Index n = 0; n < N; ++n) {
    for (Index c = 0; c < C; ++c) {
      const Index base = (n * C + c) * T;
      auto o = out.segment(base, T);
      o.setConstant(bias ? bias->data()[c] : Scalar(0));
      for (Index j = 0; j < k; ++j) {
        const auto [off, lo, len] = tap(j);
        if (len > 0) o.segment(lo, len) += wd[c * k + j] * xd.segment(base + lo + off, len);
      }
    }
  }

  std::vector<typename Tensor<Scalar>::NodePtr> parents{x.node(), w.node()};
  if (bias) parents.push_back(bias->node());
  auto xn = x.node();
  auto wn = w.node();
  auto bn = bias ? bias->node() : nullptr;
  return Tensor<Scalar>::result(
      x.shape(), std::move(out), std::move(parents), [=](const Array& g) {
        Array dx = xn->requires_grad ? Array::Zero(N * C * T) : Array();
        Array dw = Array::Zero(C * k);
        Array db = Array::Zero(C);
        for (Index n = 0; n < N; ++n) {
          for (Index c = 0; c < C; ++c) {
            const Index base = (n * C + c) * T;
            const auto go = g.segment(base, T);
            db[c] += go.sum();
            for (Index j = 0; j < k; ++j) {
              const auto [off, lo, len] = tap(j);
              if (len == 0) continue;
              dw[c * k + j] += (go.segment(lo, len) * xn->data.segment(base + lo + off, len)).sum();
              if (dx.size()) dx.segment(base + lo + off, len) += wn->data[c * k + j] * go.segment(lo, len);
            }
          }
        }
        if (dx.size()) xn->accumulate(dx);
        wn->accumulate(dw);
        if (bn) bn->accumulate(db);
      });
}

/// 1x1 convolution: out[n,o,t] = sum_i w[o,i] * x[n,i,t] + bias[o].
template <typename Scalar>
Tensor<Scalar> pointwise_conv1d(const Tensor<Scalar>& x, const Tensor<Scalar>& w,
                                const std::optional<Tensor<Scalar>>& bias = std::nullopt) {
  using Array = typename Tensor<Scalar>::Array;
  using Mat = RowMatrix<Scalar>;
  detail::expect_rank3(x, "pointwise_conv1d");
  const Index N = x.dim(0), Cin = x.dim(1), T = x.dim(2);
  detail::expect(w.rank() == 2 && w.dim(1) == Cin,
                 "pointwise_conv1d: weight " + shape_string(w.shape()) + " for " + std::to_string(Cin) + " input channels");
  const Index Cout = w.dim(0);
  detail::expect(!bias || bias->size() == Cout, "pointwise_conv1d: bias length");

  Array out(N * Cout * T);
  Eigen::Map<const Mat> W(w.data().data(), Cout, Cin);
  for (Index n = 0; n < N; ++n) {
    Eigen::Map<const Mat> X(x.data().data() + n * Cin * T, Cin, T);
    Eigen::Map<Mat> O(out.data() + n * Cout * T, Cout, T);
    O.noalias() = W * X;
    if (bias) O.colwise() += bias->data().matrix();
  }

  std::vector<typename Tensor<Scalar>::NodePtr> parents{x.node(), w.node()};
  if (bias) parents.push_back(bias->node());
  auto xn = x.node();
  auto wn = w.node();
  auto bn = bias ? bias->node() : nullptr;
  return Tensor<Scalar>::result(
      {N, Cout, T}, std::move(out), std::move(parents), [=](const Array& g) {
        Eigen::Map<const Mat> Wg(wn->data.data(), Cout, Cin);
        Mat dW = Mat::Zero(Cout, Cin);
        Eigen::Matrix<Scalar, Eigen::Dynamic, 1> db = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(Cout);
        Array dx = xn->requires_grad ? Array(N * Cin * T) : Array();
        for (Index n = 0; n < N; ++n) {
          Eigen::Map<const Mat> G(g.data() + n * Cout * T, Cout, T);
          Eigen::Map<const Mat> X(xn->data.data() + n * Cin * T, Cin, T);
          dW.noalias() += G * X.transpose();
          db += G.rowwise().sum();
          if (dx.size()) Eigen::Map<Mat>(dx.data() + n * Cin * T, Cin, T).noalias() = Wg.transpose() * G;
        }
        if (dx.size()) xn->accumulate(dx);
        wn->accumulate(Eigen::Map<const Array>(dW.data(), Cout * Cin));
        if (bn) bn->accumulate(db.array());
      });
}

/// Batch normalization parameters and running statistics for C channels.
template <typename Scalar>
struct BatchNorm {
  using Array = typename Tensor<Scalar>::Array;

  Tensor<Scalar> gamma;
  Tensor<Scalar> beta;
  Array running_mean;
  Array running_var;
  double momentum = 0.1;
  double eps = 1e-3;

  BatchNorm() = default;
  explicit BatchNorm(Index channels)
      : gamma(Tensor<Scalar>::from({channels}, Array::Ones(channels), true)),
        beta(Tensor<Scalar>::zeros({channels}, true)),
        running_mean(Array::Zero(channels)),
        running_var(Array::Ones(channels)) {}

  Index channels() const { return running_mean.size(); }
};

/// Train mode normalizes with batch statistics over (N, T) and updates the
/// running statistics (unbiased variance); eval mode uses the running ones.
template <typename Scalar>
Tensor<Scalar> batch_norm1d(const Tensor<Scalar>& x, BatchNorm<Scalar>& bn, Mode mode) {
  using Array = typename Tensor<Scalar>::Array;
  detail::expect_rank3(x, "batch_norm1d");
  const Index N = x.dim(0), C = x.dim(1), T = x.dim(2);
  detail::expect(bn.channels() == C, "batch_norm1d: channel count mismatch");
  const Index M = N * T;
  const Array& xd = x.data();

  Array mean(C), inv_std(C);
  if (mode == Mode::Train) {
    if (M < 2) fail(ErrorCode::DegenerateBatch, "batch_norm1d needs N*T >= 2 in train mode");
    for (Index c = 0; c < C; ++c) {
      double s = 0;
      for (Index n = 0; n < N; ++n) s += static_cast<double>(xd.segment((n * C + c) * T, T).sum());
      const double mu = s / static_cast<double>(M);
      double ss = 0;
      for (Index n = 0; n < N; ++n)
        ss += (xd.segment((n * C + c) * T, T).template cast<double>() - mu).square().sum();
      const double var = ss / static_cast<double>(M);
      mean[c] = static_cast<Scalar>(mu);
      inv_std[c] = static_cast<Scalar>(1.0 / std::sqrt(var + bn.eps));
      const double unbiased = ss / static_cast<double>(M - 1);
      bn.running_mean[c] = static_cast<Scalar>((1.0 - bn.momentum) * bn.running_mean[c] + bn.momentum * mu);
      bn.running_var[c] = static_cast<Scalar>((1.0 - bn.momentum) * bn.running_var[c] + bn.momentum * unbiased);
    }
  } else {
    mean = bn.running_mean;
    inv_std = (bn.running_var + static_cast<Scalar>(bn.eps)).sqrt().inverse();
  }

  Array xhat(N * C * T), out(N * C * T);
  const Array& gamma = bn.gamma.data();
  const Array& beta = bn.beta.data();
  for (Index n = 0; n < N; ++n)
    for (Index c = 0; c < C; ++c) {
      const Index base = (n * C + c) * T;
      xhat.segment(base, T) = (xd.segment(base, T) - mean[c]) * inv_std[c];
      out.segment(base, T) = gamma[c] * xhat.segment(base, T) + beta[c];
    }

  auto xn = x.node();
  auto gn = bn.gamma.node();
  auto bnode = bn.beta.node();
  const bool train = mode == Mode::Train;
  return Tensor<Scalar>::result(
      x.shape(), std::move(out), {xn, gn, bnode},
      [=, xhat = std::move(xhat)](const Array& g) {
        Array dgamma = Array::Zero(C), dbeta = Array::Zero(C);
        for (Index c = 0; c < C; ++c)
          for (Index n = 0; n < N; ++n) {
            const Index base = (n * C + c) * T;
            dbeta[c] += g.segment(base, T).sum();
            dgamma[c] += (g.segment(base, T) * xhat.segment(base, T)).sum();
          }
        if (xn->requires_grad) {
          Array dx(N * C * T);
          const Scalar m = static_cast<Scalar>(M);
          for (Index c = 0; c < C; ++c) {
            const Scalar scale = gn->data[c] * inv_std[c];
            for (Index n = 0; n < N; ++n) {
              const Index base = (n * C + c) * T;
              if (train)
                dx.segment(base, T) = scale / m * (m * g.segment(base, T) - dbeta[c] - xhat.segment(base, T) * dgamma[c]);
              else
                dx.segment(base, T) = scale * g.segment(base, T);
            }
          }
          xn->accumulate(dx);
        }
        gn->accumulate(dgamma);
        bnode->accumulate(dbeta);
      });
}

template <typename Scalar>
Tensor<Scalar> relu(const Tensor<Scalar>& x) {
  using Array = typename Tensor<Scalar>::Array;
  auto xn = x.node();
  return Tensor<Scalar>::result(x.shape(), x.data().max(Scalar(0)), {xn}, [xn](const Array& g) {
    xn->accumulate((xn->data > Scalar(0)).select(g, Scalar(0)));
  });
}

/// Inverted dropout: survivors are scaled by 1/(1-p); identity in eval mode
/// or when p == 0.
template <typename Scalar>
Tensor<Scalar> dropout(const Tensor<Scalar>& x, double p, Mode mode, Rng& rng) {
  using Array = typename Tensor<Scalar>::Array;
  if (!(p >= 0.0 && p < 1.0)) fail(ErrorCode::InvalidConfig, "dropout rate must lie in [0, 1)");
  if (mode == Mode::Eval || p == 0.0) return x;
  std::bernoulli_distribution keep(1.0 - p);
  const auto scale = static_cast<Scalar>(1.0 / (1.0 - p));
  Array mask(x.size());
  for (Index i = 0; i < mask.size(); ++i) mask[i] = keep(rng) ? scale : Scalar(0);
  auto xn = x.node();
  Array out = x.data() * mask;
  return Tensor<Scalar>::result(x.shape(), std::move(out), {xn},
                                [xn, mask = std::move(mask)](const Array& g) { xn->accumulate(g * mask); });
}

template <typename Scalar>
Tensor<Scalar> operator+(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  using Array = typename Tensor<Scalar>::Array;
  detail::expect(a.shape() == b.shape(),
                 "residual add: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  auto an = a.node();
  auto bn = b.node();
  return Tensor<Scalar>::result(a.shape(), a.data() + b.data(), {an, bn}, [an, bn](const Array& g) {
    an->accumulate(g);
    bn->accumulate(g);
  });
}

/// Mean over time: N x C x T -> N x C.
template <typename Scalar>
Tensor<Scalar> global_avg_pool(const Tensor<Scalar>& x) {
  using Array = typename Tensor<Scalar>::Array;
  using Mat = RowMatrix<Scalar>;
  detail::expect_rank3(x, "global_avg_pool");
  const Index N = x.dim(0), C = x.dim(1), T = x.dim(2);
  Eigen::Map<const Mat> X(x.data().data(), N * C, T);
  Array out = (X.rowwise().sum() / static_cast<Scalar>(T)).array();
  auto xn = x.node();
  return Tensor<Scalar>::result({N, C}, std::move(out), {xn}, [=](const Array& g) {
    Mat dx = (g / static_cast<Scalar>(T)).matrix().replicate(1, T);
    xn->accumulate(Eigen::Map<const Array>(dx.data(), N * C * T));
  });
}

/// Sum of all elements, as a scalar tensor.
template <typename Scalar>
Tensor<Scalar> sum(const Tensor<Scalar>& x) {
  using Array = typename Tensor<Scalar>::Array;
  auto xn = x.node();
  Array out = Array::Constant(1, x.data().sum());
  return Tensor<Scalar>::result({1}, std::move(out), {xn}, [xn](const Array& g) {
    xn->accumulate(Array::Constant(xn->data.size(), g[0]));
  });
}

/// sum(x * weights) with constant weights of the same length.
template <typename Scalar>
Tensor<Scalar> dot(const Tensor<Scalar>& x, const typename Tensor<Scalar>::Array& weights) {
  using Array = typename Tensor<Scalar>::Array;
  detail::expect(weights.size() == x.size(), "dot: length mismatch");
  auto xn = x.node();
  Array out = Array::Constant(1, (x.data() * weights).sum());
  return Tensor<Scalar>::result({1}, std::move(out), {xn}, [xn, weights](const Array& g) {
    xn->accumulate(weights * g[0]);
  });
}

template <typename Scalar>
struct CrossEntropy {
  Scalar loss{};
  typename Tensor<Scalar>::Array grad;   // d loss / d logits, row-major N x K
  typename Tensor<Scalar>::Array probs;  // softmax, row-major N x K
};

/// Mean negative log-likelihood of `labels` under softmax(logits), computed
/// with max subtraction. grad = (softmax - onehot) / N.
template <typename Scalar>
CrossEntropy<Scalar> softmax_cross_entropy_value(const typename Tensor<Scalar>::Array& logits,
                                                 Index n, Index k, std::span<const int> labels) {
  using Mat = RowMatrix<Scalar>;
  detail::expect(logits.size() == n * k, "softmax_cross_entropy: logits length");
  detail::expect(static_cast<Index>(labels.size()) == n, "softmax_cross_entropy: label count");
  CrossEntropy<Scalar> ce;
  ce.probs.resize(n * k);
  Eigen::Map<const Mat> L(logits.data(), n, k);
  Eigen::Map<Mat> P(ce.probs.data(), n, k);
  double total = 0;
  for (Index i = 0; i < n; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= k)
      fail(ErrorCode::LabelOutOfRange, "label " + std::to_string(y) + " outside [0, " + std::to_string(k) + ")");
    const Scalar m = L.row(i).maxCoeff();
    P.row(i) = (L.row(i).array() - m).exp().matrix();
    const Scalar s = P.row(i).sum();
    P.row(i) /= s;
    total += -(static_cast<double>(L(i, y) - m) - std::log(static_cast<double>(s)));
  }
  ce.loss = static_cast<Scalar>(total / static_cast<double>(n));
  ce.grad = ce.probs;
  Eigen::Map<Mat> G(ce.grad.data(), n, k);
  for (Index i = 0; i < n; ++i) G(i, labels[static_cast<std::size_t>(i)]) -= Scalar(1);
  ce.grad /= static_cast<Scalar>(n);
  return ce;
}

template <typename Scalar>
Tensor<Scalar> softmax_cross_entropy(const Tensor<Scalar>& logits, std::span<const int> labels) {
  using Array = typename Tensor<Scalar>::Array;
  detail::expect(logits.rank() == 2, "softmax_cross_entropy: expected N x K logits");
  auto ce = softmax_cross_entropy_value<Scalar>(logits.data(), logits.dim(0), logits.dim(1), labels);
  auto ln = logits.node();
  return Tensor<Scalar>::result({1}, Array::Constant(1, ce.loss), {ln},
                                [ln, grad = std::move(ce.grad)](const Array& g) { ln->accumulate(grad * g[0]); });
}

}  // namespace matchbox::nn
