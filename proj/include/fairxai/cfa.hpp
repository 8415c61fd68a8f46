/*
 * Copyright 2026 The fairxai Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Integrated-gradients attributions and the attribution/correlation penalty
// added to the training loss:
//
//   L_total = L_CE + lambda * L_CFA
//   L_CFA   = sum_j |rho_j| * abar_j
//
// rho_j is the Pearson correlation between input feature j and the binary
// sensitive attribute; abar_j is the batch mean of |IG_j| normalized to sum to
// one over features. L_CFA lies in [0, 1].
//
// The gradient of L_CFA with respect to the parameters goes through the
// input gradients that IG averages. For a ReLU network the input gradient is
// piecewise constant in the activation pattern, so d/dθ [u · ∇x f] equals,
// for every linear layer, (dL/dz of that layer) ⊗ (tangent of its input along
// u). Bias terms receive no penalty gradient. rho does not depend on the
// parameters.

#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fairxai/common.hpp"
#include "fairxai/nn.hpp"

namespace fairxai::cfa {

using nn::Matrix;
using nn::RowVector;

inline constexpr int kDefaultIgSteps = 32;

struct CfaConfig {
  double lambda = 0.0;
  int ig_steps = kDefaultIgSteps;
  std::optional<RowVector> baseline;  // zeros when unset
  std::string attribute = "gender";
  std::string majority = "male";
  int target_class = 1;
  bool global_correlation = false;  // rho over the training set instead of per batch
};

struct LossBreakdown {
  double ce = 0.0;
  double cfa = 0.0;
  double total = 0.0;
};

/// Straight-line interpolants x0 + (t/m)(x_i - x0), t = 1..m, sample-major.
inline Matrix path_points(const Matrix& x, const RowVector& x0, int m) {
  Matrix pts(x.rows() * m, x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const RowVector delta = x.row(i) - x0;
    for (int t = 1; t <= m; ++t) {
      pts.row(i * m + (t - 1)) = x0 + (static_cast<double>(t) / m) * delta;
    }
  }
  return pts;
}

/// Mean of rows [i*m, (i+1)*m) as a running mean, so m identical gradients
/// average to exactly that gradient.
inline RowVector path_mean(const Matrix& grads, Eigen::Index i, int m) {
  RowVector mean = grads.row(i * m);
  for (int t = 1; t < m; ++t) mean += (grads.row(i * m + t) - mean) / static_cast<double>(t + 1);
  return mean;
}

/// IG with a right Riemann sum over `m` steps. `grad_fn` maps a matrix of
/// points (one per row) to the gradient of the scalar target at each point.
template <typename GradFn>
Matrix integrated_gradients(GradFn&& grad_fn, const Matrix& x, const RowVector& x0, int m) {
  if (m < 1) throw ConfigError("integrated_gradients: steps must be >= 1");
  if (x0.size() != x.cols()) throw DataError("integrated_gradients: baseline dimension mismatch");
  const Matrix grads = grad_fn(path_points(x, x0, m));
  Matrix ig(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const RowVector mean_grad = path_mean(grads, i, m);
    ig.row(i) = (x.row(i) - x0).cwiseProduct(mean_grad);
  }
  return ig;
}

/// One-hot d_logits selecting `target` for every row.
inline Matrix target_selector(Eigen::Index rows, int target) {
  Matrix d = Matrix::Zero(rows, nn::kNumClasses);
  d.col(target).setOnes();
  return d;
}

/// Eval-mode input gradient of logit `target` at each row of `points`.
inline Matrix logit_input_gradient(const nn::FusionModel& model, const Matrix& points, int target) {
  nn::FusionModel::Cache cache;
  model.forward(points, nn::Mode::kEval, nullptr, &cache);
  return model.backward(cache, target_selector(points.rows(), target), false, false).input_grad;
}

inline Matrix integrated_gradients(const nn::FusionModel& model, const Matrix& x,
                                   const RowVector& x0, int m, int target) {
  if (target < 0 || target >= nn::kNumClasses) throw ConfigError("IG target out of range");
  return integrated_gradients(
      [&](const Matrix& pts) { return logit_input_gradient(model, pts, target); }, x, x0, m);
}

/// Pearson correlation of each column of `x` with the binary attribute over
/// rows whose attribute is known. 0 when either side is constant.
inline std::vector<double> attribute_correlation(const Matrix& x,
                                                 std::span<const std::optional<int>> groups) {
  std::vector<double> rho(static_cast<std::size_t>(x.cols()), 0.0);
  std::vector<Eigen::Index> rows;
  double a_mean = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    if (groups[static_cast<std::size_t>(i)]) {
      rows.push_back(i);
      a_mean += *groups[static_cast<std::size_t>(i)];
    }
  }
  if (rows.size() < 2) return rho;
  const auto n = static_cast<double>(rows.size());
  a_mean /= n;
  double a_ss = 0.0;
  for (auto i : rows) {
    const double d = *groups[static_cast<std::size_t>(i)] - a_mean;
    a_ss += d * d;
  }
  if (a_ss == 0.0) return rho;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    double mean = 0.0;
    for (auto i : rows) mean += x(i, j);
    mean /= n;
    double ss = 0.0;
    double cross = 0.0;
    for (auto i : rows) {
      const double d = x(i, j) - mean;
      ss += d * d;
      cross += d * (*groups[static_cast<std::size_t>(i)] - a_mean);
    }
    if (ss > 0.0) rho[static_cast<std::size_t>(j)] = cross / std::sqrt(ss * a_ss);
  }
  return rho;
}

struct Penalty {
  double value = 0.0;
  Matrix d_attributions;  // dL_CFA / dIG, same shape as the attributions
  std::vector<double> rho;
  std::vector<double> normalized_attribution;
  std::string annotation;  // non-empty for degenerate batches
};

/// L_CFA for a batch. `rho_override` supplies global correlations.
inline Penalty cfa_penalty(const Matrix& inputs, const Matrix& attributions,
                           std::span<const std::optional<int>> groups,
                           const std::vector<double>* rho_override = nullptr) {
  if (inputs.rows() != attributions.rows() || inputs.cols() != attributions.cols() ||
      static_cast<std::size_t>(inputs.rows()) != groups.size()) {
    throw DataError("cfa_penalty: shape mismatch");
  }
  Penalty p;
  const auto d = static_cast<std::size_t>(inputs.cols());
  p.d_attributions = Matrix::Zero(attributions.rows(), attributions.cols());
  p.normalized_attribution.assign(d, 0.0);
  bool has[2] = {false, false};
  for (const auto& g : groups) {
    if (g) has[*g == 1 ? 1 : 0] = true;
  }
  if (rho_override) {
    p.rho = *rho_override;
  } else if (inputs.rows() < 2 || !has[0] || !has[1]) {
    p.rho.assign(d, 0.0);
    p.annotation = "degenerate batch: both attribute groups required";
    return p;
  } else {
    p.rho = attribute_correlation(inputs, groups);
  }

  const auto n = static_cast<double>(attributions.rows());
  const RowVector mean_abs = attributions.cwiseAbs().colwise().sum() / n;
  const double total = mean_abs.sum();
  if (total <= 0.0) {
    p.annotation = "all attributions are zero";
    return p;
  }
  double value = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    p.normalized_attribution[j] = mean_abs(static_cast<Eigen::Index>(j)) / total;
    value += std::abs(p.rho[j]) * p.normalized_attribution[j];
  }
  p.value = value;
  // d/d mean_abs_j of (Σ r_j s_j / Σ s_j) = (r_j - L) / S; then d|IG|/dIG = sign.
  for (std::size_t j = 0; j < d; ++j) {
    const double coeff = (std::abs(p.rho[j]) - value) / total / n;
    const auto col = static_cast<Eigen::Index>(j);
    for (Eigen::Index i = 0; i < attributions.rows(); ++i) {
      const double a = attributions(i, col);
      p.d_attributions(i, col) = a > 0.0 ? coeff : (a < 0.0 ? -coeff : 0.0);
    }
  }
  return p;
}

struct PenaltyGradient {
  Penalty penalty;
  Matrix attributions;
  std::vector<std::vector<nn::Linear>> grads;  // same layout as FusionModel::zero_grads()
};

/// L_CFA on a batch and its gradient with respect to every weight matrix.
inline PenaltyGradient cfa_penalty_gradient(const nn::FusionModel& model, const Matrix& x,
                                            std::span<const std::optional<int>> groups,
                                            const CfaConfig& cfg,
                                            const std::vector<double>* rho_override = nullptr) {
  const int m = cfg.ig_steps;
  if (m < 1) throw ConfigError("ig_steps must be >= 1");
  const RowVector x0 = cfg.baseline ? *cfg.baseline : RowVector::Zero(x.cols());
  if (x0.size() != x.cols()) throw DataError("CFA baseline dimension mismatch");

  const Matrix pts = path_points(x, x0, m);
  nn::FusionModel::Cache cache;
  model.forward(pts, nn::Mode::kEval, nullptr, &cache);
  auto back = model.backward(cache, target_selector(pts.rows(), cfg.target_class), false, true);

  PenaltyGradient out;
  out.attributions.resize(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const RowVector mean_grad = path_mean(back.input_grad, i, m);
    out.attributions.row(i) = (x.row(i) - x0).cwiseProduct(mean_grad);
  }
  out.penalty = cfa_penalty(x, out.attributions, groups, rho_override);
  out.grads = model.zero_grads();
  if (out.penalty.value == 0.0 && out.penalty.d_attributions.isZero()) return out;

  // u_(i,t) = dL/dIG_i ⊙ (x_i - x0) / m, identical for every step t.
  Matrix u(pts.rows(), pts.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const RowVector ui = out.penalty.d_attributions.row(i).cwiseProduct(x.row(i) - x0) / m;
    for (int t = 0; t < m; ++t) u.row(i * m + t) = ui;
  }
  const auto tangents = model.tangent(cache, u);
  for (std::size_t b = 0; b < out.grads.size(); ++b) {
    for (std::size_t l = 0; l < out.grads[b].size(); ++l) {
      out.grads[b][l].weight.noalias() += back.deltas[b][l].transpose() * tangents[b][l];
    }
  }
  return out;
}

}  // namespace fairxai::cfa
