/*
 * Copyright 2026 The gpdens Authors. All rights reserved.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "core/gp.hpp"

#include <Eigen/Eigenvalues>

namespace gpdens {

GpConditioned GpConditioned::condition(const Matrix& latents,
                                       const Matrix& targets,
                                       const Hyperparams& hyp) {
  if (latents.cols() != targets.cols()) {
    throw std::invalid_argument("condition: latent/target count mismatch");
  }
  if (!targets.allFinite()) {
    throw std::invalid_argument("condition: targets contain non-finite values");
  }
  GpConditioned gp;
  gp.latents_ = latents;
  gp.targets_ = targets;
  gp.hyp_ = hyp;
  Matrix k = kernel_matrix(latents, hyp);
  gp.factor_ = factorize_psd(k);
  gp.inverse_ = gp.factor_.inverse();
  gp.weights_ = gp.factor_.solve(Matrix(targets.transpose()));
  return gp;
}

PredictiveMoments GpConditioned::predict_det(const Vector& xstar) const {
  Vector ks = kernel_cross(latents_, xstar, hyp_);
  PredictiveMoments out;
  out.mean = weights_.transpose() * ks;
  const double kss = hyp_.signal_var + hyp_.noise_var;
  double var = kss - ks.dot(factor_.solve(ks));
  // The exact value lies in [noise_var, noise_var + signal_var]; keep
  // rounding from leaking outside the bracket.
  var = std::min(std::max(var, hyp_.noise_var), kss);
  out.var = var;
  return out;
}

PredictiveMoments GpConditioned::predict_gauss(const Vector& xstar,
                                               const Hyperparams& hyp) const {
  Vector kt = expected_k(latents_, xstar, hyp);
  Matrix kh = expected_kk(latents_, xstar, hyp);
  const double kss = hyp.signal_var + hyp.noise_var;

  PredictiveMoments out;
  out.mean = weights_.transpose() * kt;
  const double iso = kss - (inverse_ * kh).trace();
  Matrix sigma = weights_.transpose() * (kh - kt * kt.transpose()) * weights_;
  sigma.diagonal().array() += iso;
  sigma = 0.5 * (sigma + sigma.transpose());
  out.cov = floor_covariance(sigma, 1e-10);
  return out;
}

Vector GpConditioned::predict_mean_loo(const Vector& xstar,
                                       int skip_index) const {
  const int n = count();
  if (n < 2) {
    throw std::invalid_argument("predict_mean_loo: need at least two points");
  }
  if (skip_index < 0 || skip_index >= n) {
    throw std::invalid_argument("predict_mean_loo: index out of range");
  }
  Vector ks = hyp_.stochastic() ? expected_k(latents_, xstar, hyp_)
                                : kernel_cross(latents_, xstar, hyp_);
  Matrix q_down = downdate_inverse(inverse_, skip_index);

  Vector ks_down(n - 1);
  Matrix targets_down(targets_.rows(), n - 1);
  for (int j = 0, jj = 0; j < n; ++j) {
    if (j == skip_index) continue;
    ks_down[jj] = ks[j];
    targets_down.col(jj) = targets_.col(j);
    ++jj;
  }
  return targets_down * (q_down * ks_down);
}

Matrix floor_covariance(const Matrix& cov, double floor) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
  if (es.info() != Eigen::Success) {
    throw NumericalError("floor_covariance: eigendecomposition failed");
  }
  Vector ev = es.eigenvalues().cwiseMax(floor);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace gpdens
