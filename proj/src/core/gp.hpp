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

#ifndef GPDENS_CORE_GP_HPP_
#define GPDENS_CORE_GP_HPP_

#include "core/kernel.hpp"
#include "core/types.hpp"

namespace gpdens {

// First two moments of the GP outputs at a test input.  The covariance is
// either spherical (var * I, deterministic input) or a full matrix (Gaussian
// input).
struct PredictiveMoments {
  Vector mean;
  double var = 0.0;
  Matrix cov;

  bool spherical() const { return cov.size() == 0; }
};

// D independent GPs with a shared ARD kernel, conditioned on latent points
// and observations.  Immutable after construction.
class GpConditioned {
 public:
  // latents is d x N, targets is D x N.  Factorizes the training covariance
  // once; everything else is derived from it.
  static GpConditioned condition(const Matrix& latents, const Matrix& targets,
                                 const Hyperparams& hyp);

  const Matrix& latents() const { return latents_; }
  const Matrix& targets() const { return targets_; }
  const Hyperparams& hyp() const { return hyp_; }
  const PsdFactor& kernel_factor() const { return factor_; }
  const Matrix& inverse() const { return inverse_; }
  // N x D, transpose of [alpha_1, ..., alpha_D]^T = Zbar K^-1.
  const Matrix& weights() const { return weights_; }

  int count() const { return static_cast<int>(latents_.cols()); }
  int data_dim() const { return static_cast<int>(targets_.rows()); }

  // Prediction for a point input; spherical covariance shared by all D
  // outputs, bounded by [noise_var, noise_var + signal_var].
  PredictiveMoments predict_det(const Vector& xstar) const;

  // Moment-matched prediction for x ~ N(xstar, diag(hyp.latent_var)).
  // Returns a full covariance, symmetrized and eigenvalue-floored at 1e-10.
  PredictiveMoments predict_gauss(const Vector& xstar,
                                  const Hyperparams& hyp) const;

  // Mean prediction with training pair i removed, via a rank-one downdate of
  // the stored inverse.  The covariance is deliberately not downdated.
  // Honors hyp().latent_var: a stochastic model uses the expected kernel
  // vector in place of the point one.
  Vector predict_mean_loo(const Vector& xstar, int skip_index) const;

 private:
  Matrix latents_;
  Matrix targets_;
  Hyperparams hyp_;
  PsdFactor factor_;
  Matrix inverse_;
  Matrix weights_;
};

// Eigenvalue floor used before a moment-matched covariance enters a density.
Matrix floor_covariance(const Matrix& cov, double floor);

}  // namespace gpdens

#endif  // GPDENS_CORE_GP_HPP_
