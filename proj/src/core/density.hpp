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

#ifndef GPDENS_CORE_DENSITY_HPP_
#define GPDENS_CORE_DENSITY_HPP_

#include <vector>

#include "core/gp.hpp"
#include "core/types.hpp"

namespace gpdens {

// Latent coordinates, kernel hyperparameters and the (fixed) training data
// the GPs regress on.  Targets are always the training data themselves.
struct ModelState {
  Matrix latents;  // d x N
  Hyperparams hyp;
  Matrix targets;  // D x N

  int count() const { return static_cast<int>(latents.cols()); }
  int latent_dim() const { return static_cast<int>(latents.rows()); }
  int data_dim() const { return static_cast<int>(targets.rows()); }
  // ln lengthscales_sq (d), ln signal_var, ln noise_var, then ln latent_var
  // (d) when the latent distribution is stochastic.
  int free_hyper_count() const {
    return latent_dim() + 2 + (hyp.stochastic() ? latent_dim() : 0);
  }
  void validate() const;
};

// One Gaussian of the projected mixture.  Spherical components store var;
// full components store cov with its Cholesky factor ready for density
// evaluations.
struct MixtureComponent {
  Vector mean;
  bool spherical = true;
  double var = 0.0;
  Matrix cov;
  Matrix cov_lower;
  double cov_log_det = 0.0;
};

// Uniform-weight Gaussian mixture with one component per latent point.
struct ProjectedMixture {
  std::vector<MixtureComponent> components;
  int data_dim() const {
    return components.empty() ? 0
                              : static_cast<int>(components[0].mean.size());
  }
};

ProjectedMixture project_mixture(const ModelState& model);

double mixture_log_density(const ProjectedMixture& mix, const Vector& z);

// Loss value with gradients for the latent block and the log-domain
// hyperparameter block.  jitter_used reports the largest diagonal jitter any
// internal factorization needed.
struct ObjectiveValue {
  double value = 0.0;
  Matrix grad_latents;
  Vector grad_hyp;
  double jitter_used = 0.0;
};

// Negated sum of the D independent GP log marginal likelihoods.
ObjectiveValue objective_lz(const ModelState& model);

// The assembled derivative of objective_lz's value with respect to the
// training covariance matrix, before chaining into latents and
// hyperparameters.  Exposed for verification.
Matrix lz_kernel_gradient(const ModelState& model);

// Negated leave-one-out log density: every point is scored against the
// mixture of the remaining components, whose means drop that point's
// contribution to the regression weights.  Covariances are not downdated.
ObjectiveValue objective_loo(const ModelState& model);

// For each point k, the N-P component indices whose current leave-k-out
// densities at z^k are smallest (ties keep the smaller index).  Subsets are
// returned sorted ascending.
std::vector<std::vector<int>> select_lpo_subsets(const ModelState& model,
                                                 int leave_out);

// Leave-P-out objective with the subsets held fixed: no gradient flows
// through the selection.
ObjectiveValue objective_lpo_fixed(const ModelState& model,
                                   const std::vector<std::vector<int>>& subsets);

// Convenience wrapper: select subsets at the current state, then evaluate.
ObjectiveValue objective_lpo(const ModelState& model, int leave_out);

}  // namespace gpdens

#endif  // GPDENS_CORE_DENSITY_HPP_
