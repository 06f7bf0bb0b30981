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

#ifndef GPDENS_CORE_TRAIN_HPP_
#define GPDENS_CORE_TRAIN_HPP_

#include <cstdint>
#include <functional>
#include <vector>

#include "core/density.hpp"
#include "core/types.hpp"

namespace gpdens {

enum class ObjectiveKind { kLz, kLoo, kLpo };

struct TrainConfig {
  int latent_dim = 2;
  ObjectiveKind objective = ObjectiveKind::kLpo;
  int leave_out = 1;       // P, used by the LPO objective
  bool stochastic = false; // optimize a shared latent variance as well
  int total_steps = 600;
  int block_period = 10;   // CG steps per block before switching X <-> theta
  std::uint64_t seed = 0;
  double convergence_tol = 1e-9;

  void validate() const;
};

struct TrainTrace {
  std::vector<double> values;        // accepted line-search steps
  std::vector<double> step_seconds;  // matching wall times
  int jitter_events = 0;
  bool line_search_failed = false;
  ModelState final_state;
};

// Top-d principal component scores of the centered data, each latent
// dimension rescaled to unit variance.  Sign convention: the
// largest-magnitude loading of every component is positive.  The seed only
// matters for rank-deficient data, where trailing dimensions are filled with
// small random coordinates instead of numeric noise.
Matrix init_latents(const Matrix& z, int d, std::uint64_t seed);

// Data-driven starting hyperparameters: per-dimension squared median
// pairwise latent distance, mean data variance, 1% relative noise floor and
// (optionally) a latent variance of 0.1.
Hyperparams init_hyperparams(const Matrix& z, const Matrix& x,
                             bool stochastic);

struct CgOptions {
  int max_steps = 100;
  double tol = 1e-9;
  double c1 = 1e-4;
  double c2 = 0.1;
};

struct CgTrace {
  std::vector<double> values;        // values[0] is the starting value
  std::vector<double> step_seconds;  // one entry per accepted step
  bool line_search_failed = false;
};

// Polak-Ribiere nonlinear conjugate gradients with a strong-Wolfe line
// search.  The callable returns the value and fills the gradient.  Restarts
// to steepest descent every x0.size() iterations or whenever the computed
// direction is not a descent direction.
Vector cg_minimize(
    const std::function<double(const Vector&, Vector*)>& objective,
    const Vector& x0, const CgOptions& options, CgTrace* trace);

// Full training run: initialization, then alternating CG blocks on the
// latent block and the hyperparameter block until the step budget is
// consumed.  LPO subsets are refreshed at every block boundary.
TrainTrace train(const Matrix& z, const TrainConfig& config);

}  // namespace gpdens

#endif  // GPDENS_CORE_TRAIN_HPP_
