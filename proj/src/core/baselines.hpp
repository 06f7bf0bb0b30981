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

#ifndef GPDENS_CORE_BASELINES_HPP_
#define GPDENS_CORE_BASELINES_HPP_

#include <cstdint>
#include <vector>

#include "core/types.hpp"

namespace gpdens {

// Penalized Gaussian mixture over k-means clusters.  Component k has weight
// counts[k]/N and covariance covs[k] + ridge*I.
struct GaussianMixtureModel {
  Vector counts;             // cluster sizes N_k
  Matrix means;              // D x K
  std::vector<Matrix> covs;  // D x D sample covariances, ridge not included
  double ridge = 0.0;

  // Derived evaluation state (factorized covariances).
  std::vector<Matrix> cov_lower;
  Vector cov_log_det;

  int cluster_count() const { return static_cast<int>(means.cols()); }
  void finalize();
};

// Diagonal-covariance kernel density estimate centered at every training
// point.
struct KdeModel {
  Matrix centers;  // D x N
  Vector widths;   // per-dimension variances
  bool degenerate = false;
};

// Manifold Parzen windows: per-center covariance ridge*I + V_i V_i^T with
// V_i holding the top eigendirections of the local weighted scatter, scaled
// by the square roots of the eigenvalues.
struct ManifoldParzenModel {
  Matrix centers;               // D x N
  std::vector<Matrix> factors;  // D x rank_i
  double ridge = 0.0;
  int neighbor_count = 0;
  int rank = 0;

  // Derived evaluation state: unit directions and eigenvalues per center.
  std::vector<Matrix> dirs;
  std::vector<Vector> lambdas;
  void finalize();
};

// K-means (k-means++ seeding) followed by per-cluster Gaussians and a global
// ridge maximizing the leave-one-out mixture density, with rank-one
// mean/covariance downdates inside the cluster of the held-out point.
GaussianMixtureModel fit_gm(const Matrix& z, int clusters, std::uint64_t seed);

// Widths maximize the leave-one-out density via safeguarded Newton steps on
// the log widths, starting from per-dimension Silverman variances.
KdeModel fit_kde(const Matrix& z);

// Local scatter over the r nearest neighbors (binary kernel, distance ties
// broken by index), truncated eigendecomposition, shared ridge tuned like
// fit_gm.
ManifoldParzenModel fit_mp(const Matrix& z, int rank, int neighbors);

double log_density(const GaussianMixtureModel& model, const Vector& z);
double log_density(const KdeModel& model, const Vector& z);
double log_density(const ManifoldParzenModel& model, const Vector& z);

}  // namespace gpdens

#endif  // GPDENS_CORE_BASELINES_HPP_
