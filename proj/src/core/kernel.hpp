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

#ifndef GPDENS_CORE_KERNEL_HPP_
#define GPDENS_CORE_KERNEL_HPP_

#include "core/types.hpp"

namespace gpdens {

// Cholesky factor of a symmetric positive definite matrix, together with the
// jitter that had to be added to the diagonal to make the factorization
// succeed.  log_det refers to the factorized (jittered) matrix.
struct PsdFactor {
  Matrix lower;
  double log_det = 0.0;
  double jitter_used = 0.0;

  int dim() const { return static_cast<int>(lower.rows()); }
  Vector solve(const Vector& b) const;
  Matrix solve(const Matrix& b) const;
  // Explicit symmetric inverse, 0.5*(Q + Q^T) of the triangular solves.
  Matrix inverse() const;
};

// Squared-exponential ARD covariance between two latent points.  Noise is
// added only when both arguments refer to the same training index.
double ard_kernel(const Vector& xi, const Vector& xj, bool same_index,
                  const Hyperparams& hyp);

// N x N training covariance, noise on the diagonal.  Exactly symmetric.
Matrix kernel_matrix(const Matrix& latents, const Hyperparams& hyp);

// Noise-free cross covariance vector [k(x^i, xstar)]_i.
Vector kernel_cross(const Matrix& latents, const Vector& xstar,
                    const Hyperparams& hyp);

// Cholesky factorization with escalating diagonal jitter.  Starts without
// jitter; on failure adds 1e-10 * mean(diag), escalating by a factor of 10,
// at most 6 jittered retries before giving up with NumericalError.
PsdFactor factorize_psd(const Matrix& m);

// Inverse of the submatrix with row/column i removed, computed from the
// inverse of the full matrix by a rank-one correction.
Matrix downdate_inverse(const Matrix& full_inverse, int i);

// E[k(x^i, x)] over x ~ N(xstar, diag(latent_var)), for all i.
Vector expected_k(const Matrix& latents, const Vector& xstar,
                  const Hyperparams& hyp);

// E[k(x^i, x) k(x^j, x)] over x ~ N(xstar, diag(latent_var)).  Symmetric PSD.
Matrix expected_kk(const Matrix& latents, const Vector& xstar,
                   const Hyperparams& hyp);

}  // namespace gpdens

#endif  // GPDENS_CORE_KERNEL_HPP_
