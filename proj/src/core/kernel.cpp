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

#include "core/kernel.hpp"

#include <Eigen/Cholesky>

#include <cmath>

namespace gpdens {

namespace {

void check_latents(const Matrix& latents, const Hyperparams& hyp) {
  hyp.validate();
  if (latents.rows() != hyp.latent_dim()) {
    throw std::invalid_argument("latent dimension does not match hyperparams");
  }
  if (latents.cols() == 0) {
    throw std::invalid_argument("no latent points");
  }
  if (!latents.allFinite()) {
    throw std::invalid_argument("latents contain non-finite values");
  }
}

// The analytic expectations only apply with a full-rank input covariance;
// any zero entry routes through the deterministic expressions instead.
bool use_stochastic(const Hyperparams& hyp) {
  return hyp.latent_var.size() > 0 && (hyp.latent_var.array() > 0.0).all();
}

}  // namespace

Vector PsdFactor::solve(const Vector& b) const {
  Vector y = lower.triangularView<Eigen::Lower>().solve(b);
  return lower.transpose().triangularView<Eigen::Upper>().solve(y);
}

Matrix PsdFactor::solve(const Matrix& b) const {
  Matrix y = lower.triangularView<Eigen::Lower>().solve(b);
  return lower.transpose().triangularView<Eigen::Upper>().solve(y);
}

Matrix PsdFactor::inverse() const {
  Matrix identity = Matrix::Identity(dim(), dim());
  Matrix q = solve(identity);
  return 0.5 * (q + q.transpose());
}

double ard_kernel(const Vector& xi, const Vector& xj, bool same_index,
                  const Hyperparams& hyp) {
  if (xi.size() != hyp.latent_dim() || xj.size() != hyp.latent_dim()) {
    throw std::invalid_argument("ard_kernel: dimension mismatch");
  }
  if (!xi.allFinite() || !xj.allFinite()) {
    throw std::invalid_argument("ard_kernel: non-finite coordinates");
  }
  double quad = 0.0;
  for (int a = 0; a < xi.size(); ++a) {
    const double d = xi[a] - xj[a];
    quad += d * d / hyp.lengthscales_sq[a];
  }
  double k = hyp.signal_var * std::exp(-0.5 * quad);
  if (same_index) k += hyp.noise_var;
  return k;
}

Matrix kernel_matrix(const Matrix& latents, const Hyperparams& hyp) {
  check_latents(latents, hyp);
  const int n = static_cast<int>(latents.cols());
  Matrix k(n, n);
  for (int i = 0; i < n; ++i) {
    k(i, i) = hyp.signal_var + hyp.noise_var;
    for (int j = i + 1; j < n; ++j) {
      const double v = ard_kernel(latents.col(i), latents.col(j), false, hyp);
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

Vector kernel_cross(const Matrix& latents, const Vector& xstar,
                    const Hyperparams& hyp) {
  check_latents(latents, hyp);
  const int n = static_cast<int>(latents.cols());
  Vector k(n);
  for (int i = 0; i < n; ++i) {
    k[i] = ard_kernel(latents.col(i), xstar, false, hyp);
  }
  return k;
}

PsdFactor factorize_psd(const Matrix& m) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw std::invalid_argument("factorize_psd: matrix must be square");
  }
  if (!m.allFinite()) {
    throw std::invalid_argument("factorize_psd: non-finite entries");
  }
  const int n = static_cast<int>(m.rows());
  const double mean_diag = m.diagonal().mean();
  constexpr int kMaxRetries = 6;

  double jitter = 0.0;
  for (int attempt = 0; attempt <= kMaxRetries; ++attempt) {
    Matrix work = m;
    if (attempt > 0) {
      jitter = (attempt == 1) ? 1e-10 * std::abs(mean_diag) : jitter * 10.0;
      if (jitter <= 0.0) jitter = 1e-300;
      work.diagonal().array() += jitter;
    }
    Eigen::LLT<Matrix> llt(work);
    if (llt.info() == Eigen::Success) {
      PsdFactor f;
      f.lower = llt.matrixL();
      f.jitter_used = (attempt > 0) ? jitter : 0.0;
      f.log_det = 0.0;
      for (int i = 0; i < n; ++i) f.log_det += 2.0 * std::log(f.lower(i, i));
      return f;
    }
  }
  throw NumericalError("factorize_psd: not positive definite after jitter");
}

Matrix downdate_inverse(const Matrix& full_inverse, int i) {
  const int n = static_cast<int>(full_inverse.rows());
  if (full_inverse.cols() != n) {
    throw std::invalid_argument("downdate_inverse: matrix must be square");
  }
  if (i < 0 || i >= n) {
    throw std::invalid_argument("downdate_inverse: index out of range");
  }
  const double q = full_inverse(i, i);
  if (!(q > 0.0)) {
    throw NumericalError("downdate_inverse: non-positive pivot");
  }
  Matrix out(n - 1, n - 1);
  for (int r = 0, rr = 0; r < n; ++r) {
    if (r == i) continue;
    for (int c = 0, cc = 0; c < n; ++c) {
      if (c == i) continue;
      out(rr, cc) = full_inverse(r, c) -
                    full_inverse(r, i) * full_inverse(i, c) / q;
      ++cc;
    }
    ++rr;
  }
  return out;
}

Vector expected_k(const Matrix& latents, const Vector& xstar,
                  const Hyperparams& hyp) {
  check_latents(latents, hyp);
  if (xstar.size() != hyp.latent_dim() || !xstar.allFinite()) {
    throw std::invalid_argument("expected_k: bad test point");
  }
  if (!use_stochastic(hyp)) return kernel_cross(latents, xstar, hyp);

  const int n = static_cast<int>(latents.cols());
  const int d = hyp.latent_dim();
  double log_scale = std::log(hyp.signal_var);
  for (int a = 0; a < d; ++a) {
    log_scale -= 0.5 * std::log1p(hyp.latent_var[a] / hyp.lengthscales_sq[a]);
  }
  Vector out(n);
  for (int i = 0; i < n; ++i) {
    double quad = 0.0;
    for (int a = 0; a < d; ++a) {
      const double diff = latents(a, i) - xstar[a];
      quad += diff * diff / (hyp.latent_var[a] + hyp.lengthscales_sq[a]);
    }
    out[i] = std::exp(log_scale - 0.5 * quad);
  }
  return out;
}

Matrix expected_kk(const Matrix& latents, const Vector& xstar,
                   const Hyperparams& hyp) {
  check_latents(latents, hyp);
  if (xstar.size() != hyp.latent_dim() || !xstar.allFinite()) {
    throw std::invalid_argument("expected_kk: bad test point");
  }
  const int n = static_cast<int>(latents.cols());
  if (!use_stochastic(hyp)) {
    Vector ks = kernel_cross(latents, xstar, hyp);
    return ks * ks.transpose();
  }

  const int d = hyp.latent_dim();
  // log k(x^i, xstar), the per-dimension growth coefficients
  // g_a = 2 v_a / (w_a (w_a + 2 v_a)) and the shared determinant term.
  double log_scale = 0.0;
  Vector g(d);
  for (int a = 0; a < d; ++a) {
    const double w = hyp.lengthscales_sq[a];
    const double v = hyp.latent_var[a];
    log_scale -= 0.5 * std::log1p(2.0 * v / w);
    g[a] = 2.0 * v / (w * (w + 2.0 * v));
  }
  const double log_sf = std::log(hyp.signal_var);

  Matrix y = latents.colwise() - xstar;  // d x n
  Vector log_k(n);
  Vector self(n);  // sum_a g_a y_a^2
  for (int i = 0; i < n; ++i) {
    double quad = 0.0, s = 0.0;
    for (int a = 0; a < d; ++a) {
      const double ya = y(a, i);
      quad += ya * ya / hyp.lengthscales_sq[a];
      s += g[a] * ya * ya;
    }
    log_k[i] = log_sf - 0.5 * quad;
    self[i] = s;
  }

  // E[k_i k_j] = k_i* k_j* |2VW^-1+I|^(-1/2) exp(m^T diag(g) m) with
  // m = (x^i + x^j)/2 - xstar; assembled in the log domain so that huge
  // ratio terms cannot overflow against tiny kernel products.
  Matrix out(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      double cross = 0.0;
      for (int a = 0; a < d; ++a) cross += g[a] * y(a, i) * y(a, j);
      const double log_e = log_k[i] + log_k[j] + log_scale +
                           0.25 * (self[i] + self[j] + 2.0 * cross);
      const double val = std::exp(log_e);
      out(i, j) = val;
      out(j, i) = val;
    }
  }
  return out;
}

}  // namespace gpdens
