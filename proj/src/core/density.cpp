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

#include "core/density.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace gpdens {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kCovFloor = 1e-10;
constexpr double kInf = std::numeric_limits<double>::infinity();

// Everything the leave-out objectives need, derived from one factorization.
// With deterministic latents, s is the noise-free kernel matrix and svar the
// per-component predictive variance; with Gaussian latents, s holds the
// expected kernel vectors column by column and the per-component moment
// matched covariances are kept factorized.
struct Workspace {
  int n = 0;
  int dim = 0;  // data dimension D
  bool stoch = false;
  double kss = 0.0;
  double jitter = 0.0;
  Matrix q;      // n x n inverse of the training covariance
  Vector qdiag;
  Matrix s;      // n x n, symmetric
  Matrix a;      // n x D, q * targets^T
  Matrix m;      // D x n, a^T s: all component means
  Matrix g;      // n x n, q * s
  double log_det = 0.0;
  Vector svar;   // deterministic only
  std::vector<Matrix> sig_inv;  // stochastic only
  Vector sig_logdet;
  Vector trace_coef;
};

Workspace make_workspace(const ModelState& model) {
  Workspace ws;
  ws.n = model.count();
  ws.dim = model.data_dim();
  ws.stoch = model.hyp.stochastic();
  ws.kss = model.hyp.signal_var + model.hyp.noise_var;

  Matrix k = kernel_matrix(model.latents, model.hyp);
  PsdFactor factor = factorize_psd(k);
  ws.jitter = factor.jitter_used;
  ws.log_det = factor.log_det;
  ws.q = factor.inverse();
  ws.qdiag = ws.q.diagonal();
  ws.a = ws.q * model.targets.transpose();

  if (!ws.stoch) {
    ws.s = k;
    ws.s.diagonal().setConstant(model.hyp.signal_var);
  } else {
    ws.s.resize(ws.n, ws.n);
    for (int j = 0; j < ws.n; ++j) {
      ws.s.col(j) = expected_k(model.latents, model.latents.col(j), model.hyp);
    }
    ws.s = 0.5 * (ws.s + ws.s.transpose()).eval();
  }
  ws.m = ws.a.transpose() * ws.s;
  ws.g = ws.q * ws.s;

  if (!ws.stoch) {
    ws.svar.resize(ws.n);
    for (int j = 0; j < ws.n; ++j) {
      const double sj = ws.kss - ws.s.col(j).dot(ws.g.col(j));
      if (!(sj > 0.0) || !std::isfinite(sj)) {
        throw NumericalError("objective: non-positive predictive variance");
      }
      ws.svar[j] = sj;
    }
  } else {
    ws.sig_inv.resize(ws.n);
    ws.sig_logdet.resize(ws.n);
    ws.trace_coef.resize(ws.n);
    for (int j = 0; j < ws.n; ++j) {
      Matrix khat = expected_kk(model.latents, model.latents.col(j), model.hyp);
      const double cj = (ws.q.array() * khat.array()).sum();
      ws.trace_coef[j] = cj;
      Matrix sigma = ws.a.transpose() * khat * ws.a;
      sigma.noalias() -= ws.m.col(j) * ws.m.col(j).transpose();
      sigma.diagonal().array() += ws.kss - cj;
      sigma = 0.5 * (sigma + sigma.transpose()).eval();
      sigma = floor_covariance(sigma, kCovFloor);
      PsdFactor f = factorize_psd(sigma);
      ws.jitter = std::max(ws.jitter, f.jitter_used);
      ws.sig_inv[j] = f.inverse();
      ws.sig_logdet[j] = f.log_det;
    }
  }
  return ws;
}

// log N(z^i | mu^{-i}_{x^j}, Sigma_{x^j}) for every ordered pair.  The
// diagonal holds each point's self score, used only for subset selection.
Matrix pair_log_densities(const Workspace& ws, const Matrix& z) {
  const int n = ws.n;
  Matrix l(n, n);
  Vector delta(ws.dim);
  for (int i = 0; i < n; ++i) {
    const double qi = ws.qdiag[i];
    for (int j = 0; j < n; ++j) {
      const double beta = ws.g(i, j) / qi;
      delta = z.col(i) - ws.m.col(j) + beta * ws.a.row(i).transpose();
      if (!ws.stoch) {
        const double sj = ws.svar[j];
        l(i, j) = -0.5 * ws.dim * (kLog2Pi + std::log(sj)) -
                  delta.squaredNorm() / (2.0 * sj);
      } else {
        const double quad = delta.dot(ws.sig_inv[j] * delta);
        l(i, j) = -0.5 * (ws.dim * kLog2Pi + ws.sig_logdet[j] + quad);
      }
    }
  }
  return l;
}

struct Adjoints {
  Matrix mbar;      // D x n
  Matrix gbar;      // n x n
  Matrix abar;      // n x D
  Matrix qbar;      // n x n
  Matrix sbar;      // n x n
  Vector qdiagbar;  // folded into qbar at the end
  double kssbar = 0.0;
  Vector svarbar;              // deterministic
  std::vector<Matrix> tj;      // stochastic: sum_i omega * delta delta^T
  Vector omega_colsum;

  explicit Adjoints(const Workspace& ws) {
    mbar = Matrix::Zero(ws.dim, ws.n);
    gbar = Matrix::Zero(ws.n, ws.n);
    abar = Matrix::Zero(ws.n, ws.dim);
    qbar = Matrix::Zero(ws.n, ws.n);
    sbar = Matrix::Zero(ws.n, ws.n);
    qdiagbar = Vector::Zero(ws.n);
    if (ws.stoch) {
      tj.assign(ws.n, Matrix::Zero(ws.dim, ws.dim));
      omega_colsum = Vector::Zero(ws.n);
    } else {
      svarbar = Vector::Zero(ws.n);
    }
  }
};

// Pulls the adjoint of one pair log density back onto the workspace
// quantities.  omega = d(value)/d(l_ij).
void accumulate_pair(const Workspace& ws, const Matrix& z, int i, int j,
                     double omega, Adjoints& acc) {
  const double qi = ws.qdiag[i];
  const double beta = ws.g(i, j) / qi;
  Vector delta = z.col(i) - ws.m.col(j) + beta * ws.a.row(i).transpose();

  Vector mubar;
  if (!ws.stoch) {
    const double sj = ws.svar[j];
    mubar = (omega / sj) * delta;
    acc.svarbar[j] += omega * (-ws.dim / (2.0 * sj) +
                               delta.squaredNorm() / (2.0 * sj * sj));
  } else {
    mubar = omega * (ws.sig_inv[j] * delta);
    acc.tj[j].noalias() += omega * delta * delta.transpose();
    acc.omega_colsum[j] += omega;
  }
  acc.mbar.col(j) += mubar;
  const double betabar = -mubar.dot(ws.a.row(i));
  acc.abar.row(i) += (-beta) * mubar.transpose();
  acc.gbar(i, j) += betabar / qi;
  acc.qdiagbar[i] += -betabar * ws.g(i, j) / (qi * qi);
}

struct HyperGrads {
  Matrix gx;       // d x n
  Vector g_lnw;    // d
  double g_lnsf = 0.0;
  double g_lnsn = 0.0;
  Vector g_lnv;    // d, stochastic only

  explicit HyperGrads(const ModelState& model) {
    gx = Matrix::Zero(model.latent_dim(), model.count());
    g_lnw = Vector::Zero(model.latent_dim());
    if (model.hyp.stochastic()) g_lnv = Vector::Zero(model.latent_dim());
  }
};

// Chains an entrywise adjoint of the noise-free squared-exponential matrix
// into latents and log hyperparameters.
void chain_se(const ModelState& model, const Matrix& se, const Matrix& eb,
              HyperGrads& out) {
  const int n = model.count();
  const int d = model.latent_dim();
  const Matrix& x = model.latents;
  const Vector& w = model.hyp.lengthscales_sq;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double c = eb(i, j) * se(i, j);
      if (c == 0.0) continue;
      out.g_lnsf += c;
      for (int a = 0; a < d; ++a) {
        const double diff = x(a, i) - x(a, j);
        out.g_lnw[a] += c * diff * diff / (2.0 * w[a]);
        const double t = -c * diff / w[a];
        out.gx(a, i) += t;
        out.gx(a, j) -= t;
      }
    }
  }
}

// Same for the expected-kernel matrix (entry ij is the expectation of
// k(x^i, x) over x ~ N(x^j, V)).
void chain_ktilde(const ModelState& model, const Matrix& kt, const Matrix& eb,
                  HyperGrads& out) {
  const int n = model.count();
  const int d = model.latent_dim();
  const Matrix& x = model.latents;
  const Vector& w = model.hyp.lengthscales_sq;
  const Vector& v = model.hyp.latent_var;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double c = eb(i, j) * kt(i, j);
      if (c == 0.0) continue;
      out.g_lnsf += c;
      for (int a = 0; a < d; ++a) {
        const double diff = x(a, i) - x(a, j);
        const double vw = v[a] + w[a];
        out.g_lnw[a] += c * (0.5 * v[a] / vw + 0.5 * diff * diff * w[a] / (vw * vw));
        out.g_lnv[a] += c * (-0.5 * v[a] / vw + 0.5 * diff * diff * v[a] / (vw * vw));
        const double t = -c * diff / vw;
        out.gx(a, i) += t;
        out.gx(a, j) -= t;
      }
    }
  }
}

// Chains an entrywise adjoint of E[k k^T] around center latent x^c.
void chain_khat(const ModelState& model, int center, const Matrix& khat,
                const Matrix& hb, HyperGrads& out) {
  const int n = model.count();
  const int d = model.latent_dim();
  const Matrix& x = model.latents;
  const Vector& w = model.hyp.lengthscales_sq;
  const Vector& v = model.hyp.latent_var;
  for (int i = 0; i < n; ++i) {
    for (int l = 0; l < n; ++l) {
      const double c = hb(i, l) * khat(i, l);
      if (c == 0.0) continue;
      out.g_lnsf += 2.0 * c;
      for (int a = 0; a < d; ++a) {
        const double di = x(a, i) - x(a, center);
        const double dl = x(a, l) - x(a, center);
        const double mm = 0.5 * (di + dl);
        const double wa = w[a], va = v[a];
        const double w2v = wa + 2.0 * va;
        const double growth = 2.0 * va / (wa * w2v);
        out.g_lnw[a] +=
            c * ((di * di + dl * dl) / (2.0 * wa) + va / w2v -
                 mm * mm * 4.0 * va * (wa + va) / (wa * w2v * w2v));
        out.g_lnv[a] += c * (-va / w2v + mm * mm * 2.0 * va / (w2v * w2v));
        out.gx(a, i) += c * (-di / wa + mm * growth);
        out.gx(a, l) += c * (-dl / wa + mm * growth);
        out.gx(a, center) += c * (di / wa + dl / wa - 2.0 * mm * growth);
      }
    }
  }
}

ObjectiveValue pack_result(const ModelState& model, double value,
                           const HyperGrads& hg, double jitter) {
  ObjectiveValue out;
  out.value = value;
  out.grad_latents = hg.gx;
  out.grad_hyp.resize(model.free_hyper_count());
  const int d = model.latent_dim();
  out.grad_hyp.head(d) = hg.g_lnw;
  out.grad_hyp[d] = hg.g_lnsf;
  out.grad_hyp[d + 1] = hg.g_lnsn;
  if (model.hyp.stochastic()) out.grad_hyp.tail(d) = hg.g_lnv;
  out.jitter_used = jitter;
  if (!out.grad_latents.allFinite() || !out.grad_hyp.allFinite()) {
    throw NumericalError("objective: non-finite gradient");
  }
  return out;
}

ObjectiveValue infinite_result(const ModelState& model, double jitter) {
  ObjectiveValue out;
  out.value = kInf;
  out.grad_latents = Matrix::Zero(model.latent_dim(), model.count());
  out.grad_hyp = Vector::Zero(model.free_hyper_count());
  out.jitter_used = jitter;
  return out;
}

// Shared tail of the leave-out objectives: propagate the accumulated pair
// adjoints through the workspace algebra down to latents and log
// hyperparameters.
ObjectiveValue finish_leave_out(const ModelState& model, const Workspace& ws,
                                Adjoints& acc, double value) {
  HyperGrads hg(model);

  if (!ws.stoch) {
    acc.kssbar += acc.svarbar.sum();
    acc.sbar.noalias() -= 2.0 * ws.g * acc.svarbar.asDiagonal();
    acc.qbar.noalias() -= ws.s * acc.svarbar.asDiagonal() * ws.s.transpose();
  } else {
    for (int j = 0; j < ws.n; ++j) {
      Matrix sigbar = 0.5 * (ws.sig_inv[j] * acc.tj[j] * ws.sig_inv[j] -
                             acc.omega_colsum[j] * ws.sig_inv[j]);
      sigbar = 0.5 * (sigbar + sigbar.transpose()).eval();
      const double tr = sigbar.trace();
      acc.kssbar += tr;
      const double cbar = -tr;
      Matrix khat = expected_kk(model.latents, model.latents.col(j), model.hyp);
      const Vector& ktil = ws.s.col(j);
      Matrix pa = khat * ws.a;
      pa.noalias() -= ktil * ws.m.col(j).transpose();
      acc.abar.noalias() += 2.0 * pa * sigbar;
      Matrix pbar = ws.a * sigbar * ws.a.transpose();
      Matrix khatbar = pbar + cbar * ws.q;
      chain_khat(model, j, khat, khatbar, hg);
      acc.sbar.col(j).noalias() -= 2.0 * (pbar * ktil);
      acc.qbar.noalias() += cbar * khat;
    }
  }

  // m = a^T s, g = q s, a = q targets^T, then q = K^{-1}.
  acc.abar.noalias() += ws.s * acc.mbar.transpose();
  acc.sbar.noalias() += ws.a * acc.mbar;
  acc.qbar.noalias() += acc.gbar * ws.s;
  acc.sbar.noalias() += ws.q * acc.gbar;
  acc.qbar.noalias() += acc.abar * model.targets;
  acc.qbar.diagonal() += acc.qdiagbar;
  Matrix kbar = -ws.q * acc.qbar * ws.q;

  hg.g_lnsn += model.hyp.noise_var * kbar.diagonal().sum();
  hg.g_lnsf += model.hyp.signal_var * acc.kssbar;
  hg.g_lnsn += model.hyp.noise_var * acc.kssbar;

  if (!ws.stoch) {
    Matrix eb = kbar + acc.sbar;
    chain_se(model, ws.s, eb, hg);
  } else {
    Matrix se = kernel_matrix(model.latents, model.hyp);
    se.diagonal().setConstant(model.hyp.signal_var);
    chain_se(model, se, kbar, hg);
    chain_ktilde(model, ws.s, acc.sbar, hg);
  }
  return pack_result(model, value, hg, ws.jitter);
}

double logsumexp_row(const Matrix& l, int i, const std::vector<int>& idx) {
  double mx = -kInf;
  for (int j : idx) mx = std::max(mx, l(i, j));
  if (!std::isfinite(mx)) return -kInf;
  double s = 0.0;
  for (int j : idx) s += std::exp(l(i, j) - mx);
  return mx + std::log(s);
}

}  // namespace

void ModelState::validate() const {
  hyp.validate();
  if (latents.rows() != hyp.latent_dim()) {
    throw std::invalid_argument("model: latent dimension mismatch");
  }
  if (targets.cols() != latents.cols()) {
    throw std::invalid_argument("model: target/latent count mismatch");
  }
  if (latents.cols() == 0) {
    throw std::invalid_argument("model: empty");
  }
  if (!latents.allFinite() || !targets.allFinite()) {
    throw std::invalid_argument("model: non-finite entries");
  }
}

ProjectedMixture project_mixture(const ModelState& model) {
  model.validate();
  GpConditioned gp =
      GpConditioned::condition(model.latents, model.targets, model.hyp);
  const bool stoch = model.hyp.stochastic();
  ProjectedMixture mix;
  mix.components.reserve(model.count());
  for (int j = 0; j < model.count(); ++j) {
    MixtureComponent comp;
    if (!stoch) {
      PredictiveMoments pm = gp.predict_det(model.latents.col(j));
      comp.mean = std::move(pm.mean);
      comp.spherical = true;
      comp.var = pm.var;
    } else {
      PredictiveMoments pm = gp.predict_gauss(model.latents.col(j), model.hyp);
      comp.mean = std::move(pm.mean);
      comp.spherical = false;
      comp.cov = std::move(pm.cov);
      PsdFactor f = factorize_psd(comp.cov);
      comp.cov_lower = std::move(f.lower);
      comp.cov_log_det = f.log_det;
    }
    mix.components.push_back(std::move(comp));
  }
  return mix;
}

double mixture_log_density(const ProjectedMixture& mix, const Vector& z) {
  const int n = static_cast<int>(mix.components.size());
  if (n == 0) throw std::invalid_argument("mixture_log_density: empty mixture");
  const int dim = mix.data_dim();
  if (z.size() != dim) {
    throw std::invalid_argument("mixture_log_density: dimension mismatch");
  }
  Vector terms(n);
  for (int j = 0; j < n; ++j) {
    const MixtureComponent& comp = mix.components[j];
    Vector delta = z - comp.mean;
    if (comp.spherical) {
      if (!(comp.var > 0.0)) {
        throw NumericalError("mixture_log_density: non-positive variance");
      }
      terms[j] = -0.5 * dim * (kLog2Pi + std::log(comp.var)) -
                 delta.squaredNorm() / (2.0 * comp.var);
    } else {
      Vector t = comp.cov_lower.triangularView<Eigen::Lower>().solve(delta);
      terms[j] =
          -0.5 * (dim * kLog2Pi + comp.cov_log_det + t.squaredNorm());
    }
  }
  const double mx = terms.maxCoeff();
  if (!std::isfinite(mx)) return -kInf;
  double s = 0.0;
  for (int j = 0; j < n; ++j) s += std::exp(terms[j] - mx);
  return mx + std::log(s) - std::log(static_cast<double>(n));
}

Matrix lz_kernel_gradient(const ModelState& model) {
  model.validate();
  Matrix k = kernel_matrix(model.latents, model.hyp);
  PsdFactor factor = factorize_psd(k);
  Matrix q = factor.inverse();
  Matrix a = q * model.targets.transpose();
  const double dim = static_cast<double>(model.data_dim());
  return 0.5 * dim * q - 0.5 * a * a.transpose();
}

ObjectiveValue objective_lz(const ModelState& model) {
  model.validate();
  Matrix k = kernel_matrix(model.latents, model.hyp);
  PsdFactor factor = factorize_psd(k);
  Matrix q = factor.inverse();
  Matrix a = q * model.targets.transpose();
  const int n = model.count();
  const double dim = static_cast<double>(model.data_dim());

  const double quad = (a.array() * model.targets.transpose().array()).sum();
  const double value =
      0.5 * (dim * n * kLog2Pi + dim * factor.log_det + quad);

  Matrix kbar = 0.5 * dim * q - 0.5 * a * a.transpose();
  HyperGrads hg(model);
  Matrix se = k;
  se.diagonal().setConstant(model.hyp.signal_var);
  chain_se(model, se, kbar, hg);
  hg.g_lnsn = model.hyp.noise_var * kbar.diagonal().sum();
  return pack_result(model, value, hg, factor.jitter_used);
}

ObjectiveValue objective_loo(const ModelState& model) {
  model.validate();
  const int n = model.count();
  if (n < 2) throw std::invalid_argument("objective_loo: need N >= 2");

  Workspace ws = make_workspace(model);
  Matrix l = pair_log_densities(ws, model.targets);

  std::vector<std::vector<int>> others(n);
  for (int i = 0; i < n; ++i) {
    others[i].reserve(n - 1);
    for (int j = 0; j < n; ++j) {
      if (j != i) others[i].push_back(j);
    }
  }

  double value = 0.0;
  const double log_m = std::log(static_cast<double>(n - 1));
  Vector lse(n);
  for (int i = 0; i < n; ++i) {
    lse[i] = logsumexp_row(l, i, others[i]);
    if (lse[i] == -kInf) return infinite_result(model, ws.jitter);
    value -= lse[i] - log_m;
  }

  Adjoints acc(ws);
  for (int i = 0; i < n; ++i) {
    for (int j : others[i]) {
      const double omega = -std::exp(l(i, j) - lse[i]);
      if (omega != 0.0) accumulate_pair(ws, model.targets, i, j, omega, acc);
    }
  }
  return finish_leave_out(model, ws, acc, value);
}

std::vector<std::vector<int>> select_lpo_subsets(const ModelState& model,
                                                 int leave_out) {
  model.validate();
  const int n = model.count();
  if (leave_out < 1 || leave_out > n - 1) {
    throw std::invalid_argument("select_lpo_subsets: need 1 <= P <= N-1");
  }
  Workspace ws = make_workspace(model);
  Matrix l = pair_log_densities(ws, model.targets);

  std::vector<std::vector<int>> subsets(n);
  std::vector<int> order(n);
  for (int k = 0; k < n; ++k) {
    for (int j = 0; j < n; ++j) order[j] = j;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (l(k, a) != l(k, b)) return l(k, a) < l(k, b);
      return a < b;
    });
    subsets[k].assign(order.begin(), order.begin() + (n - leave_out));
    std::sort(subsets[k].begin(), subsets[k].end());
  }
  return subsets;
}

ObjectiveValue objective_lpo_fixed(
    const ModelState& model, const std::vector<std::vector<int>>& subsets) {
  model.validate();
  const int n = model.count();
  if (static_cast<int>(subsets.size()) != n) {
    throw std::invalid_argument("objective_lpo_fixed: need one subset per point");
  }
  if (subsets.empty() || subsets[0].empty()) {
    throw std::invalid_argument("objective_lpo_fixed: empty subsets");
  }
  const int keep = static_cast<int>(subsets[0].size());
  if (keep < 1 || keep > n - 1) {
    throw std::invalid_argument("objective_lpo_fixed: invalid subset size");
  }
  std::vector<char> member(n);
  for (const auto& sub : subsets) {
    if (static_cast<int>(sub.size()) != keep) {
      throw std::invalid_argument("objective_lpo_fixed: ragged subsets");
    }
    for (int j : sub) {
      if (j < 0 || j >= n) {
        throw std::invalid_argument("objective_lpo_fixed: index out of range");
      }
    }
  }

  Workspace ws = make_workspace(model);
  Matrix l = pair_log_densities(ws, model.targets);

  double value = 0.0;
  const double log_m = std::log(static_cast<double>(keep));
  Matrix omega = Matrix::Zero(n, n);
  for (int k = 0; k < n; ++k) {
    std::fill(member.begin(), member.end(), 0);
    for (int j : subsets[k]) member[j] = 1;
    for (int i = 0; i < n; ++i) {
      if (member[i]) continue;
      const double lse = logsumexp_row(l, i, subsets[k]);
      if (lse == -kInf) return infinite_result(model, ws.jitter);
      value -= lse - log_m;
      for (int j : subsets[k]) {
        omega(i, j) -= std::exp(l(i, j) - lse);
      }
    }
  }

  Adjoints acc(ws);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (omega(i, j) != 0.0) {
        accumulate_pair(ws, model.targets, i, j, omega(i, j), acc);
      }
    }
  }
  return finish_leave_out(model, ws, acc, value);
}

ObjectiveValue objective_lpo(const ModelState& model, int leave_out) {
  return objective_lpo_fixed(model, select_lpo_subsets(model, leave_out));
}

}  // namespace gpdens
