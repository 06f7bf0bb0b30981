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

#include "core/baselines.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <utility>

#include "core/kernel.hpp"

namespace gpdens {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kInf = std::numeric_limits<double>::infinity();

double logsumexp(const Vector& v) {
  const double mx = v.maxCoeff();
  if (!std::isfinite(mx)) return -kInf;
  double s = 0.0;
  for (int i = 0; i < v.size(); ++i) s += std::exp(v[i] - mx);
  return mx + std::log(s);
}

// Gradient ascent with backtracking on a scalar function of the log ridge.
// The callable returns {value, d(value)/d(theta)}.
double ascend_log_ridge(
    const std::function<std::pair<double, double>(double)>& fg, double theta0,
    int max_steps) {
  double theta = theta0;
  std::pair<double, double> cur = fg(theta);
  if (!std::isfinite(cur.first)) return theta;
  double eta = 0.1;
  for (int step = 0; step < max_steps; ++step) {
    const double g = cur.second;
    if (std::abs(g) < 1e-12 * std::max(1.0, std::abs(cur.first))) break;
    bool accepted = false;
    double trial_eta = eta;
    for (int bt = 0; bt < 50; ++bt) {
      const double theta_new = theta + trial_eta * g;
      std::pair<double, double> next = fg(theta_new);
      if (std::isfinite(next.first) && next.first > cur.first) {
        const double gain = next.first - cur.first;
        theta = theta_new;
        cur = next;
        eta = trial_eta * 1.5;
        accepted = true;
        if (gain < 1e-12 * (1.0 + std::abs(cur.first))) return theta;
        break;
      }
      trial_eta *= 0.5;
    }
    if (!accepted) break;
  }
  return theta;
}

std::vector<int> kmeans(const Matrix& z, int k, std::uint64_t seed,
                        Matrix* centers_out) {
  const int n = static_cast<int>(z.cols());
  std::mt19937_64 rng(seed ^ 0x5bd1e995u);
  Matrix centers(z.rows(), k);

  // k-means++ seeding.
  std::uniform_int_distribution<int> uniform_index(0, n - 1);
  centers.col(0) = z.col(uniform_index(rng));
  Vector d2 = Vector::Constant(n, kInf);
  for (int c = 1; c < k; ++c) {
    for (int j = 0; j < n; ++j) {
      d2[j] = std::min(d2[j], (z.col(j) - centers.col(c - 1)).squaredNorm());
    }
    const double total = d2.sum();
    int pick = 0;
    if (total > 0.0 && std::isfinite(total)) {
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      double target = unit(rng) * total;
      double acc = 0.0;
      for (int j = 0; j < n; ++j) {
        acc += d2[j];
        if (acc >= target) {
          pick = j;
          break;
        }
      }
    } else {
      pick = uniform_index(rng);
    }
    centers.col(c) = z.col(pick);
  }

  std::vector<int> assign(n, 0), prev(n, -1);
  for (int iter = 0; iter < 100; ++iter) {
    for (int j = 0; j < n; ++j) {
      double best = kInf;
      int arg = 0;
      for (int c = 0; c < k; ++c) {
        const double dd = (z.col(j) - centers.col(c)).squaredNorm();
        if (dd < best) {
          best = dd;
          arg = c;
        }
      }
      assign[j] = arg;
    }
    // Re-seed empty clusters with the point farthest from its center.
    for (int c = 0; c < k; ++c) {
      if (std::count(assign.begin(), assign.end(), c) > 0) continue;
      int far = 0;
      double far_d = -1.0;
      for (int j = 0; j < n; ++j) {
        const double dd = (z.col(j) - centers.col(assign[j])).squaredNorm();
        if (dd > far_d) {
          far_d = dd;
          far = j;
        }
      }
      centers.col(c) = z.col(far);
      assign[far] = c;
    }
    if (assign == prev) break;
    prev = assign;
    for (int c = 0; c < k; ++c) {
      Vector mean = Vector::Zero(z.rows());
      int cnt = 0;
      for (int j = 0; j < n; ++j) {
        if (assign[j] == c) {
          mean += z.col(j);
          ++cnt;
        }
      }
      if (cnt > 0) centers.col(c) = mean / cnt;
    }
  }
  if (centers_out) *centers_out = centers;
  return assign;
}

double mean_data_variance(const Matrix& z) {
  const int n = static_cast<int>(z.cols());
  double var = 0.0;
  for (int r = 0; r < z.rows(); ++r) {
    const double mu = z.row(r).mean();
    var += (z.row(r).array() - mu).square().sum() / n;
  }
  return var / z.rows();
}

}  // namespace

void GaussianMixtureModel::finalize() {
  const int k = cluster_count();
  const int dim = static_cast<int>(means.rows());
  cov_lower.resize(k);
  cov_log_det.resize(k);
  for (int c = 0; c < k; ++c) {
    Matrix cov = covs[c];
    cov.diagonal().array() += ridge;
    PsdFactor f = factorize_psd(cov);
    cov_lower[c] = std::move(f.lower);
    cov_log_det[c] = f.log_det;
  }
  (void)dim;
}

GaussianMixtureModel fit_gm(const Matrix& z, int clusters,
                            std::uint64_t seed) {
  const int n = static_cast<int>(z.cols());
  const int dim = static_cast<int>(z.rows());
  if (n < 1) throw std::invalid_argument("fit_gm: empty data");
  if (clusters < 1 || clusters > n) {
    throw std::invalid_argument("fit_gm: need 1 <= K <= N");
  }

  Matrix centers;
  std::vector<int> assign = kmeans(z, clusters, seed, &centers);

  GaussianMixtureModel model;
  model.counts = Vector::Zero(clusters);
  model.means = Matrix::Zero(dim, clusters);
  model.covs.assign(clusters, Matrix::Zero(dim, dim));
  for (int j = 0; j < n; ++j) {
    model.counts[assign[j]] += 1.0;
    model.means.col(assign[j]) += z.col(j);
  }
  for (int c = 0; c < clusters; ++c) model.means.col(c) /= model.counts[c];
  for (int j = 0; j < n; ++j) {
    Vector delta = z.col(j) - model.means.col(assign[j]);
    model.covs[assign[j]].noalias() += delta * delta.transpose();
  }
  for (int c = 0; c < clusters; ++c) model.covs[c] /= model.counts[c];

  // Leave-one-out cache: eigenbasis per cluster for the shared terms, and a
  // per-point eigenbasis of the downdated covariance of its own cluster.
  std::vector<Vector> base_lam(clusters);
  std::vector<Matrix> base_t2(clusters);  // D x N squared eigen-coordinates
  for (int c = 0; c < clusters; ++c) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(model.covs[c]);
    base_lam[c] = es.eigenvalues().cwiseMax(0.0);
    base_t2[c].resize(dim, n);
    for (int j = 0; j < n; ++j) {
      base_t2[c].col(j) =
          (es.eigenvectors().transpose() * (z.col(j) - model.means.col(c)))
              .cwiseAbs2();
    }
  }
  Matrix down_lam(dim, n), down_t2(dim, n);
  for (int j = 0; j < n; ++j) {
    const int c = assign[j];
    const double nk = model.counts[c];
    if (nk <= 1.0) {
      down_lam.col(j).setZero();
      down_t2.col(j).setZero();
      continue;
    }
    Vector m_down = (nk * model.means.col(c) - z.col(j)) / (nk - 1.0);
    Matrix second = nk * (model.covs[c] +
                          model.means.col(c) * model.means.col(c).transpose());
    second.noalias() -= z.col(j) * z.col(j).transpose();
    Matrix c_down = second / (nk - 1.0) - m_down * m_down.transpose();
    c_down = 0.5 * (c_down + c_down.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Matrix> es(c_down);
    down_lam.col(j) = es.eigenvalues().cwiseMax(0.0);
    down_t2.col(j) =
        (es.eigenvectors().transpose() * (z.col(j) - m_down)).cwiseAbs2();
  }

  Vector log_weight(clusters);
  for (int c = 0; c < clusters; ++c) {
    log_weight[c] = std::log(model.counts[c] / n);
  }

  auto loo = [&](double theta) -> std::pair<double, double> {
    const double w = std::exp(theta);
    if (!(w > 0.0) || !std::isfinite(w)) return {-kInf, 0.0};
    double value = 0.0, dw = 0.0;
    Vector terms(clusters), derivs(clusters);
    for (int j = 0; j < n; ++j) {
      for (int c = 0; c < clusters; ++c) {
        const bool own = (assign[j] == c);
        double ld = 0.0, dd = 0.0;
        for (int a = 0; a < dim; ++a) {
          const double lam = own ? down_lam(a, j) : base_lam[c][a];
          const double t2 = own ? down_t2(a, j) : base_t2[c](a, j);
          const double s = lam + w;
          ld += std::log(2.0 * M_PI * s) + t2 / s;
          dd += t2 / (s * s) - 1.0 / s;
        }
        terms[c] = log_weight[c] - 0.5 * ld;
        derivs[c] = 0.5 * dd;
      }
      const double lse = logsumexp(terms);
      if (!std::isfinite(lse)) return {-kInf, 0.0};
      value += lse;
      for (int c = 0; c < clusters; ++c) {
        dw += std::exp(terms[c] - lse) * derivs[c];
      }
    }
    return {value, dw * w};
  };

  double trace_mean = 0.0;
  for (int c = 0; c < clusters; ++c) trace_mean += model.covs[c].trace() / dim;
  trace_mean /= clusters;
  double w0 = 0.01 * trace_mean;
  if (!(w0 > 0.0)) w0 = 0.01 * mean_data_variance(z);
  if (!(w0 > 0.0)) w0 = 1e-6;

  model.ridge = std::exp(ascend_log_ridge(loo, std::log(w0), 200));
  model.finalize();
  return model;
}

KdeModel fit_kde(const Matrix& z) {
  const int n = static_cast<int>(z.cols());
  const int dim = static_cast<int>(z.rows());
  if (n < 2) throw std::invalid_argument("fit_kde: need at least 2 points");

  Vector var(dim), floor(dim);
  for (int a = 0; a < dim; ++a) {
    const double mu = z.row(a).mean();
    var[a] = (z.row(a).array() - mu).square().sum() / n;
    floor[a] = 1e-12 * (var[a] > 0.0 ? var[a] : 1.0);
  }

  KdeModel model;
  model.centers = z;
  const double silverman = std::pow(n, -2.0 / (dim + 4.0));
  Vector theta(dim);
  for (int a = 0; a < dim; ++a) {
    theta[a] = std::log(std::max(var[a], 1e-300) * silverman);
  }

  // LOO value, gradient and Hessian in log-width coordinates.
  auto evaluate = [&](const Vector& th, Vector* grad,
                      Matrix* hess) -> double {
    Vector w = th.array().exp();
    double value = 0.0;
    if (grad) grad->setZero(dim);
    if (hess) hess->setZero(dim, dim);
    Vector e(n), u(dim), gj(dim);
    Matrix hj(dim, dim);
    const double base = -0.5 * (dim * kLog2Pi + th.sum());
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        if (i == j) {
          e[i] = -kInf;
          continue;
        }
        double quad = 0.0;
        for (int a = 0; a < dim; ++a) {
          const double d = z(a, j) - z(a, i);
          quad += d * d / w[a];
        }
        e[i] = base - 0.5 * quad;
      }
      const double lse = logsumexp(e);
      if (!std::isfinite(lse)) return -kInf;
      value += lse - std::log(static_cast<double>(n));
      if (!grad) continue;
      gj.setZero();
      hj.setZero();
      for (int i = 0; i < n; ++i) {
        if (i == j) continue;
        const double r = std::exp(e[i] - lse);
        if (r == 0.0) continue;
        for (int a = 0; a < dim; ++a) {
          const double d = z(a, j) - z(a, i);
          u[a] = -0.5 + d * d / (2.0 * w[a]);
        }
        gj += r * u;
        if (hess) {
          hj.noalias() += r * u * u.transpose();
          for (int a = 0; a < dim; ++a) {
            const double d = z(a, j) - z(a, i);
            hj(a, a) += r * (-d * d / (2.0 * w[a]));
          }
        }
      }
      *grad += gj;
      if (hess) *hess += hj - gj * gj.transpose();
    }
    return value;
  };

  Vector grad(dim);
  Matrix hess(dim, dim);
  double value = evaluate(theta, &grad, &hess);
  for (int iter = 0; iter < 100; ++iter) {
    bool collapsed = false;
    for (int a = 0; a < dim; ++a) {
      if (std::exp(theta[a]) < floor[a]) collapsed = true;
    }
    if (collapsed) {
      model.degenerate = true;
      break;
    }
    if (!std::isfinite(value)) {
      model.degenerate = true;
      break;
    }
    if (grad.lpNorm<Eigen::Infinity>() < 1e-9) break;

    Vector step;
    Eigen::LLT<Matrix> llt(Matrix(-hess));
    if (llt.info() == Eigen::Success) {
      step = llt.solve(grad);
    } else {
      step = grad / (1.0 + grad.lpNorm<Eigen::Infinity>());
    }
    double alpha = 1.0;
    bool accepted = false;
    for (int bt = 0; bt < 50; ++bt) {
      Vector trial = theta + alpha * step;
      const double v = evaluate(trial, nullptr, nullptr);
      if (std::isfinite(v) && v > value) {
        theta = trial;
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) break;
    const double prev = value;
    value = evaluate(theta, &grad, &hess);
    if (value - prev < 1e-12 * (1.0 + std::abs(value))) break;
  }

  model.widths = theta.array().exp();
  return model;
}

void ManifoldParzenModel::finalize() {
  const int n = static_cast<int>(centers.cols());
  dirs.resize(n);
  lambdas.resize(n);
  for (int i = 0; i < n; ++i) {
    const Matrix& v = factors[i];
    int cols = 0;
    for (int p = 0; p < v.cols(); ++p) {
      if (v.col(p).squaredNorm() > 0.0) ++cols;
    }
    dirs[i].resize(centers.rows(), cols);
    lambdas[i].resize(cols);
    int q = 0;
    for (int p = 0; p < v.cols(); ++p) {
      const double lam = v.col(p).squaredNorm();
      if (lam > 0.0) {
        lambdas[i][q] = lam;
        dirs[i].col(q) = v.col(p) / std::sqrt(lam);
        ++q;
      }
    }
  }
}

ManifoldParzenModel fit_mp(const Matrix& z, int rank, int neighbors) {
  const int n = static_cast<int>(z.cols());
  const int dim = static_cast<int>(z.rows());
  if (rank < 1 || rank >= dim) {
    throw std::invalid_argument("fit_mp: need 1 <= rank < D");
  }
  if (neighbors < 1 || neighbors >= n) {
    throw std::invalid_argument("fit_mp: need 1 <= neighbors < N");
  }

  ManifoldParzenModel model;
  model.centers = z;
  model.neighbor_count = neighbors;
  model.rank = rank;
  model.factors.resize(n);

  std::vector<std::pair<double, int>> order(n - 1);
  for (int i = 0; i < n; ++i) {
    int q = 0;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      order[q++] = {(z.col(j) - z.col(i)).squaredNorm(), j};
    }
    std::sort(order.begin(), order.end());
    Matrix scatter = Matrix::Zero(dim, dim);
    for (int p = 0; p < neighbors; ++p) {
      Vector delta = z.col(order[p].second) - z.col(i);
      scatter.noalias() += delta * delta.transpose();
    }
    scatter /= neighbors;
    Eigen::SelfAdjointEigenSolver<Matrix> es(scatter);
    // Eigenvalues ascend; take the top `rank` genuinely positive ones.  A
    // scatter over fewer than `rank` neighbors is rank deficient and its
    // null directions come back as roundoff-sized values.
    const double floor = es.eigenvalues()[dim - 1] * 1e-12;
    int take = 0;
    for (int p = 0; p < rank; ++p) {
      if (es.eigenvalues()[dim - 1 - p] > std::max(floor, 0.0)) ++take;
    }
    model.factors[i].resize(dim, take);
    for (int p = 0; p < take; ++p) {
      const int src = dim - 1 - p;
      model.factors[i].col(p) =
          es.eigenvectors().col(src) * std::sqrt(es.eigenvalues()[src]);
    }
  }
  model.finalize();

  // Pair cache for the ridge: squared projections onto each center's
  // directions and the residual squared norm.
  std::vector<Matrix> proj2(n);   // rank_i x n
  std::vector<Vector> rest2(n);   // n
  for (int i = 0; i < n; ++i) {
    const int ri = static_cast<int>(model.lambdas[i].size());
    proj2[i].resize(ri, n);
    rest2[i].resize(n);
    for (int j = 0; j < n; ++j) {
      Vector delta = z.col(j) - z.col(i);
      Vector c = model.dirs[i].transpose() * delta;
      proj2[i].col(j) = c.cwiseAbs2();
      rest2[i][j] = std::max(0.0, delta.squaredNorm() - c.squaredNorm());
    }
  }

  auto loo = [&](double theta) -> std::pair<double, double> {
    const double w = std::exp(theta);
    if (!(w > 0.0) || !std::isfinite(w)) return {-kInf, 0.0};
    double value = 0.0, dw = 0.0;
    Vector terms(n), derivs(n);
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        if (i == j) {
          terms[i] = -kInf;
          derivs[i] = 0.0;
          continue;
        }
        const int ri = static_cast<int>(model.lambdas[i].size());
        double ld = (dim - ri) * std::log(w) + rest2[i][j] / w;
        double dd = -(dim - ri) / w + rest2[i][j] / (w * w);
        for (int p = 0; p < ri; ++p) {
          const double s = model.lambdas[i][p] + w;
          ld += std::log(s) + proj2[i](p, j) / s;
          dd += -1.0 / s + proj2[i](p, j) / (s * s);
        }
        terms[i] = -0.5 * (dim * kLog2Pi + ld);
        derivs[i] = 0.5 * dd;
      }
      const double lse = logsumexp(terms);
      if (!std::isfinite(lse)) return {-kInf, 0.0};
      value += lse - std::log(static_cast<double>(n));
      for (int i = 0; i < n; ++i) {
        if (i == j) continue;
        const double r = std::exp(terms[i] - lse);
        if (r > 0.0) dw += r * derivs[i];
      }
    }
    return {value, dw * w};
  };

  double resid = 0.0;
  for (int i = 0; i < n; ++i) {
    resid += model.lambdas[i].size() > 0 ? model.lambdas[i].minCoeff() : 0.0;
  }
  double w0 = 0.01 * resid / n;
  if (!(w0 > 0.0)) w0 = 0.01 * mean_data_variance(z);
  if (!(w0 > 0.0)) w0 = 1e-6;

  model.ridge = std::exp(ascend_log_ridge(loo, std::log(w0), 200));
  return model;
}

double log_density(const GaussianMixtureModel& model, const Vector& z) {
  const int k = model.cluster_count();
  if (k == 0 || static_cast<int>(model.cov_lower.size()) != k) {
    throw std::invalid_argument("gm log_density: model not finalized");
  }
  const double n = model.counts.sum();
  const int dim = static_cast<int>(model.means.rows());
  Vector terms(k);
  for (int c = 0; c < k; ++c) {
    Vector t = model.cov_lower[c].triangularView<Eigen::Lower>().solve(
        Vector(z - model.means.col(c)));
    terms[c] = std::log(model.counts[c] / n) -
               0.5 * (dim * kLog2Pi + model.cov_log_det[c] + t.squaredNorm());
  }
  return logsumexp(terms);
}

double log_density(const KdeModel& model, const Vector& z) {
  const int n = static_cast<int>(model.centers.cols());
  const int dim = static_cast<int>(model.centers.rows());
  if (n == 0) throw std::invalid_argument("kde log_density: empty model");
  if (!(model.widths.array() > 0.0).all()) {
    throw NumericalError("kde log_density: non-positive width");
  }
  double log_norm = 0.0;
  for (int a = 0; a < dim; ++a) log_norm += std::log(model.widths[a]);
  const double base = -0.5 * (dim * kLog2Pi + log_norm);
  Vector terms(n);
  for (int i = 0; i < n; ++i) {
    double quad = 0.0;
    for (int a = 0; a < dim; ++a) {
      const double d = z[a] - model.centers(a, i);
      quad += d * d / model.widths[a];
    }
    terms[i] = base - 0.5 * quad;
  }
  return logsumexp(terms) - std::log(static_cast<double>(n));
}

double log_density(const ManifoldParzenModel& model, const Vector& z) {
  const int n = static_cast<int>(model.centers.cols());
  const int dim = static_cast<int>(model.centers.rows());
  if (n == 0 || static_cast<int>(model.dirs.size()) != n) {
    throw std::invalid_argument("mp log_density: model not finalized");
  }
  if (!(model.ridge > 0.0)) {
    throw NumericalError("mp log_density: non-positive ridge");
  }
  const double w = model.ridge;
  Vector terms(n);
  for (int i = 0; i < n; ++i) {
    Vector delta = z - model.centers.col(i);
    Vector c = model.dirs[i].transpose() * delta;
    const int ri = static_cast<int>(model.lambdas[i].size());
    double ld = (dim - ri) * std::log(w);
    double quad = std::max(0.0, delta.squaredNorm() - c.squaredNorm()) / w;
    for (int p = 0; p < ri; ++p) {
      const double s = model.lambdas[i][p] + w;
      ld += std::log(s);
      quad += c[p] * c[p] / s;
    }
    terms[i] = -0.5 * (dim * kLog2Pi + ld + quad);
  }
  return logsumexp(terms) - std::log(static_cast<double>(n));
}

}  // namespace gpdens
