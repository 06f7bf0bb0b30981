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

#include "core/selftest.hpp"

#include <cmath>
#include <functional>
#include <random>
#include <sstream>

#include "core/density.hpp"
#include "core/gp.hpp"
#include "core/kernel.hpp"
#include "core/types.hpp"

namespace gpdens {

namespace {

ModelState random_state(std::mt19937_64& rng, int n, int d, int dim,
                        bool stochastic) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ModelState state;
  state.latents.resize(d, n);
  state.targets.resize(dim, n);
  for (int i = 0; i < d * n; ++i) state.latents.data()[i] = normal(rng);
  for (int i = 0; i < dim * n; ++i) state.targets.data()[i] = normal(rng);
  state.hyp.lengthscales_sq.resize(d);
  for (int a = 0; a < d; ++a) {
    state.hyp.lengthscales_sq[a] = std::exp(0.8 * (unit(rng) - 0.5));
  }
  state.hyp.signal_var = 0.5 + 1.5 * unit(rng);
  state.hyp.noise_var = 0.05 + 0.15 * unit(rng);
  if (stochastic) {
    state.hyp.latent_var.resize(d);
    for (int a = 0; a < d; ++a) {
      state.hyp.latent_var[a] = 0.05 + 0.25 * unit(rng);
    }
  }
  return state;
}

Vector random_point(std::mt19937_64& rng, int d) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector x(d);
  for (int a = 0; a < d; ++a) x[a] = normal(rng);
  return x;
}

SelftestCheck check_expected_kernel(std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 17u);
  ModelState state = random_state(rng, 4, 2, 1, true);
  Vector xstar = random_point(rng, 2);

  const int samples = 200000;
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector sqrt_v = state.hyp.latent_var.cwiseSqrt();
  Vector mean_k = Vector::Zero(4);
  Matrix mean_kk = Matrix::Zero(4, 4);
  Vector x(2), k(4);
  for (int s = 0; s < samples; ++s) {
    for (int a = 0; a < 2; ++a) x[a] = xstar[a] + sqrt_v[a] * normal(rng);
    k = kernel_cross(state.latents, x, state.hyp);
    mean_k += k;
    mean_kk.noalias() += k * k.transpose();
  }
  mean_k /= samples;
  mean_kk /= samples;

  Vector kt = expected_k(state.latents, xstar, state.hyp);
  Matrix kh = expected_kk(state.latents, xstar, state.hyp);
  const double err_k = (kt - mean_k).norm() / mean_k.norm();
  const double err_kk = (kh - mean_kk).norm() / mean_kk.norm();

  SelftestCheck check;
  check.name = "expected kernel moments vs Monte Carlo";
  check.passed = err_k < 0.02 && err_kk < 0.05;
  std::ostringstream detail;
  detail << "rel err k~ " << err_k << ", K^ " << err_kk;
  check.detail = detail.str();
  return check;
}

SelftestCheck check_moment_matching(std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 23u);
  ModelState state = random_state(rng, 6, 2, 2, true);
  GpConditioned gp =
      GpConditioned::condition(state.latents, state.targets, state.hyp);
  Vector xstar = 0.5 * state.latents.col(0) + 0.5 * state.latents.col(1);

  const int samples = 200000;
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector sqrt_v = state.hyp.latent_var.cwiseSqrt();
  Vector mean = Vector::Zero(2);
  Matrix second = Matrix::Zero(2, 2);
  double iso = 0.0;
  Vector x(2);
  for (int s = 0; s < samples; ++s) {
    for (int a = 0; a < 2; ++a) x[a] = xstar[a] + sqrt_v[a] * normal(rng);
    PredictiveMoments det = gp.predict_det(x);
    mean += det.mean;
    second.noalias() += det.mean * det.mean.transpose();
    iso += det.var;
  }
  mean /= samples;
  second /= samples;
  iso /= samples;
  Matrix cov_mc = second - mean * mean.transpose() +
                  iso * Matrix::Identity(2, 2);

  PredictiveMoments mm = gp.predict_gauss(xstar, state.hyp);
  const double err_mean = (mm.mean - mean).norm() / mean.norm();
  const double err_cov = (mm.cov - cov_mc).norm() / cov_mc.norm();

  SelftestCheck check;
  check.name = "moment matching vs Monte Carlo";
  check.passed = err_mean < 0.02 && err_cov < 0.05;
  std::ostringstream detail;
  detail << "rel err mean " << err_mean << ", cov " << err_cov;
  check.detail = detail.str();
  return check;
}

SelftestCheck check_gradients(std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 31u);
  ModelState state = random_state(rng, 6, 2, 2, true);
  const auto subsets = select_lpo_subsets(state, 2);
  auto value_at = [&](const ModelState& s) {
    return objective_lpo_fixed(s, subsets).value;
  };
  ObjectiveValue obj = objective_lpo_fixed(state, subsets);

  const double h = 1e-5;
  double worst = 0.0;
  double scale = obj.grad_latents.lpNorm<Eigen::Infinity>();
  scale = std::max(scale, obj.grad_hyp.lpNorm<Eigen::Infinity>());
  scale = std::max(scale, 1e-12);

  for (int a = 0; a < state.latents.rows(); ++a) {
    for (int i = 0; i < state.latents.cols(); ++i) {
      ModelState plus = state, minus = state;
      plus.latents(a, i) += h;
      minus.latents(a, i) -= h;
      const double fd = (value_at(plus) - value_at(minus)) / (2 * h);
      worst = std::max(worst, std::abs(fd - obj.grad_latents(a, i)) / scale);
    }
  }
  const int d = state.latent_dim();
  for (int p = 0; p < state.free_hyper_count(); ++p) {
    ModelState plus = state, minus = state;
    auto bump = [d](ModelState& s, int index, double delta) {
      if (index < d) {
        s.hyp.lengthscales_sq[index] *= std::exp(delta);
      } else if (index == d) {
        s.hyp.signal_var *= std::exp(delta);
      } else if (index == d + 1) {
        s.hyp.noise_var *= std::exp(delta);
      } else {
        s.hyp.latent_var[index - d - 2] *= std::exp(delta);
      }
    };
    bump(plus, p, h);
    bump(minus, p, -h);
    const double fd = (value_at(plus) - value_at(minus)) / (2 * h);
    worst = std::max(worst, std::abs(fd - obj.grad_hyp[p]) / scale);
  }

  SelftestCheck check;
  check.name = "objective gradients vs finite differences";
  check.passed = worst < 1e-4;
  std::ostringstream detail;
  detail << "max rel err " << worst;
  check.detail = detail.str();
  return check;
}

SelftestCheck check_downdate(std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 41u);
  ModelState state = random_state(rng, 7, 2, 3, false);
  GpConditioned gp =
      GpConditioned::condition(state.latents, state.targets, state.hyp);
  double worst = 0.0;
  for (int skip = 0; skip < state.count(); ++skip) {
    Vector xstar = random_point(rng, 2);
    Matrix lx(2, 6), tg(3, 6);
    int q = 0;
    for (int i = 0; i < 7; ++i) {
      if (i == skip) continue;
      lx.col(q) = state.latents.col(i);
      tg.col(q) = state.targets.col(i);
      ++q;
    }
    GpConditioned reduced = GpConditioned::condition(lx, tg, state.hyp);
    Vector fast = gp.predict_mean_loo(xstar, skip);
    Vector slow = reduced.predict_det(xstar).mean;
    worst = std::max(worst, (fast - slow).lpNorm<Eigen::Infinity>());
  }

  SelftestCheck check;
  check.name = "leave-one-out downdate vs reconditioning";
  check.passed = worst < 1e-8;
  std::ostringstream detail;
  detail << "max abs diff " << worst;
  check.detail = detail.str();
  return check;
}

SelftestCheck check_deterministic_limit(std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 43u);
  ModelState state = random_state(rng, 6, 2, 2, false);
  GpConditioned gp =
      GpConditioned::condition(state.latents, state.targets, state.hyp);
  Hyperparams tiny = state.hyp;
  tiny.latent_var = Vector::Constant(2, 1e-12);
  double worst = 0.0;
  for (int t = 0; t < 5; ++t) {
    Vector xstar = random_point(rng, 2);
    PredictiveMoments det = gp.predict_det(xstar);
    PredictiveMoments gauss = gp.predict_gauss(xstar, tiny);
    worst = std::max(worst, (det.mean - gauss.mean).lpNorm<Eigen::Infinity>());
    Matrix iso = det.var * Matrix::Identity(2, 2);
    worst = std::max(worst, (gauss.cov - iso).lpNorm<Eigen::Infinity>());
  }

  SelftestCheck check;
  check.name = "deterministic latent limit";
  check.passed = worst < 1e-6;
  std::ostringstream detail;
  detail << "max abs diff " << worst;
  check.detail = detail.str();
  return check;
}

SelftestCheck check_quadrature(std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 53u);
  ModelState state = random_state(rng, 8, 2, 2, true);
  ProjectedMixture mix = project_mixture(state);

  double lo0 = 1e300, hi0 = -1e300, lo1 = 1e300, hi1 = -1e300;
  for (const MixtureComponent& c : mix.components) {
    const double spread =
        6.0 * std::sqrt(c.spherical ? c.var : c.cov.trace());
    lo0 = std::min(lo0, c.mean[0] - spread);
    hi0 = std::max(hi0, c.mean[0] + spread);
    lo1 = std::min(lo1, c.mean[1] - spread);
    hi1 = std::max(hi1, c.mean[1] + spread);
  }
  const int cells = 320;
  const double h0 = (hi0 - lo0) / cells, h1 = (hi1 - lo1) / cells;
  double mass = 0.0;
  Vector z(2);
  for (int i = 0; i < cells; ++i) {
    z[0] = lo0 + (i + 0.5) * h0;
    for (int j = 0; j < cells; ++j) {
      z[1] = lo1 + (j + 0.5) * h1;
      mass += std::exp(mixture_log_density(mix, z));
    }
  }
  mass *= h0 * h1;

  SelftestCheck check;
  check.name = "projected mixture quadrature";
  check.passed = std::abs(mass - 1.0) < 1e-2;
  std::ostringstream detail;
  detail << "mass " << mass;
  check.detail = detail.str();
  return check;
}

}  // namespace

SelftestReport run_selftest(std::uint64_t seed) {
  SelftestReport report;
  report.checks.push_back(check_expected_kernel(seed));
  report.checks.push_back(check_moment_matching(seed));
  report.checks.push_back(check_gradients(seed));
  report.checks.push_back(check_downdate(seed));
  report.checks.push_back(check_deterministic_limit(seed));
  report.checks.push_back(check_quadrature(seed));
  return report;
}

std::string format_report(const SelftestReport& report) {
  std::ostringstream out;
  for (const SelftestCheck& check : report.checks) {
    out << (check.passed ? "PASS" : "FAIL") << "  " << check.name << " ("
        << check.detail << ")\n";
  }
  out << (report.all_passed() ? "selftest: all checks passed"
                              : "selftest: FAILURES present")
      << '\n';
  return out.str();
}

}  // namespace gpdens
