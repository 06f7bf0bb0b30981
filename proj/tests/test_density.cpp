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

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "core/density.hpp"

using namespace gpdens;

namespace {

ModelState random_model(std::mt19937_64& rng, int d, int n, int data_dim,
                        bool stochastic) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ModelState m;
  m.latents.resize(d, n);
  m.targets.resize(data_dim, n);
  for (int i = 0; i < d * n; ++i) m.latents.data()[i] = normal(rng);
  for (int i = 0; i < data_dim * n; ++i) m.targets.data()[i] = normal(rng);
  m.hyp.lengthscales_sq.resize(d);
  for (int a = 0; a < d; ++a) {
    m.hyp.lengthscales_sq[a] = std::exp(0.8 * (unit(rng) - 0.5));
  }
  m.hyp.signal_var = 0.5 + 1.5 * unit(rng);
  m.hyp.noise_var = 0.05 + 0.1 * unit(rng);
  if (stochastic) {
    m.hyp.latent_var.resize(d);
    for (int a = 0; a < d; ++a) m.hyp.latent_var[a] = 0.05 + 0.25 * unit(rng);
  }
  return m;
}

double log_gauss(const Vector& z, const Vector& mean, const Matrix& cov) {
  Eigen::LLT<Matrix> llt(cov);
  Vector white = llt.matrixL().solve(z - mean);
  double log_det = 0.0;
  for (int i = 0; i < cov.rows(); ++i) {
    log_det += 2.0 * std::log(Matrix(llt.matrixL())(i, i));
  }
  const double dim = static_cast<double>(z.size());
  return -0.5 * (dim * std::log(2.0 * M_PI) + log_det + white.squaredNorm());
}

double log_gauss_spherical(const Vector& z, const Vector& mean, double var) {
  const double dim = static_cast<double>(z.size());
  return -0.5 * (dim * std::log(2.0 * M_PI * var) +
                 (z - mean).squaredNorm() / var);
}

// Slow reference: for every (i, j) recondition a GP without pair i and read
// the mean at x^j; covariances come from the full mixture.
double loo_recompute(const ModelState& m) {
  const int n = m.count();
  ProjectedMixture mix = project_mixture(m);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    Matrix x_sub(m.latent_dim(), n - 1), z_sub(m.data_dim(), n - 1);
    for (int j = 0, jj = 0; j < n; ++j) {
      if (j == i) continue;
      x_sub.col(jj) = m.latents.col(j);
      z_sub.col(jj) = m.targets.col(j);
      ++jj;
    }
    GpConditioned sub = GpConditioned::condition(x_sub, z_sub, m.hyp);
    std::vector<double> terms;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      Vector mean = m.hyp.stochastic()
                        ? Vector(sub.weights().transpose() *
                                 expected_k(x_sub, m.latents.col(j), m.hyp))
                        : sub.predict_det(m.latents.col(j)).mean;
      const MixtureComponent& c = mix.components[j];
      double term = c.spherical
                        ? log_gauss_spherical(m.targets.col(i), mean, c.var)
                        : log_gauss(m.targets.col(i), mean, c.cov);
      terms.push_back(term);
    }
    double hi = *std::max_element(terms.begin(), terms.end());
    double acc = 0.0;
    for (double t : terms) acc += std::exp(t - hi);
    total -= hi + std::log(acc) - std::log(static_cast<double>(n - 1));
  }
  return total;
}

// Central finite differences over latents and log-domain hyperparameters.
void check_gradients(const ModelState& model,
                     const std::function<ObjectiveValue(const ModelState&)>& f,
                     double h = 1e-5, double tol = 1e-4) {
  ObjectiveValue at = f(model);
  REQUIRE(std::isfinite(at.value));

  Matrix fd_lat(model.latent_dim(), model.count());
  for (int j = 0; j < model.count(); ++j) {
    for (int a = 0; a < model.latent_dim(); ++a) {
      ModelState up = model, dn = model;
      up.latents(a, j) += h;
      dn.latents(a, j) -= h;
      fd_lat(a, j) = (f(up).value - f(dn).value) / (2.0 * h);
    }
  }
  CHECK((fd_lat - at.grad_latents).norm() /
            std::max(1.0, at.grad_latents.norm()) <=
        tol);

  const int d = model.latent_dim();
  const int nh = model.free_hyper_count();
  Vector fd_hyp(nh);
  for (int p = 0; p < nh; ++p) {
    ModelState up = model, dn = model;
    auto bump = [&](ModelState& s, double factor) {
      if (p < d) {
        s.hyp.lengthscales_sq[p] *= factor;
      } else if (p == d) {
        s.hyp.signal_var *= factor;
      } else if (p == d + 1) {
        s.hyp.noise_var *= factor;
      } else {
        s.hyp.latent_var[p - d - 2] *= factor;
      }
    };
    bump(up, std::exp(h));
    bump(dn, std::exp(-h));
    fd_hyp[p] = (f(up).value - f(dn).value) / (2.0 * h);
  }
  CHECK((fd_hyp - at.grad_hyp).norm() / std::max(1.0, at.grad_hyp.norm()) <=
        tol);
}

}  // namespace

TEST_CASE("model validation") {
  std::mt19937_64 rng(1);
  ModelState m = random_model(rng, 2, 4, 3, false);
  CHECK_NOTHROW(m.validate());
  CHECK(m.free_hyper_count() == 4);

  ModelState stoch = random_model(rng, 2, 4, 3, true);
  CHECK(stoch.free_hyper_count() == 6);

  ModelState bad = m;
  bad.targets = m.targets.leftCols(3);
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = m;
  bad.latents(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("project_mixture") {
  std::mt19937_64 rng(2);

  SUBCASE("deterministic latents give spherical components in the bracket") {
    ModelState m = random_model(rng, 2, 6, 3, false);
    ProjectedMixture mix = project_mixture(m);
    REQUIRE(static_cast<int>(mix.components.size()) == 6);
    for (const auto& c : mix.components) {
      CHECK(c.spherical);
      CHECK(c.var >= m.hyp.noise_var);
      CHECK(c.var <= m.hyp.noise_var + m.hyp.signal_var);
    }
  }

  SUBCASE("stochastic latents give full covariances") {
    ModelState m = random_model(rng, 2, 6, 3, true);
    ProjectedMixture mix = project_mixture(m);
    for (const auto& c : mix.components) {
      CHECK_FALSE(c.spherical);
      CHECK(c.cov.rows() == 3);
      CHECK(c.cov.cols() == 3);
    }
  }

  SUBCASE("single point is one Gaussian at the smoothed prediction") {
    ModelState m = random_model(rng, 2, 1, 3, true);
    ProjectedMixture mix = project_mixture(m);
    REQUIRE(mix.components.size() == 1);
    GpConditioned gp =
        GpConditioned::condition(m.latents, m.targets, m.hyp);
    Vector expected =
        gp.weights().transpose() * expected_k(m.latents, m.latents.col(0), m.hyp);
    CHECK((mix.components[0].mean - expected).cwiseAbs().maxCoeff() <= 1e-12);
  }

  SUBCASE("vanishing latent variance recovers the deterministic mixture") {
    ModelState det = random_model(rng, 2, 5, 3, false);
    ModelState eps = det;
    eps.hyp.latent_var = Vector::Constant(2, 1e-12);
    ProjectedMixture mix_det = project_mixture(det);
    ProjectedMixture mix_eps = project_mixture(eps);
    for (int j = 0; j < 5; ++j) {
      const auto& a = mix_det.components[j];
      const auto& b = mix_eps.components[j];
      CHECK((a.mean - b.mean).cwiseAbs().maxCoeff() <= 1e-6);
      Matrix target = a.var * Matrix::Identity(3, 3);
      CHECK((b.cov - target).cwiseAbs().maxCoeff() <= 1e-6);
    }
  }
}

TEST_CASE("mixture_log_density") {
  SUBCASE("standard normal component") {
    MixtureComponent c;
    c.mean = Vector::Zero(2);
    c.spherical = true;
    c.var = 1.0;
    ProjectedMixture mix;
    mix.components.push_back(c);
    double v = mixture_log_density(mix, Vector::Zero(2));
    CHECK(v == doctest::Approx(-std::log(2.0 * M_PI)).epsilon(1e-14));
  }

  SUBCASE("two identical components collapse") {
    MixtureComponent c;
    c.mean = Vector::Constant(2, 0.3);
    c.spherical = true;
    c.var = 0.7;
    ProjectedMixture one, two;
    one.components.push_back(c);
    two.components.push_back(c);
    two.components.push_back(c);
    Vector z = Vector::Constant(2, -0.4);
    CHECK(mixture_log_density(one, z) ==
          doctest::Approx(mixture_log_density(two, z)).epsilon(1e-14));
  }

  SUBCASE("component permutation invariance") {
    std::mt19937_64 rng(3);
    ModelState m = random_model(rng, 2, 6, 3, true);
    ProjectedMixture mix = project_mixture(m);
    ProjectedMixture shuffled = mix;
    std::shuffle(shuffled.components.begin(), shuffled.components.end(),
                 rng);
    Vector z = m.targets.col(0);
    CHECK(mixture_log_density(mix, z) ==
          doctest::Approx(mixture_log_density(shuffled, z)).epsilon(1e-12));
  }

  SUBCASE("deep tails stay finite") {
    MixtureComponent c;
    c.mean = Vector::Zero(2);
    c.spherical = true;
    c.var = 1.0;
    ProjectedMixture mix;
    mix.components.push_back(c);
    Vector far = Vector::Constant(2, 40.0);
    double v = mixture_log_density(mix, far);
    CHECK(std::isfinite(v));
    CHECK(v < -1500.0);
  }

  SUBCASE("grid quadrature integrates to one") {
    std::mt19937_64 rng(4);
    ModelState m = random_model(rng, 1, 5, 2, false);
    m.latents *= 0.8;
    ProjectedMixture mix = project_mixture(m);

    double lo0 = 1e30, hi0 = -1e30, lo1 = 1e30, hi1 = -1e30, sd = 0.0;
    for (const auto& c : mix.components) {
      sd = std::max(sd, std::sqrt(c.var));
      lo0 = std::min(lo0, c.mean[0]);
      hi0 = std::max(hi0, c.mean[0]);
      lo1 = std::min(lo1, c.mean[1]);
      hi1 = std::max(hi1, c.mean[1]);
    }
    const double pad = 8.0 * sd;
    const int grid = 500;
    const double step0 = (hi0 - lo0 + 2 * pad) / grid;
    const double step1 = (hi1 - lo1 + 2 * pad) / grid;
    double mass = 0.0;
    Vector z(2);
    for (int i = 0; i < grid; ++i) {
      z[0] = lo0 - pad + (i + 0.5) * step0;
      for (int j = 0; j < grid; ++j) {
        z[1] = lo1 - pad + (j + 0.5) * step1;
        mass += std::exp(mixture_log_density(mix, z));
      }
    }
    mass *= step0 * step1;
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-2));
  }

  SUBCASE("errors") {
    ProjectedMixture empty;
    CHECK_THROWS_AS(mixture_log_density(empty, Vector::Zero(2)),
                    std::invalid_argument);
    MixtureComponent c;
    c.mean = Vector::Zero(2);
    c.spherical = true;
    c.var = 1.0;
    ProjectedMixture mix;
    mix.components.push_back(c);
    CHECK_THROWS_AS(mixture_log_density(mix, Vector::Zero(3)),
                    std::invalid_argument);
  }
}

TEST_CASE("objective_lz") {
  SUBCASE("single scalar observation at zero") {
    ModelState m;
    m.latents = Matrix::Zero(1, 1);
    m.targets = Matrix::Zero(1, 1);
    m.hyp.lengthscales_sq = Vector::Ones(1);
    m.hyp.signal_var = 1.3;
    m.hyp.noise_var = 0.2;
    ObjectiveValue v = objective_lz(m);
    double expected = 0.5 * std::log(2.0 * M_PI) + 0.5 * std::log(1.5);
    CHECK(v.value == doctest::Approx(expected).epsilon(1e-14));
  }

  SUBCASE("kernel gradient vanishes when the data fit the prior exactly") {
    std::mt19937_64 rng(5);
    ModelState m = random_model(rng, 2, 3, 3, false);
    Matrix k = kernel_matrix(m.latents, m.hyp);
    Eigen::LLT<Matrix> llt(k);
    // With Z^T Z = D K the stationarity condition holds by construction.
    Matrix l = llt.matrixL();
    m.targets = std::sqrt(3.0) * Matrix(l.transpose());
    Matrix g = lz_kernel_gradient(m);
    CHECK(g.cwiseAbs().maxCoeff() <= 1e-10);
  }

  SUBCASE("finite differences, deterministic") {
    std::mt19937_64 rng(6);
    ModelState m = random_model(rng, 2, 5, 3, false);
    check_gradients(m, [](const ModelState& s) { return objective_lz(s); });
  }

  SUBCASE("finite differences, stochastic hyperparameter set") {
    std::mt19937_64 rng(7);
    ModelState m = random_model(rng, 2, 5, 3, true);
    check_gradients(m, [](const ModelState& s) { return objective_lz(s); });
  }
}

TEST_CASE("objective_loo") {
  std::mt19937_64 rng(8);

  SUBCASE("two points score each other") {
    ModelState m = random_model(rng, 2, 2, 3, false);
    GpConditioned gp = GpConditioned::condition(m.latents, m.targets, m.hyp);
    ProjectedMixture mix = project_mixture(m);
    double expected = 0.0;
    for (int i = 0; i < 2; ++i) {
      int j = 1 - i;
      Vector mean = gp.predict_mean_loo(m.latents.col(j), i);
      expected -= log_gauss_spherical(m.targets.col(i), mean,
                                      mix.components[j].var);
    }
    CHECK(objective_loo(m).value ==
          doctest::Approx(expected).epsilon(1e-12));
  }

  SUBCASE("mirrored configuration splits evenly") {
    ModelState m;
    m.latents.resize(1, 2);
    m.latents << -1.0, 1.0;
    m.targets.resize(1, 2);
    m.targets << -0.7, 0.7;
    m.hyp.lengthscales_sq = Vector::Ones(1);
    m.hyp.signal_var = 1.0;
    m.hyp.noise_var = 0.1;

    GpConditioned gp = GpConditioned::condition(m.latents, m.targets, m.hyp);
    ProjectedMixture mix = project_mixture(m);
    Vector mean = gp.predict_mean_loo(m.latents.col(1), 0);
    double term =
        -log_gauss_spherical(m.targets.col(0), mean, mix.components[1].var);
    ObjectiveValue v = objective_loo(m);
    CHECK(v.value == doctest::Approx(2.0 * term).epsilon(1e-12));
    CHECK(v.grad_latents(0, 0) ==
          doctest::Approx(-v.grad_latents(0, 1)).epsilon(1e-10));
  }

  SUBCASE("matches the reconditioning reference") {
    ModelState det = random_model(rng, 2, 6, 3, false);
    CHECK(std::abs(objective_loo(det).value - loo_recompute(det)) <= 1e-8);
    ModelState stoch = random_model(rng, 2, 6, 3, true);
    CHECK(std::abs(objective_loo(stoch).value - loo_recompute(stoch)) <=
          1e-8);
  }

  SUBCASE("finite differences, both latent regimes") {
    ModelState det = random_model(rng, 2, 6, 3, false);
    check_gradients(det, [](const ModelState& s) { return objective_loo(s); });
    ModelState stoch = random_model(rng, 2, 6, 2, true);
    check_gradients(stoch,
                    [](const ModelState& s) { return objective_loo(s); });
  }

  SUBCASE("single point is rejected") {
    ModelState m = random_model(rng, 2, 1, 3, false);
    CHECK_THROWS_AS(objective_loo(m), std::invalid_argument);
  }
}

TEST_CASE("select_lpo_subsets") {
  std::mt19937_64 rng(9);

  SUBCASE("self-explaining points reduce to leave-one-out") {
    // A smooth curve: neighbours reconstruct the dropped mean well, so each
    // component is by far the best explainer of its own data point, while
    // the other components sit two units away with tight variances.
    const int n = 5;
    ModelState m;
    m.latents.resize(1, n);
    m.targets.resize(2, n);
    for (int j = 0; j < n; ++j) {
      double t = -2.0 + j;
      m.latents(0, j) = t;
      m.targets(0, j) = 2.0 * t;
      m.targets(1, j) = 2.0 * t;
    }
    m.hyp.lengthscales_sq = Vector::Constant(1, 4.0);
    m.hyp.signal_var = 4.0;
    m.hyp.noise_var = 0.05;

    auto subsets = select_lpo_subsets(m, 1);
    REQUIRE(static_cast<int>(subsets.size()) == n);
    for (int k = 0; k < n; ++k) {
      REQUIRE(static_cast<int>(subsets[k].size()) == n - 1);
      for (int j : subsets[k]) CHECK(j != k);
    }
    CHECK(std::abs(objective_lpo(m, 1).value - objective_loo(m).value) <=
          1e-10);
  }

  SUBCASE("P = N-1 keeps only the worst explainer") {
    ModelState m = random_model(rng, 2, 5, 3, false);
    ProjectedMixture mix = project_mixture(m);
    GpConditioned gp = GpConditioned::condition(m.latents, m.targets, m.hyp);
    auto subsets = select_lpo_subsets(m, 4);
    for (int k = 0; k < 5; ++k) {
      REQUIRE(subsets[k].size() == 1);
      double best = 1e300;
      int arg = -1;
      for (int j = 0; j < 5; ++j) {
        Vector mean = gp.predict_mean_loo(m.latents.col(j), k);
        double term = log_gauss_spherical(m.targets.col(k), mean,
                                          mix.components[j].var);
        if (term < best) {
          best = term;
          arg = j;
        }
      }
      CHECK(subsets[k][0] == arg);
    }
  }

  SUBCASE("P = 2 matches brute-force ranking") {
    ModelState m = random_model(rng, 2, 6, 3, true);
    ProjectedMixture mix = project_mixture(m);
    GpConditioned gp = GpConditioned::condition(m.latents, m.targets, m.hyp);
    auto subsets = select_lpo_subsets(m, 2);
    for (int k = 0; k < 6; ++k) {
      std::vector<std::pair<double, int>> ranked;
      for (int j = 0; j < 6; ++j) {
        Vector mean = gp.predict_mean_loo(m.latents.col(j), k);
        double term =
            log_gauss(m.targets.col(k), mean, mix.components[j].cov);
        ranked.push_back({term, j});
      }
      std::sort(ranked.begin(), ranked.end());
      std::vector<int> expect;
      for (int r = 0; r < 4; ++r) expect.push_back(ranked[r].second);
      std::sort(expect.begin(), expect.end());
      CHECK(subsets[k] == expect);
    }
  }

  SUBCASE("bounds") {
    ModelState m = random_model(rng, 2, 4, 3, false);
    CHECK_THROWS_AS(select_lpo_subsets(m, 0), std::invalid_argument);
    CHECK_THROWS_AS(select_lpo_subsets(m, 4), std::invalid_argument);
  }
}

TEST_CASE("objective_lpo") {
  std::mt19937_64 rng(10);

  SUBCASE("P = 1 with leave-one-out subsets equals objective_loo") {
    ModelState m = random_model(rng, 2, 6, 3, false);
    std::vector<std::vector<int>> subsets(6);
    for (int k = 0; k < 6; ++k) {
      for (int j = 0; j < 6; ++j) {
        if (j != k) subsets[k].push_back(j);
      }
    }
    ObjectiveValue lpo = objective_lpo_fixed(m, subsets);
    ObjectiveValue loo = objective_loo(m);
    CHECK(std::abs(lpo.value - loo.value) <= 1e-10);
    CHECK((lpo.grad_latents - loo.grad_latents).cwiseAbs().maxCoeff() <=
          1e-9);
    CHECK((lpo.grad_hyp - loo.grad_hyp).cwiseAbs().maxCoeff() <= 1e-9);
  }

  SUBCASE("duplicated pairs stay finite; only P >= 2 is safe from them") {
    // Each twin pair sits on its own latent island so the pair structure is
    // not blurred by neighbouring data.
    std::normal_distribution<double> normal(0.0, 1.0);
    const int pairs = 5, n = 2 * pairs;
    Matrix x(1, n), z(2, n);
    for (int p = 0; p < pairs; ++p) {
      x(0, 2 * p) = 4.0 * p;
      z(0, 2 * p) = normal(rng);
      z(1, 2 * p) = normal(rng);
      x.col(2 * p + 1) = x.col(2 * p);
      z.col(2 * p + 1) = z.col(2 * p);
    }
    ModelState m;
    m.latents = x;
    m.targets = z;
    m.hyp.lengthscales_sq = Vector::Ones(1);
    m.hyp.signal_var = 1.0;

    double prev_self = 1e300;
    for (double sn : {1e-2, 1e-4, 1e-6}) {
      m.hyp.noise_var = sn;
      ObjectiveValue lpo1 = objective_lpo(m, 1);
      ObjectiveValue lpo2 = objective_lpo(m, 2);
      CHECK(std::isfinite(lpo1.value));
      // Leaving two out removes the whole pair, so no component sits on top
      // of a scored twin and the value cannot be driven down.
      CHECK(lpo2.value >= -1e3);

      // Selection always expels a member of the tied pair.
      auto subsets = select_lpo_subsets(m, 1);
      for (int k = 0; k < n; ++k) {
        int twin = (k % 2 == 0) ? k + 1 : k - 1;
        for (int j = 0; j < n; ++j) {
          bool retained = std::find(subsets[k].begin(), subsets[k].end(),
                                    j) != subsets[k].end();
          if (!retained) CHECK((j == k || j == twin));
        }
      }

      // Scoring against the full mixture (nothing removed) exploits the
      // twin pairs more and more as the noise shrinks.
      ProjectedMixture mix = project_mixture(m);
      double self_score = 0.0;
      for (int i = 0; i < n; ++i) {
        self_score -= mixture_log_density(mix, z.col(i));
      }
      CHECK(self_score < prev_self);
      prev_self = self_score;
    }
  }

  SUBCASE("value is invariant under simultaneous column permutation") {
    ModelState m = random_model(rng, 2, 6, 3, true);
    std::vector<int> perm = {4, 1, 5, 0, 2, 3};
    ModelState p = m;
    for (int j = 0; j < 6; ++j) {
      p.latents.col(j) = m.latents.col(perm[j]);
      p.targets.col(j) = m.targets.col(perm[j]);
    }
    double a = objective_lpo(m, 2).value;
    double b = objective_lpo(p, 2).value;
    CHECK(a == doctest::Approx(b).epsilon(1e-9));
  }

  SUBCASE("finite differences at fixed subsets") {
    ModelState det = random_model(rng, 2, 6, 3, false);
    auto det_subsets = select_lpo_subsets(det, 2);
    check_gradients(det, [&](const ModelState& s) {
      return objective_lpo_fixed(s, det_subsets);
    });

    ModelState stoch = random_model(rng, 2, 6, 3, true);
    auto stoch_subsets = select_lpo_subsets(stoch, 2);
    check_gradients(stoch, [&](const ModelState& s) {
      return objective_lpo_fixed(s, stoch_subsets);
    });
  }

  SUBCASE("subset validation") {
    ModelState m = random_model(rng, 2, 4, 3, false);
    std::vector<std::vector<int>> bad(3);
    CHECK_THROWS_AS(objective_lpo_fixed(m, bad), std::invalid_argument);
    std::vector<std::vector<int>> ragged(4, std::vector<int>{0, 1});
    ragged[2] = {0};
    CHECK_THROWS_AS(objective_lpo_fixed(m, ragged), std::invalid_argument);
    std::vector<std::vector<int>> oob(4, std::vector<int>{0, 9});
    CHECK_THROWS_AS(objective_lpo_fixed(m, oob), std::invalid_argument);
  }
}
