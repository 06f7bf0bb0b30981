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

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <random>

#include "core/kernel.hpp"

using namespace gpdens;

namespace {

Hyperparams make_hyp(const Vector& w, double sf, double sn,
                     const Vector& v = Vector()) {
  Hyperparams hyp;
  hyp.lengthscales_sq = w;
  hyp.signal_var = sf;
  hyp.noise_var = sn;
  hyp.latent_var = v;
  return hyp;
}

Matrix random_latents(std::mt19937_64& rng, int d, int n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix x(d, n);
  for (int i = 0; i < d * n; ++i) x.data()[i] = normal(rng);
  return x;
}

Hyperparams random_hyp(std::mt19937_64& rng, int d, bool stochastic) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Vector w(d), v;
  for (int a = 0; a < d; ++a) w[a] = std::exp(0.8 * (unit(rng) - 0.5));
  if (stochastic) {
    v.resize(d);
    for (int a = 0; a < d; ++a) v[a] = 0.05 + 0.3 * unit(rng);
  }
  return make_hyp(w, 0.5 + 1.5 * unit(rng), 0.05 + 0.1 * unit(rng), v);
}

}  // namespace

TEST_CASE("ard kernel closed-form values") {
  Vector x0 = Vector::Zero(2);
  Hyperparams hyp = make_hyp(Vector::Ones(2), 1.0, 0.1);

  CHECK(ard_kernel(x0, x0, true, hyp) == doctest::Approx(1.1).epsilon(1e-14));
  CHECK(ard_kernel(x0, x0, false, hyp) == doctest::Approx(1.0).epsilon(1e-14));

  Hyperparams one_d = make_hyp(Vector::Constant(1, 4.0), 2.0, 0.5);
  Vector a = Vector::Constant(1, 0.0), b = Vector::Constant(1, 2.0);
  CHECK(ard_kernel(a, b, false, one_d) ==
        doctest::Approx(2.0 * std::exp(-0.5)).epsilon(1e-14));
}

TEST_CASE("ard kernel rejects non-finite coordinates") {
  Hyperparams hyp = make_hyp(Vector::Ones(2), 1.0, 0.1);
  Vector good = Vector::Zero(2);
  Vector bad = good;
  bad[1] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(ard_kernel(good, bad, false, hyp), std::invalid_argument);
  bad[1] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(ard_kernel(bad, good, false, hyp), std::invalid_argument);
  CHECK_THROWS_AS(ard_kernel(good, Vector::Zero(3), false, hyp),
                  std::invalid_argument);
}

TEST_CASE("kernel matrix structure") {
  Hyperparams hyp = make_hyp(Vector::Ones(2), 1.3, 0.07);

  SUBCASE("single point") {
    Matrix x = Matrix::Zero(2, 1);
    Matrix k = kernel_matrix(x, hyp);
    REQUIRE(k.rows() == 1);
    CHECK(k(0, 0) == doctest::Approx(1.3 + 0.07).epsilon(1e-15));
  }

  SUBCASE("identical latent points") {
    Matrix x(2, 2);
    x.col(0) << 0.4, -1.0;
    x.col(1) = x.col(0);
    Matrix k = kernel_matrix(x, hyp);
    CHECK(k(0, 1) == doctest::Approx(1.3).epsilon(1e-15));
    CHECK(k(1, 0) == doctest::Approx(1.3).epsilon(1e-15));
    CHECK(k(0, 0) == doctest::Approx(1.37).epsilon(1e-15));
  }

  SUBCASE("bitwise symmetry and PSD of K minus noise") {
    std::mt19937_64 rng(7);
    Matrix x = random_latents(rng, 2, 5);
    Matrix k = kernel_matrix(x, hyp);
    for (int i = 0; i < 5; ++i) {
      for (int j = 0; j < 5; ++j) {
        CHECK(k(i, j) == k(j, i));  // exact, by construction
      }
    }
    Matrix smooth = k - hyp.noise_var * Matrix::Identity(5, 5);
    Eigen::SelfAdjointEigenSolver<Matrix> es(smooth);
    CHECK(es.eigenvalues().minCoeff() >= -1e-10);
  }
}

TEST_CASE("factorize_psd") {
  SUBCASE("identity") {
    PsdFactor f = factorize_psd(Matrix::Identity(3, 3));
    CHECK(f.log_det == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(f.jitter_used == 0.0);
  }

  SUBCASE("diagonal log determinant") {
    Vector diag(2);
    diag << 4.0, 9.0;
    PsdFactor f = factorize_psd(Matrix(diag.asDiagonal()));
    CHECK(f.log_det == doctest::Approx(std::log(36.0)).epsilon(1e-14));
  }

  SUBCASE("singular outer product succeeds with jitter") {
    Vector v(4);
    v << 1.0, -2.0, 0.5, 3.0;
    Matrix m = v * v.transpose();
    PsdFactor f = factorize_psd(m);
    CHECK(f.jitter_used > 0.0);
    Matrix rebuilt = f.lower * f.lower.transpose();
    Matrix target = m + f.jitter_used * Matrix::Identity(4, 4);
    CHECK((rebuilt - target).norm() / target.norm() <= 1e-8);
  }

  SUBCASE("log_det equals twice the log diagonal sum") {
    std::mt19937_64 rng(11);
    Matrix x = random_latents(rng, 3, 6);
    Matrix m = x * x.transpose() + 0.5 * Matrix::Identity(3, 3);
    PsdFactor f = factorize_psd(m);
    double acc = 0.0;
    for (int i = 0; i < 3; ++i) acc += 2.0 * std::log(f.lower(i, i));
    CHECK(f.log_det == doctest::Approx(acc).epsilon(1e-15));
  }

  SUBCASE("hopeless matrix raises numerical error") {
    Matrix m(2, 2);
    m << 1.0, 0.0, 0.0, -5.0;
    CHECK_THROWS_AS(factorize_psd(m), NumericalError);
  }
}

TEST_CASE("downdate_inverse") {
  SUBCASE("diagonal case") {
    Vector diag(3);
    diag << 1.0, 2.0, 3.0;
    Matrix k = diag.asDiagonal();
    Matrix inv = k.inverse();
    Matrix down = downdate_inverse(inv, 1);
    CHECK(down(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(down(1, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    CHECK(std::abs(down(0, 1)) <= 1e-15);
  }

  SUBCASE("2x2 removal leaves the scalar inverse") {
    Matrix k(2, 2);
    k << 2.0, 0.6, 0.6, 1.5;
    Matrix down = downdate_inverse(Matrix(k.inverse()), 0);
    REQUIRE(down.rows() == 1);
    CHECK(down(0, 0) == doctest::Approx(1.0 / k(1, 1)).epsilon(1e-12));
  }

  SUBCASE("random 6x6 against direct re-inversion") {
    std::mt19937_64 rng(13);
    Matrix x = random_latents(rng, 6, 9);
    Matrix k = x * x.transpose() + 0.3 * Matrix::Identity(6, 6);
    Matrix inv = k.inverse();
    for (int i = 0; i < 6; ++i) {
      Matrix sub(5, 5);
      for (int r = 0, rr = 0; r < 6; ++r) {
        if (r == i) continue;
        for (int c = 0, cc = 0; c < 6; ++c) {
          if (c == i) continue;
          sub(rr, cc++) = k(r, c);
        }
        ++rr;
      }
      Matrix direct = sub.inverse();
      Matrix down = downdate_inverse(inv, i);
      CHECK((down - direct).cwiseAbs().maxCoeff() <= 1e-10);
    }
  }

  SUBCASE("two-index removal is order independent") {
    std::mt19937_64 rng(17);
    Matrix x = random_latents(rng, 6, 9);
    Matrix k = x * x.transpose() + 0.4 * Matrix::Identity(6, 6);
    Matrix inv = k.inverse();
    // Remove indices 1 and 4: removing 1 first shifts 4 down to 3.
    Matrix a = downdate_inverse(downdate_inverse(inv, 1), 3);
    Matrix b = downdate_inverse(downdate_inverse(inv, 4), 1);
    CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-9);
  }

  SUBCASE("non-positive pivot raises numerical error") {
    Matrix bad(2, 2);
    bad << -1.0, 0.0, 0.0, 1.0;
    CHECK_THROWS_AS(downdate_inverse(bad, 0), NumericalError);
  }
}

TEST_CASE("expected_k closed forms") {
  SUBCASE("zero latent variance falls back to the point kernel") {
    std::mt19937_64 rng(19);
    Matrix x = random_latents(rng, 2, 4);
    Vector xs = random_latents(rng, 2, 1).col(0);
    Hyperparams hyp = random_hyp(rng, 2, false);
    hyp.latent_var = Vector::Zero(2);
    Vector expected = expected_k(x, xs, hyp);
    Vector point = kernel_cross(x, xs, hyp);
    CHECK((expected - point).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("latent variance equal to the squared lengthscale") {
    Hyperparams hyp =
        make_hyp(Vector::Constant(1, 0.7), 1.9, 0.05, Vector::Constant(1, 0.7));
    Matrix x = Matrix::Constant(1, 1, 0.3);
    Vector xs = Vector::Constant(1, 0.3);
    Vector kt = expected_k(x, xs, hyp);
    CHECK(kt[0] == doctest::Approx(1.9 / std::sqrt(2.0)).epsilon(1e-14));
  }

  SUBCASE("Monte Carlo oracle") {
    std::mt19937_64 rng(23);
    Matrix x = random_latents(rng, 2, 5);
    Vector xs = random_latents(rng, 2, 1).col(0);
    Hyperparams hyp = random_hyp(rng, 2, true);

    const int samples = 200000;
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector acc = Vector::Zero(5);
    Vector draw(2);
    for (int s = 0; s < samples; ++s) {
      for (int a = 0; a < 2; ++a) {
        draw[a] = xs[a] + std::sqrt(hyp.latent_var[a]) * normal(rng);
      }
      acc += kernel_cross(x, draw, hyp);
    }
    acc /= samples;
    Vector kt = expected_k(x, xs, hyp);
    CHECK((kt - acc).norm() / acc.norm() <= 0.02);
  }
}

TEST_CASE("expected_kk closed forms") {
  SUBCASE("zero latent variance gives the outer product") {
    std::mt19937_64 rng(29);
    Matrix x = random_latents(rng, 2, 4);
    Vector xs = random_latents(rng, 2, 1).col(0);
    Hyperparams hyp = random_hyp(rng, 2, false);
    hyp.latent_var = Vector::Zero(2);
    Matrix kh = expected_kk(x, xs, hyp);
    Vector ks = kernel_cross(x, xs, hyp);
    Matrix outer = ks * ks.transpose();
    CHECK((kh - outer).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("coinciding point with latent variance equal to lengthscale") {
    Hyperparams hyp =
        make_hyp(Vector::Constant(1, 1.2), 1.4, 0.02, Vector::Constant(1, 1.2));
    Matrix x = Matrix::Constant(1, 1, -0.8);
    Vector xs = Vector::Constant(1, -0.8);
    Matrix kh = expected_kk(x, xs, hyp);
    CHECK(kh(0, 0) ==
          doctest::Approx(1.4 * 1.4 / std::sqrt(3.0)).epsilon(1e-14));
  }

  SUBCASE("Monte Carlo oracle, elementwise") {
    std::mt19937_64 rng(31);
    Matrix x = random_latents(rng, 2, 5);
    Vector xs = 0.25 * random_latents(rng, 2, 1).col(0);
    Hyperparams hyp = random_hyp(rng, 2, true);

    const int samples = 200000;
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix acc = Matrix::Zero(5, 5);
    Vector draw(2), k(5);
    for (int s = 0; s < samples; ++s) {
      for (int a = 0; a < 2; ++a) {
        draw[a] = xs[a] + std::sqrt(hyp.latent_var[a]) * normal(rng);
      }
      k = kernel_cross(x, draw, hyp);
      acc.noalias() += k * k.transpose();
    }
    acc /= samples;
    Matrix kh = expected_kk(x, xs, hyp);
    for (int i = 0; i < 5; ++i) {
      for (int j = 0; j < 5; ++j) {
        if (acc(i, j) <= 1e-3) continue;
        CHECK(std::abs(kh(i, j) - acc(i, j)) / acc(i, j) <= 0.05);
      }
    }
  }

  SUBCASE("symmetric positive semidefinite") {
    std::mt19937_64 rng(37);
    for (int trial = 0; trial < 10; ++trial) {
      Matrix x = random_latents(rng, 2, 6);
      Vector xs = random_latents(rng, 2, 1).col(0);
      Hyperparams hyp = random_hyp(rng, 2, true);
      Matrix kh = expected_kk(x, xs, hyp);
      CHECK((kh - kh.transpose()).cwiseAbs().maxCoeff() == 0.0);
      Eigen::SelfAdjointEigenSolver<Matrix> es(kh);
      CHECK(es.eigenvalues().minCoeff() >= -1e-8);
    }
  }
}

TEST_CASE("expectations converge to the deterministic limit") {
  std::mt19937_64 rng(41);
  Matrix x = random_latents(rng, 2, 5);
  Vector xs = random_latents(rng, 2, 1).col(0);
  Hyperparams hyp = random_hyp(rng, 2, false);
  hyp.latent_var = Vector::Constant(2, 1e-12);

  Vector kt = expected_k(x, xs, hyp);
  Vector ks = kernel_cross(x, xs, hyp);
  CHECK((kt - ks).cwiseAbs().maxCoeff() <= 1e-6);

  Matrix kh = expected_kk(x, xs, hyp);
  Matrix outer = ks * ks.transpose();
  CHECK((kh - outer).cwiseAbs().maxCoeff() <= 1e-6);
}
