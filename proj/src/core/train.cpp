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

#include "core/train.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>

namespace gpdens {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double finite_or_inf(double v) { return std::isfinite(v) ? v : kInf; }

struct Probe {
  double alpha = 0.0;
  double f = kInf;
  double dphi = 0.0;
  Vector grad;
};

class LineFunction {
 public:
  LineFunction(const std::function<double(const Vector&, Vector*)>& fg,
               const Vector& x0, const Vector& dir)
      : fg_(fg), x0_(x0), dir_(dir), grad_(x0.size()) {}

  Probe eval(double alpha) {
    Probe p;
    p.alpha = alpha;
    Vector x = x0_ + alpha * dir_;
    p.f = finite_or_inf(fg_(x, &grad_));
    if (std::isfinite(p.f)) {
      p.dphi = grad_.dot(dir_);
      p.grad = grad_;
    } else {
      p.dphi = kInf;
    }
    return p;
  }

 private:
  const std::function<double(const Vector&, Vector*)>& fg_;
  const Vector& x0_;
  const Vector& dir_;
  Vector grad_;
};

// Minimum of the quadratic matching (lo.f, lo.dphi) and hi.f; falls back to
// bisection when the data is unusable.
double zoom_trial(const Probe& lo, const Probe& hi) {
  const double span = hi.alpha - lo.alpha;
  double trial = lo.alpha + 0.5 * span;
  if (std::isfinite(hi.f)) {
    const double denom = hi.f - lo.f - lo.dphi * span;
    if (denom > 0.0) trial = lo.alpha - 0.5 * lo.dphi * span * span / denom;
  }
  const double a = std::min(lo.alpha, hi.alpha);
  const double b = std::max(lo.alpha, hi.alpha);
  const double margin = 0.05 * (b - a);
  if (!(trial >= a + margin) || !(trial <= b - margin)) {
    trial = lo.alpha + 0.5 * span;
  }
  return trial;
}

bool zoom(LineFunction& phi, const Probe& start, double c1, double c2,
          Probe lo, Probe hi, Probe* out) {
  for (int iter = 0; iter < 40; ++iter) {
    if (std::abs(hi.alpha - lo.alpha) <
        1e-16 * std::max(1.0, std::abs(lo.alpha))) {
      break;
    }
    Probe p = phi.eval(zoom_trial(lo, hi));
    if (!std::isfinite(p.f) || p.f > start.f + c1 * p.alpha * start.dphi ||
        p.f >= lo.f) {
      hi = p;
      continue;
    }
    if (std::abs(p.dphi) <= -c2 * start.dphi) {
      *out = p;
      return true;
    }
    if (p.dphi * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
    lo = p;
  }
  // The sufficient-decrease point is still a usable (if imperfect) step.
  if (lo.alpha > 0.0 && std::isfinite(lo.f) && lo.f < start.f && lo.grad.size()) {
    *out = lo;
    return true;
  }
  return false;
}

// Strong Wolfe line search (bracket + zoom).
bool line_search(LineFunction& phi, const Probe& start, double init_alpha,
                 double c1, double c2, Probe* out) {
  Probe prev = start;
  double alpha = init_alpha;
  for (int iter = 0; iter < 40; ++iter) {
    Probe p = phi.eval(alpha);
    if (!std::isfinite(p.f) || p.f > start.f + c1 * alpha * start.dphi ||
        (iter > 0 && p.f >= prev.f)) {
      return zoom(phi, start, c1, c2, prev, p, out);
    }
    if (std::abs(p.dphi) <= -c2 * start.dphi) {
      *out = p;
      return true;
    }
    if (p.dphi >= 0.0) {
      return zoom(phi, start, c1, c2, p, prev, out);
    }
    prev = p;
    alpha = std::min(2.5 * alpha, 1e10);
  }
  return false;
}

}  // namespace

Vector cg_minimize(
    const std::function<double(const Vector&, Vector*)>& objective,
    const Vector& x0, const CgOptions& options, CgTrace* trace) {
  using clock = std::chrono::steady_clock;
  const int n = static_cast<int>(x0.size());
  Vector x = x0;
  Vector g(n);
  double f = objective(x, &g);
  if (!std::isfinite(f) || !g.allFinite()) {
    throw std::invalid_argument("cg_minimize: objective not finite at start");
  }
  if (trace) {
    trace->values.clear();
    trace->step_seconds.clear();
    trace->line_search_failed = false;
    trace->values.push_back(f);
  }

  Vector dir = -g;
  int since_restart = 0;
  double prev_decrease = -1.0;
  for (int step = 0; step < options.max_steps; ++step) {
    const auto t0 = clock::now();
    double dphi0 = g.dot(dir);
    if (dphi0 >= 0.0) {
      dir = -g;
      dphi0 = -g.squaredNorm();
      since_restart = 0;
    }
    if (dphi0 >= -std::numeric_limits<double>::denorm_min()) break;

    double init_alpha = 1.0;
    if (prev_decrease > 0.0) {
      init_alpha = std::min(1e6, std::max(1e-12, 2.02 * prev_decrease / -dphi0));
    }
    Probe start;
    start.alpha = 0.0;
    start.f = f;
    start.dphi = dphi0;
    LineFunction phi(objective, x, dir);
    Probe hit;
    if (!line_search(phi, start, init_alpha, options.c1, options.c2, &hit)) {
      if (trace) trace->line_search_failed = true;
      break;
    }

    x += hit.alpha * dir;
    prev_decrease = f - hit.f;
    const double rel = prev_decrease / std::max(1.0, std::abs(f));
    const Vector g_new = hit.grad;

    if (trace) {
      trace->values.push_back(hit.f);
      trace->step_seconds.push_back(
          std::chrono::duration<double>(clock::now() - t0).count());
    }

    double beta = 0.0;
    ++since_restart;
    if (since_restart < n) {
      beta = std::max(0.0, g_new.dot(g_new - g) / g.squaredNorm());
    } else {
      since_restart = 0;
    }
    dir = -g_new + beta * dir;
    f = hit.f;
    g = g_new;
    if (rel < options.tol) break;
  }
  return x;
}

Matrix init_latents(const Matrix& z, int d, std::uint64_t seed) {
  const int dim = static_cast<int>(z.rows());
  const int n = static_cast<int>(z.cols());
  if (n < 2) throw std::invalid_argument("init_latents: need at least 2 points");
  if (d < 1 || d > std::min(dim, n - 1)) {
    throw std::invalid_argument("init_latents: latent dim out of range");
  }
  Matrix centered = z.colwise() - z.rowwise().mean().eval();
  Eigen::BDCSVD<Matrix> svd(centered, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  const double smax = sv.size() > 0 ? sv[0] : 0.0;

  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double root_n = std::sqrt(static_cast<double>(n));

  Matrix x(d, n);
  for (int p = 0; p < d; ++p) {
    if (p < sv.size() && sv[p] > 1e-8 * smax) {
      int idx = 0;
      svd.matrixU().col(p).cwiseAbs().maxCoeff(&idx);
      const double sign = svd.matrixU()(idx, p) < 0.0 ? -1.0 : 1.0;
      x.row(p) = sign * root_n * svd.matrixV().col(p).transpose();
    } else {
      // Rank-deficient direction: seeded standardized filler coordinates.
      for (int i = 0; i < n; ++i) x(p, i) = normal(rng);
      x.row(p).array() -= x.row(p).mean();
      const double sd = std::sqrt(x.row(p).squaredNorm() / n);
      if (sd > 0.0) x.row(p) /= sd;
    }
  }
  return x;
}

Hyperparams init_hyperparams(const Matrix& z, const Matrix& x,
                             bool stochastic) {
  const int n = static_cast<int>(x.cols());
  const int d = static_cast<int>(x.rows());
  if (z.cols() != x.cols()) {
    throw std::invalid_argument("init_hyperparams: column count mismatch");
  }
  if (n < 2) {
    throw std::invalid_argument("init_hyperparams: need at least 2 points");
  }

  Hyperparams hyp;
  hyp.lengthscales_sq.resize(d);
  std::vector<double> dist;
  dist.reserve(static_cast<size_t>(n) * (n - 1) / 2);
  for (int a = 0; a < d; ++a) {
    dist.clear();
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        dist.push_back(std::abs(x(a, i) - x(a, j)));
      }
    }
    std::sort(dist.begin(), dist.end());
    const size_t m = dist.size();
    const double median =
        (m % 2 == 1) ? dist[m / 2] : 0.5 * (dist[m / 2 - 1] + dist[m / 2]);
    if (!(median > 0.0)) {
      throw std::invalid_argument("init_hyperparams: zero median latent distance");
    }
    hyp.lengthscales_sq[a] = median * median;
  }

  double var = 0.0;
  for (int r = 0; r < z.rows(); ++r) {
    const double mu = z.row(r).mean();
    var += (z.row(r).array() - mu).square().sum() / n;
  }
  var /= z.rows();
  if (!(var > 0.0)) {
    throw std::invalid_argument("init_hyperparams: zero data variance");
  }
  hyp.signal_var = var;
  hyp.noise_var = 0.01 * var;
  if (stochastic) hyp.latent_var = Vector::Constant(d, 0.1);
  hyp.validate();
  return hyp;
}

void TrainConfig::validate() const {
  if (latent_dim < 1) throw std::invalid_argument("train: latent_dim < 1");
  if (total_steps < 0) throw std::invalid_argument("train: negative step budget");
  if (block_period < 1) throw std::invalid_argument("train: block_period < 1");
  if (objective == ObjectiveKind::kLpo && leave_out < 1) {
    throw std::invalid_argument("train: LPO needs leave_out >= 1");
  }
  if (!(convergence_tol >= 0.0)) {
    throw std::invalid_argument("train: bad convergence_tol");
  }
}

namespace {

Vector pack_hyp(const Hyperparams& hyp) {
  const int d = hyp.latent_dim();
  const bool stoch = hyp.stochastic();
  Vector p(d + 2 + (stoch ? d : 0));
  p.head(d) = hyp.lengthscales_sq.array().log();
  p[d] = std::log(hyp.signal_var);
  p[d + 1] = std::log(hyp.noise_var);
  if (stoch) p.tail(d) = hyp.latent_var.array().log();
  return p;
}

Hyperparams unpack_hyp(const Vector& p, int d, bool stoch) {
  Hyperparams hyp;
  hyp.lengthscales_sq = p.head(d).array().exp();
  hyp.signal_var = std::exp(p[d]);
  hyp.noise_var = std::exp(p[d + 1]);
  if (stoch) hyp.latent_var = p.tail(d).array().exp();
  return hyp;
}

}  // namespace

TrainTrace train(const Matrix& z, const TrainConfig& config) {
  config.validate();
  const int n = static_cast<int>(z.cols());
  if (config.objective != ObjectiveKind::kLz && n < 2) {
    throw std::invalid_argument("train: leave-out objectives need N >= 2");
  }
  if (config.objective == ObjectiveKind::kLpo && config.leave_out > n - 1) {
    throw std::invalid_argument("train: leave_out exceeds N-1");
  }

  ModelState model;
  model.latents = init_latents(z, config.latent_dim, config.seed);
  model.hyp = init_hyperparams(z, model.latents, config.stochastic);
  model.targets = z;

  TrainTrace trace;
  const int d = config.latent_dim;

  std::vector<std::vector<int>> subsets;
  auto evaluate = [&](const ModelState& m) -> ObjectiveValue {
    switch (config.objective) {
      case ObjectiveKind::kLz:
        return objective_lz(m);
      case ObjectiveKind::kLoo:
        return objective_loo(m);
      case ObjectiveKind::kLpo:
      default:
        return objective_lpo_fixed(m, subsets);
    }
  };

  int remaining = config.total_steps;
  bool latent_block = true;
  bool first_block = true;
  int stalled_blocks = 0;

  while (remaining > 0) {
    if (config.objective == ObjectiveKind::kLpo) {
      subsets = select_lpo_subsets(model, config.leave_out);
    }

    CgOptions opts;
    opts.max_steps = std::min(config.block_period, remaining);
    opts.tol = config.convergence_tol;

    auto wrapped = [&](const ModelState& probe, Vector* grad_out,
                       bool latent) -> double {
      try {
        ObjectiveValue ov = evaluate(probe);
        if (ov.jitter_used > 0.0) ++trace.jitter_events;
        if (grad_out) {
          if (latent) {
            *grad_out = Eigen::Map<const Vector>(ov.grad_latents.data(),
                                                 ov.grad_latents.size());
          } else {
            *grad_out = ov.grad_hyp;
          }
        }
        return ov.value;
      } catch (const NumericalError&) {
        if (grad_out) grad_out->setZero();
        return kInf;
      } catch (const std::invalid_argument&) {
        if (grad_out) grad_out->setZero();
        return kInf;
      }
    };

    // A block can end exactly on a numerical guard boundary (predictive
    // variance or downdate pivot underflow), where the next block's start,
    // after the hyperparameter pack/unpack round trip, lands on +inf.  Stop
    // cleanly with the last accepted state instead of aborting mid-run.
    ModelState start = model;
    if (!latent_block) {
      start.hyp = unpack_hyp(pack_hyp(model.hyp), d, config.stochastic);
    }
    if (!std::isfinite(wrapped(start, nullptr, latent_block))) {
      if (first_block) {
        throw NumericalError("train: objective not finite at the initial state");
      }
      break;
    }

    CgTrace ct;
    if (latent_block) {
      Vector x0 =
          Eigen::Map<const Vector>(model.latents.data(), model.latents.size());
      auto fg = [&](const Vector& p, Vector* g) -> double {
        if (g) g->resize(p.size());
        ModelState probe = model;
        probe.latents = Eigen::Map<const Matrix>(p.data(), d, n);
        return wrapped(probe, g, true);
      };
      Vector xf = cg_minimize(fg, x0, opts, &ct);
      model.latents = Eigen::Map<const Matrix>(xf.data(), d, n);
    } else {
      Vector t0 = pack_hyp(model.hyp);
      auto fg = [&](const Vector& p, Vector* g) -> double {
        if (g) g->resize(p.size());
        ModelState probe = model;
        probe.hyp = unpack_hyp(p, d, config.stochastic);
        return wrapped(probe, g, false);
      };
      Vector tf = cg_minimize(fg, t0, opts, &ct);
      model.hyp = unpack_hyp(tf, d, config.stochastic);
    }

    const int used = static_cast<int>(ct.values.size()) - 1;
    for (size_t i = first_block ? 0 : 1; i < ct.values.size(); ++i) {
      trace.values.push_back(ct.values[i]);
    }
    for (double s : ct.step_seconds) trace.step_seconds.push_back(s);
    if (ct.line_search_failed) trace.line_search_failed = true;

    remaining -= std::max(used, 0);
    stalled_blocks = (used <= 0) ? stalled_blocks + 1 : 0;
    if (stalled_blocks >= 2) break;
    latent_block = !latent_block;
    first_block = false;
  }

  trace.final_state = std::move(model);
  return trace;
}

}  // namespace gpdens
