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

#ifndef GPDENS_CORE_TYPES_HPP_
#define GPDENS_CORE_TYPES_HPP_

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace gpdens {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Raised when a linear-algebra step cannot be completed (factorization
// failure after jitter escalation, non-finite intermediates, ...).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// Raised by the dataset reader; carries the 1-based line number.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, int line)
      : std::runtime_error(what + " (line " + std::to_string(line) + ")"),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

// Kernel hyperparameters of the latent-to-data map, plus the variance of the
// Gaussian placed around each latent point.  latent_var identically zero
// selects the deterministic (Dirac) latent model.
struct Hyperparams {
  Vector lengthscales_sq;  // diagonal of W, one entry per latent dimension
  double signal_var = 1.0;
  double noise_var = 0.1;
  Vector latent_var;  // diagonal of V_x, shared across latent points

  int latent_dim() const { return static_cast<int>(lengthscales_sq.size()); }

  bool stochastic() const {
    return latent_var.size() > 0 && (latent_var.array() > 0.0).all();
  }

  void validate() const {
    if (lengthscales_sq.size() == 0) {
      throw std::invalid_argument("hyperparams: empty lengthscales");
    }
    if (!(lengthscales_sq.array() > 0.0).all() ||
        !lengthscales_sq.allFinite()) {
      throw std::invalid_argument("hyperparams: lengthscales_sq must be positive");
    }
    if (!(signal_var > 0.0) || !std::isfinite(signal_var)) {
      throw std::invalid_argument("hyperparams: signal_var must be positive");
    }
    if (!(noise_var > 0.0) || !std::isfinite(noise_var)) {
      throw std::invalid_argument("hyperparams: noise_var must be positive");
    }
    if (latent_var.size() > 0) {
      if (latent_var.size() != lengthscales_sq.size()) {
        throw std::invalid_argument("hyperparams: latent_var dimension mismatch");
      }
      if (!(latent_var.array() >= 0.0).all() || !latent_var.allFinite()) {
        throw std::invalid_argument("hyperparams: latent_var must be >= 0");
      }
    }
  }
};

}  // namespace gpdens

#endif  // GPDENS_CORE_TYPES_HPP_
