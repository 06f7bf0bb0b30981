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

#ifndef GPDENS_CORE_HARNESS_HPP_
#define GPDENS_CORE_HARNESS_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "core/baselines.hpp"
#include "core/density.hpp"
#include "core/train.hpp"
#include "core/types.hpp"

namespace gpdens {

struct Dataset {
  std::string name;
  Matrix features;  // D x N
  std::string source_format;

  int data_dim() const { return static_cast<int>(features.rows()); }
  int count() const { return static_cast<int>(features.cols()); }
};

// Sparse index:value text format with 1-based indices and an optional
// leading label token per line.  Labels are discarded.
Dataset parse_svmlight(const std::string& path);
Dataset parse_svmlight_text(const std::string& text, const std::string& name);
void write_svmlight(const Matrix& features, const std::string& path);

enum class PreprocMode { kRaw, kScaled, kWhitened };

PreprocMode preproc_mode_from_tag(const std::string& tag);
std::string preproc_tag(PreprocMode mode);

// Affine map z -> transform * (z - shift) fitted on training data only.
// log_abs_det = ln|det transform| converts transformed-space log densities
// back to the raw space by addition.
struct Preprocessing {
  PreprocMode mode = PreprocMode::kRaw;
  Vector shift;
  Matrix transform;
  double log_abs_det = 0.0;
  std::vector<int> flagged_dims;  // zero-variance dims kept at scale 1

  Matrix apply(const Matrix& z) const;
  Vector apply(const Vector& z) const;
};

Preprocessing fit_preprocessing(const Matrix& train, PreprocMode mode);

struct Split {
  std::vector<int> train;
  std::vector<int> test;
};

// n_splits independent uniform draws of n_tr training indices without
// replacement; the complement is the test set.  Requires n_tr <= n_total/2.
std::vector<Split> make_splits(int n_total, int n_tr, int n_splits,
                               std::uint64_t seed);

// One fitted density model of any family, together with the preprocessing
// it was fitted under.  GPLVM fits keep both the optimized state and the
// projected mixture used for evaluation.
struct FittedModel {
  std::string method;
  Preprocessing preproc;

  std::optional<ModelState> gplvm;
  std::optional<ProjectedMixture> mixture;
  std::optional<GaussianMixtureModel> gm;
  std::optional<KdeModel> kde;
  std::optional<ManifoldParzenModel> mp;

  int data_dim() const;
  // Log density of a point already living in the transformed space.
  double log_density_transformed(const Vector& z) const;
  // Log density of a raw-space point (transform + log_abs_det offset).
  double log_density_raw(const Vector& z) const;
};

struct FitSpec {
  std::string method = "lpo-det";  // lz | loo | lpo-det | lpo-rd | gm | kde | mp
  PreprocMode preproc = PreprocMode::kRaw;
  int latent_dim = 2;
  int leave_out = 5;
  int total_steps = 600;
  std::uint64_t seed = 0;
  int gm_clusters = 1;
  int mp_rank = 1;
  int mp_neighbors = 1;
};

FittedModel fit_model(const Matrix& train_raw, const FitSpec& spec);

struct EvalResult {
  double transformed = 0.0;  // mean log density in the preprocessed space
  double raw = 0.0;          // transformed + log_abs_det
  int count = 0;
};

// Arithmetic mean of per-point log densities over the columns of test_raw.
EvalResult evaluate_model(const FittedModel& model, const Matrix& test_raw);

// Versioned JSON round-trip for fitted models.
std::string model_to_json(const FittedModel& model);
FittedModel model_from_json(const std::string& text);
void save_model(const FittedModel& model, const std::string& path);
FittedModel load_model(const std::string& path);

// One grid cell evaluated on one split.
struct RunRecord {
  std::string dataset;
  std::string method;
  std::string params;
  int n_tr = 0;
  int split = 0;
  std::string preproc;
  std::uint64_t seed = 0;
  double log_density = 0.0;            // transformed space
  double log_density_raw_space = 0.0;  // + log_abs_det
  int test_count = 0;
  bool failed = false;
  std::string error;
};

// Aggregation of one grid cell over its splits.
struct ExperimentResult {
  std::string dataset;
  std::string method;
  std::string params;
  std::string preproc;
  int n_tr = 0;
  std::uint64_t split_seed = 0;
  std::vector<std::uint64_t> run_seeds;
  std::vector<double> values;      // transformed space, one per split
  std::vector<double> values_raw;  // raw space, one per split
  double mean = 0.0;               // transformed, over successful splits
  double mean_raw = 0.0;
  double stderr_raw = 0.0;
  double pooled_raw = 0.0;  // test-size-weighted mean over all points
  int failures = 0;
};

struct GridConfig {
  std::string dataset_name;
  Matrix features;
  std::vector<std::string> methods = {"lz",  "lpo-det", "lpo-rd",
                                      "gm",  "kde",     "mp"};
  std::vector<int> latent_dims = {1, 2, 3};
  std::vector<int> leave_outs = {1, 2, 5, 10, 15};
  std::vector<PreprocMode> preprocs = {PreprocMode::kRaw, PreprocMode::kScaled,
                                       PreprocMode::kWhitened};
  std::vector<int> n_tr_list;
  int n_splits = 10;
  int total_steps = 600;
  std::uint64_t seed = 0;
  int workers = 1;
  std::string out_dir;  // empty disables persistence
};

struct MethodBest {
  std::string method;
  std::string params;
  std::string preproc;
  int n_tr = 0;
  double mean_raw = 0.0;
  double stderr_raw = 0.0;
};

struct GridResult {
  std::vector<RunRecord> records;
  std::vector<ExperimentResult> results;
  std::vector<MethodBest> best;  // per method family, max raw-space mean
};

GridResult run_grid(const GridConfig& config);

std::string grid_summary_csv(const GridResult& result);

}  // namespace gpdens

#endif  // GPDENS_CORE_HARNESS_HPP_
